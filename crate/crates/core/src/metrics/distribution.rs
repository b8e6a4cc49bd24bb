use std::collections::BTreeMap;

use crate::data::{RatingKind, RatingRecord};

/// Fixed-width histogram over `[lo, hi]`; the top edge belongs to the last
/// bin and out-of-range values are clamped into the end bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let n = ((hi - lo) / width).round() as usize;
        Self {
            lo,
            width,
            counts: vec![0; n.max(1)],
        }
    }

    pub fn add(&mut self, v: f64) {
        let last = self.counts.len() - 1;
        let i = ((v - self.lo) / self.width).floor();
        let i = if i < 0.0 { 0 } else { (i as usize).min(last) };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(lower edge, upper edge, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| {
            let lo = self.lo + i as f64 * self.width;
            (lo, lo + self.width, c)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (lo, hi, c) in self.bins() {
            out.push_str(&format!("{lo:.2},{hi:.2},{c}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceStats {
    pub utterance_id: String,
    pub mean: f64,
    /// Population standard deviation (divides by the rating count).
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingDistribution {
    pub utterances: Vec<UtteranceStats>,
    /// 0.25-wide bins over `[1, 5]`.
    pub mean_hist: Histogram,
    /// 0.25-wide bins over `[0, 2]`.
    pub std_hist: Histogram,
}

/// Per-utterance mean and spread of the MOS ratings, with histograms of
/// both.
pub fn rating_distribution(records: &[RatingRecord]) -> RatingDistribution {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RatingKind::Mos) {
        groups.entry(&r.utterance_id).or_default().push(r.score);
    }
    let mut mean_hist = Histogram::new(1.0, 5.0, 0.25);
    let mut std_hist = Histogram::new(0.0, 2.0, 0.25);
    let utterances = groups
        .into_iter()
        .map(|(id, scores)| {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
            mean_hist.add(mean);
            std_hist.add(std);
            UtteranceStats {
                utterance_id: id.to_string(),
                mean,
                std,
                n: scores.len(),
            }
        })
        .collect();
    RatingDistribution {
        utterances,
        mean_hist,
        std_hist,
    }
}

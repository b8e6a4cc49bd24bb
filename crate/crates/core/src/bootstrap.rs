//! Inherent predictability of listening-test scores: how well the mean
//! opinion of a random half of the listeners agrees with that of all of
//! them, at utterance and at system level.

use std::collections::HashMap;
use std::fmt::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{RatingKind, RatingRecord};
use crate::metrics::{mse, pearson_lcc, spearman_srcc, MetricError};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BootstrapError {
    #[error("panel has no usable ratings")]
    EmptyPanel,
    #[error("subset size {subset} must be between 1 and the {listeners} listeners")]
    SubsetSize { subset: usize, listeners: usize },
    #[error("replication {replication}: only {survivors} utterances rated by the subset")]
    TooFewUtterances { replication: usize, survivors: usize },
    #[error("system level needs at least 2 systems, panel has {0}")]
    TooFewSystems(usize),
    #[error("replication {replication}: {source}")]
    Metric { replication: usize, source: MetricError },
    #[error("invalid panel parameters: {0}")]
    InvalidParameters(String),
}

/// Ratings indexed by listener, utterance and system.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerPanel {
    pub listeners: Vec<String>,
    pub utterances: Vec<String>,
    pub systems: Vec<String>,
    /// System index of each utterance.
    pub utterance_system: Vec<usize>,
    /// `(listener, utterance, score)` index triples.
    pub ratings: Vec<(usize, usize, f64)>,
}

fn intern(map: &mut HashMap<String, usize>, names: &mut Vec<String>, key: &str) -> usize {
    if let Some(&i) = map.get(key) {
        return i;
    }
    names.push(key.to_string());
    map.insert(key.to_string(), names.len() - 1);
    names.len() - 1
}

impl ListenerPanel {
    /// Builds a panel from the MOS ratings of converted (non-natural)
    /// speech; natural-speech and similarity ratings are left out.
    pub fn from_records(records: &[RatingRecord]) -> Result<Self, BootstrapError> {
        let mut maps = (HashMap::new(), HashMap::new(), HashMap::new());
        let mut panel = ListenerPanel {
            listeners: Vec::new(),
            utterances: Vec::new(),
            systems: Vec::new(),
            utterance_system: Vec::new(),
            ratings: Vec::new(),
        };
        for r in records.iter().filter(|r| r.kind == RatingKind::Mos && !r.is_natural) {
            let l = intern(&mut maps.0, &mut panel.listeners, &r.listener_id);
            let n_utts = panel.utterances.len();
            let u = intern(&mut maps.1, &mut panel.utterances, &r.utterance_id);
            if u == n_utts {
                let s = intern(&mut maps.2, &mut panel.systems, &r.system_id);
                panel.utterance_system.push(s);
            }
            panel.ratings.push((l, u, r.score));
        }
        if panel.ratings.is_empty() {
            return Err(BootstrapError::EmptyPanel);
        }
        Ok(panel)
    }

    pub fn n_listeners(&self) -> usize {
        self.listeners.len()
    }

    /// Back to rating records (all MOS, none natural).
    pub fn to_records(&self) -> Vec<RatingRecord> {
        self.ratings
            .iter()
            .map(|&(l, u, score)| RatingRecord {
                utterance_id: self.utterances[u].clone(),
                system_id: self.systems[self.utterance_system[u]].clone(),
                listener_id: self.listeners[l].clone(),
                kind: RatingKind::Mos,
                score,
                is_natural: false,
            })
            .collect()
    }

    /// Mean rating of every utterance over the whole panel.
    pub fn utterance_means(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.utterances.len()];
        let mut count = vec![0usize; self.utterances.len()];
        for &(_, u, s) in &self.ratings {
            sum[u] += s;
            count[u] += 1;
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
    }
}

/// A panel with known structure. Systems get true means uniform in
/// `[1.5, 4.5]`; utterance `i` belongs to system `i % n_systems` and its true
/// score is the system mean plus `N(0, 0.5)`, clamped to `[1, 5]`. Each
/// utterance is rated by `ratings_per_utterance` distinct listeners, each
/// rating being the true score plus `N(0, noise_sigma)`, clamped to `[1, 5]`.
pub fn synth_panel(
    n_utterances: usize,
    n_systems: usize,
    n_listeners: usize,
    ratings_per_utterance: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<ListenerPanel, BootstrapError> {
    if n_utterances == 0 || n_systems == 0 || ratings_per_utterance == 0 {
        return Err(BootstrapError::InvalidParameters("counts must be positive".into()));
    }
    if ratings_per_utterance > n_listeners {
        return Err(BootstrapError::InvalidParameters(format!(
            "{ratings_per_utterance} ratings per utterance need at least as many listeners, got {n_listeners}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(BootstrapError::InvalidParameters(format!("noise sigma {noise_sigma}")));
    }
    let mut rng = stream(seed, "panel-systems", 0);
    let system_means: Vec<f64> = (0..n_systems).map(|_| rng.random_range(1.5..4.5)).collect();
    let spread = Normal::new(0.0, 0.5).expect("finite sigma");
    let noise = Normal::new(0.0, noise_sigma).expect("finite sigma");
    let mut ratings = Vec::with_capacity(n_utterances * ratings_per_utterance);
    for u in 0..n_utterances {
        let mut rng = stream(seed, "panel-utterance", u as u64);
        let truth = (system_means[u % n_systems] + spread.sample(&mut rng)).clamp(1.0, 5.0);
        for l in sample(&mut rng, n_listeners, ratings_per_utterance).iter() {
            let score = (truth + noise.sample(&mut rng)).clamp(1.0, 5.0);
            ratings.push((l, u, score));
        }
    }
    Ok(ListenerPanel {
        listeners: (0..n_listeners).map(|l| format!("L{l:03}")).collect(),
        utterances: (0..n_utterances).map(|u| format!("utt{u:05}")).collect(),
        systems: (0..n_systems).map(|s| format!("S{s:02}")).collect(),
        utterance_system: (0..n_utterances).map(|u| u % n_systems).collect(),
        ratings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelMetrics {
    pub lcc: f64,
    pub srcc: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub utterance: LevelMetrics,
    pub system: LevelMetrics,
    /// Utterances with at least one rating from the sampled listeners.
    pub n_utterances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub subset_size: usize,
    pub n_listeners: usize,
    pub utterance: LevelMetrics,
    pub system: LevelMetrics,
    pub raw: Vec<Replication>,
}

fn level_metrics(sub: &[f64], all: &[f64], replication: usize) -> Result<LevelMetrics, BootstrapError> {
    let wrap = |source| BootstrapError::Metric { replication, source };
    Ok(LevelMetrics {
        lcc: pearson_lcc(sub, all).map_err(wrap)?,
        srcc: spearman_srcc(sub, all).map_err(wrap)?,
        mse: mse(sub, all).map_err(wrap)?,
    })
}

fn one_replication(
    panel: &ListenerPanel,
    mos_all: &[f64],
    subset_size: usize,
    seed: u64,
    replication: usize,
) -> Result<Replication, BootstrapError> {
    let mut rng = stream(seed, "bootstrap", replication as u64);
    let mut chosen = vec![false; panel.n_listeners()];
    for l in sample(&mut rng, panel.n_listeners(), subset_size).iter() {
        chosen[l] = true;
    }
    let n_utt = panel.utterances.len();
    let mut sum = vec![0.0; n_utt];
    let mut count = vec![0usize; n_utt];
    for &(_, u, s) in panel.ratings.iter().filter(|r| chosen[r.0]) {
        sum[u] += s;
        count[u] += 1;
    }
    let survivors: Vec<usize> = (0..n_utt).filter(|&u| count[u] > 0).collect();
    if survivors.len() < 2 {
        return Err(BootstrapError::TooFewUtterances {
            replication,
            survivors: survivors.len(),
        });
    }
    let sub: Vec<f64> = survivors.iter().map(|&u| sum[u] / count[u] as f64).collect();
    let all: Vec<f64> = survivors.iter().map(|&u| mos_all[u]).collect();

    let n_sys = panel.systems.len();
    let mut sys = vec![(0.0, 0.0, 0usize); n_sys];
    for (k, &u) in survivors.iter().enumerate() {
        let g = &mut sys[panel.utterance_system[u]];
        g.0 += sub[k];
        g.1 += all[k];
        g.2 += 1;
    }
    let covered: Vec<&(f64, f64, usize)> = sys.iter().filter(|g| g.2 > 0).collect();
    let sys_sub: Vec<f64> = covered.iter().map(|g| g.0 / g.2 as f64).collect();
    let sys_all: Vec<f64> = covered.iter().map(|g| g.1 / g.2 as f64).collect();

    Ok(Replication {
        utterance: level_metrics(&sub, &all, replication)?,
        system: level_metrics(&sys_sub, &sys_all, replication)?,
        n_utterances: survivors.len(),
    })
}

fn mean_of(raw: &[Replication], pick: impl Fn(&Replication) -> LevelMetrics) -> LevelMetrics {
    let n = raw.len() as f64;
    let (mut lcc, mut srcc, mut err) = (0.0, 0.0, 0.0);
    for r in raw {
        let m = pick(r);
        lcc += m.lcc;
        srcc += m.srcc;
        err += m.mse;
    }
    LevelMetrics {
        lcc: lcc / n,
        srcc: srcc / n,
        mse: err / n,
    }
}

/// Repeatedly samples `subset_size` listeners without replacement and
/// compares the subset's mean scores (MOS_sub) with the full panel's
/// (MOS_all). Utterances the subset never rated are dropped from that
/// replication; system means are taken over the surviving utterances on
/// both sides. Replications run in parallel, each on its own random stream,
/// so the result does not depend on the thread count.
pub fn inherent_predictability(
    panel: &ListenerPanel,
    replications: usize,
    subset_size: usize,
    seed: u64,
) -> Result<BootstrapReport, BootstrapError> {
    if panel.ratings.is_empty() {
        return Err(BootstrapError::EmptyPanel);
    }
    if subset_size == 0 || subset_size > panel.n_listeners() {
        return Err(BootstrapError::SubsetSize {
            subset: subset_size,
            listeners: panel.n_listeners(),
        });
    }
    if panel.systems.len() < 2 {
        return Err(BootstrapError::TooFewSystems(panel.systems.len()));
    }
    if replications == 0 {
        return Err(BootstrapError::InvalidParameters(
            "replications must be positive".into(),
        ));
    }
    let mos_all = panel.utterance_means();
    let raw = (0..replications)
        .into_par_iter()
        .map(|r| one_replication(panel, &mos_all, subset_size, seed, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BootstrapReport {
        subset_size,
        n_listeners: panel.n_listeners(),
        utterance: mean_of(&raw, |r| r.utterance),
        system: mean_of(&raw, |r| r.system),
        raw,
    })
}

impl BootstrapReport {
    pub fn replications(&self) -> usize {
        self.raw.len()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{} replications, {} of {} listeners per subset\n\n{:<10}  {:>7}  {:>7}  {:>7}\n",
            self.replications(),
            self.subset_size,
            self.n_listeners,
            "level",
            "LCC",
            "SRCC",
            "MSE"
        );
        for (name, m) in [("utterance", self.utterance), ("system", self.system)] {
            let _ = writeln!(out, "{name:<10}  {:>7.3}  {:>7.3}  {:>7.3}", m.lcc, m.srcc, m.mse);
        }
        out
    }

    /// Summary CSV: `level,lcc,srcc,mse`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("level,lcc,srcc,mse\n");
        for (name, m) in [("utterance", self.utterance), ("system", self.system)] {
            let _ = writeln!(out, "{name},{:.12},{:.12},{:.12}", m.lcc, m.srcc, m.mse);
        }
        out
    }

    /// One row per replication.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from("replication,n_utterances,utt_lcc,utt_srcc,utt_mse,sys_lcc,sys_srcc,sys_mse\n");
        for (i, r) in self.raw.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12}",
                r.n_utterances,
                r.utterance.lcc,
                r.utterance.srcc,
                r.utterance.mse,
                r.system.lcc,
                r.system.srcc,
                r.system.mse
            );
        }
        out
    }
}

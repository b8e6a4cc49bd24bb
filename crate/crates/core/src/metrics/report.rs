use std::collections::BTreeMap;
use std::fmt;

use super::{mse, pearson_lcc, spearman_srcc, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    Utterance,
    System,
}

impl fmt::Display for EvalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalLevel::Utterance => "utterance",
            EvalLevel::System => "system",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub level: EvalLevel,
    pub lcc: f64,
    pub srcc: f64,
    pub mse: f64,
    pub n: usize,
    pub accuracy: Option<f64>,
}

impl EvalReport {
    pub fn compute(level: EvalLevel, predictions: &[f64], truth: &[f64]) -> Result<Self, MetricError> {
        Ok(Self {
            level,
            lcc: pearson_lcc(predictions, truth)?,
            srcc: spearman_srcc(predictions, truth)?,
            mse: mse(predictions, truth)?,
            n: predictions.len(),
            accuracy: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMean {
    pub system_id: String,
    pub prediction: f64,
    pub ground_truth: f64,
    pub n: usize,
}

/// Per-system means of `(system_id, prediction, ground_truth)` triples,
/// ordered by system id.
pub fn system_aggregate<S: AsRef<str>>(per_utterance: &[(S, f64, f64)]) -> Vec<SystemMean> {
    let mut groups: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for (sys, p, t) in per_utterance {
        let g = groups.entry(sys.as_ref()).or_default();
        g.0 += p;
        g.1 += t;
        g.2 += 1;
    }
    groups
        .into_iter()
        .map(|(sys, (p, t, n))| SystemMean {
            system_id: sys.to_string(),
            prediction: p / n as f64,
            ground_truth: t / n as f64,
            n,
        })
        .collect()
}

/// Utterance- and system-level reports for `(system_id, prediction,
/// ground_truth)` triples.
pub fn evaluate<S: AsRef<str>>(per_utterance: &[(S, f64, f64)]) -> Result<[EvalReport; 2], MetricError> {
    let preds: Vec<f64> = per_utterance.iter().map(|t| t.1).collect();
    let truth: Vec<f64> = per_utterance.iter().map(|t| t.2).collect();
    let systems = system_aggregate(per_utterance);
    let sp: Vec<f64> = systems.iter().map(|s| s.prediction).collect();
    let st: Vec<f64> = systems.iter().map(|s| s.ground_truth).collect();
    Ok([
        EvalReport::compute(EvalLevel::Utterance, &preds, &truth)?,
        EvalReport::compute(EvalLevel::System, &sp, &st)?,
    ])
}

/// Aligned plain-text table, one row per report.
pub fn format_table(reports: &[(String, EvalReport)]) -> String {
    let name_w = reports.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<name_w$}  {:<9}  {:>6}  {:>7}  {:>7}  {:>7}  {:>7}\n",
        "name", "level", "n", "LCC", "SRCC", "MSE", "ACC"
    );
    out.push_str(&format!("{}\n", "-".repeat(name_w + 58)));
    for (name, r) in reports {
        let acc = r.accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.3}"));
        out.push_str(&format!(
            "{:<name_w$}  {:<9}  {:>6}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7}\n",
            name,
            r.level.to_string(),
            r.n,
            r.lcc,
            r.srcc,
            r.mse,
            acc
        ));
    }
    out
}

/// CSV with header `name,level,n,lcc,srcc,mse,accuracy`.
pub fn reports_csv(reports: &[(String, EvalReport)]) -> String {
    let mut out = String::from("name,level,n,lcc,srcc,mse,accuracy\n");
    for (name, r) in reports {
        let acc = r.accuracy.map_or_else(String::new, |a| format!("{a:.9}"));
        out.push_str(&format!(
            "{},{},{},{:.9},{:.9},{:.9},{}\n",
            name, r.level, r.n, r.lcc, r.srcc, r.mse, acc
        ));
    }
    out
}

//! Correlation and error metrics at utterance and system level, rating
//! histograms, and plain-text / CSV / SVG report output.

mod correlation;
mod distribution;
mod plot;
mod report;

pub use correlation::{average_ranks, binary_accuracy, mse, pearson_lcc, spearman_srcc};
pub use distribution::{rating_distribution, Histogram, RatingDistribution, UtteranceStats};
pub use plot::{histogram_svg, scatter_svg};
pub use report::{evaluate, format_table, reports_csv, system_aggregate, EvalLevel, EvalReport, SystemMean};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: {0} input is constant")]
    Constant(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
}

use super::MetricError;

fn check(x: &[f64], y: &[f64], min: usize) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(MetricError::TooFew(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation. Constant input is an error rather than 0.
pub fn pearson_lcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricError::Constant("first"));
    }
    if syy == 0.0 {
        return Err(MetricError::Constant("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn spearman_srcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check(x, y, 2)?;
    pearson_lcc(&average_ranks(x), &average_ranks(y))
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check(x, y, 1)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// Fraction of `scores` on the right side of `threshold` (a score at the
/// threshold predicts label 1).
pub fn binary_accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(MetricError::TooFew(0));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| u8::from(s >= threshold) == l)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

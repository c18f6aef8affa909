//! Max-shifted log-sum-exp and softmax-weighted averages.

/// `log Σ exp(vᵢ)`; `-inf` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `Σ softmax(log_weights)ᵢ · valuesᵢ`.
pub fn weighted_mean(log_weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(log_weights.len(), values.len());
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&lw, &v) in log_weights.iter().zip(values) {
        let w = (lw - max).exp();
        num += w * v;
        den += w;
    }
    num / den
}

/// Normalized softmax weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for w in &mut out {
        *w /= total;
    }
    out
}

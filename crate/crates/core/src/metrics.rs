//! Fairness indices over a vector of tour lengths.
//!
//! All indices are symmetric in their argument and invariant to positive
//! scaling. Vectors that sum to zero have no defined index and produce
//! [`MetricError::Undefined`].

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{0} is undefined for an all-zero length vector")]
    Undefined(&'static str),
    #[error("need at least 2 salesmen, got {0}")]
    TooFewSalesmen(usize),
    #[error("lengths must be finite and nonnegative, got {0}")]
    InvalidLength(f64),
    #[error("parameter {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("cost of fairness needs a positive baseline, got {0}")]
    NonpositiveBaseline(f64),
}

fn check(l: &[f64], metric: &'static str) -> Result<f64, MetricError> {
    if l.len() < 2 {
        return Err(MetricError::TooFewSalesmen(l.len()));
    }
    if let Some(&bad) = l.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(MetricError::InvalidLength(bad));
    }
    let sum: f64 = l.iter().sum();
    if sum <= 0.0 {
        return Err(MetricError::Undefined(metric));
    }
    Ok(sum)
}

/// Gini coefficient `Σ_{i<j} |l_i - l_j| / ((m-1) Σ l_i)`, in `[0, 1]`.
pub fn gini(l: &[f64]) -> Result<f64, MetricError> {
    let sum = check(l, "gini")?;
    let m = l.len();
    // With ascending order, Σ_{i<j} |l_i - l_j| = Σ_k (2k - m + 1) l_(k).
    let mut sorted = l.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pairwise: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, v)| (2.0 * k as f64 - m as f64 + 1.0) * v)
        .sum();
    Ok((pairwise / ((m - 1) as f64 * sum)).clamp(0.0, 1.0))
}

/// Jain index `(Σ l)² / (m Σ l²)`, in `[1/m, 1]`.
pub fn jain(l: &[f64]) -> Result<f64, MetricError> {
    let sum = check(l, "jain")?;
    let sq: f64 = l.iter().map(|v| v * v).sum();
    Ok(sum * sum / (l.len() as f64 * sq))
}

/// ε-fair index `(‖l‖₁/‖l‖₂ - 1)/(√m - 1)`, in `[0, 1]`.
pub fn eps_fair_index(l: &[f64]) -> Result<f64, MetricError> {
    let sum = check(l, "eps_fair_index")?;
    let norm2 = l.iter().map(|v| v * v).sum::<f64>().sqrt();
    let m = l.len() as f64;
    Ok(((sum / norm2 - 1.0) / (m.sqrt() - 1.0)).clamp(0.0, 1.0))
}

fn check_param(name: &'static str, value: f64, m: usize) -> Result<(), MetricError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(MetricError::OutOfRange { name, value });
    }
    if m < 2 {
        return Err(MetricError::TooFewSalesmen(m));
    }
    Ok(())
}

/// `1 - ε + ε√m`, the norm ratio ‖l‖₁/‖l‖₂ a vector must reach to be ε-fair.
pub fn eps_ratio(eps: f64, m: usize) -> f64 {
    1.0 - eps + eps * (m as f64).sqrt()
}

/// Jain-index threshold equivalent to ε-fairness: `(1 - ε + ε√m)² / m`.
pub fn jain_from_eps(eps: f64, m: usize) -> Result<f64, MetricError> {
    check_param("eps", eps, m)?;
    let r = eps_ratio(eps, m);
    Ok(r * r / m as f64)
}

/// Upper bound on the squared coefficient of variation implied by ε-fairness.
pub fn cv_bound(eps: f64, m: usize) -> Result<f64, MetricError> {
    check_param("eps", eps, m)?;
    let m_f = m as f64;
    let r = eps_ratio(eps, m);
    Ok(m_f / (m_f - 1.0) * (m_f / (r * r) - 1.0))
}

/// Squared coefficient of variation using the sample variance.
pub fn cv_squared(l: &[f64]) -> Result<f64, MetricError> {
    let sum = check(l, "cv_squared")?;
    let m = l.len() as f64;
    let mean = sum / m;
    let var = l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(var / (mean * mean))
}

/// Relative increase of `fair_total` over `minsum_total`, clamped at zero.
pub fn cost_of_fairness(fair_total: f64, minsum_total: f64) -> Result<f64, MetricError> {
    if !(minsum_total > 0.0) {
        return Err(MetricError::NonpositiveBaseline(minsum_total));
    }
    Ok(((fair_total - minsum_total) / minsum_total).max(0.0))
}

/// `‖l‖_p` for `p ≥ 1`.
pub fn p_norm(l: &[f64], p: u32) -> f64 {
    let max = l.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    // Scaled to avoid overflow for large p.
    max * l.iter().map(|v| (v / max).powi(p as i32)).sum::<f64>().powf(1.0 / p as f64)
}

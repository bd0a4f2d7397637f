//! Log-log least-squares rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log error` against `log δ`.
    pub kappa_hat: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares of `log(errors)` on `log(deltas)`. Pairs with a
/// non-positive or non-finite entry are dropped; at least three must remain.
pub fn fit_rate(deltas: &[f64], errors: &[f64]) -> Result<RateFit> {
    if deltas.len() != errors.len() {
        return Err(Error::Dimension {
            expected: deltas.len(),
            got: errors.len(),
        });
    }
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(d, e)| **d > 0.0 && **e > 0.0 && d.is_finite() && e.is_finite())
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(1));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(RateFit {
        kappa_hat: slope,
        r_squared,
        points: pts.len(),
    })
}

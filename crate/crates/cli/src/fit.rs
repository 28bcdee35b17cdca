//! Log-log convergence slopes.

use homog_core::Method;

use crate::error::{CliError, Result};
use crate::record::SweepRecord;

/// Least-squares slope of `log err` against `log R` over the points whose
/// error lies in `[lo, hi]`.
pub fn fit_loglog(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(r, e)| *r > 0.0 && e.is_finite() && *e >= lo && *e <= hi && *e > 0.0)
        .map(|(r, e)| (r.ln(), e.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(CliError::InsufficientPoints { found: usable.len() });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CliError::InsufficientPoints { found: 1 });
    }
    Ok(sxy / sxx)
}

/// Slope for one method and filter order.
pub fn fit_slope(records: &[SweepRecord], method: Method, q: u32, lo: f64, hi: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method && r.q == q)
        .map(|r| (r.r, r.err_fro))
        .collect();
    fit_loglog(&points, lo, hi)
}

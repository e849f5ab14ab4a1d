//! Small least-squares helpers shared by the fitting diagnostics.

use crate::error::{Error, Result};

/// Ordinary least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Slope of `ln y` against `ln x`. Non-positive entries are rejected.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit("log-log fit needs finite positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.0)
}

/// Slope of `ln y` against `x`.
pub fn semilog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit("semilog fit needs finite positive data".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(x, &ly)?.0)
}

/// Residual sum of squares of a straight-line fit, used to compare fit quality.
pub fn fit_rss(x: &[f64], y: &[f64]) -> Result<f64> {
    let (a, b) = linear_fit(x, y)?;
    Ok(x.iter().zip(y).map(|(xi, yi)| (yi - a * xi - b).powi(2)).sum())
}

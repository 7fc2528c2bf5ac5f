//! One-parameter fits of the measured survival probabilities: ln p = cγ
//! through the origin, and the small-γ slope of 1 − p.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelParams, LZ};
use crate::propagator::{survival_probability, LimitPolicy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub c_estimate: f64,
    /// Variance of `c_estimate` from the residual scatter.
    pub covariance: f64,
    /// ‖ln p − cγ‖₂ over the data.
    pub residual_norm: f64,
    /// (γ, p) pairs used in the fit.
    pub data: Vec<(f64, f64)>,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeResult {
    /// lim_{γ→0} (1 − p)/γ, the intercept of the line through (γ, (1 − p)/γ).
    pub slope: f64,
    /// Linear correction in γ absorbed by the fit.
    pub curvature: f64,
    pub residual_norm: f64,
    pub data: Vec<(f64, f64)>,
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if let Some(&g) = gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::domain("gamma", g, "fit points must be positive"));
    }
    let mut distinct: Vec<f64> = gammas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Precondition(format!(
            "a fit needs at least 3 distinct γ values, got {}",
            distinct.len()
        )));
    }
    Ok(())
}

/// Least squares of ln p = cγ with no intercept (p(0) = 1 fixes it).
pub fn fit_exponent_to_data(data: &[(f64, f64)]) -> Result<FitResult> {
    let gammas: Vec<f64> = data.iter().map(|d| d.0).collect();
    check_gammas(&gammas)?;
    if let Some(&(g, p)) = data.iter().find(|d| !(d.1 > 0.0)) {
        return Err(Error::Data(format!("p({g}) = {p} has no logarithm")));
    }
    let sxx: f64 = data.iter().map(|(g, _)| g * g).sum();
    let sxy: f64 = data.iter().map(|(g, p)| g * p.ln()).sum();
    let c = sxy / sxx;
    let rss: f64 = data.iter().map(|(g, p)| (p.ln() - c * g).powi(2)).sum();
    let dof = (data.len() - 1) as f64;
    Ok(FitResult {
        c_estimate: c,
        covariance: rss / dof / sxx,
        residual_norm: rss.sqrt(),
        data: data.to_vec(),
        model: "p = exp(c*gamma)".into(),
    })
}

fn measure(gammas: &[f64], policy: &LimitPolicy) -> Result<Vec<(f64, f64)>> {
    gammas
        .iter()
        .map(|&g| {
            survival_probability(&LZ, &ModelParams::from_gamma(g), 0, policy).map(|s| (g, s.p))
        })
        .collect()
}

/// Measures p(γ) on the two-level sweep and fits the exponent.
pub fn fit_exponent(gammas: &[f64], policy: &LimitPolicy) -> Result<FitResult> {
    check_gammas(gammas)?;
    fit_exponent_to_data(&measure(gammas, policy)?)
}

/// Line through (γ, (1 − p)/γ); the intercept is the first-order coefficient.
pub fn fit_slope_to_data(data: &[(f64, f64)]) -> Result<SlopeResult> {
    let gammas: Vec<f64> = data.iter().map(|d| d.0).collect();
    check_gammas(&gammas)?;
    let pts: Vec<(f64, f64)> = data.iter().map(|&(g, p)| (g, (1.0 - p) / g)).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let curvature = sxy / sxx;
    let slope = my - curvature * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - slope - curvature * p.0).powi(2))
        .sum();
    Ok(SlopeResult {
        slope,
        curvature,
        residual_norm: rss.sqrt(),
        data: data.to_vec(),
    })
}

pub fn perturbative_slope(gammas: &[f64], policy: &LimitPolicy) -> Result<SlopeResult> {
    check_gammas(gammas)?;
    fit_slope_to_data(&measure(gammas, policy)?)
}

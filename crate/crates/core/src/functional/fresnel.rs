//! ∫_{−T}^{T} e^{ibt²} dt by Gauss–Legendre quadrature plus an asymptotic
//! tail, and the first-order Dyson amplitude built from it.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::I;
use crate::models::ModelParams;

/// Order used by [`first_order_amplitude`].
pub const DEFAULT_CORRECTION_ORDER: usize = 3;

const GL_POINTS: usize = 10;
/// Phase advanced across one quadrature panel.
const PANEL_PHASE: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FresnelValue {
    pub value: Complex64,
    /// Magnitude of the first omitted tail term (both tails).
    pub error_estimate: f64,
    /// ∫_{−T}^{T} by quadrature alone.
    pub quadrature: Complex64,
    /// Tail correction added for |t| > T (both tails).
    pub tail: Complex64,
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on Pₙ.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// ∫₀^T e^{ibt²} dt with panel edges at equal phase increments, t_k = √(kΔ/b).
fn half_line_quadrature(b: f64, t_max: f64) -> Complex64 {
    let nodes = gauss_legendre(GL_POINTS);
    let total_phase = b * t_max * t_max;
    let panels = (total_phase / PANEL_PHASE).ceil().max(1.0) as usize;
    let edge = |k: usize| (k as f64 / panels as f64 * total_phase / b).sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let (lo, hi) = (edge(k), if k + 1 == panels { t_max } else { edge(k + 1) });
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for &(x, w) in &nodes {
            let t = mid + half * x;
            sum += (I * (b * t * t)).exp() * (w * half);
        }
    }
    sum
}

/// k-th term of ∫_T^∞ e^{ibt²} dt ~ e^{ibT²} Σ_k −(2k−1)!! / ((2ib)^{k+1} T^{2k+1}),
/// from repeated integration by parts of e^{ibt²} = (2ibt)⁻¹ d/dt e^{ibt²}.
fn tail_term(b: f64, t: f64, k: usize) -> Complex64 {
    let double_factorial: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
    let denom = (Complex64::new(0.0, 2.0 * b)).powu(k as u32 + 1) * t.powi(2 * k as i32 + 1);
    -double_factorial / denom
}

pub fn fresnel_integral(b: f64, half_width: f64, correction_order: usize) -> Result<FresnelValue> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain("b", b, "slope must be positive and finite"));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::domain(
            "T",
            half_width,
            "truncation must be positive",
        ));
    }
    let quadrature = half_line_quadrature(b, half_width) * 2.0;
    let phase = (I * (b * half_width * half_width)).exp();
    let series: Complex64 = (0..correction_order)
        .map(|k| tail_term(b, half_width, k))
        .sum();
    let tail = phase * series * 2.0;
    let error_estimate = 2.0 * tail_term(b, half_width, correction_order).norm();
    Ok(FresnelValue {
        value: quadrature + tail,
        error_estimate,
        quadrature,
        tail,
    })
}

/// Off-diagonal amplitude to first order in g in the zero-diagonal gauge:
/// −i g ∫ e^{ibt²} dt.
pub fn first_order_amplitude(params: &ModelParams, half_width: f64) -> Result<Complex64> {
    params.check_slope()?;
    let f = fresnel_integral(params.b, half_width, DEFAULT_CORRECTION_ORDER)?;
    Ok(-I * params.g * f.value)
}

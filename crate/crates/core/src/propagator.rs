//! Time-ordered evolution operators of the registered families, transition
//! probability matrices, and the infinite-time limit policy.
//!
//! Every step multiplies by the exact exponential of a Hermitian matrix, so
//! propagators are unitary to rounding regardless of step size. The default
//! stepper is the fourth-order commutator-corrected Magnus scheme
//!
//! ```text
//! K = h/2 (H₁ + H₂) − i √3/12 h² [H₂, H₁],   U ← exp(−iK) U,
//! ```
//!
//! with H₁, H₂ sampled at the two Gauss–Legendre nodes of the step. For
//! Hamiltonians linear in time this is exact through fourth order, and the
//! large diagonal sweep terms enter only through the exponential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, expm_neg_i_hermitian, identity, unitarity_defect, CMatrix, I};
use crate::models::{HamiltonianFamily, ModelParams};

/// Defect above which a propagator is rejected.
pub const UNITARITY_BOUND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMethod {
    /// Exponential of H at the step midpoint (second order).
    Midpoint,
    /// Fixed-step fourth-order Magnus.
    Magnus4,
    /// Fourth-order Magnus with step doubling and a Richardson local error estimate.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: StepMethod,
    /// Local error tolerance per step (adaptive method only).
    pub step_tolerance: f64,
    /// Largest step in scaled time √b·t.
    pub max_step: f64,
    /// Propagate with the diagonal removed and carried as phases.
    pub interaction_picture: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: StepMethod::Magnus4,
            step_tolerance: 1e-10,
            max_step: 0.01,
            interaction_picture: false,
        }
    }
}

impl IntegratorConfig {
    /// Step-doubling Magnus stepper; needed where the generator carries a
    /// large static diagonal, such as H′ far from t = 0.
    pub fn adaptive() -> Self {
        Self {
            method: StepMethod::Adaptive,
            max_step: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_tolerance > 0.0) {
            return Err(Error::domain(
                "step_tolerance",
                self.step_tolerance,
                "must be positive",
            ));
        }
        if !(self.max_step > 0.0) || !self.max_step.is_finite() {
            return Err(Error::domain(
                "max_step",
                self.max_step,
                "must be positive and finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionWindow {
    pub t_start: f64,
    pub t_end: f64,
    /// Deformation parameter held fixed during the evolution.
    pub tau: f64,
}

impl EvolutionWindow {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        Self {
            t_start,
            t_end,
            tau: 1.0,
        }
    }

    /// The window [−T, T] at τ = 1.
    pub fn symmetric(half_width: f64) -> Self {
        Self::new(-half_width, half_width)
    }

    pub fn at_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end {
            Ok(())
        } else {
            Err(Error::InvalidWindow {
                t_start: self.t_start,
                t_end: self.t_end,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryResult {
    pub matrix: CMatrix,
    pub unitarity_defect: f64,
    pub steps_taken: usize,
    pub window: EvolutionWindow,
}

impl UnitaryResult {
    pub fn is_accepted(&self) -> bool {
        self.unitarity_defect <= UNITARITY_BOUND
    }
}

/// Element-wise |U_ij|² with its departure from double stochasticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub entries: Vec<Vec<f64>>,
    pub row_defect: f64,
    pub col_defect: f64,
}

impl TransitionMatrix {
    pub fn from_entries(entries: Vec<Vec<f64>>) -> Self {
        let n = entries.len();
        let row_defect = entries
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let col_defect = (0..n)
            .map(|j| (entries.iter().map(|row| row[j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        Self {
            entries,
            row_defect,
            col_defect,
        }
    }

    pub fn from_unitary(u: &CMatrix) -> Self {
        let n = u.nrows();
        Self::from_entries(
            (0..n)
                .map(|i| (0..n).map(|j| u[(i, j)].norm_sqr()).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn stochastic_defect(&self) -> f64 {
        self.row_defect.max(self.col_defect)
    }

    /// Total probability outside the diagonal, divided by the dimension.
    pub fn mean_off_diagonal_mass(&self) -> f64 {
        let n = self.dim();
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i][j])
            .sum();
        off / n as f64
    }

    /// Largest single off-diagonal entry.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.entries[i][j]);
                }
            }
        }
        m
    }

    pub fn kron(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let (n, m) = (self.dim(), other.dim());
        let entries = (0..n * m)
            .map(|r| {
                (0..n * m)
                    .map(|s| self.entries[r / m][s / m] * other.entries[r % m][s % m])
                    .collect()
            })
            .collect();
        TransitionMatrix::from_entries(entries)
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn transition_matrix(u: &UnitaryResult) -> TransitionMatrix {
    TransitionMatrix::from_unitary(&u.matrix)
}

/// A generator s ↦ H(s) for the stepper.
pub(crate) trait Generator {
    fn dim(&self) -> usize;
    fn eval(&self, s: f64) -> CMatrix;
}

pub(crate) struct FnGenerator<F: Fn(f64) -> CMatrix> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64) -> CMatrix> Generator for FnGenerator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, s: f64) -> CMatrix {
        (self.f)(s)
    }
}

// Gauss–Legendre nodes and weights on [−1, 1], three points.
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Wraps a generator in the interaction picture of its own diagonal.
///
/// The diagonal phases φ_k(s) = ∫₀ˢ H_kk are integrated with three-point
/// Gauss–Legendre, which is exact for diagonals polynomial of degree ≤ 5
/// in s (every registered family is linear).
struct Interaction<'a, G: Generator> {
    inner: &'a G,
}

impl<G: Generator> Interaction<'_, G> {
    fn phases(&self, s: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.inner.dim()];
        for (x, w) in GL3 {
            let h = self.inner.eval(0.5 * s * (1.0 + x));
            for (k, a) in acc.iter_mut().enumerate() {
                *a += 0.5 * s * w * h[(k, k)].re;
            }
        }
        acc
    }

    /// D(s) = diag(e^{−iφ_k(s)})
    fn frame(&self, s: f64) -> CMatrix {
        let ph = self.phases(s);
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            ph.len(),
            ph.iter().map(|p| (-I * *p).exp()),
        ))
    }
}

impl<G: Generator> Generator for Interaction<'_, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, s: f64) -> CMatrix {
        let h = self.inner.eval(s);
        let ph = self.phases(s);
        let n = h.nrows();
        CMatrix::from_fn(n, n, |j, k| {
            if j == k {
                c(0.0)
            } else {
                h[(j, k)] * (I * (ph[j] - ph[k])).exp()
            }
        })
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const MAGNUS_COMMUTATOR: f64 = 0.144_337_567_297_406_43; // √3/12

fn step_propagator<G: Generator>(gen: &G, method: StepMethod, s: f64, ds: f64) -> CMatrix {
    let k = match method {
        StepMethod::Midpoint => gen.eval(s + 0.5 * ds) * c(ds),
        StepMethod::Magnus4 | StepMethod::Adaptive => {
            let h1 = gen.eval(s + ds * (0.5 - GAUSS_OFFSET));
            let h2 = gen.eval(s + ds * (0.5 + GAUSS_OFFSET));
            let comm = commutator(&h2, &h1);
            (h1 + h2) * c(0.5 * ds) - comm * (I * (MAGNUS_COMMUTATOR * ds * ds))
        }
    };
    expm_neg_i_hermitian(&k)
}

/// Propagates from `s0` to `s1` (either direction). Returns U(s1, s0) and the step count.
pub(crate) fn propagate<G: Generator>(
    gen: &G,
    s0: f64,
    s1: f64,
    config: &IntegratorConfig,
    max_step: f64,
) -> Result<(CMatrix, usize)> {
    if config.interaction_picture {
        let frame = Interaction { inner: gen };
        let (u, n) = propagate_lab(&frame, s0, s1, config, max_step)?;
        let u = frame.frame(s1) * u * frame.frame(s0).adjoint();
        return Ok((u, n));
    }
    propagate_lab(gen, s0, s1, config, max_step)
}

fn propagate_lab<G: Generator>(
    gen: &G,
    s0: f64,
    s1: f64,
    config: &IntegratorConfig,
    max_step: f64,
) -> Result<(CMatrix, usize)> {
    let dim = gen.dim();
    let span = s1 - s0;
    if span == 0.0 {
        return Ok((identity(dim), 0));
    }
    match config.method {
        StepMethod::Midpoint | StepMethod::Magnus4 => {
            let n = (span.abs() / max_step).ceil().max(1.0) as usize;
            let ds = span / n as f64;
            let mut u = identity(dim);
            for k in 0..n {
                let s = s0 + k as f64 * ds;
                u = step_propagator(gen, config.method, s, ds) * u;
            }
            Ok((u, n))
        }
        StepMethod::Adaptive => adaptive(gen, s0, s1, config.step_tolerance, max_step),
    }
}

fn adaptive<G: Generator>(
    gen: &G,
    s0: f64,
    s1: f64,
    tol: f64,
    max_step: f64,
) -> Result<(CMatrix, usize)> {
    let dir = (s1 - s0).signum();
    let mut u = identity(gen.dim());
    let mut s = s0;
    let mut h = max_step.min((s1 - s0).abs());
    let mut steps = 0;
    while dir * (s1 - s) > 0.0 {
        let remaining = (s1 - s).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let ds = dir * hs;
        let big = step_propagator(gen, StepMethod::Magnus4, s, ds);
        let half1 = step_propagator(gen, StepMethod::Magnus4, s, 0.5 * ds);
        let half2 = step_propagator(gen, StepMethod::Magnus4, s + 0.5 * ds, 0.5 * ds);
        let fine = half2 * half1;
        let err = crate::linalg::frobenius(&(&big - &fine)) / 15.0;
        let factor = if err > 0.0 {
            0.9 * (tol / err).powf(0.2)
        } else {
            2.0
        };
        if err <= tol {
            u = fine * u;
            s = if last { s1 } else { s + ds };
            steps += 2;
            h = (hs * factor.clamp(1.0, 2.0)).min(max_step);
        } else {
            h = hs * factor.clamp(0.1, 0.9);
            if h < 1e-13 * (1.0 + s.abs()) {
                return Err(Error::StepUnderflow { at: s, step: h });
            }
        }
    }
    Ok((u, steps))
}

fn checked_result(
    matrix: CMatrix,
    steps_taken: usize,
    window: EvolutionWindow,
) -> Result<UnitaryResult> {
    let defect = unitarity_defect(&matrix);
    if !(defect <= UNITARITY_BOUND) {
        return Err(Error::Unitarity {
            defect,
            bound: UNITARITY_BOUND,
        });
    }
    Ok(UnitaryResult {
        matrix,
        unitarity_defect: defect,
        steps_taken,
        window,
    })
}

/// Time-ordered exponential of `family` over `window` at τ = `window.tau`.
pub fn evolve_window(
    family: &HamiltonianFamily,
    params: &ModelParams,
    window: EvolutionWindow,
    config: &IntegratorConfig,
) -> Result<UnitaryResult> {
    window.validate()?;
    config.validate()?;
    let params = params.with_tau(window.tau);
    family.validate(&params)?;
    let gen = FnGenerator {
        dim: family.dim,
        f: |t| (family.eval_h)(t, &params),
    };
    let (u, steps) = propagate(
        &gen,
        window.t_start,
        window.t_end,
        config,
        config.max_step / params.b.sqrt(),
    )?;
    checked_result(u, steps, window)
}

/// Controls how finite-window probabilities are turned into t → ±∞ limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPolicy {
    /// First half-width of the ladder, in units of 1/√r with r the sweep rate.
    pub t0_scaled: f64,
    /// Number of ladder rungs T_k = T₀·2^k tried before giving up.
    pub max_rungs: usize,
    /// Acceptance threshold on consecutive rung averages.
    pub tolerance: f64,
    /// Window endpoints averaged over one oscillation period.
    pub average_samples: usize,
    pub integrator: IntegratorConfig,
}

impl Default for LimitPolicy {
    fn default() -> Self {
        Self {
            t0_scaled: 25.0,
            max_rungs: 6,
            tolerance: 1e-4,
            average_samples: 16,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl LimitPolicy {
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.t0_scaled > 0.0) {
            return Err(Error::domain(
                "t0_scaled",
                self.t0_scaled,
                "must be positive",
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::domain(
                "tolerance",
                self.tolerance,
                "must be positive",
            ));
        }
        if self.max_rungs < 2 || self.average_samples == 0 {
            return Err(Error::Precondition(
                "limit policy needs at least two rungs and one averaging sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    /// Half-width T of the central window.
    pub half_width: f64,
    /// Probability on [−T, T].
    pub endpoint: f64,
    /// Mean over symmetric windows spanning one oscillation period beyond T.
    pub averaged: f64,
}

/// Infinite-time survival probability with its convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub p: f64,
    pub error: f64,
    pub ladder: Vec<LadderRung>,
    pub max_unitarity_defect: f64,
    pub max_stochastic_defect: f64,
}

/// Smallest nonzero half-difference of diagonal slopes, i.e. the rate r of
/// the slowest diabatic crossing (r = b for the two-level sweep).
pub fn sweep_rate(family: &HamiltonianFamily, params: &ModelParams) -> Result<f64> {
    crossing_rates(family, params).map(|(slowest, _)| slowest)
}

/// Slowest and fastest nonzero crossing rates.
fn crossing_rates(family: &HamiltonianFamily, params: &ModelParams) -> Result<(f64, f64)> {
    let h0 = family.hamiltonian(0.0, params)?;
    let h1 = family.hamiltonian(1.0, params)?;
    let slopes: Vec<f64> = (0..family.dim)
        .map(|k| (h1[(k, k)] - h0[(k, k)]).re)
        .collect();
    let (mut slowest, mut fastest) = (f64::INFINITY, 0.0f64);
    for i in 0..slopes.len() {
        for j in i + 1..slopes.len() {
            let d = 0.5 * (slopes[i] - slopes[j]).abs();
            if d > 1e-12 * (1.0 + slopes[i].abs()) {
                slowest = slowest.min(d);
                fastest = fastest.max(d);
            }
        }
    }
    if slowest.is_finite() {
        Ok((slowest, fastest))
    } else {
        Err(Error::Precondition(format!(
            "family `{}` has no diabatic crossing to sweep through",
            family.name
        )))
    }
}

/// (P)_{level,level} extrapolated to the infinite window.
///
/// Finite windows [−T, T] oscillate around the limit with a phase b·T²
/// (period π/(rT) in T). At each rung T_k = T₀·2^k the probability is
/// averaged over `average_samples` symmetric windows spread over exactly one
/// such period, which cancels the oscillating term. The ladder stops once two
/// consecutive averages differ by less than the policy tolerance; that
/// difference is the reported error.
pub fn survival_probability(
    family: &HamiltonianFamily,
    params: &ModelParams,
    level: usize,
    policy: &LimitPolicy,
) -> Result<SurvivalEstimate> {
    policy.validate()?;
    family.validate(params)?;
    if level >= family.dim {
        return Err(Error::Precondition(format!(
            "level {level} out of range for {}-level family `{}`",
            family.dim, family.name
        )));
    }
    let (rate, fastest) = crossing_rates(family, params)?;
    // Faster crossings oscillate at multiples of the slowest one when the
    // slopes are commensurate; enough samples keep them from aliasing.
    let n = policy
        .average_samples
        .max(4 * (fastest / rate).ceil() as usize);
    let unit = 1.0 / rate.sqrt();
    let max_step = policy.integrator.max_step * unit;
    let cfg = &policy.integrator;
    let gen = FnGenerator {
        dim: family.dim,
        f: |t| (family.eval_h)(t, params),
    };

    let mut ladder: Vec<LadderRung> = Vec::new();
    let mut max_defect: f64 = 0.0;
    let mut max_stochastic: f64 = 0.0;
    // U(T, −T) for the current rung.
    let mut core = identity(family.dim);
    let mut reached = 0.0;

    for k in 0..policy.max_rungs {
        let half_width = policy.t0_scaled * unit * 2f64.powi(k as i32);
        let (right, _) = propagate(&gen, reached, half_width, cfg, max_step)?;
        let (left, _) = propagate(&gen, -half_width, -reached, cfg, max_step)?;
        core = right * core * left;
        reached = half_width;

        let endpoint = core[(level, level)].norm_sqr();
        let period = std::f64::consts::PI / (rate * half_width);
        let spacing = period / n as f64;
        let mut sum = 0.0;
        let mut r = identity(family.dim);
        let mut back = identity(family.dim);
        let mut s = half_width;
        for j in 0..n {
            let next = half_width + (j as f64 + 0.5) * spacing;
            let (dr, _) = propagate(&gen, s, next, cfg, max_step)?;
            // evolution from −half_width backwards to −next
            let (dl, _) = propagate(&gen, -s, -next, cfg, max_step)?;
            r = dr * r;
            back = dl * back;
            s = next;
            let u = &r * &core * back.adjoint();
            max_defect = max_defect.max(unitarity_defect(&u));
            let tm = TransitionMatrix::from_unitary(&u);
            max_stochastic = max_stochastic.max(tm.stochastic_defect());
            sum += tm.get(level, level);
        }
        let averaged = sum / n as f64;
        ladder.push(LadderRung {
            half_width,
            endpoint,
            averaged,
        });

        if max_defect > UNITARITY_BOUND {
            return Err(Error::Unitarity {
                defect: max_defect,
                bound: UNITARITY_BOUND,
            });
        }
        if let Some(diff) = richardson_change(&ladder) {
            if diff < policy.tolerance {
                return Ok(SurvivalEstimate {
                    p: extrapolated(&ladder),
                    error: diff,
                    ladder,
                    max_unitarity_defect: max_defect,
                    max_stochastic_defect: max_stochastic,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        ladder: ladder.iter().map(|r| (r.half_width, r.averaged)).collect(),
    })
}

/// Richardson extrapolation of the last two rungs assuming a 1/T² remainder.
fn extrapolated(ladder: &[LadderRung]) -> f64 {
    match ladder {
        [.., prev, last] => last.averaged + (last.averaged - prev.averaged) / 3.0,
        [only] => only.averaged,
        [] => f64::NAN,
    }
}

/// Change of the extrapolated value between the last two rungs; with only
/// two rungs, the raw change of the averages.
fn richardson_change(ladder: &[LadderRung]) -> Option<f64> {
    match ladder.len() {
        0 | 1 => None,
        2 => Some((ladder[1].averaged - ladder[0].averaged).abs()),
        n => Some((extrapolated(&ladder[..n]) - extrapolated(&ladder[..n - 1])).abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{COMPOSITE4, COMPOSITE4_ROTATED, LZ, THREE_LEVEL};
    use std::f64::consts::PI;

    fn lz_window(gamma: f64, half_width: f64) -> UnitaryResult {
        evolve_window(
            &LZ,
            &ModelParams::from_gamma(gamma),
            EvolutionWindow::symmetric(half_width),
            &IntegratorConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn uncoupled_levels_do_not_mix() {
        let u = evolve_window(
            &COMPOSITE4,
            &ModelParams::new(1.7, 0.0),
            EvolutionWindow::new(-3.0, 8.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let z = u.matrix[(i, j)].norm();
                if i == j {
                    assert!((z - 1.0).abs() < 1e-13);
                } else {
                    assert!(z < 1e-13);
                }
            }
        }
    }

    #[test]
    fn degenerate_and_reversed_windows_are_rejected() {
        let cfg = IntegratorConfig::default();
        let p = ModelParams::default();
        for (a, b) in [(1.0, 1.0), (2.0, -2.0), (f64::NAN, 1.0)] {
            let err = evolve_window(&LZ, &p, EvolutionWindow::new(a, b), &cfg).unwrap_err();
            assert!(matches!(err, Error::InvalidWindow { .. }));
        }
    }

    #[test]
    fn finite_window_oscillates_around_the_limit() {
        let u = lz_window(1.0, 60.0);
        let p = transition_matrix(&u).get(0, 0);
        assert!((p - (-PI).exp()).abs() < 5e-3, "p = {p}");
        assert!(u.unitarity_defect < 1e-12);
    }

    #[test]
    fn identity_propagator_gives_identity_probabilities() {
        let tm = TransitionMatrix::from_unitary(&identity(3));
        assert_eq!(
            tm.entries,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
        assert_eq!(tm.stochastic_defect(), 0.0);
    }

    #[test]
    fn two_level_probabilities_have_the_symmetric_stochastic_form() {
        let tm = transition_matrix(&lz_window(0.5, 30.0));
        assert!((tm.get(0, 0) - tm.get(1, 1)).abs() < 1e-12);
        assert!((tm.get(0, 1) - tm.get(1, 0)).abs() < 1e-12);
        assert!(tm.stochastic_defect() < 1e-12);
    }

    #[test]
    fn composite_probabilities_factorize() {
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            let w = EvolutionWindow::symmetric(30.0);
            let cfg = IntegratorConfig::default();
            let p = ModelParams::from_gamma(gamma);
            let p2 = transition_matrix(&evolve_window(&LZ, &p, w, &cfg).unwrap());
            let p4 = transition_matrix(&evolve_window(&COMPOSITE4, &p, w, &cfg).unwrap());
            assert!(p4.max_abs_diff(&p2.kron(&p2)) < 1e-6, "γ = {gamma}");
            assert!(p4.stochastic_defect() < 1e-7);
        }
    }

    #[test]
    fn dark_state_rotation_preserves_first_level_survival() {
        let w = EvolutionWindow::symmetric(30.0);
        let cfg = IntegratorConfig::default();
        let p = ModelParams::from_gamma(0.7);
        let p4 = transition_matrix(&evolve_window(&COMPOSITE4, &p, w, &cfg).unwrap());
        let rot = transition_matrix(&evolve_window(&COMPOSITE4_ROTATED, &p, w, &cfg).unwrap());
        let p3 = transition_matrix(&evolve_window(&THREE_LEVEL, &p, w, &cfg).unwrap());
        assert!((p4.get(0, 0) - rot.get(0, 0)).abs() < 1e-8);
        assert!((p4.get(0, 0) - p3.get(0, 0)).abs() < 1e-6);
        // the dark state never moves
        assert!((rot.get(2, 2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn survival_examples() {
        let policy = LimitPolicy::default();
        let s = survival_probability(&LZ, &ModelParams::new(1.0, 0.0), 0, &policy).unwrap();
        assert!((s.p - 1.0).abs() < 1e-14);
        let s = survival_probability(&LZ, &ModelParams::new(1.0, 1.0), 0, &policy).unwrap();
        assert!((s.p - 0.043_213_918_263_772_25).abs() < 2e-4);
        let s = survival_probability(
            &LZ,
            &ModelParams::new(1.0, std::f64::consts::FRAC_1_SQRT_2),
            0,
            &policy,
        )
        .unwrap();
        assert!((s.p - 0.207_879_576_350_761_9).abs() < 2e-4);
        assert!(s.max_unitarity_defect < 1e-8 && s.max_stochastic_defect < 1e-7);
    }

    #[test]
    fn survival_rejects_bad_level() {
        let err = survival_probability(&LZ, &ModelParams::default(), 2, &LimitPolicy::default())
            .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn non_convergence_reports_the_ladder() {
        let policy = LimitPolicy {
            max_rungs: 2,
            tolerance: 1e-12,
            ..LimitPolicy::default()
        };
        match survival_probability(&LZ, &ModelParams::default(), 0, &policy) {
            Err(Error::NonConvergence { ladder }) => {
                assert_eq!(ladder.len(), 2);
                assert_eq!(ladder[1].0, 2.0 * ladder[0].0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaled_parameters_give_identical_limits() {
        let policy = LimitPolicy::default();
        for (b, g) in [(4.0, 2.0), (2.0, 1.0), (0.5, 0.5)] {
            let p = ModelParams::new(b, g);
            let a = survival_probability(&LZ, &p, 0, &policy).unwrap();
            let s = survival_probability(
                &LZ,
                &crate::models::scaled_time_equivalent(&p).unwrap(),
                0,
                &policy,
            )
            .unwrap();
            assert!(
                (a.p - s.p).abs() <= 2.0 * a.error.max(s.error),
                "({b}, {g}): {} vs {}",
                a.p,
                s.p
            );
        }
    }

    #[test]
    fn sign_of_coupling_does_not_matter() {
        let w = EvolutionWindow::symmetric(20.0);
        let cfg = IntegratorConfig::default();
        let plus =
            transition_matrix(&evolve_window(&LZ, &ModelParams::new(1.3, 0.8), w, &cfg).unwrap());
        let minus =
            transition_matrix(&evolve_window(&LZ, &ModelParams::new(1.3, -0.8), w, &cfg).unwrap());
        assert!(plus.max_abs_diff(&minus) < 1e-8);
    }

    #[test]
    fn magnus_stepper_is_fourth_order() {
        let p = ModelParams::from_gamma(0.5);
        let w = EvolutionWindow::symmetric(8.0);
        let run = |h: f64| {
            let cfg = IntegratorConfig {
                max_step: h,
                ..IntegratorConfig::default()
            };
            evolve_window(&LZ, &p, w, &cfg).unwrap().matrix
        };
        let reference = run(0.4 / 64.0);
        let steps = [0.4, 0.2, 0.1];
        let errs: Vec<f64> = steps
            .iter()
            .map(|&h| crate::linalg::frobenius(&(run(h) - &reference)))
            .collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = steps
            .iter()
            .zip(&errs)
            .map(|(h, e)| (h.ln(), e.ln()))
            .unzip();
        let n = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let slope = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 3.5, "observed order {slope}, errors {errs:?}");
    }

    #[test]
    fn halving_the_step_stays_within_the_error_estimate() {
        let mut policy = LimitPolicy::default();
        let p = ModelParams::from_gamma(0.5);
        let coarse = survival_probability(&LZ, &p, 0, &policy).unwrap();
        policy.integrator.max_step /= 2.0;
        let fine = survival_probability(&LZ, &p, 0, &policy).unwrap();
        assert!((coarse.p - fine.p).abs() < coarse.error.max(fine.error));
    }

    #[test]
    fn midpoint_adaptive_and_interaction_picture_agree() {
        let p = ModelParams::from_gamma(0.3);
        let w = EvolutionWindow::symmetric(12.0);
        let reference =
            transition_matrix(&evolve_window(&LZ, &p, w, &IntegratorConfig::default()).unwrap());
        let variants = [
            IntegratorConfig {
                method: StepMethod::Midpoint,
                max_step: 0.001,
                ..IntegratorConfig::default()
            },
            IntegratorConfig::adaptive(),
            IntegratorConfig {
                interaction_picture: true,
                max_step: 0.002,
                ..IntegratorConfig::default()
            },
        ];
        for cfg in variants {
            let tm = transition_matrix(&evolve_window(&LZ, &p, w, &cfg).unwrap());
            assert!(
                tm.max_abs_diff(&reference) < 1e-6,
                "{cfg:?}: {}",
                tm.max_abs_diff(&reference)
            );
        }
    }

    #[test]
    fn invalid_integrator_config_is_rejected() {
        let cfg = IntegratorConfig {
            max_step: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(evolve_window(
            &LZ,
            &ModelParams::default(),
            EvolutionWindow::symmetric(1.0),
            &cfg
        )
        .is_err());
    }

    #[test]
    fn sweep_rate_of_the_families() {
        let p = ModelParams::new(2.0, 0.3).with_tau(3.0);
        assert_eq!(sweep_rate(&LZ, &p).unwrap(), 2.0);
        assert_eq!(
            sweep_rate(&crate::models::EFFECTIVE_TWO_LEVEL, &p).unwrap(),
            6.0
        );
        assert_eq!(sweep_rate(&THREE_LEVEL, &p).unwrap(), 2.0);
    }
}

//! The (t, τ) plane: curvature residuals of the connection −i(H dt + H′ dτ),
//! path-ordered propagation along axis-aligned polylines, and the path
//! deformation that relates the three-level model at τ = 1 to large τ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, frobenius, identity, unitarity_defect, CMatrix};
use crate::models::{HamiltonianFamily, ModelParams, EFFECTIVE_TWO_LEVEL, THREE_LEVEL_TAU};
use crate::propagator::{
    propagate, survival_probability, transition_matrix, EvolutionWindow, FnGenerator,
    IntegratorConfig, LimitPolicy, SurvivalEstimate, TransitionMatrix, UnitaryResult,
    UNITARITY_BOUND,
};

/// Central finite-difference step for the derivative cross-check.
pub const FD_STEP: f64 = 1e-5;
/// Points drawn for the finite-difference cross-check.
pub const FD_POINTS: usize = 10;
const FD_SEED: u64 = 0x5eed_f1a7;

/// A polyline in the (t, τ) plane made of pure-t and pure-τ segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPath {
    vertices: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Evolution in t at fixed τ, generated by H.
    Time { tau: f64, from: f64, to: f64 },
    /// Evolution in τ at fixed t, generated by H′.
    Tau { t: f64, from: f64, to: f64 },
}

impl ParamPath {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPath(
                "a path needs at least two vertices".into(),
            ));
        }
        for &(t, tau) in &vertices {
            if !t.is_finite() || !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidPath(format!(
                    "vertex ({t}, {tau}) leaves the domain τ > 0"
                )));
            }
        }
        for w in vertices.windows(2) {
            let ((t0, s0), (t1, s1)) = (w[0], w[1]);
            if t0 == t1 && s0 == s1 {
                return Err(Error::InvalidPath(format!("repeated vertex ({t0}, {s0})")));
            }
            if t0 != t1 && s0 != s1 {
                return Err(Error::InvalidPath(format!(
                    "segment ({t0}, {s0}) -> ({t1}, {s1}) is not axis-aligned"
                )));
            }
        }
        Ok(Self { vertices })
    }

    /// Straight path from (−T, τ) to (T, τ).
    pub fn horizontal(half_width: f64, tau: f64) -> Result<Self> {
        Self::new(vec![(-half_width, tau), (half_width, tau)])
    }

    /// (−T, 1) → (−T, τ₀) → (T, τ₀) → (T, 1).
    pub fn detour(half_width: f64, tau0: f64) -> Result<Self> {
        Self::new(vec![
            (-half_width, 1.0),
            (-half_width, tau0),
            (half_width, tau0),
            (half_width, 1.0),
        ])
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.vertices.windows(2).map(|w| {
            let ((t0, s0), (t1, s1)) = (w[0], w[1]);
            if s0 == s1 {
                Segment::Time {
                    tau: s0,
                    from: t0,
                    to: t1,
                }
            } else {
                Segment::Tau {
                    t: t0,
                    from: s0,
                    to: s1,
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub grid: Vec<(f64, f64)>,
    /// ‖[H, H′]‖_F per grid point.
    pub commutator_residuals: Vec<f64>,
    /// ‖∂τH − ∂tH′‖_F per grid point, analytic derivatives.
    pub compatibility_residuals: Vec<f64>,
    pub max_commutator: f64,
    pub max_compatibility: f64,
    /// Points used for the finite-difference cross-check.
    pub fd_points: Vec<(f64, f64)>,
    /// Largest deviation between the analytic derivatives and central differences.
    pub max_fd_deviation: f64,
}

impl CurvatureReport {
    pub fn max_residual(&self) -> f64 {
        self.max_commutator.max(self.max_compatibility)
    }
}

/// Grid t ∈ [−5, 5] step 1, τ ∈ [0.5, 4] step 0.5.
pub fn standard_grid() -> Vec<(f64, f64)> {
    grid_from_ranges((-5.0, 5.0, 1.0), (0.5, 4.0, 0.5))
}

/// Cartesian grid over inclusive `(start, stop, step)` ranges.
pub fn grid_from_ranges(t: (f64, f64, f64), tau: (f64, f64, f64)) -> Vec<(f64, f64)> {
    let ts = inclusive_range(t);
    let taus = inclusive_range(tau);
    ts.iter()
        .flat_map(|&t| taus.iter().map(move |&s| (t, s)))
        .collect()
}

fn inclusive_range((start, stop, step): (f64, f64, f64)) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Both zero-curvature residuals at every grid point, plus a central
/// finite-difference check of the analytic derivatives at random points
/// inside the grid's bounding box.
pub fn curvature_check(
    family: &HamiltonianFamily,
    params: &ModelParams,
    grid: &[(f64, f64)],
) -> Result<CurvatureReport> {
    let partner = family
        .eval_partner
        .ok_or_else(|| family.unsupported("a commuting partner"))?;
    let dtau_h = family
        .eval_dtau_h
        .ok_or_else(|| family.unsupported("an analytic ∂τH"))?;
    let dt_partner = family
        .eval_dt_partner
        .ok_or_else(|| family.unsupported("an analytic ∂tH′"))?;
    if grid.is_empty() {
        return Err(Error::Precondition("curvature grid is empty".into()));
    }

    let mut commutator_residuals = Vec::with_capacity(grid.len());
    let mut compatibility_residuals = Vec::with_capacity(grid.len());
    for &(t, tau) in grid {
        let p = params.with_tau(tau);
        family.validate(&p)?;
        let h = (family.eval_h)(t, &p);
        let hp = partner(t, &p);
        commutator_residuals.push(frobenius(&commutator(&h, &hp)));
        compatibility_residuals.push(frobenius(&(dtau_h(t, &p) - dt_partner(t, &p))));
    }

    let (t_lo, t_hi) = bounds(grid.iter().map(|g| g.0));
    let (s_lo, s_hi) = bounds(grid.iter().map(|g| g.1));
    let mut rng = ChaCha8Rng::seed_from_u64(FD_SEED);
    let mut fd_points = Vec::with_capacity(FD_POINTS);
    let mut max_fd_deviation: f64 = 0.0;
    for _ in 0..FD_POINTS {
        let t = t_lo + (t_hi - t_lo) * rng.random::<f64>();
        // keep τ − FD_STEP inside the domain
        let tau = (s_lo + (s_hi - s_lo) * rng.random::<f64>()).max(10.0 * FD_STEP);
        let p = params.with_tau(tau);
        let (pp, pm) = (
            params.with_tau(tau + FD_STEP),
            params.with_tau(tau - FD_STEP),
        );
        let fd_dtau_h = ((family.eval_h)(t, &pp) - (family.eval_h)(t, &pm)) / c(2.0 * FD_STEP);
        let fd_dt_partner =
            (partner(t + FD_STEP, &p) - partner(t - FD_STEP, &p)) / c(2.0 * FD_STEP);
        max_fd_deviation = max_fd_deviation
            .max(frobenius(&(fd_dtau_h - dtau_h(t, &p))))
            .max(frobenius(&(fd_dt_partner - dt_partner(t, &p))));
        fd_points.push((t, tau));
    }

    Ok(CurvatureReport {
        grid: grid.to_vec(),
        max_commutator: commutator_residuals.iter().cloned().fold(0.0, f64::max),
        max_compatibility: compatibility_residuals.iter().cloned().fold(0.0, f64::max),
        commutator_residuals,
        compatibility_residuals,
        fd_points,
        max_fd_deviation,
    })
}

fn bounds(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

fn segment_propagator(
    family: &HamiltonianFamily,
    params: &ModelParams,
    segment: Segment,
    config: &IntegratorConfig,
) -> Result<(CMatrix, usize)> {
    let max_step = config.max_step / params.b.sqrt();
    match segment {
        Segment::Time { tau, from, to } => {
            let p = params.with_tau(tau);
            family.validate(&p)?;
            let gen = FnGenerator {
                dim: family.dim,
                f: |t| (family.eval_h)(t, &p),
            };
            propagate(&gen, from, to, config, max_step)
        }
        Segment::Tau { t, from, to } => {
            let partner = family
                .eval_partner
                .ok_or_else(|| family.unsupported("a commuting partner for τ-directed segments"))?;
            family.validate(params)?;
            let gen = FnGenerator {
                dim: family.dim,
                f: |tau| partner(t, &params.with_tau(tau)),
            };
            propagate(&gen, from, to, config, max_step)
        }
    }
}

/// Path-ordered exponential of −i(H dt + H′ dτ) along `path`.
///
/// The returned window spans the first and last vertex times, with τ of the
/// first vertex.
pub fn evolve_along_path(
    family: &HamiltonianFamily,
    params: &ModelParams,
    path: &ParamPath,
    config: &IntegratorConfig,
) -> Result<UnitaryResult> {
    config.validate()?;
    let mut u = identity(family.dim);
    let mut steps = 0;
    for segment in path.segments() {
        let (s, n) = segment_propagator(family, params, segment, config)?;
        u = s * u;
        steps += n;
    }
    let defect = unitarity_defect(&u);
    if !(defect <= UNITARITY_BOUND) {
        return Err(Error::Unitarity {
            defect,
            bound: UNITARITY_BOUND,
        });
    }
    let first = path.vertices()[0];
    let last = *path.vertices().last().expect("path has vertices");
    Ok(UnitaryResult {
        matrix: u,
        unitarity_defect: defect,
        steps_taken: steps,
        window: EvolutionWindow {
            t_start: first.0,
            t_end: last.0,
            tau: first.1,
        },
    })
}

/// Outcome of comparing the straight path at τ = 1 with the three-segment detour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationRecord {
    pub params: ModelParams,
    pub tau0: f64,
    pub half_width: f64,
    /// (P)₁,₁ along the straight path at τ = 1.
    pub p_straight: f64,
    /// (P)₁,₁ along the detour through τ₀.
    pub p_detour: f64,
    pub difference: f64,
    pub straight: TransitionMatrix,
    pub detour: TransitionMatrix,
    /// Probability matrices of the two τ-directed legs alone.
    pub leg_up: TransitionMatrix,
    pub leg_down: TransitionMatrix,
    /// Largest probability of leaving any level along either τ-directed leg.
    pub vertical_off_diagonal: f64,
    /// (P)₁,₁ of the horizontal leg at τ₀ alone.
    pub p_horizontal_leg: f64,
    /// p_horizontal_leg − p_straight; vanishes as the τ-legs become adiabatic.
    pub leg_difference: f64,
    pub max_unitarity_defect: f64,
}

/// Largest 1 − P_kk: the probability of leaving level k.
pub fn leakage(p: &TransitionMatrix) -> f64 {
    (0..p.dim()).map(|k| 1.0 - p.get(k, k)).fold(0.0, f64::max)
}

pub fn deformation_experiment(
    params: &ModelParams,
    tau0: f64,
    half_width: f64,
    config: &IntegratorConfig,
) -> Result<DeformationRecord> {
    if !(tau0 > 1.0) || !tau0.is_finite() {
        return Err(Error::domain(
            "tau0",
            tau0,
            "must exceed the starting value τ = 1",
        ));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::domain("T", half_width, "must be positive"));
    }
    let family = &THREE_LEVEL_TAU;
    let straight = evolve_along_path(
        family,
        params,
        &ParamPath::horizontal(half_width, 1.0)?,
        config,
    )?;
    let detour = evolve_along_path(
        family,
        params,
        &ParamPath::detour(half_width, tau0)?,
        config,
    )?;
    let up = evolve_along_path(
        family,
        params,
        &ParamPath::new(vec![(-half_width, 1.0), (-half_width, tau0)])?,
        config,
    )?;
    let down = evolve_along_path(
        family,
        params,
        &ParamPath::new(vec![(half_width, tau0), (half_width, 1.0)])?,
        config,
    )?;
    let across = evolve_along_path(
        family,
        params,
        &ParamPath::horizontal(half_width, tau0)?,
        config,
    )?;

    let straight_p = transition_matrix(&straight);
    let detour_p = transition_matrix(&detour);
    let leg_up = transition_matrix(&up);
    let leg_down = transition_matrix(&down);
    let (p_straight, p_detour) = (straight_p.get(0, 0), detour_p.get(0, 0));
    let p_horizontal_leg = transition_matrix(&across).get(0, 0);
    Ok(DeformationRecord {
        params: *params,
        tau0,
        half_width,
        p_straight,
        p_detour,
        difference: p_detour - p_straight,
        vertical_off_diagonal: leakage(&leg_up).max(leakage(&leg_down)),
        p_horizontal_leg,
        leg_difference: p_horizontal_leg - p_straight,
        straight: straight_p,
        detour: detour_p,
        leg_up,
        leg_down,
        max_unitarity_defect: [&straight, &detour, &up, &down, &across]
            .iter()
            .map(|u| u.unitarity_defect)
            .fold(0.0, f64::max),
    })
}

/// (P₂)₁,₁ of the effective two-level model at `tau`, in the infinite-time limit.
pub fn tau_scaling_probability(
    params: &ModelParams,
    tau: f64,
    policy: &LimitPolicy,
) -> Result<SurvivalEstimate> {
    let p = params.with_tau(tau);
    p.check_tau()?;
    survival_probability(&EFFECTIVE_TWO_LEVEL, &p, 0, policy)
}

/// (P₃,τ)₁,₁ of the deformed three-level model held at a fixed τ.
pub fn three_level_survival_at(
    params: &ModelParams,
    tau: f64,
    policy: &LimitPolicy,
) -> Result<SurvivalEstimate> {
    let p = params.with_tau(tau);
    p.check_tau()?;
    survival_probability(&THREE_LEVEL_TAU, &p, 0, policy)
}

//! Hamiltonian families of the linear-sweep models and the exact maps
//! (rotation, gauge shift, time rescaling) that relate them.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, from_real_rows, identity, kron_sum, CMatrix};

/// Physical parameters of a sweep: slope `b`, coupling `g`, deformation `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub b: f64,
    pub g: f64,
    pub tau: f64,
}

impl ModelParams {
    pub fn new(b: f64, g: f64) -> Self {
        Self { b, g, tau: 1.0 }
    }

    /// Unit slope with coupling √γ, so that g²/b = γ.
    pub fn from_gamma(gamma: f64) -> Self {
        Self::new(1.0, gamma.max(0.0).sqrt())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    /// Reduced coupling γ = g²/b.
    pub fn gamma(&self) -> f64 {
        self.g * self.g / self.b
    }

    pub fn check_slope(&self) -> Result<()> {
        if self.b > 0.0 && self.b.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(
                "b",
                self.b,
                "slope must be positive and finite",
            ))
        }
    }

    pub fn check_tau(&self) -> Result<()> {
        if self.tau > 0.0 && self.tau.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(
                "tau",
                self.tau,
                "deformation parameter must be positive and finite",
            ))
        }
    }

    fn check_coupling(&self) -> Result<()> {
        if self.g.is_finite() {
            Ok(())
        } else {
            Err(Error::domain("g", self.g, "coupling must be finite"))
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new(1.0, 1.0)
    }
}

/// Unchecked evaluator of a matrix-valued function of (t, params).
pub type MatrixFn = fn(f64, &ModelParams) -> CMatrix;

/// A named Hamiltonian family H(t; b, g, τ), optionally paired with a
/// commuting partner H′ and the analytic derivatives ∂τH and ∂tH′.
#[derive(Clone, Copy)]
pub struct HamiltonianFamily {
    pub name: &'static str,
    pub description: &'static str,
    pub dim: usize,
    pub uses_tau: bool,
    pub eval_h: MatrixFn,
    pub eval_partner: Option<MatrixFn>,
    pub eval_dtau_h: Option<MatrixFn>,
    pub eval_dt_partner: Option<MatrixFn>,
}

impl std::fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_partner", &self.eval_partner.is_some())
            .finish()
    }
}

impl HamiltonianFamily {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.check_slope()?;
        params.check_coupling()?;
        if self.uses_tau || self.eval_partner.is_some() {
            params.check_tau()?;
        }
        Ok(())
    }

    pub fn hamiltonian(&self, t: f64, params: &ModelParams) -> Result<CMatrix> {
        self.validate(params)?;
        Ok((self.eval_h)(t, params))
    }

    pub fn has_partner(&self) -> bool {
        self.eval_partner.is_some()
    }

    pub fn partner(&self, t: f64, params: &ModelParams) -> Result<CMatrix> {
        let f = self
            .eval_partner
            .ok_or_else(|| self.unsupported("a commuting partner"))?;
        self.validate(params)?;
        Ok(f(t, params))
    }

    pub fn dtau_hamiltonian(&self, t: f64, params: &ModelParams) -> Result<CMatrix> {
        let f = self
            .eval_dtau_h
            .ok_or_else(|| self.unsupported("an analytic ∂τH"))?;
        self.validate(params)?;
        Ok(f(t, params))
    }

    pub fn dt_partner(&self, t: f64, params: &ModelParams) -> Result<CMatrix> {
        let f = self
            .eval_dt_partner
            .ok_or_else(|| self.unsupported("an analytic ∂tH′"))?;
        self.validate(params)?;
        Ok(f(t, params))
    }

    /// Replaces the commuting partner, keeping everything else.
    pub fn with_partner(self, partner: MatrixFn) -> Self {
        Self {
            eval_partner: Some(partner),
            ..self
        }
    }

    pub(crate) fn unsupported(&self, missing: &'static str) -> Error {
        Error::UnsupportedFamily {
            family: self.name.to_string(),
            missing,
        }
    }
}

// Raw evaluators. Domain checks live in the public wrappers and in
// `HamiltonianFamily::validate`.

fn raw_lz(t: f64, p: &ModelParams) -> CMatrix {
    from_real_rows(2, &[p.b * t, p.g, p.g, -p.b * t])
}

fn raw_composite4(t: f64, p: &ModelParams) -> CMatrix {
    let h = raw_lz(t, p);
    kron_sum(&h, &h)
}

fn raw_rotated_composite4(t: f64, p: &ModelParams) -> CMatrix {
    rotate(&raw_composite4(t, p))
}

fn raw_three_level(t: f64, p: &ModelParams) -> CMatrix {
    let (bt, k) = (p.b * t, SQRT_2 * p.g);
    from_real_rows(3, &[2.0 * bt, k, 0.0, k, 0.0, k, 0.0, k, -2.0 * bt])
}

fn raw_three_level_tau(t: f64, p: &ModelParams) -> CMatrix {
    let bt = p.b * t;
    let k1 = (2.0 * p.tau).sqrt() * p.g;
    let k2 = SQRT_2 * p.g;
    from_real_rows(
        3,
        &[2.0 * bt * p.tau, k1, 0.0, k1, 0.0, k2, 0.0, k2, -2.0 * bt],
    )
}

fn raw_partner(t: f64, p: &ModelParams) -> CMatrix {
    let (b, g, tau) = (p.b, p.g, p.tau);
    let g2 = g * g;
    let h11 = g2 / (2.0 * b * (tau + 1.0)) + b * t * t;
    let h12 = g * t / (2.0 * tau).sqrt();
    let h13 = g2 / (2.0 * b * (tau + 1.0) * tau.sqrt());
    let h22 = g2 / (2.0 * b * tau);
    let h33 = g2 / (2.0 * b * tau * (tau + 1.0));
    from_real_rows(3, &[h11, h12, h13, h12, h22, 0.0, h13, 0.0, h33])
}

// ∂τ of the τ-family: only the (1,1) slope and the (1,2) coupling depend on τ.
fn raw_dtau_three_level_tau(t: f64, p: &ModelParams) -> CMatrix {
    let d12 = p.g / (2.0 * p.tau).sqrt();
    from_real_rows(3, &[2.0 * p.b * t, d12, 0.0, d12, 0.0, 0.0, 0.0, 0.0, 0.0])
}

// ∂t of the partner: the bt² and gt/√(2τ) entries.
fn raw_dt_partner(t: f64, p: &ModelParams) -> CMatrix {
    let d12 = p.g / (2.0 * p.tau).sqrt();
    from_real_rows(3, &[2.0 * p.b * t, d12, 0.0, d12, 0.0, 0.0, 0.0, 0.0, 0.0])
}

fn raw_effective_two_level(t: f64, p: &ModelParams) -> CMatrix {
    let k = (2.0 * p.tau).sqrt() * p.g;
    from_real_rows(2, &[2.0 * p.b * p.tau * t, k, k, 0.0])
}

/// The two-level sweep [[bt, g], [g, −bt]].
pub fn lz_hamiltonian(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    Ok(raw_lz(t, params))
}

/// Two uncoupled copies of the two-level sweep, H ⊗ 1 + 1 ⊗ H.
pub fn composite4_hamiltonian(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    Ok(raw_composite4(t, params))
}

/// Rotation by π/4 in the plane of the 2nd and 3rd basis states. Its rows
/// are the new basis states: row 2 the bright combination, row 3 the dark one.
pub fn dark_state_rotation() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    from_real_rows(
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, s, s, 0.0, //
            0.0, -s, s, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

fn rotate(h4: &CMatrix) -> CMatrix {
    let v = dark_state_rotation();
    // V is real orthogonal, so V⁻¹ = Vᵀ.
    &v * h4 * v.transpose()
}

/// Change of basis to the rows of [`dark_state_rotation`]. For the composite
/// Hamiltonian the 3rd row and column vanish: the antisymmetric combination
/// of the two middle states is dark.
pub fn rotate_out_dark_state(h4: &CMatrix) -> Result<CMatrix> {
    check_shape(h4, 4)?;
    Ok(rotate(h4))
}

/// [[2bt, √2g, 0], [√2g, 0, √2g], [0, √2g, −2bt]]
pub fn three_level_hamiltonian(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    Ok(raw_three_level(t, params))
}

/// The τ-deformed three-level model; equals [`three_level_hamiltonian`] at τ = 1.
pub fn three_level_tau_family(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    params.check_tau()?;
    Ok(raw_three_level_tau(t, params))
}

/// The operator H′ commuting with [`three_level_tau_family`] and satisfying ∂τH = ∂tH′.
pub fn commuting_partner(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    params.check_tau()?;
    Ok(raw_partner(t, params))
}

pub fn dtau_three_level_tau_family(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    params.check_tau()?;
    Ok(raw_dtau_three_level_tau(t, params))
}

pub fn dt_commuting_partner(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    params.check_tau()?;
    Ok(raw_dt_partner(t, params))
}

/// Upper 2×2 block of the τ-family once the 2–3 coupling and the third
/// slope are dropped: [[2bτt, √(2τ)g], [√(2τ)g, 0]].
pub fn effective_two_level(t: f64, params: &ModelParams) -> Result<CMatrix> {
    params.check_slope()?;
    params.check_tau()?;
    Ok(raw_effective_two_level(t, params))
}

/// H − shift(t)·1. Transition probabilities are unchanged.
pub fn gauge_shift(h: &CMatrix, t: f64, shift: impl Fn(f64) -> f64) -> CMatrix {
    h - identity(h.nrows()) * c(shift(t))
}

/// The unit-slope model with the same transition probabilities: (1, g/√b).
pub fn scaled_time_equivalent(params: &ModelParams) -> Result<ModelParams> {
    params.check_slope()?;
    Ok(ModelParams {
        b: 1.0,
        g: params.g / params.b.sqrt(),
        tau: params.tau,
    })
}

/// Removes row and column `k` (0-based).
pub fn delete_row_col(h: &CMatrix, k: usize) -> CMatrix {
    h.clone().remove_row(k).remove_column(k)
}

fn check_shape(h: &CMatrix, dim: usize) -> Result<()> {
    if h.nrows() == dim && h.ncols() == dim {
        Ok(())
    } else {
        Err(Error::Shape {
            expected: dim,
            rows: h.nrows(),
            cols: h.ncols(),
        })
    }
}

pub const LZ: HamiltonianFamily = HamiltonianFamily {
    name: "lz",
    description: "two-level sweep [[bt, g], [g, -bt]]",
    dim: 2,
    uses_tau: false,
    eval_h: raw_lz,
    eval_partner: None,
    eval_dtau_h: None,
    eval_dt_partner: None,
};

pub const COMPOSITE4: HamiltonianFamily = HamiltonianFamily {
    name: "composite4",
    description: "two uncoupled copies of the two-level sweep",
    dim: 4,
    uses_tau: false,
    eval_h: raw_composite4,
    eval_partner: None,
    eval_dtau_h: None,
    eval_dt_partner: None,
};

pub const COMPOSITE4_ROTATED: HamiltonianFamily = HamiltonianFamily {
    name: "composite4-rotated",
    description: "composite model with the dark state rotated out",
    dim: 4,
    uses_tau: false,
    eval_h: raw_rotated_composite4,
    eval_partner: None,
    eval_dtau_h: None,
    eval_dt_partner: None,
};

pub const THREE_LEVEL: HamiltonianFamily = HamiltonianFamily {
    name: "three-level",
    description: "bright-sector reduction of the composite model",
    dim: 3,
    uses_tau: false,
    eval_h: raw_three_level,
    eval_partner: None,
    eval_dtau_h: None,
    eval_dt_partner: None,
};

pub const THREE_LEVEL_TAU: HamiltonianFamily = HamiltonianFamily {
    name: "three-level-tau",
    description: "tau-deformed three-level model with its commuting partner",
    dim: 3,
    uses_tau: true,
    eval_h: raw_three_level_tau,
    eval_partner: Some(raw_partner),
    eval_dtau_h: Some(raw_dtau_three_level_tau),
    eval_dt_partner: Some(raw_dt_partner),
};

fn raw_corrupted_partner(t: f64, p: &ModelParams) -> CMatrix {
    let mut m = raw_partner(t, p);
    m[(1, 2)] = c(p.g);
    m[(2, 1)] = c(p.g);
    m
}

/// [`THREE_LEVEL_TAU`] with entry (2,3) of the partner set to g, so the pair no
/// longer commutes. Negative control for the curvature check.
pub fn corrupted_three_level_tau() -> HamiltonianFamily {
    HamiltonianFamily {
        name: "three-level-tau-corrupted",
        ..THREE_LEVEL_TAU
    }
    .with_partner(raw_corrupted_partner)
}

pub const EFFECTIVE_TWO_LEVEL: HamiltonianFamily = HamiltonianFamily {
    name: "effective-two-level",
    description: "large-tau effective model [[2b tau t, sqrt(2 tau) g], [sqrt(2 tau) g, 0]]",
    dim: 2,
    uses_tau: true,
    eval_h: raw_effective_two_level,
    eval_partner: None,
    eval_dtau_h: None,
    eval_dt_partner: None,
};

static REGISTRY: [HamiltonianFamily; 6] = [
    LZ,
    COMPOSITE4,
    COMPOSITE4_ROTATED,
    THREE_LEVEL,
    THREE_LEVEL_TAU,
    EFFECTIVE_TWO_LEVEL,
];

pub fn registry() -> &'static [HamiltonianFamily] {
    &REGISTRY
}

pub fn registered_names() -> Vec<String> {
    REGISTRY.iter().map(|f| f.name.to_string()).collect()
}

pub fn find_family(name: &str) -> Result<&'static HamiltonianFamily> {
    REGISTRY
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::UnknownModel {
            name: name.to_string(),
            available: registered_names(),
        })
}

//! Exact Taylor coefficients of the analytic solutions of p(2γ) = p(γ)².
//!
//! Matching powers of γ gives 2ⁿaₙ = Σₗ aₗaₙ₋ₗ. Isolating the two terms
//! containing aₙ,
//!
//! ```text
//! (2ⁿ − 2a₀) aₙ = Σ_{l=1}^{n−1} aₗ aₙ₋ₗ,
//! ```
//!
//! which leaves a₁ free on the a₀ = 1 branch and forces a₁ = 0 (hence the
//! zero function) on the a₀ = 0 branch.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Root of a₀ = a₀².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Zero,
    One,
}

impl Branch {
    fn a0(self) -> BigRational {
        match self {
            Branch::Zero => BigRational::zero(),
            Branch::One => BigRational::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceTable {
    pub branch: Branch,
    /// The a₁ requested by the caller.
    #[serde(serialize_with = "ser_rational")]
    pub seed: BigRational,
    /// The a₁ actually produced by the recurrence (the seed on the a₀ = 1 branch).
    #[serde(serialize_with = "ser_rational")]
    pub a1: BigRational,
    /// a₀ … a_N
    #[serde(serialize_with = "ser_rationals")]
    pub coefficients: Vec<BigRational>,
    /// aₙ = a₁ⁿ/n! (a₀ = 1 branch) or aₙ = 0 (a₀ = 0 branch), per n.
    pub closed_form_match: Vec<bool>,
}

impl RecurrenceTable {
    pub fn all_match(&self) -> bool {
        self.closed_form_match.iter().all(|&m| m)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Σ_{n≤N} aₙ γⁿ in floating point.
    pub fn partial_sum(&self, gamma: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc * gamma + rational_to_f64(a))
    }
}

fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: Serializer>(rs: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(|r| r.to_string()))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `-3`, `355/113`, or a finite decimal such as `-0.25` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Data(format!("cannot parse `{text}` as a rational number"));
    if let Some((int, frac)) = s.split_once('.') {
        let digits: String = format!("{int}{frac}");
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(numer, denom));
    }
    let r = BigRational::from_str(s).map_err(|_| bad())?;
    Ok(r)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Coefficients a₀ … a_N on the chosen branch with a₁ = `seed` where it is free.
pub fn solve_recurrence_branch(
    branch: Branch,
    seed: BigRational,
    order: usize,
) -> Result<RecurrenceTable> {
    if order == 0 {
        return Err(Error::Precondition(
            "recurrence order N must be at least 1".into(),
        ));
    }
    let a0 = branch.a0();
    let two_a0 = &a0 + &a0;
    let mut a = vec![a0];
    for n in 1..=order {
        let lead = BigRational::from_integer(BigInt::one() << n) - &two_a0;
        let rhs = (1..n).fold(BigRational::zero(), |acc, l| acc + &a[l] * &a[n - l]);
        let an = if lead.is_zero() {
            // 2a₁ = 2a₀a₁ holds identically: a₁ is free.
            seed.clone()
        } else {
            rhs / lead
        };
        a.push(an);
    }
    let a1 = a[1].clone();
    let closed_form_match = a
        .iter()
        .enumerate()
        .map(|(n, an)| match branch {
            Branch::Zero => an.is_zero(),
            Branch::One => *an == Pow::pow(&a1, n) / BigRational::from_integer(factorial(n)),
        })
        .collect();
    Ok(RecurrenceTable {
        branch,
        seed,
        a1,
        coefficients: a,
        closed_form_match,
    })
}

/// The a₀ = 1 branch.
pub fn solve_recurrence(a1: BigRational, order: usize) -> Result<RecurrenceTable> {
    solve_recurrence_branch(Branch::One, a1, order)
}

//! Small dense complex matrices (dimension at most 4) and the handful of
//! operations the propagator and the curvature checks need.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Builds a complex matrix from real row-major entries.
pub fn from_real_rows(dim: usize, entries: &[f64]) -> CMatrix {
    debug_assert_eq!(entries.len(), dim * dim);
    CMatrix::from_fn(dim, dim, |i, j| c(entries[i * dim + j]))
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ‖A − A†‖_F
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

/// ‖U†U − I‖_F
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker sum A ⊗ 1 + 1 ⊗ B.
pub fn kron_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    kron(a, &identity(b.nrows())) + kron(&identity(a.nrows()), b)
}

/// exp(−i K) for a Hermitian K.
///
/// Two-level matrices use the closed Pauli form; larger ones go through a
/// Hermitian eigendecomposition, so the result is unitary to rounding.
pub fn expm_neg_i_hermitian(k: &CMatrix) -> CMatrix {
    let n = k.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, (-I * k[(0, 0)].re).exp());
    }
    if n == 2 {
        // K = a0·1 + ax·σx + ay·σy + az·σz
        let a0 = 0.5 * (k[(0, 0)].re + k[(1, 1)].re);
        let az = 0.5 * (k[(0, 0)].re - k[(1, 1)].re);
        let off = 0.5 * (k[(0, 1)] + k[(1, 0)].conj());
        let (ax, ay) = (off.re, -off.im);
        let r = (ax * ax + ay * ay + az * az).sqrt();
        let (cos, sinc) = if r < 1e-8 {
            (1.0 - r * r / 2.0, 1.0 - r * r / 6.0)
        } else {
            (r.cos(), r.sin() / r)
        };
        let phase = (-I * a0).exp();
        let m00 = c(cos) - I * sinc * az;
        let m11 = c(cos) + I * sinc * az;
        let m01 = -I * sinc * Complex64::new(ax, -ay);
        let m10 = -I * sinc * Complex64::new(ax, ay);
        return CMatrix::from_row_slice(2, 2, &[m00, m01, m10, m11]) * phase;
    }
    let eig = SymmetricEigen::new(k.clone());
    let v = &eig.eigenvectors;
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-I * e).exp()));
    v * phases * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_combo(a0: f64, ax: f64, ay: f64, az: f64) -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c(a0 + az),
                Complex64::new(ax, -ay),
                Complex64::new(ax, ay),
                c(a0 - az),
            ],
        )
    }

    // Truncated Taylor series of exp(−iK), independent of both code paths.
    fn taylor_expm(k: &CMatrix) -> CMatrix {
        let n = k.nrows();
        let a = k * (-I);
        let mut term = identity(n);
        let mut sum = identity(n);
        for m in 1..60 {
            term = &term * &a / c(m as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn two_level_closed_form_matches_taylor() {
        for &(a0, ax, ay, az) in &[
            (0.3, 1.2, -0.4, 0.7),
            (0.0, 0.0, 0.0, 0.0),
            (-1.0, 1e-10, 0.0, 2e-10),
            (2.0, 0.0, 0.0, -1.5),
        ] {
            let k = pauli_combo(a0, ax, ay, az);
            let diff = frobenius(&(expm_neg_i_hermitian(&k) - taylor_expm(&k)));
            assert!(diff < 1e-13, "diff {diff}");
        }
    }

    #[test]
    fn eigen_route_matches_taylor_for_three_and_four_levels() {
        for dim in [3usize, 4] {
            let k = CMatrix::from_fn(dim, dim, |i, j| {
                let x = (i * 7 + j * 3) as f64 * 0.13;
                if i == j {
                    c(x.sin())
                } else if i < j {
                    Complex64::new(x.cos(), 0.5 * x.sin())
                } else {
                    Complex64::new(
                        ((j * 7 + i * 3) as f64 * 0.13).cos(),
                        -0.5 * ((j * 7 + i * 3) as f64 * 0.13).sin(),
                    )
                }
            });
            assert!(hermiticity_defect(&k) < 1e-15);
            let u = expm_neg_i_hermitian(&k);
            assert!(frobenius(&(&u - taylor_expm(&k))) < 1e-12);
            assert!(unitarity_defect(&u) < 1e-13);
        }
    }

    #[test]
    fn kron_sum_of_diagonals_adds_entries() {
        let a = from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]);
        let s = kron_sum(&a, &a);
        let expected = [2.0, 0.0, 0.0, -2.0];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(s[(i, i)], c(*e));
        }
    }
}

//! Small dense complex linear algebra on top of `nalgebra`.
//!
//! Everything here works on `DMatrix<Complex64>`; dimensions are expected to
//! stay below ~16, so every routine is a plain O(dim³) dense operation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && max_abs_diff(a, &a.adjoint()) <= tol
}

/// `P² = P` and `P† = P`.
pub fn is_projector(p: &CMatrix, tol: f64) -> bool {
    is_hermitian(p, tol) && max_abs_diff(&(p * p), p) <= tol
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Eigendecomposition of a Hermitian matrix, cached so that `exp(-i H t)`
/// can be evaluated at many times for the cost of one decomposition.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        // Symmetrize first so that round-off in the input cannot leak an
        // anti-Hermitian part into the decomposition.
        let sym = (h + h.adjoint()) * c(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        HermitianEigen {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        }
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let phases = CVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * v.adjoint()
    }

    /// `exp(-i H t) x` without forming the matrix.
    pub fn apply(&self, t: f64, x: &CVector) -> CVector {
        let v = &self.eigenvectors;
        let mut coeffs = v.adjoint() * x;
        for (k, e) in self.eigenvalues.iter().enumerate() {
            coeffs[k] *= Complex64::from_polar(1.0, -e * t);
        }
        v * coeffs
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Integer matrix power by repeated squaring.
pub fn matrix_power(a: &CMatrix, mut n: u64) -> CMatrix {
    let mut result = identity(a.nrows());
    let mut base = a.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn vector_norm_sqr(x: &CVector) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn pauli_exponential_matches_closed_form() {
        let t = 0.7_f64;
        let u = expm_hermitian(&pauli_x(), t);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)],
        );
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn propagator_is_unitary() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.2, 0.3),
                c(0.0, -0.1),
                c(0.2, -0.3),
                c(-0.5, 0.0),
                c(0.4, 0.0),
                c(0.0, 0.1),
                c(0.4, 0.0),
                c(0.3, 0.0),
            ],
        );
        let u = expm_hermitian(&h, 2.3);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(3)) < 1e-13);
        assert!((spectral_norm(&u) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn apply_agrees_with_matrix() {
        let h = pauli_x() * c(0.3, 0.0);
        let eig = HermitianEigen::new(&h);
        let x = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let direct = eig.propagator(1.9) * &x;
        let applied = eig.apply(1.9, &x);
        assert!((direct - applied).norm() < 1e-14);
    }

    #[test]
    fn power_by_squaring() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.1), c(0.2, 0.0), c(0.0, 0.3), c(0.9, 0.0)]);
        let mut naive = identity(2);
        for _ in 0..13 {
            naive = &naive * &a;
        }
        assert!(max_abs_diff(&matrix_power(&a, 13), &naive) < 1e-14);
        assert!(max_abs_diff(&matrix_power(&a, 0), &identity(2)) == 0.0);
    }
}

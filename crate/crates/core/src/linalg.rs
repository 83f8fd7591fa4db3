//! Dense complex linear-algebra helpers shared by the analysis modules.
//!
//! Everything here is a thin layer over `nalgebra`; the helpers fix the
//! ordering and normalization conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 100_000;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|x| x.conj())
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Full SVD with singular triplets ordered by descending singular value.
pub struct SortedSvd {
    pub sigma: Vec<f64>,
    /// Left singular vectors, column `k` pairs with `sigma[k]`.
    pub u: CMatrix,
    /// Right singular vectors, column `k` pairs with `sigma[k]`.
    pub v: CMatrix,
}

pub fn svd_sorted(m: &CMatrix) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = CMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = CMatrix::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]);
    SortedSvd { sigma, u, v }
}

/// Diagonal similarity `D⁻¹ M D` with power-of-two scalings that equalize
/// row and column norms (Parlett-Reinsch). Eigenvalues are unchanged; for
/// strongly graded matrices such as companions their accuracy improves by
/// orders of magnitude.
pub fn balance(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut a = m.clone();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let (mut col, mut row) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                col += a[(j, i)].l1_norm();
                row += a[(i, j)].l1_norm();
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let total = col + row;
            while col < row / 2.0 {
                col *= 2.0;
                row /= 2.0;
                f *= 2.0;
            }
            while col >= row * 2.0 {
                col /= 2.0;
                row *= 2.0;
                f /= 2.0;
            }
            if col + row < 0.95 * total {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

/// Eigenvalues of a general complex matrix via the complex Schur form of
/// the balanced matrix.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = nalgebra::linalg::Schur::try_new(balance(m), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Sort by descending real part, ties by descending imaginary part.
pub fn sort_desc_re(values: &mut [Complex64]) {
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().try_inverse()
}

/// Solve the real symmetric eigenproblem, eigenvalues ascending.
pub fn symmetric_eigen(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = RMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues down to `-tol * lambda_max` are clipped to zero; anything more
/// negative is a definiteness error.
pub fn psd_sqrt(m: &RMatrix, tol: f64) -> Result<RMatrix> {
    let (values, vectors) = symmetric_eigen(m);
    let lambda_max = values.iter().copied().fold(0.0_f64, |a, b| a.max(b.abs()));
    let floor = -tol * lambda_max.max(f64::MIN_POSITIVE);
    if let Some(&min) = values.first() {
        if min < floor {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, floor });
        }
    }
    let roots = RMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| l.max(0.0).sqrt()),
    ));
    let out = &vectors * roots * vectors.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Rotate `v` so its first component with magnitude above `1e-12 * ‖v‖∞`
/// is real and positive, then scale to unit 2-norm.
pub fn normalize_phase(v: &CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let big = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let pivot = v.iter().find(|x| x.norm() > 1e-12 * big).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v.map(|x| x * phase / norm)
}

/// Inverse iteration for the eigenvector of `m` nearest `shift`.
///
/// `start` seeds the iteration; returns a unit vector.
pub fn inverse_iteration(m: &CMatrix, shift: Complex64, start: &CVector, iterations: usize) -> CVector {
    let n = m.nrows();
    let scale = spectral_norm(m).max(1.0);
    let mut shifted = m - CMatrix::identity(n, n) * shift;
    // Keep the shifted matrix numerically invertible at an exact eigenvalue.
    let nudge = Complex64::new(1e-14 * scale, 0.0);
    for i in 0..n {
        shifted[(i, i)] -= nudge;
    }
    let lu = shifted.lu();
    let mut x = start.normalize();
    for _ in 0..iterations {
        match lu.solve(&x) {
            Some(y) if y.norm().is_finite() && y.norm() > 0.0 => x = y.normalize(),
            _ => break,
        }
    }
    x
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

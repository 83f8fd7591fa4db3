//! Frequency-dependent network Jacobian.
//!
//! Rows are ordered `[ΔP; ΔQ]`, columns `[Δθ; ΔU/U]`, each block indexed by
//! converter node. The line dynamics enter through
//!
//! ```text
//! α(s) = ω0² / (s² + ω0²),   β(s) = ω0·s / (s² + ω0²),   γ = α + jβ
//! ```
//!
//! which gives `α² + β² = ω0²/(s² + ω0²)`, so a zero `z` of the Jacobian
//! satisfies `(z/ω0)² + 1 = λ` for the eigenvalues `λ` of `S⁻¹ Y S̄⁻¹ Ȳ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::network::OperatingMatrices;

fn denom(s: Complex64, omega0: f64) -> Result<Complex64> {
    let d = s * s + omega0 * omega0;
    if d.norm() <= 1e-12 * (s.norm_sqr() + omega0 * omega0) {
        return Err(Error::NetworkPole { s_re: s.re, s_im: s.im });
    }
    Ok(d)
}

pub fn alpha(s: Complex64, omega0: f64) -> Result<Complex64> {
    Ok(Complex64::new(omega0 * omega0, 0.0) / denom(s, omega0)?)
}

pub fn beta(s: Complex64, omega0: f64) -> Result<Complex64> {
    Ok(s * omega0 / denom(s, omega0)?)
}

pub fn gamma(s: Complex64, omega0: f64) -> Result<Complex64> {
    Ok(alpha(s, omega0)? + Complex64::i() * beta(s, omega0)?)
}

pub fn alpha_ds(s: Complex64, omega0: f64) -> Result<Complex64> {
    let d = denom(s, omega0)?;
    Ok(-2.0 * s * omega0 * omega0 / (d * d))
}

pub fn beta_ds(s: Complex64, omega0: f64) -> Result<Complex64> {
    let d = denom(s, omega0)?;
    Ok(omega0 * (omega0 * omega0 - s * s) / (d * d))
}

/// `J_sys(s) = J_NET(s) + K` for a fixed operating point.
#[derive(Clone, Debug)]
pub struct NetworkJacobian {
    y: CMatrix,
    p: Vec<f64>,
    q: Vec<f64>,
    omega0: f64,
    droop: Vec<f64>,
}

impl NetworkJacobian {
    pub fn new(y: CMatrix, p: Vec<f64>, q: Vec<f64>, omega0: f64) -> Result<Self> {
        let n = y.nrows();
        if y.ncols() != n || p.len() != n || q.len() != n {
            return Err(Error::Shape("Y, P and Q sizes disagree".into()));
        }
        Ok(Self { y, p, q, omega0, droop: vec![0.0; n] })
    }

    pub fn from_operating(mats: &OperatingMatrices, omega0: f64) -> Result<Self> {
        Self::new(mats.y.clone(), mats.p(), mats.q(), omega0)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn droop(&self) -> &[f64] {
        &self.droop
    }

    pub fn has_droop(&self) -> bool {
        self.droop.iter().any(|&k| k != 0.0)
    }

    /// Copy with `gain` added at the Q-U diagonal entry of `node`.
    pub fn apply_droop(&self, node: usize, gain: f64) -> Result<Self> {
        if node >= self.n() {
            return Err(Error::NodeOutOfRange { node, count: self.n() });
        }
        if !gain.is_finite() {
            return Err(Error::InvalidModel(format!("droop gain must be finite, got {gain}")));
        }
        let mut out = self.clone();
        out.droop[node] += gain;
        Ok(out)
    }

    /// Same gain added at every node.
    pub fn apply_uniform_droop(&self, gain: f64) -> Result<Self> {
        (0..self.n()).try_fold(self.clone(), |acc, i| acc.apply_droop(i, gain))
    }

    fn add_droop(&self, j: &mut CMatrix) {
        let n = self.n();
        for (i, &k) in self.droop.iter().enumerate() {
            j[(n + i, n + i)] += k;
        }
    }

    /// Kronecker-form assembly of `J_NET(s) + K`.
    pub fn assemble(&self, s: Complex64) -> Result<CMatrix> {
        let a = alpha(s, self.omega0)?;
        let b = beta(s, self.omega0)?;
        let mut j = self.kron_part(a, b);
        let n = self.n();
        for i in 0..n {
            let (p, q) = (Complex64::new(self.p[i], 0.0), Complex64::new(self.q[i], 0.0));
            j[(i, i)] -= q;
            j[(i, n + i)] += p;
            j[(n + i, i)] += p;
            j[(n + i, n + i)] += q;
        }
        self.add_droop(&mut j);
        Ok(j)
    }

    fn kron_part(&self, a: Complex64, b: Complex64) -> CMatrix {
        let re = self.y.map(|v| Complex64::new(v.re, 0.0));
        let im = self.y.map(|v| Complex64::new(v.im, 0.0));
        let rot = CMatrix::from_row_slice(2, 2, &[a, b, -b, a]);
        let skew = CMatrix::from_row_slice(2, 2, &[b, -a, a, b]);
        linalg::kron(&rot, &re) + linalg::kron(&skew, &im)
    }

    /// Per-node 2×2 block assembly. The diagonal block uses the self term
    /// `Re(U_i B_ii Ū_i) = Y_ii` (`Im(Y_ii) = 0`) so both routes describe
    /// the same operator.
    pub fn assemble_blocks(&self, s: Complex64) -> Result<CMatrix> {
        let a = alpha(s, self.omega0)?;
        let b = beta(s, self.omega0)?;
        let n = self.n();
        let mut j = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for k in 0..n {
                let yik = self.y[(i, k)];
                let blk = if i == k {
                    let (p, q) = (self.p[i], self.q[i]);
                    [a * yik.re - q, b * yik.re + p, -b * yik.re + p, a * yik.re + q]
                } else {
                    [
                        a * yik.re + b * yik.im,
                        b * yik.re - a * yik.im,
                        -b * yik.re + a * yik.im,
                        a * yik.re + b * yik.im,
                    ]
                };
                j[(i, k)] = blk[0];
                j[(i, n + k)] = blk[1];
                j[(n + i, k)] = blk[2];
                j[(n + i, n + k)] = blk[3];
            }
        }
        self.add_droop(&mut j);
        Ok(j)
    }

    /// `∂J/∂s`, from the analytic derivatives of α and β.
    pub fn assemble_ds(&self, s: Complex64) -> Result<CMatrix> {
        Ok(self.kron_part(alpha_ds(s, self.omega0)?, beta_ds(s, self.omega0)?))
    }

    /// `det J(s)`.
    pub fn det(&self, s: Complex64) -> Result<Complex64> {
        Ok(linalg::det(&self.assemble(s)?))
    }

    /// Block form of `W J_NET W⁻¹`: `[[γ̄Y, jS], [−jS̄, γȲ]]` (no droop).
    pub fn similarity_block_form(&self, s: Complex64) -> Result<CMatrix> {
        let g = gamma(s, self.omega0)?;
        let gc = alpha(s, self.omega0)? - Complex64::i() * beta(s, self.omega0)?;
        let n = self.n();
        let mut out = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for k in 0..n {
                out[(i, k)] = gc * self.y[(i, k)];
                out[(n + i, n + k)] = g * self.y[(i, k)].conj();
            }
            let si = Complex64::new(self.p[i], self.q[i]);
            out[(i, n + i)] = Complex64::i() * si;
            out[(n + i, i)] = -Complex64::i() * si.conj();
        }
        Ok(out)
    }
}

/// `W = (1/√2)[[1, j], [1, −j]] ⊗ I_N`.
pub fn w_matrix(n: usize) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let core = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(h, 0.0), Complex64::new(0.0, h), Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
    );
    linalg::kron(&core, &CMatrix::identity(n, n))
}

/// `W J W⁻¹` (W is unitary).
pub fn similarity_w(j: &CMatrix) -> Result<CMatrix> {
    let (r, c) = j.shape();
    if r != c || r % 2 != 0 {
        return Err(Error::Shape(format!("similarity needs a 2N×2N matrix, got {r}x{c}")));
    }
    let w = w_matrix(r / 2);
    Ok(&w * j * w.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};

    const W0: f64 = 314.159_265_358_979_3;

    fn sample(n: usize, seed: u64) -> NetworkJacobian {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut y = CMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..=i {
                let v = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                y[(i, k)] = v;
                y[(k, i)] = v.conj();
            }
            y[(i, i)] = c(y[(i, i)].re.abs() + 5.0, 0.0);
        }
        let p = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let q = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        NetworkJacobian::new(y, p, q, W0).unwrap()
    }

    #[test]
    fn single_node_real_susceptance() {
        let jac = NetworkJacobian::new(CMatrix::from_element(1, 1, c(2.0, 0.0)), vec![0.0], vec![0.0], W0).unwrap();
        let s = c(100.0, 0.0);
        let (a, b) = (alpha(s, W0).unwrap(), beta(s, W0).unwrap());
        let j = jac.assemble(s).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[a * 2.0, b * 2.0, -b * 2.0, a * 2.0]);
        assert!(max_abs_diff(&j, &expect) < 1e-15);
    }

    #[test]
    fn real_on_positive_axis() {
        let jac = sample(3, 1);
        let j = jac.assemble(c(250.0, 0.0)).unwrap();
        assert!(j.iter().all(|v| v.im.abs() < 1e-13));
    }

    #[test]
    fn block_route_matches_kronecker() {
        for seed in 0..10 {
            let jac = sample(3, seed).apply_droop(1, 2.5).unwrap();
            let s = c(40.0 + seed as f64 * 37.0, 13.0 * seed as f64);
            let a = jac.assemble(s).unwrap();
            let b = jac.assemble_blocks(s).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-12 * linalg::frobenius(&a).max(1.0));
        }
    }

    #[test]
    fn droop_touches_single_entry() {
        let jac = sample(3, 4);
        let s = c(300.0, 0.0);
        let base = jac.assemble(s).unwrap();
        assert_eq!(jac.apply_droop(2, 0.0).unwrap().assemble(s).unwrap(), base);
        let diff = jac.apply_droop(2, 10.0).unwrap().assemble(s).unwrap() - &base;
        for ((i, k), v) in diff.iter().enumerate().map(|(idx, v)| ((idx % 6, idx / 6), v)) {
            if (i, k) == (5, 5) {
                assert!((v - 10.0).norm() < 1e-12);
            } else {
                assert_eq!(*v, c(0.0, 0.0));
            }
        }
        assert!(matches!(jac.apply_droop(3, 1.0), Err(Error::NodeOutOfRange { node: 3, count: 3 })));
    }

    #[test]
    fn pole_at_nominal_frequency() {
        let jac = sample(2, 0);
        assert!(matches!(jac.assemble(c(0.0, W0)), Err(Error::NetworkPole { .. })));
    }

    #[test]
    fn alpha_beta_modulus() {
        for s in [1.0, 50.0, 314.0, 2000.0] {
            let s = c(s, 0.0);
            let lhs = alpha(s, W0).unwrap().powi(2) + beta(s, W0).unwrap().powi(2);
            let rhs = W0 * W0 / (s * s + W0 * W0);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_difference() {
        let jac = sample(2, 9);
        let s = c(420.0, 30.0);
        let h = 1e-3;
        let fd = (jac.assemble(s + h).unwrap() - jac.assemble(s - h).unwrap()) / c(2.0 * h, 0.0);
        let an = jac.assemble_ds(s).unwrap();
        assert!(max_abs_diff(&fd, &an) < 1e-8 * linalg::frobenius(&an));
    }

    #[test]
    fn similarity_identity_and_determinant() {
        let i6 = CMatrix::identity(6, 6);
        assert!(max_abs_diff(&similarity_w(&i6).unwrap(), &i6) < 1e-15);
        let j = sample(3, 2).assemble(c(123.0, 45.0)).unwrap();
        let t = similarity_w(&j).unwrap();
        let (d0, d1) = (linalg::det(&j), linalg::det(&t));
        assert!((d0 - d1).norm() < 1e-10 * d0.norm());
    }

    #[test]
    fn similarity_matches_block_form() {
        for seed in 0..5 {
            let jac = sample(2, 20 + seed);
            let s = c(10.0 + 90.0 * seed as f64, -20.0);
            let t = similarity_w(&jac.assemble(s).unwrap()).unwrap();
            let blk = jac.similarity_block_form(s).unwrap();
            assert!(max_abs_diff(&t, &blk) < 1e-10 * linalg::frobenius(&blk));
        }
    }

    #[test]
    fn scalar_zero_location() {
        // Y = b, S = |S|: det vanishes at s = ω0 √(b²/|S|² − 1)
        let jac = NetworkJacobian::new(CMatrix::from_element(1, 1, c(2.0, 0.0)), vec![1.0], vec![0.0], W0).unwrap();
        let z = W0 * 3f64.sqrt();
        let d = jac.det(c(z, 0.0)).unwrap();
        assert!(d.norm() < 1e-12);
    }
}

//! Non-minimum-phase zeros of the network Jacobian.
//!
//! Three routes: singular values of `B½ D B½`, eigenvalues of
//! `S⁻¹ Y S̄⁻¹ Ȳ`, and a brute-force scan of `det J(s)` on the real axis.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::netjac::NetworkJacobian;
use crate::network::OperatingMatrices;

/// Half-width of the band around σ = 1 treated as marginal.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Residual `σ_min(J)/‖J‖` below which a point counts as a zero.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 2048;
const BISECTION_REL_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    /// σ > 1: real zero in the right half-plane.
    Nmp,
    /// σ within [`MARGINAL_TOL`] of 1.
    Marginal,
    /// σ < 1: no real positive zero.
    Minimum,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroBranch {
    pub sigma: f64,
    pub z: Option<f64>,
    pub kind: BranchKind,
}

impl ZeroBranch {
    fn from_sigma(sigma: f64, omega0: f64) -> Self {
        let kind = if sigma > 1.0 + MARGINAL_TOL {
            BranchKind::Nmp
        } else if sigma >= 1.0 - MARGINAL_TOL {
            BranchKind::Marginal
        } else {
            BranchKind::Minimum
        };
        let z = (kind == BranchKind::Nmp).then(|| omega0 * (sigma * sigma - 1.0).sqrt());
        Self { sigma, z, kind }
    }

    pub fn is_nmp(&self) -> bool {
        self.kind == BranchKind::Nmp
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NmpZeroSet {
    pub omega0: f64,
    /// Ordered by descending σ.
    pub branches: Vec<ZeroBranch>,
}

impl NmpZeroSet {
    /// NMP zero locations, ascending.
    pub fn zeros(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.branches.iter().filter_map(|b| b.z).collect();
        z.sort_by(f64::total_cmp);
        z
    }

    /// The NMP zero closest to the origin.
    pub fn dominant(&self) -> Option<f64> {
        self.zeros().first().copied()
    }
}

/// Closed-form zeros: `z_i = ω0 √(σ_i² − 1)` over the singular values of
/// `B½ D B½`.
pub fn zeros_closed_form(mats: &OperatingMatrices, omega0: f64) -> NmpZeroSet {
    let bh = linalg::to_complex(&mats.b_half);
    let m = &bh * linalg::diag(&mats.d) * &bh;
    let branches = linalg::singular_values(&m)
        .into_iter()
        .map(|s| ZeroBranch::from_sigma(s, omega0))
        .collect();
    NmpZeroSet { omega0, branches }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenBranch {
    pub lambda: Complex64,
    pub z: Option<f64>,
}

/// Eigenvalues of `S⁻¹ Y S̄⁻¹ Ȳ`, descending real part, with
/// `z = ω0 √(λ − 1)` where λ is real and above 1.
pub fn zeros_eigen_route(mats: &OperatingMatrices, omega0: f64) -> Result<Vec<EigenBranch>> {
    let s_inv: Vec<Complex64> = mats.s.iter().map(|s| s.inv()).collect();
    let s_inv_c: Vec<Complex64> = s_inv.iter().map(|s| s.conj()).collect();
    let m = linalg::diag(&s_inv) * &mats.y * linalg::diag(&s_inv_c) * linalg::conj(&mats.y);
    let mut lambdas = linalg::eigenvalues(&m)?;
    linalg::sort_desc_re(&mut lambdas);
    Ok(lambdas
        .into_iter()
        .map(|lambda| {
            let real = lambda.im.abs() <= 1e-8 * lambda.norm().max(1e-300);
            let z = (real && lambda.re > 1.0 + MARGINAL_TOL).then(|| omega0 * (lambda.re - 1.0).sqrt());
            EigenBranch { lambda, z }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRoot {
    pub z: f64,
    /// Found as a singular-value dip without a determinant sign change.
    pub multiplicity_suspect: bool,
    /// `σ_min(J(z)) / ‖J(z)‖`.
    pub residual: f64,
}

/// Log-spaced grid on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Relative residual `σ_min(J(s))/σ_max(J(s))` at real `s`.
pub fn residual_at(jac: &NetworkJacobian, s: f64) -> Result<f64> {
    let sv = linalg::singular_values(&jac.assemble(Complex64::new(s, 0.0))?);
    Ok(sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE))
}

fn real_det(jac: &NetworkJacobian, s: f64) -> Result<f64> {
    Ok(jac.det(Complex64::new(s, 0.0))?.re)
}

fn bisect(jac: &NetworkJacobian, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Result<f64> {
    let (lo0, hi0) = (lo, hi);
    for _ in 0..400 {
        if hi - lo <= BISECTION_REL_TOL * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = real_det(jac, mid)?;
        if !f_mid.is_finite() {
            return Err(Error::Bisection { lo: lo0, hi: hi0 });
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bisection { lo: lo0, hi: hi0 })
}

/// Golden-section minimization of `f` over `[a, b]` in log coordinates.
pub(crate) fn golden_min_log(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1.exp());
    let mut f2 = f(x2.exp());
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2.exp());
        }
    }
    if f1 < f2 { (x1.exp(), f1) } else { (x2.exp(), f2) }
}

/// Real roots of `det J(s)` on `[s_min, s_max]`: sign changes on a log grid
/// refined by bisection, plus singular-value dips that touch zero without a
/// sign change. Sorted ascending.
pub fn zeros_oracle(jac: &NetworkJacobian, s_min: f64, s_max: f64, grid_points: usize) -> Result<Vec<OracleRoot>> {
    if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
        return Err(Error::InvalidRange(format!("need 0 < s_min < s_max, got [{s_min}, {s_max}]")));
    }
    if grid_points < 16 {
        return Err(Error::InvalidRange(format!("need at least 16 grid points, got {grid_points}")));
    }
    let grid = log_grid(s_min, s_max, grid_points);
    let samples: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&s| {
            let j = jac.assemble(Complex64::new(s, 0.0))?;
            let sv = linalg::singular_values(&j);
            Ok((linalg::det(&j).re, sv.last().copied().unwrap_or(0.0), sv[0]))
        })
        .collect::<Result<_>>()?;

    let mut brackets: Vec<usize> = Vec::new();
    let mut roots: Vec<OracleRoot> = Vec::new();
    for k in 0..grid.len() - 1 {
        let (d0, d1) = (samples[k].0, samples[k + 1].0);
        if d0 == 0.0 {
            roots.push(OracleRoot { z: grid[k], multiplicity_suspect: false, residual: 0.0 });
            brackets.push(k);
        } else if d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
            brackets.push(k);
        }
    }
    let bisected: Vec<Result<f64>> = brackets
        .par_iter()
        .filter(|&&k| samples[k].0 != 0.0)
        .map(|&k| bisect(jac, grid[k], grid[k + 1], samples[k].0))
        .collect();
    for z in bisected {
        let z = z?;
        roots.push(OracleRoot { z, multiplicity_suspect: false, residual: residual_at(jac, z)? });
    }

    // Even-multiplicity candidates: σ_min local minima not already bracketed.
    for k in 1..grid.len() - 1 {
        let s = samples[k].1;
        if !(s <= samples[k - 1].1 && s <= samples[k + 1].1) {
            continue;
        }
        if brackets.iter().any(|&b| b + 1 >= k && b <= k) {
            continue;
        }
        let (z, r) = golden_min_log(|x| residual_at(jac, x).unwrap_or(f64::INFINITY), grid[k - 1], grid[k + 1], 80);
        if r < ZERO_RESIDUAL_TOL {
            roots.push(OracleRoot { z, multiplicity_suspect: true, residual: r });
        }
    }
    roots.sort_by(|a, b| a.z.total_cmp(&b.z));
    roots.dedup_by(|b, a| (a.z - b.z).abs() <= 1e-9 * a.z);
    Ok(roots)
}

/// Default scan range `[1, 10·ω0]`.
pub fn default_oracle(jac: &NetworkJacobian) -> Result<Vec<OracleRoot>> {
    zeros_oracle(jac, 1.0, 10.0 * jac.omega0(), DEFAULT_GRID_POINTS)
}

#[derive(Clone, Debug)]
pub struct ZeroDirection {
    pub z: f64,
    /// Orthonormal basis of the left null space; one vector when simple.
    pub vectors: Vec<CVector>,
    pub residual: f64,
}

impl ZeroDirection {
    pub fn is_multiple(&self) -> bool {
        self.vectors.len() > 1
    }

    pub fn primary(&self) -> &CVector {
        &self.vectors[0]
    }
}

/// Unit output direction `w` with `wᴴ J(z) = 0`: the left singular vector of
/// the smallest singular value, phase-fixed so its first nonzero component
/// is real positive.
pub fn zero_direction(jac: &NetworkJacobian, z: f64) -> Result<ZeroDirection> {
    let j = jac.assemble(Complex64::new(z, 0.0))?;
    direction_of(&j, z)
}

pub(crate) fn direction_of(j: &CMatrix, z: f64) -> Result<ZeroDirection> {
    let svd = linalg::svd_sorted(j);
    let norm = svd.sigma[0].max(f64::MIN_POSITIVE);
    let n = svd.sigma.len();
    let residual = svd.sigma[n - 1] / norm;
    if residual > ZERO_RESIDUAL_TOL {
        return Err(Error::NotAZero { z, residual, tolerance: ZERO_RESIDUAL_TOL });
    }
    let null: Vec<usize> = (0..n).filter(|&k| svd.sigma[k] / norm <= ZERO_RESIDUAL_TOL).collect();
    let vectors = if null.len() == 1 {
        vec![linalg::normalize_phase(&svd.u.column(n - 1).into_owned())]
    } else {
        // Keep the basis orthonormal; phase-fix only the leading vector.
        null.iter()
            .rev()
            .enumerate()
            .map(|(i, &k)| {
                let v = svd.u.column(k).into_owned();
                if i == 0 { linalg::normalize_phase(&v) } else { v.normalize() }
            })
            .collect()
    };
    Ok(ZeroDirection { z, vectors, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::network::{build_operating_matrices, OperatingPoint, ReducedNetwork, OMEGA0_50HZ};
    use nalgebra::DMatrix;

    fn scalar_case() -> (OperatingMatrices, NetworkJacobian) {
        let net = ReducedNetwork::new(vec!["a".into()], DMatrix::from_element(1, 1, 1.0), OMEGA0_50HZ).unwrap();
        let op = OperatingPoint::equivalent_from_d(net.node_order(), &[c(2f64.sqrt(), 0.0)]).unwrap();
        let mats = build_operating_matrices(&net, &op).unwrap();
        let jac = NetworkJacobian::from_operating(&mats, OMEGA0_50HZ).unwrap();
        (mats, jac)
    }

    #[test]
    fn scalar_closed_form_gives_omega0() {
        let (mats, _) = scalar_case();
        let set = zeros_closed_form(&mats, OMEGA0_50HZ);
        assert!((set.branches[0].sigma - 2f64.sqrt()).abs() < 1e-14);
        assert!((set.dominant().unwrap() - OMEGA0_50HZ).abs() < 1e-10);
    }

    #[test]
    fn scalar_eigen_route_is_sigma_squared() {
        let (mats, _) = scalar_case();
        let ev = zeros_eigen_route(&mats, OMEGA0_50HZ).unwrap();
        assert!((ev[0].lambda - 2.0).norm() < 1e-14);
    }

    #[test]
    fn scalar_oracle_finds_omega0() {
        let (_, jac) = scalar_case();
        let roots = default_oracle(&jac).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].z - OMEGA0_50HZ).abs() < 1e-6 * OMEGA0_50HZ);
        assert!(!roots[0].multiplicity_suspect);
    }

    #[test]
    fn scalar_direction_annihilates() {
        let (_, jac) = scalar_case();
        let dir = zero_direction(&jac, OMEGA0_50HZ).unwrap();
        let w = dir.primary();
        assert!((w.norm() - 1.0).abs() < 1e-14);
        let j = jac.assemble(c(OMEGA0_50HZ, 0.0)).unwrap();
        assert!((w.adjoint() * &j).norm() < 1e-7 * linalg::spectral_norm(&j));
        let proj = w * w.adjoint();
        assert!((linalg::hermitian_max_eigenvalue(&proj) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_zero_rejected() {
        let (_, jac) = scalar_case();
        assert!(matches!(zero_direction(&jac, 100.0), Err(Error::NotAZero { .. })));
    }

    #[test]
    fn marginal_and_minimum_branches() {
        assert_eq!(ZeroBranch::from_sigma(1.0, 1.0).kind, BranchKind::Marginal);
        assert_eq!(ZeroBranch::from_sigma(0.5, 1.0).kind, BranchKind::Minimum);
        assert!(ZeroBranch::from_sigma(1.0 + 1e-10, 1.0).z.is_none());
    }

    #[test]
    fn double_root_found_by_dip_scan() {
        // Two identical decoupled nodes: det J = d(s)², no sign change.
        let net = ReducedNetwork::new(vec!["a".into(), "b".into()], DMatrix::identity(2, 2), OMEGA0_50HZ).unwrap();
        let d = [c(2f64.sqrt(), 0.0); 2];
        let op = OperatingPoint::equivalent_from_d(net.node_order(), &d).unwrap();
        let mats = build_operating_matrices(&net, &op).unwrap();
        let jac = NetworkJacobian::from_operating(&mats, OMEGA0_50HZ).unwrap();
        let roots = default_oracle(&jac).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].multiplicity_suspect);
        assert!((roots[0].z - OMEGA0_50HZ).abs() < 1e-6 * OMEGA0_50HZ);
        let dir = zero_direction(&jac, roots[0].z).unwrap();
        assert!(dir.is_multiple());
        let basis = CMatrix::from_columns(&dir.vectors);
        assert!((basis.adjoint() * &basis - CMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn invalid_range() {
        let (_, jac) = scalar_case();
        assert!(matches!(zeros_oracle(&jac, 10.0, 1.0, 64), Err(Error::InvalidRange(_))));
        assert!(matches!(zeros_oracle(&jac, 1.0, 10.0, 8), Err(Error::InvalidRange(_))));
    }
}

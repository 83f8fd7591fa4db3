//! Participation factors and droop sensitivity of the dominant zero.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, RMatrix};
use crate::netjac::NetworkJacobian;
use crate::zerocalc;

/// Required ratio between the second-smallest and smallest |eigenvalue|.
pub const ISOLATION_RATIO: f64 = 10.0;
pub const DEFECTIVE_TOL: f64 = 1e-12;
/// Relative agreement required between the two uniform-gain routes.
pub const UNIFORM_AGREEMENT_TOL: f64 = 0.01;
const POLISH_ITERATIONS: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct ReshapingReport {
    pub z0: f64,
    /// Left null vector, normalized so `lᴴ r = 1`.
    pub l: Vec<Complex64>,
    /// Right null vector, unit norm with the zerocalc phase convention.
    pub r: Vec<Complex64>,
    /// `p_i = conj(l_{N+i}) r_{N+i}`.
    pub p: Vec<Complex64>,
    pub dz_dk: Vec<Complex64>,
    pub s_sys: Complex64,
    /// Node indices by descending `Re(p_i)`.
    pub ranking: Vec<usize>,
    /// `‖J r‖ / ‖J‖`.
    pub right_residual: f64,
    /// `‖lᴴ J‖ / (‖J‖ ‖l‖)`.
    pub left_residual: f64,
    /// `|λ|` of the eigenvalue taken as zero.
    pub smallest_eigenvalue: f64,
}

impl ReshapingReport {
    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// `S_sys` recovered from node `i` as `dz_dk_i / p_i`.
    pub fn s_sys_from(&self, i: usize) -> Option<Complex64> {
        (self.p[i].norm() > 0.0).then(|| self.dz_dk[i] / self.p[i])
    }

    pub fn total_participation(&self) -> Complex64 {
        self.p.iter().sum()
    }
}

/// Null vectors of `J(z0)` and the participation of each Q-U entry.
///
/// Fills `p`, `l`, `r`, `ranking`; `dz_dk` and `s_sys` are zero until
/// [`zero_sensitivity_report`] runs.
pub fn participation_factors(jac: &NetworkJacobian, z0: f64) -> Result<ReshapingReport> {
    let s = Complex64::new(z0, 0.0);
    let j = jac.assemble(s)?;
    zerocalc::direction_of(&j, z0)?;
    let mut eig = linalg::eigenvalues(&j)?;
    eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let (smallest, second) = (eig[0].norm(), eig.get(1).map_or(f64::INFINITY, |e| e.norm()));
    // Both at rounding level means a repeated zero, whatever their ratio.
    let floor = zerocalc::ZERO_RESIDUAL_TOL * linalg::spectral_norm(&j);
    if second < ISOLATION_RATIO * smallest || second < floor {
        return Err(Error::ZeroEigenvalueNotIsolated { smallest, second });
    }
    let svd = linalg::svd_sorted(&j);
    let last = svd.sigma.len() - 1;
    let r0 = svd.v.column(last).into_owned();
    let l0 = svd.u.column(last).into_owned();
    let r = linalg::normalize_phase(&linalg::inverse_iteration(&j, eig[0], &r0, POLISH_ITERATIONS));
    let l = linalg::inverse_iteration(&j.adjoint(), eig[0].conj(), &l0, POLISH_ITERATIONS);
    let lr = l.dotc(&r);
    if lr.norm() < DEFECTIVE_TOL {
        return Err(Error::DefectiveZero { denominator: lr.norm() });
    }
    let l: CVector = l / lr.conj();

    let n = jac.n();
    let p: Vec<Complex64> = (0..n).map(|i| l[n + i].conj() * r[n + i]).collect();
    let jn = linalg::spectral_norm(&j).max(f64::MIN_POSITIVE);
    Ok(ReshapingReport {
        z0,
        right_residual: (&j * &r).norm() / jn,
        left_residual: (l.adjoint() * &j).norm() / (jn * l.norm()),
        smallest_eigenvalue: smallest,
        ranking: rank_by_real(&p),
        l: l.iter().copied().collect(),
        r: r.iter().copied().collect(),
        dz_dk: vec![Complex64::new(0.0, 0.0); n],
        s_sys: Complex64::new(0.0, 0.0),
        p,
    })
}

fn rank_by_real(p: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    // Stable sort keeps node order on ties.
    order.sort_by(|&a, &b| p[b].re.total_cmp(&p[a].re));
    order
}

/// `S_sys = −1 / (lᴴ ∂J/∂s r)`.
fn s_sys(jac: &NetworkJacobian, rep: &ReshapingReport) -> Result<Complex64> {
    let js = jac.assemble_ds(Complex64::new(rep.z0, 0.0))?;
    let l = CVector::from_vec(rep.l.clone());
    let r = CVector::from_vec(rep.r.clone());
    let den = l.dotc(&(&js * &r));
    if den.norm() < DEFECTIVE_TOL * linalg::spectral_norm(&js) {
        return Err(Error::DefectiveZero { denominator: den.norm() });
    }
    Ok(-den.inv())
}

/// Full report with `dz0/dk_i = p_i S_sys` for every node.
pub fn zero_sensitivity_report(jac: &NetworkJacobian, z0: f64) -> Result<ReshapingReport> {
    let mut rep = participation_factors(jac, z0)?;
    rep.s_sys = s_sys(jac, &rep)?;
    rep.dz_dk = rep.p.iter().map(|p| p * rep.s_sys).collect();
    Ok(rep)
}

/// `dz0/dk` for droop at `node`: `−lᴴ E r / (lᴴ ∂J/∂s r)` with `E` the unit
/// entry at `(N+node, N+node)`.
pub fn zero_sensitivity(jac: &NetworkJacobian, z0: f64, node: usize) -> Result<Complex64> {
    if node >= jac.n() {
        return Err(Error::NodeOutOfRange { node, count: jac.n() });
    }
    let rep = participation_factors(jac, z0)?;
    Ok(rep.p[node] * s_sys(jac, &rep)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct RankedNode {
    pub id: String,
    pub p_re: f64,
    pub p_im: f64,
    pub dz_dk_re: f64,
    pub dz_dk_im: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub z0_rad_s: f64,
    #[serde(rename = "S_sys")]
    pub s_sys: [f64; 2],
    pub nodes: Vec<RankedNode>,
    pub ranking: Vec<String>,
    pub passivity_gate: bool,
    #[serde(skip)]
    pub report: ReshapingReport,
}

impl RankReport {
    pub fn best(&self) -> &str {
        &self.ranking[0]
    }
}

/// Nodes by descending `Re(p_i)`; the first is the preferred droop location.
pub fn rank_nodes(jac: &NetworkJacobian, z0: f64, node_order: &[String]) -> Result<RankReport> {
    if node_order.len() != jac.n() {
        return Err(Error::Shape(format!("{} node labels for {} converters", node_order.len(), jac.n())));
    }
    let rep = zero_sensitivity_report(jac, z0)?;
    let nodes = (0..jac.n())
        .map(|i| RankedNode {
            id: node_order[i].clone(),
            p_re: rep.p[i].re,
            p_im: rep.p[i].im,
            dz_dk_re: rep.dz_dk[i].re,
            dz_dk_im: rep.dz_dk[i].im,
        })
        .collect();
    Ok(RankReport {
        z0_rad_s: z0,
        s_sys: [rep.s_sys.re, rep.s_sys.im],
        nodes,
        ranking: rep.ranking.iter().map(|&i| node_order[i].clone()).collect(),
        passivity_gate: passivity_gate(jac).0,
        report: rep,
    })
}

/// Whether `Re(Y)` is positive definite, and its smallest eigenvalue.
pub fn passivity_gate(jac: &NetworkJacobian) -> (bool, f64) {
    let n = jac.n();
    let re = RMatrix::from_fn(n, n, |i, k| 0.5 * (jac.y()[(i, k)].re + jac.y()[(k, i)].re));
    let (values, _) = linalg::symmetric_eigen(&re);
    let min = values.first().copied().unwrap_or(0.0);
    (min > 0.0, min)
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformGainReport {
    pub z0: f64,
    pub s_sys: Complex64,
    /// `Σ p_i S_sys`.
    pub analytic: Complex64,
    /// `ω0² (uᴴ 2S⁻² Re(Y) v / uᴴ v) / (2 z0)` from the eigen route.
    pub eigen_route: Option<Complex64>,
    pub relative_gap: Option<f64>,
    pub routes_agree: bool,
    pub passivity_gate: bool,
    pub min_re_y_eigenvalue: f64,
    /// `Re(S_sys) > 0`; `None` when the passivity precondition is unmet.
    pub positive: Option<bool>,
}

/// Positivity of `Re(S_sys)` under a uniform droop gain, with an
/// independent estimate of `dz0/dk` from the eigenvalues of
/// `S⁻¹ Y S̄⁻¹ Ȳ`.
pub fn uniform_gain_check(jac: &NetworkJacobian, z0: f64) -> Result<UniformGainReport> {
    let rep = zero_sensitivity_report(jac, z0)?;
    let analytic = rep.total_participation() * rep.s_sys;
    let (gate, min_eig) = passivity_gate(jac);
    let eigen_route = eigen_route_derivative(jac, z0);
    let relative_gap = eigen_route.map(|e| (e - analytic).norm() / analytic.norm().max(f64::MIN_POSITIVE));
    Ok(UniformGainReport {
        z0,
        s_sys: rep.s_sys,
        analytic,
        eigen_route,
        relative_gap,
        routes_agree: relative_gap.is_some_and(|g| g <= UNIFORM_AGREEMENT_TOL),
        passivity_gate: gate,
        min_re_y_eigenvalue: min_eig,
        positive: gate.then_some(rep.s_sys.re > 0.0),
    })
}

fn eigen_route_derivative(jac: &NetworkJacobian, z0: f64) -> Option<Complex64> {
    let n = jac.n();
    let w0 = jac.omega0();
    let s: Vec<Complex64> = (0..n).map(|i| Complex64::new(jac.p()[i], jac.q()[i])).collect();
    let s_inv: Vec<Complex64> = s.iter().map(|x| x.inv()).collect();
    let s_inv_c: Vec<Complex64> = s_inv.iter().map(|x| x.conj()).collect();
    let y = jac.y();
    let m: CMatrix = linalg::diag(&s_inv) * y * linalg::diag(&s_inv_c) * linalg::conj(y);
    let target = Complex64::new(1.0 + (z0 / w0).powi(2), 0.0);
    let lambda = linalg::eigenvalues(&m)
        .ok()?
        .into_iter()
        .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))?;
    let start = CVector::from_element(n, Complex64::new(1.0, 0.0));
    let v = linalg::inverse_iteration(&m, lambda, &start, 3);
    let u = linalg::inverse_iteration(&m.adjoint(), lambda.conj(), &start, 3);
    let uv = u.dotc(&v);
    if uv.norm() < DEFECTIVE_TOL {
        return None;
    }
    let s_inv2: Vec<Complex64> = s_inv.iter().map(|x| x * x * 2.0).collect();
    let re_y = y.map(|x| Complex64::new(x.re, 0.0));
    let dm = linalg::diag(&s_inv2) * re_y;
    let dlambda = u.dotc(&(&dm * &v)) / uv;
    Some(dlambda * w0 * w0 / (2.0 * z0))
}

/// Zero of `jac` nearest `near`, located by the determinant oracle on
/// `[near/1.5, 1.5 near]`.
pub fn track_zero(jac: &NetworkJacobian, near: f64) -> Result<f64> {
    let roots = zerocalc::zeros_oracle(jac, near / 1.5, near * 1.5, 512)?;
    roots
        .into_iter()
        .map(|r| r.z)
        .min_by(|a, b| (a - near).abs().total_cmp(&(b - near).abs()))
        .ok_or_else(|| Error::Numerical(format!("no zero found near {near} rad/s")))
}

/// Forward-difference `dz0/dk` at `node` (or every node when `None`).
pub fn finite_difference_sensitivity(jac: &NetworkJacobian, z0: f64, node: Option<usize>, delta: f64) -> Result<f64> {
    let perturbed = match node {
        Some(i) => jac.apply_droop(i, delta)?,
        None => jac.apply_uniform_droop(delta)?,
    };
    Ok((track_zero(&perturbed, z0)? - z0) / delta)
}

//! Complementary-sensitivity sweeps, peak and exponential lower bounds,
//! the Bode integral check and generalized Nyquist eigenloci.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::netjac::NetworkJacobian;
use crate::ratlin::{RationalFunction, TransferMatrix};
use crate::zerocalc::{self, golden_min_log, NmpZeroSet};

/// `I + L` with reciprocal condition number below this is treated as singular.
const SINGULAR_RCOND: f64 = 1e-12;

/// Loop-gain evaluation contract. Implementations must be pure so sweeps can
/// evaluate points concurrently.
pub trait FrequencyResponse: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, s: Complex64) -> Result<CMatrix>;
    /// Number of open-loop poles in the open right half-plane, when known.
    fn open_loop_rhp_poles(&self) -> Option<usize> {
        None
    }
}

impl FrequencyResponse for TransferMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn eval(&self, s: Complex64) -> Result<CMatrix> {
        TransferMatrix::eval(self, s)
    }

    /// Counts right-half-plane roots of the least common denominator.
    fn open_loop_rhp_poles(&self) -> Option<usize> {
        let d = self.least_common_denominator().ok()?;
        if d.is_constant() {
            return Some(0);
        }
        let roots = d.roots().ok()?;
        Some(roots.iter().filter(|r| r.re > 1e-9 * r.norm().max(1.0)).count())
    }
}

/// Per-converter 2×2 device Jacobian `[[J_Pθ, J_PU], [J_Qθ, J_QU]]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub bus: String,
    #[serde(rename = "J")]
    pub j: TransferMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviceModel {
    pub converters: Vec<DeviceEntry>,
}

impl DeviceModel {
    /// Aggregate into the `2N×2N` device Jacobian with rows scaled by the
    /// converter capacity bases.
    pub fn aggregate(&self, node_order: &[String], s_b: &[f64]) -> Result<TransferMatrix> {
        let n = node_order.len();
        if self.converters.len() != n || s_b.len() != n {
            return Err(Error::InvalidModel(format!("device model has {} converters, network has {n}", self.converters.len())));
        }
        let mut blocks = Vec::with_capacity(n);
        for id in node_order {
            let e = self
                .converters
                .iter()
                .find(|c| &c.bus == id)
                .ok_or_else(|| Error::InvalidModel(format!("no device model for node '{id}'")))?;
            if e.j.rows() != 2 || e.j.cols() != 2 {
                return Err(Error::Shape(format!("device model for '{id}' must be 2x2")));
            }
            blocks.push(&e.j);
        }
        Ok(TransferMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (i, k) = (r % n, c % n);
            if i != k {
                return RationalFunction::zero();
            }
            blocks[i].get(r / n, c / n).scale(s_b[i])
        }))
    }
}

/// `L(s) = J_NET(s) · J_VSC(s)⁻¹`.
pub struct NetworkLoop {
    pub jac: NetworkJacobian,
    pub device: TransferMatrix,
}

impl FrequencyResponse for NetworkLoop {
    fn dim(&self) -> usize {
        2 * self.jac.n()
    }

    fn eval(&self, s: Complex64) -> Result<CMatrix> {
        let jv = self.device.eval(s)?;
        let k = linalg::inverse(&jv)
            .ok_or_else(|| Error::Numerical(format!("device Jacobian singular at s = {s}")))?;
        Ok(self.jac.assemble(s)? * k)
    }
}

fn rcond(m: &CMatrix) -> f64 {
    let sv = linalg::singular_values(m);
    sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE)
}

/// `T = L (I + L)⁻¹`, or `None` when `I + L` is numerically singular.
pub fn complementary(l: &CMatrix) -> Option<CMatrix> {
    let n = l.nrows();
    let m = CMatrix::identity(n, n) + l;
    if rcond(&m) < SINGULAR_RCOND {
        return None;
    }
    linalg::inverse(&m).map(|inv| l * inv)
}

/// `S = (I + L)⁻¹`.
pub fn sensitivity(l: &CMatrix) -> Option<CMatrix> {
    let n = l.nrows();
    linalg::inverse(&(CMatrix::identity(n, n) + l))
}

fn sigma_t(l: &dyn FrequencyResponse, omega: f64) -> Result<Option<f64>> {
    let lm = l.eval(Complex64::new(0.0, omega))?;
    Ok(complementary(&lm).map(|t| linalg::spectral_norm(&t)))
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencySweep {
    pub omegas: Vec<f64>,
    #[serde(skip)]
    pub t_samples: Vec<Option<CMatrix>>,
    /// `σ̄(T(jω))`, NaN at singular samples.
    pub sigma_max: Vec<f64>,
    pub m_t: f64,
    pub m_t_omega: f64,
    pub omega_c: f64,
    /// `ln σ̄(T(jω_c)) / ω_c²`.
    pub omega_c_value: f64,
    /// Lowest ω where `σ̄(T)` falls through `1/√2`.
    pub bandwidth: Option<f64>,
    pub warnings: Vec<String>,
}

impl FrequencySweep {
    pub fn ln_sigma_over_w2(&self) -> Vec<f64> {
        self.omegas.iter().zip(&self.sigma_max).map(|(w, s)| s.ln() / (w * w)).collect()
    }
}

fn validate_grid(omegas: &[f64]) -> Result<()> {
    if omegas.len() < 3 {
        return Err(Error::InvalidGrid("need at least 3 frequencies".into()));
    }
    if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidGrid("frequencies must be positive and finite".into()));
    }
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("frequencies must be strictly ascending".into()));
    }
    Ok(())
}

fn refine_max(
    l: &dyn FrequencyResponse,
    omegas: &[f64],
    values: &[f64],
    map: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let (k, &v) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one finite sample");
    let lo = omegas[k.saturating_sub(1)];
    let hi = omegas[(k + 1).min(omegas.len() - 1)];
    let (w, neg) = golden_min_log(
        |w| match sigma_t(l, w) {
            Ok(Some(s)) => -map(w, s),
            _ => f64::INFINITY,
        },
        lo,
        hi,
        60,
    );
    if -neg > v { (w, -neg) } else { (omegas[k], v) }
}

/// Sample `T(jω)` on the grid; refine the peak `M_T` and the maximizer `ω_c`
/// of `ln σ̄(T)/ω²` by golden-section search around the grid argmax.
pub fn sweep(l: &dyn FrequencyResponse, omegas: &[f64]) -> Result<FrequencySweep> {
    validate_grid(omegas)?;
    let t_samples: Vec<Option<CMatrix>> = omegas
        .par_iter()
        .map(|&w| Ok(complementary(&l.eval(Complex64::new(0.0, w))?)))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let sigma_max: Vec<f64> = t_samples
        .iter()
        .zip(omegas)
        .map(|(t, w)| match t {
            Some(t) => linalg::spectral_norm(t),
            None => {
                warnings.push(format!("I + L singular at omega = {w:.6e} rad/s; sample excluded"));
                f64::NAN
            }
        })
        .collect();
    if sigma_max.iter().all(|s| !s.is_finite()) {
        return Err(Error::Numerical("I + L singular at every grid point".into()));
    }
    let (m_t_omega, m_t) = refine_max(l, omegas, &sigma_max, |_, s| s);
    let ratio: Vec<f64> = omegas.iter().zip(&sigma_max).map(|(w, s)| s.ln() / (w * w)).collect();
    let (omega_c, omega_c_value) = refine_max(l, omegas, &ratio, |w, s| s.ln() / (w * w));
    let level = std::f64::consts::FRAC_1_SQRT_2;
    let bandwidth = (0..omegas.len() - 1).find_map(|k| {
        let (a, b) = (sigma_max[k], sigma_max[k + 1]);
        (a >= level && b < level).then(|| {
            let t = (a - level) / (a - b);
            (omegas[k].ln() + t * (omegas[k + 1].ln() - omegas[k].ln())).exp()
        })
    });
    Ok(FrequencySweep {
        omegas: omegas.to_vec(),
        t_samples,
        sigma_max,
        m_t,
        m_t_omega,
        omega_c,
        omega_c_value,
        bandwidth,
        warnings,
    })
}

/// An open right-half-plane zero with its unit output direction.
#[derive(Clone, Debug)]
pub struct PlantZero {
    pub z: Complex64,
    pub direction: CVector,
}

/// Network NMP zeros paired with their output directions. Degenerate zeros
/// contribute one entry per basis vector.
pub fn network_zeros(jac: &NetworkJacobian, set: &NmpZeroSet) -> Result<Vec<PlantZero>> {
    let mut out = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for z in set.zeros() {
        if seen.iter().any(|&s| (s - z).abs() <= 1e-8 * z) {
            continue;
        }
        seen.push(z);
        let dir = zerocalc::zero_direction(jac, z)?;
        out.extend(dir.vectors.into_iter().map(|direction| PlantZero { z: Complex64::new(z, 0.0), direction }));
    }
    Ok(out)
}

/// Right-half-plane transmission zeros of a square plant: roots of the
/// determinant numerator that do not coincide with denominator roots.
pub fn plant_rhp_zeros(plant: &TransferMatrix) -> Result<Vec<PlantZero>> {
    let (det, _) = plant.det_inv()?;
    if det.num().is_constant() {
        return Ok(Vec::new());
    }
    let poles = if det.den().is_constant() { Vec::new() } else { det.den().roots()? };
    let mut out = Vec::new();
    for z in det.num().roots()? {
        if z.re <= 1e-9 * z.norm().max(1.0) {
            continue;
        }
        if poles.iter().any(|p| (p - z).norm() <= 1e-6 * z.norm().max(1e-6)) {
            continue;
        }
        let dir = zerocalc::direction_of(&plant.eval(z)?, z.re)?;
        out.push(PlantZero { z, direction: dir.vectors[0].clone() });
    }
    Ok(out)
}

/// `Σ 2Re(z_i)/|z_i|² w_i w_iᴴ`.
pub fn zero_weight_matrix(zeros: &[PlantZero], dim: usize) -> CMatrix {
    zeros.iter().fold(CMatrix::zeros(dim, dim), |acc, pz| {
        let w = 2.0 * pz.z.re / pz.z.norm_sqr();
        acc + (&pz.direction * pz.direction.adjoint()) * Complex64::new(w, 0.0)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub omega_c: f64,
    #[serde(rename = "M_T", skip_serializing_if = "Option::is_none")]
    pub m_t: Option<f64>,
    pub bound_mimo: f64,
    pub bound_scalar: f64,
    pub dominant_zero: Option<f64>,
    /// No NMP zeros: both bounds are 1.
    pub vacuous: bool,
}

impl BoundReport {
    pub fn with_peak(mut self, m_t: f64) -> Self {
        self.m_t = Some(m_t);
        self
    }

    /// `M_T − bound_scalar`, when the peak is known.
    pub fn gap(&self) -> Option<f64> {
        self.m_t.map(|m| m - self.bound_scalar)
    }
}

/// MIMO bound `exp((π/4) ω_c λ̄(Σ 2Re z/|z|² w wᴴ))` and the scalar bound
/// built from the zero of smallest magnitude.
pub fn bounds(zeros: &[PlantZero], omega_c: f64) -> BoundReport {
    let Some(dom) = zeros.iter().min_by(|a, b| a.z.norm().total_cmp(&b.z.norm())) else {
        return BoundReport { omega_c, m_t: None, bound_mimo: 1.0, bound_scalar: 1.0, dominant_zero: None, vacuous: true };
    };
    let dim = dom.direction.len();
    let lam = linalg::hermitian_max_eigenvalue(&zero_weight_matrix(zeros, dim));
    let bound_mimo = (PI / 4.0 * omega_c * lam).exp();
    let bound_scalar = (PI / 4.0 * omega_c * 2.0 * dom.z.re / dom.z.norm_sqr()).exp();
    BoundReport {
        omega_c,
        m_t: None,
        bound_mimo,
        bound_scalar,
        dominant_zero: Some(dom.z.norm()),
        vacuous: false,
    }
}

/// `exp(π ω_c / (2 z0))`.
pub fn bound_scalar(z0: f64, omega_c: f64) -> f64 {
    (PI * omega_c / (2.0 * z0)).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct BodeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub truncation_est: f64,
    pub quadrature_error: f64,
    pub tail_low: f64,
    pub tail_high: f64,
    /// `λ̄(C)` of the low-frequency correction alone.
    pub c_max_eigenvalue: f64,
    #[serde(skip)]
    pub c_matrix: CMatrix,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub inconclusive: bool,
}

impl BodeReport {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// `T(0)` and `C = ½(T′(0)T(0)⁻¹ + (·)ᴴ)` from real-axis central
/// differences at `±δ`.
pub fn low_frequency_terms(l: &dyn FrequencyResponse, delta: f64) -> Result<(CMatrix, CMatrix)> {
    let tp = complementary(&l.eval(Complex64::new(delta, 0.0))?).ok_or(Error::SingularLowFrequency)?;
    let tm = complementary(&l.eval(Complex64::new(-delta, 0.0))?).ok_or(Error::SingularLowFrequency)?;
    let t0 = (&tp + &tm) * Complex64::new(0.5, 0.0);
    if rcond(&t0) < SINGULAR_RCOND {
        return Err(Error::SingularLowFrequency);
    }
    let t0_inv = linalg::inverse(&t0).ok_or(Error::SingularLowFrequency)?;
    let dt = (&tp - &tm) * Complex64::new(0.5 / delta, 0.0);
    let g = dt * t0_inv;
    let c = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    Ok((t0, c))
}

fn ln_sigma_normalized(l: &dyn FrequencyResponse, t0_inv: &CMatrix, omega: f64) -> Result<f64> {
    let lm = l.eval(Complex64::new(0.0, omega))?;
    let t = complementary(&lm).ok_or_else(|| Error::Numerical(format!("I + L singular at omega = {omega:.6e}")))?;
    Ok(linalg::spectral_norm(&(t * t0_inv)).ln())
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Gauss–Kronrod rule: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut k = 0.0;
    let mut g = 0.0;
    for i in 0..8 {
        let x = GK_NODES[i];
        let v = if x == 0.0 { f(c)? } else { f(c - h * x)? + f(c + h * x)? };
        k += K_WEIGHTS[i] * v;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * v;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Globally adaptive Gauss–Kronrod quadrature: `(integral, error estimate)`.
pub fn integrate_adaptive(f: &(dyn Fn(f64) -> Result<f64> + Sync), a: f64, b: f64, panels: usize, rel_tol: f64) -> Result<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..panels)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = (a + width * i as f64, a + width * (i + 1) as f64);
            gk15(f, lo, hi).map(|(v, e)| (lo, hi, v, e))
        })
        .collect::<Result<_>>()?;
    for _ in 0..20_000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs().max(1e-300) || err < 1e-15 {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid)?;
        let (v2, e2) = gk15(f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok((parts.iter().map(|p| p.2).sum(), parts.iter().map(|p| p.3).sum()))
}

/// Composite fixed-panel Gauss–Kronrod estimate of
/// `∫ ln σ̄(T(jω)T(0)⁻¹) dω/ω²` over `[lo, hi]`, integrating in `ln ω`.
pub fn bode_lhs_composite(l: &dyn FrequencyResponse, t0: &CMatrix, lo: f64, hi: f64, panels: usize) -> Result<f64> {
    let t0_inv = linalg::inverse(t0).ok_or(Error::SingularLowFrequency)?;
    let f = |u: f64| {
        let w = u.exp();
        ln_sigma_normalized(l, &t0_inv, w).map(|v| v / w)
    };
    let width = (hi.ln() - lo.ln()) / panels as f64;
    (0..panels)
        .into_par_iter()
        .map(|i| gk15(&f, lo.ln() + width * i as f64, lo.ln() + width * (i + 1) as f64).map(|r| r.0))
        .sum()
}

/// Check `∫₀^∞ ln σ̄(T(jω)T(0)⁻¹) dω/ω² ≥ (π/2) λ̄(Σ 2Re z/|z|² w wᴴ + C)`.
pub fn bode_integral_check(
    l: &dyn FrequencyResponse,
    zeros: &[PlantZero],
    omega_lo: f64,
    omega_hi: f64,
) -> Result<BodeReport> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo) {
        return Err(Error::InvalidGrid(format!("need 0 < omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]")));
    }
    if let Some(zmin) = zeros.iter().map(|z| z.z.norm()).min_by(f64::total_cmp) {
        let zmax = zeros.iter().map(|z| z.z.norm()).fold(0.0, f64::max);
        if omega_lo > 1e-2 * zmin || omega_hi < 1e3 * zmax {
            return Err(Error::InvalidGrid(format!(
                "range [{omega_lo:.3e}, {omega_hi:.3e}] must cover [1e-2·{zmin:.3e}, 1e3·{zmax:.3e}]"
            )));
        }
    }
    let (t0, c) = low_frequency_terms(l, 1e-4 * omega_lo)?;
    let t0_inv = linalg::inverse(&t0).ok_or(Error::SingularLowFrequency)?;
    let f = |u: f64| {
        let w = u.exp();
        ln_sigma_normalized(l, &t0_inv, w).map(|v| v / w)
    };
    let (body, quad_err) = integrate_adaptive(&f, omega_lo.ln(), omega_hi.ln(), 64, 1e-10)?;
    // Low tail: ln σ̄ ∝ ω² near 0. High tail: ln σ̄ ≈ c − n ln ω.
    let tail_low = ln_sigma_normalized(l, &t0_inv, omega_lo)? / omega_lo;
    let g_hi = ln_sigma_normalized(l, &t0_inv, omega_hi)?;
    let g_2hi = ln_sigma_normalized(l, &t0_inv, 2.0 * omega_hi)?;
    let slope = (g_hi - g_2hi) / std::f64::consts::LN_2;
    let tail_high = (g_hi - slope) / omega_hi;
    let lhs = body + tail_low + tail_high;
    let dim = l.dim();
    let weight = zero_weight_matrix(zeros, dim);
    let rhs = PI / 2.0 * linalg::hermitian_max_eigenvalue(&(weight + &c));
    let truncation_est = quad_err + tail_low.abs() + tail_high.abs();
    Ok(BodeReport {
        lhs,
        rhs,
        margin: lhs - rhs,
        truncation_est,
        quadrature_error: quad_err,
        tail_low,
        tail_high,
        c_max_eigenvalue: linalg::hermitian_max_eigenvalue(&c),
        c_matrix: c,
        omega_lo,
        omega_hi,
        inconclusive: truncation_est > 0.1 * rhs.abs(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NyquistReport {
    pub omegas: Vec<f64>,
    /// `loci[k][i]`: locus `k` at `omegas[i]`.
    pub loci: Vec<Vec<Complex64>>,
    pub min_distance: f64,
    pub min_distance_omega: f64,
    /// Clockwise encirclements of the origin by `det(I + L)` along the
    /// Nyquist contour, equal to clockwise encirclements of −1 by the loci.
    pub encirclements_cw: i64,
    pub open_loop_rhp_poles: Option<usize>,
    /// `P + N`, when `P` is known.
    pub closed_loop_rhp_poles: Option<i64>,
    pub pairing_warnings: usize,
}

impl NyquistReport {
    pub fn unstable(&self) -> Option<bool> {
        self.closed_loop_rhp_poles.map(|z| z > 0)
    }
}

/// Greedy continuity matching: reorder `next` so each entry follows the
/// nearest unmatched eigenvalue of `prev`. Returns the count of ambiguous
/// pairings.
fn match_eigenvalues(prev: &[Complex64], next: &mut [Complex64]) -> usize {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut taken_prev = vec![false; n];
    let mut taken_next = vec![false; n];
    let mut order = vec![0usize; n];
    for &(_, i, j) in &pairs {
        if !taken_prev[i] && !taken_next[j] {
            taken_prev[i] = true;
            taken_next[j] = true;
            order[i] = j;
        }
    }
    let mut ambiguous = 0;
    for a in 0..n {
        for b in a + 1..n {
            if (next[a] - next[b]).norm() < 1e-10 {
                ambiguous += 1;
            }
        }
    }
    let reordered: Vec<Complex64> = order.iter().map(|&j| next[j]).collect();
    next.copy_from_slice(&reordered);
    ambiguous
}

fn det_i_plus_l(l: &dyn FrequencyResponse, s: Complex64) -> Result<Complex64> {
    let n = l.dim();
    let v = linalg::det(&(CMatrix::identity(n, n) + l.eval(s)?));
    if v.norm() == 0.0 || !v.is_finite() {
        return Err(Error::Numerical(format!("det(I + L) vanishes or is not finite at s = {s}")));
    }
    Ok(v)
}

/// Accumulated argument of `f(path(t))` for `t` over the given knots, with
/// bisection refinement so consecutive samples differ by less than π/4.
fn accumulated_arg(
    l: &dyn FrequencyResponse,
    path: &(dyn Fn(f64) -> Complex64 + Sync),
    knots: &[f64],
) -> Result<f64> {
    let values: Vec<Complex64> = knots.par_iter().map(|&t| det_i_plus_l(l, path(t))).collect::<Result<_>>()?;
    let mut total = 0.0;
    for k in 0..knots.len() - 1 {
        total += refine_arg(l, path, knots[k], values[k], knots[k + 1], values[k + 1], 0)?;
    }
    Ok(total)
}

fn refine_arg(
    l: &dyn FrequencyResponse,
    path: &(dyn Fn(f64) -> Complex64 + Sync),
    t0: f64,
    f0: Complex64,
    t1: f64,
    f1: Complex64,
    depth: usize,
) -> Result<f64> {
    let d = (f1 / f0).arg();
    if d.abs() < PI / 4.0 || depth >= 60 {
        return Ok(d);
    }
    let tm = 0.5 * (t0 + t1);
    let fm = det_i_plus_l(l, path(tm))?;
    Ok(refine_arg(l, path, t0, f0, tm, fm, depth + 1)? + refine_arg(l, path, tm, fm, t1, f1, depth + 1)?)
}

/// Eigenloci of `L(jω)` on the grid, their minimum distance to −1, and the
/// encirclement count from the winding of `det(I + L)` along the contour
/// `Re s = ε` (ε = 10⁻³·ω_min, |Im s| ≤ ω_max) closed by a right half-plane
/// arc of radius `ω_max`.
pub fn nyquist(l: &dyn FrequencyResponse, omegas: &[f64]) -> Result<NyquistReport> {
    validate_grid(omegas)?;
    let mut eig: Vec<Vec<Complex64>> = omegas
        .par_iter()
        .map(|&w| linalg::eigenvalues(&l.eval(Complex64::new(0.0, w))?))
        .collect::<Result<_>>()?;
    let mut pairing_warnings = 0;
    for i in 1..eig.len() {
        let (head, tail) = eig.split_at_mut(i);
        pairing_warnings += match_eigenvalues(&head[i - 1], &mut tail[0]);
    }
    let m = l.dim();
    let loci: Vec<Vec<Complex64>> = (0..m).map(|k| eig.iter().map(|e| e[k]).collect()).collect();
    let (mut min_distance, mut min_distance_omega) = (f64::INFINITY, omegas[0]);
    for (i, e) in eig.iter().enumerate() {
        for lam in e {
            let d = (lam + 1.0).norm();
            if d < min_distance {
                min_distance = d;
                min_distance_omega = omegas[i];
            }
        }
    }

    let eps = 1e-3 * omegas[0];
    let r = *omegas.last().expect("validated");
    let mut knots: Vec<f64> = omegas.iter().rev().map(|w| -w).collect();
    knots.push(0.0);
    knots.extend_from_slice(omegas);
    let line = |w: f64| Complex64::new(eps, w);
    let mut total = accumulated_arg(l, &line, &knots)?;
    let arc_knots: Vec<f64> = (0..=256).map(|k| PI / 2.0 - PI * k as f64 / 256.0).collect();
    let arc = |phi: f64| Complex64::new(eps, 0.0) + Complex64::from_polar(r, phi);
    total += accumulated_arg(l, &arc, &arc_knots)?;
    // Close the gap between the end of the arc and the start of the line.
    total += (det_i_plus_l(l, line(-r))? / det_i_plus_l(l, arc(-PI / 2.0))?).arg();
    let winding_ccw = (total / (2.0 * PI)).round() as i64;
    let encirclements_cw = -winding_ccw;
    let p = l.open_loop_rhp_poles();
    Ok(NyquistReport {
        omegas: omegas.to_vec(),
        loci,
        min_distance,
        min_distance_omega,
        encirclements_cw,
        open_loop_rhp_poles: p,
        closed_loop_rhp_poles: p.map(|p| p as i64 + encirclements_cw),
        pairing_warnings,
    })
}

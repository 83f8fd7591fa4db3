//! Grid data model, Kron reduction and operating-point matrices.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};

/// Relative floor below which negative eigenvalues of `B_r` are clipped.
pub const PSD_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// 50 Hz nominal angular frequency.
pub const OMEGA0_50HZ: f64 = 2.0 * std::f64::consts::PI * 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusRole {
    Converter,
    Interior,
    Slack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub role: BusRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub x_pu: f64,
}

/// Network input file. Either `branches` or a direct `B_r` (with
/// `node_order`) must be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub omega0_rad_s: f64,
    #[serde(default)]
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(rename = "B_r", default, skip_serializing_if = "Option::is_none")]
    pub b_r: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_order: Option<Vec<String>>,
}

impl GridModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0_rad_s.is_finite() && self.omega0_rad_s > 0.0) {
            return Err(Error::InvalidModel(format!("omega0 must be positive, got {}", self.omega0_rad_s)));
        }
        if self.b_r.is_some() {
            if self.node_order.is_none() {
                return Err(Error::InvalidModel("B_r given without node_order".into()));
            }
            return Ok(());
        }
        let mut seen = HashMap::new();
        for (k, bus) in self.buses.iter().enumerate() {
            if seen.insert(bus.id.as_str(), k).is_some() {
                return Err(Error::InvalidModel(format!("duplicate bus id '{}'", bus.id)));
            }
        }
        if !self.buses.iter().any(|b| b.role == BusRole::Converter) {
            return Err(Error::InvalidModel("no converter bus".into()));
        }
        for br in &self.branches {
            for end in [&br.from, &br.to] {
                if !seen.contains_key(end.as_str()) {
                    return Err(Error::InvalidModel(format!("branch endpoint '{end}' is not a bus")));
                }
            }
            if br.from == br.to {
                return Err(Error::InvalidModel(format!("self-loop branch at '{}'", br.from)));
            }
            if !(br.x_pu.is_finite() && br.x_pu > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "branch {}-{} has non-positive reactance {}",
                    br.from, br.to, br.x_pu
                )));
            }
        }
        Ok(())
    }

    /// Full nodal susceptance Laplacian in bus order.
    pub fn laplacian(&self) -> Result<RMatrix> {
        self.validate()?;
        let index: HashMap<&str, usize> = self.buses.iter().enumerate().map(|(k, b)| (b.id.as_str(), k)).collect();
        let n = self.buses.len();
        let mut b = RMatrix::zeros(n, n);
        for br in &self.branches {
            let (i, j) = (index[br.from.as_str()], index[br.to.as_str()]);
            let y = 1.0 / br.x_pu;
            b[(i, j)] -= y;
            b[(j, i)] -= y;
            b[(i, i)] += y;
            b[(j, j)] += y;
        }
        Ok(b)
    }
}

/// Schur complement of `b` onto the index set `keep`, eliminating all other
/// indices in one block step.
pub fn kron_reduce(b: &RMatrix, keep: &[usize]) -> Result<RMatrix> {
    let n = b.nrows();
    let elim: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let pick = |rows: &[usize], cols: &[usize]| RMatrix::from_fn(rows.len(), cols.len(), |i, j| b[(rows[i], cols[j])]);
    let b_kk = pick(keep, keep);
    if elim.is_empty() {
        return Ok(b_kk);
    }
    let b_ke = pick(keep, &elim);
    let b_ee = pick(&elim, &elim);
    let lu = b_ee.clone().lu();
    let scale = b_ee.amax().max(f64::MIN_POSITIVE);
    let det = lu.determinant();
    // Reject blocks that are singular relative to their own scale.
    let cond_ok = lu.try_inverse().map(|inv| inv.amax() * scale < 1e12).unwrap_or(false);
    if det == 0.0 || !cond_ok {
        return Err(Error::ReductionSingular);
    }
    let x = b_ee.lu().solve(&b_ke.transpose()).ok_or(Error::ReductionSingular)?;
    let out = &b_kk - &b_ke * x;
    Ok((&out + out.transpose()) * 0.5)
}

/// Retained-node susceptance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedNetwork {
    node_order: Vec<String>,
    b_r: RMatrix,
    omega0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawReduced {
    omega0_rad_s: f64,
    node_order: Vec<String>,
    #[serde(rename = "B_r")]
    b_r: Vec<Vec<f64>>,
}

impl Serialize for ReducedNetwork {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawReduced {
            omega0_rad_s: self.omega0,
            node_order: self.node_order.clone(),
            b_r: rows_of(&self.b_r),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReducedNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawReduced::deserialize(deserializer)?;
        let b = matrix_from_rows(&raw.b_r).map_err(serde::de::Error::custom)?;
        ReducedNetwork::new(raw.node_order, b, raw.omega0_rad_s).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn rows_of(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<RMatrix> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(RMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ReducedNetwork {
    /// Validates shape, symmetry and positive semidefiniteness.
    pub fn new(node_order: Vec<String>, b_r: RMatrix, omega0: f64) -> Result<Self> {
        let n = node_order.len();
        if n == 0 {
            return Err(Error::InvalidModel("reduced network has no nodes".into()));
        }
        if b_r.shape() != (n, n) {
            return Err(Error::Shape(format!("B_r is {:?}, expected {n}x{n}", b_r.shape())));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidModel(format!("omega0 must be positive, got {omega0}")));
        }
        let mut labels = node_order.clone();
        labels.sort();
        labels.dedup();
        if labels.len() != n {
            return Err(Error::InvalidModel("duplicate node labels".into()));
        }
        let asym = (&b_r - b_r.transpose()).amax();
        if asym > SYMMETRY_TOL * b_r.amax().max(1.0) {
            return Err(Error::InvalidModel(format!("B_r is not symmetric (max asymmetry {asym:.3e})")));
        }
        linalg::psd_sqrt(&b_r, PSD_TOL)?;
        Ok(Self { node_order, b_r, omega0 })
    }

    pub fn node_order(&self) -> &[String] {
        &self.node_order
    }

    pub fn b_r(&self) -> &RMatrix {
        &self.b_r
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn len(&self) -> usize {
        self.node_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_order.is_empty()
    }
}

/// Ground slack buses, eliminate interior buses, keep converter buses in
/// input order. A model that carries `B_r` directly bypasses the reduction.
pub fn build_reduced(model: &GridModel) -> Result<ReducedNetwork> {
    model.validate()?;
    if let (Some(rows), Some(order)) = (&model.b_r, &model.node_order) {
        return ReducedNetwork::new(order.clone(), matrix_from_rows(rows)?, model.omega0_rad_s);
    }
    let full = model.laplacian()?;
    let grounded: Vec<usize> = (0..model.buses.len()).filter(|&k| model.buses[k].role != BusRole::Slack).collect();
    let b = RMatrix::from_fn(grounded.len(), grounded.len(), |i, j| full[(grounded[i], grounded[j])]);
    let keep: Vec<usize> = (0..grounded.len())
        .filter(|&k| model.buses[grounded[k]].role == BusRole::Converter)
        .collect();
    let b_r = kron_reduce(&b, &keep)?;
    let order = keep.iter().map(|&k| model.buses[grounded[k]].id.clone()).collect();
    ReducedNetwork::new(order, b_r, model.omega0_rad_s)
}

fn default_s_b() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConverterState")]
pub struct ConverterState {
    pub bus: String,
    #[serde(rename = "U_pu")]
    pub u_pu: f64,
    pub theta_rad: f64,
    #[serde(rename = "P_pu")]
    pub p_pu: f64,
    #[serde(rename = "Q_pu")]
    pub q_pu: f64,
    #[serde(rename = "S_B", default = "default_s_b")]
    pub s_b: f64,
}

/// Input form: the angle may be given in degrees as `theta_deg`.
#[derive(Deserialize)]
struct RawConverterState {
    bus: String,
    #[serde(rename = "U_pu")]
    u_pu: f64,
    theta_rad: Option<f64>,
    theta_deg: Option<f64>,
    #[serde(rename = "P_pu")]
    p_pu: f64,
    #[serde(rename = "Q_pu")]
    q_pu: f64,
    #[serde(rename = "S_B", default = "default_s_b")]
    s_b: f64,
}

impl TryFrom<RawConverterState> for ConverterState {
    type Error = Error;
    fn try_from(r: RawConverterState) -> Result<Self> {
        let theta_rad = match (r.theta_rad, r.theta_deg) {
            (Some(t), None) => t,
            (None, Some(d)) => d.to_radians(),
            _ => {
                return Err(Error::InvalidOperatingPoint(format!(
                    "converter '{}' needs exactly one of theta_rad, theta_deg",
                    r.bus
                )))
            }
        };
        Ok(Self { bus: r.bus, u_pu: r.u_pu, theta_rad, p_pu: r.p_pu, q_pu: r.q_pu, s_b: r.s_b })
    }
}

impl ConverterState {
    pub fn apparent_power(&self) -> Complex64 {
        Complex64::new(self.p_pu, self.q_pu)
    }

    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.u_pu, self.theta_rad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub converters: Vec<ConverterState>,
}

impl OperatingPoint {
    /// Unit voltages at zero angle with `S_i = 1/D_i`: reproduces a given
    /// diagonal `D` exactly and leaves `Y = B_r`.
    pub fn equivalent_from_d(node_order: &[String], d: &[Complex64]) -> Result<Self> {
        if node_order.len() != d.len() {
            return Err(Error::Shape(format!("{} nodes but {} D entries", node_order.len(), d.len())));
        }
        let converters = node_order
            .iter()
            .zip(d)
            .map(|(bus, &di)| {
                if di.norm() == 0.0 || !di.is_finite() {
                    return Err(Error::InvalidOperatingPoint(format!("D entry for '{bus}' must be finite and nonzero")));
                }
                let s = di.inv();
                Ok(ConverterState { bus: bus.clone(), u_pu: 1.0, theta_rad: 0.0, p_pu: s.re, q_pu: s.im, s_b: 1.0 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { converters })
    }

    /// States reordered to match `node_order`.
    pub fn aligned(&self, node_order: &[String]) -> Result<Vec<ConverterState>> {
        if self.converters.len() != node_order.len() {
            return Err(Error::InvalidOperatingPoint(format!(
                "{} converter states for {} network nodes",
                self.converters.len(),
                node_order.len()
            )));
        }
        node_order
            .iter()
            .map(|id| {
                self.converters
                    .iter()
                    .find(|c| &c.bus == id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidOperatingPoint(format!("no state for node '{id}'")))
            })
            .collect()
    }
}

/// Operating-state matrices: diagonals stored as vectors.
#[derive(Clone, Debug)]
pub struct OperatingMatrices {
    /// Voltage phasors `U_i e^{jθ_i}`.
    pub u: Vec<Complex64>,
    /// Apparent powers `P_i + jQ_i`.
    pub s: Vec<Complex64>,
    /// `D_ii = (U_i e^{jθ_i})² / S_i`.
    pub d: Vec<Complex64>,
    /// `U B_r conj(U)`.
    pub y: CMatrix,
    pub b_r: RMatrix,
    /// Principal square root of `B_r`.
    pub b_half: RMatrix,
    pub s_b: Vec<f64>,
}

impl OperatingMatrices {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn p(&self) -> Vec<f64> {
        self.s.iter().map(|s| s.re).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.s.iter().map(|s| s.im).collect()
    }
}

pub fn build_operating_matrices(net: &ReducedNetwork, op: &OperatingPoint) -> Result<OperatingMatrices> {
    let states = op.aligned(net.node_order())?;
    for st in &states {
        if !(st.u_pu.is_finite() && st.u_pu > 0.0) {
            return Err(Error::InvalidOperatingPoint(format!("U at '{}' must be positive", st.bus)));
        }
        if !(st.theta_rad.is_finite() && st.p_pu.is_finite() && st.q_pu.is_finite()) {
            return Err(Error::InvalidOperatingPoint(format!("non-finite state at '{}'", st.bus)));
        }
        if !(st.s_b.is_finite() && st.s_b > 0.0) {
            return Err(Error::InvalidOperatingPoint(format!("S_B at '{}' must be positive", st.bus)));
        }
        if st.apparent_power().norm() == 0.0 {
            return Err(Error::DegenerateInjection { node: st.bus.clone() });
        }
    }
    let u: Vec<Complex64> = states.iter().map(|c| c.phasor()).collect();
    let s: Vec<Complex64> = states.iter().map(|c| c.apparent_power()).collect();
    let d = u.iter().zip(&s).map(|(ui, si)| ui * ui / si).collect();
    let b_r = net.b_r().clone();
    let n = u.len();
    let y = CMatrix::from_fn(n, n, |i, j| u[i] * b_r[(i, j)] * u[j].conj());
    let b_half = linalg::psd_sqrt(&b_r, PSD_TOL)?;
    Ok(OperatingMatrices { u, s, d, y, b_r, b_half, s_b: states.iter().map(|c| c.s_b).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: &str, role: BusRole) -> Bus {
        Bus { id: id.into(), role }
    }

    fn branch(a: &str, b: &str, x: f64) -> Branch {
        Branch { from: a.into(), to: b.into(), x_pu: x }
    }

    fn chain() -> GridModel {
        GridModel {
            omega0_rad_s: OMEGA0_50HZ,
            buses: vec![bus("1", BusRole::Converter), bus("2", BusRole::Interior), bus("3", BusRole::Converter)],
            branches: vec![branch("1", "2", 1.0), branch("2", "3", 1.0)],
            b_r: None,
            node_order: None,
        }
    }

    #[test]
    fn series_chain_reduces_to_half() {
        let r = build_reduced(&chain()).unwrap();
        assert_eq!(r.node_order(), ["1", "3"]);
        let expect = RMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((r.b_r() - expect).amax() < 1e-14);
    }

    #[test]
    fn no_interior_keeps_laplacian() {
        let mut m = chain();
        m.buses[1].role = BusRole::Converter;
        let r = build_reduced(&m).unwrap();
        assert!((r.b_r() - m.laplacian().unwrap()).amax() < 1e-15);
    }

    #[test]
    fn slack_grounding_makes_diagonally_dominant() {
        let mut m = chain();
        m.buses[1].role = BusRole::Slack;
        let r = build_reduced(&m).unwrap();
        assert!((r.b_r() - RMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn bad_models_rejected() {
        let mut m = chain();
        m.branches[0].x_pu = 0.0;
        assert!(matches!(build_reduced(&m), Err(Error::InvalidModel(_))));
        let mut m = chain();
        m.branches.push(branch("1", "9", 1.0));
        assert!(matches!(build_reduced(&m), Err(Error::InvalidModel(_))));
        let mut m = chain();
        m.buses.push(bus("1", BusRole::Interior));
        assert!(matches!(build_reduced(&m), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn isolated_interior_is_singular() {
        let mut m = chain();
        m.buses.push(bus("4", BusRole::Interior));
        assert!(matches!(build_reduced(&m), Err(Error::ReductionSingular)));
    }

    #[test]
    fn indefinite_direct_b_r_rejected() {
        let b = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = ReducedNetwork::new(vec!["a".into(), "b".into()], b, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemidefinite { .. }));
    }

    #[test]
    fn scalar_operating_matrices() {
        let net = ReducedNetwork::new(vec!["a".into()], RMatrix::from_element(1, 1, 2.0), OMEGA0_50HZ).unwrap();
        let op = OperatingPoint {
            converters: vec![ConverterState { bus: "a".into(), u_pu: 1.0, theta_rad: 0.0, p_pu: 1.0, q_pu: 0.0, s_b: 1.0 }],
        };
        let m = build_operating_matrices(&net, &op).unwrap();
        assert!((m.d[0] - 1.0).norm() < 1e-15);
        assert!((m.y[(0, 0)] - 2.0).norm() < 1e-15);
        assert!((m.b_half[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_injection_names_node() {
        let net = ReducedNetwork::new(vec!["a".into()], RMatrix::from_element(1, 1, 2.0), OMEGA0_50HZ).unwrap();
        let op = OperatingPoint {
            converters: vec![ConverterState { bus: "a".into(), u_pu: 1.0, theta_rad: 0.0, p_pu: 0.0, q_pu: 0.0, s_b: 1.0 }],
        };
        match build_operating_matrices(&net, &op) {
            Err(Error::DegenerateInjection { node }) => assert_eq!(node, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equivalent_point_reproduces_d() {
        let order: Vec<String> = vec!["a".into(), "b".into()];
        let d = [Complex64::from_polar(1.1, -0.2), Complex64::from_polar(0.7, 1.2)];
        let net = ReducedNetwork::new(order.clone(), RMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 2.0]), 1.0).unwrap();
        let op = OperatingPoint::equivalent_from_d(&order, &d).unwrap();
        let m = build_operating_matrices(&net, &op).unwrap();
        for k in 0..2 {
            assert!((m.d[k] - d[k]).norm() < 1e-14);
        }
        assert!((m.y.map(|v| v.re) - net.b_r()).amax() < 1e-15);
    }

    #[test]
    fn angle_in_degrees_accepted() {
        let st: ConverterState =
            serde_json::from_str(r#"{"bus":"a","U_pu":1.0,"theta_deg":90.0,"P_pu":1.0,"Q_pu":0.0}"#).unwrap();
        assert!((st.theta_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(st.s_b, 1.0);
        let both = r#"{"bus":"a","U_pu":1.0,"theta_deg":1.0,"theta_rad":1.0,"P_pu":1.0,"Q_pu":0.0}"#;
        assert!(serde_json::from_str::<ConverterState>(both).is_err());
    }

    #[test]
    fn reduced_json_round_trip() {
        let r = build_reduced(&chain()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: ReducedNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}

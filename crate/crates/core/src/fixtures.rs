//! Built-in fixture corpus: the 9-bus case study data, the 2×2 didactic
//! system and seeded random networks.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::{DroopDirective, NetworkCase};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::network::{self, ConverterState, GridModel, OperatingPoint, ReducedNetwork, OMEGA0_50HZ};
use crate::ratlin::{Polynomial, RationalFunction, TransferMatrix};
use crate::zerocalc;

const BUILTIN: &[(&str, &str)] = &[
    ("case1", include_str!("../fixtures/case1.json")),
    ("case1-profile", include_str!("../fixtures/case1-profile.json")),
    ("case2", include_str!("../fixtures/case2.json")),
    ("case3", include_str!("../fixtures/case3.json")),
    ("droop-node1", include_str!("../fixtures/droop-node1.json")),
    ("droop-node2", include_str!("../fixtures/droop-node2.json")),
    ("droop-node3", include_str!("../fixtures/droop-node3.json")),
    ("didactic", include_str!("../fixtures/didactic.json")),
    ("ieee9-lines", include_str!("../fixtures/ieee9-lines.json")),
];

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Number printed in the published case study.
    Published,
    /// Computed from published inputs under a documented assumption.
    Reconstructed,
    /// Produced by an independent numerical oracle.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub value: f64,
    pub tol_rel: f64,
    pub source: Source,
}

impl Expected {
    pub fn accepts(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tol_rel * self.value.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidacticSetup {
    pub z: f64,
    /// `(Kp, Ki)` rows.
    pub gain_rows: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<GridModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<OperatingPoint>,
    /// Diagonal of `D` as `(magnitude, angle in degrees)` pairs.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub droop: Vec<DroopDirective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub didactic: Option<DidacticSetup>,
    pub expected: BTreeMap<String, Expected>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Fixture {
    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::MalformedFixture { name: self.name.clone(), reason };
        for (key, e) in &self.expected {
            if !e.value.is_finite() || !(e.tol_rel.is_finite() && e.tol_rel > 0.0) {
                return Err(bad(format!("expected '{key}' needs a finite value and positive tolerance")));
            }
        }
        match (&self.network, &self.didactic) {
            (Some(_), None) => {
                if self.operating_point.is_some() == self.d.is_some() && self.name != "ieee9-lines" {
                    return Err(bad("needs exactly one of operating_point, D".into()));
                }
            }
            (None, Some(_)) => {}
            _ => return Err(bad("needs exactly one of network, didactic".into())),
        }
        Ok(())
    }

    /// `D` entries as complex numbers.
    pub fn d_values(&self) -> Option<Vec<Complex64>> {
        self.d
            .as_ref()
            .map(|d| d.iter().map(|&[m, deg]| Complex64::from_polar(m, deg.to_radians())).collect())
    }

    pub fn reduced(&self) -> Result<ReducedNetwork> {
        let model = self.network.as_ref().ok_or_else(|| Error::MalformedFixture {
            name: self.name.clone(),
            reason: "not a network fixture".into(),
        })?;
        network::build_reduced(model)
    }

    /// Operating point: explicit states, or the unit-voltage equivalent of `D`.
    pub fn operating_point(&self, net: &ReducedNetwork) -> Result<OperatingPoint> {
        match (&self.operating_point, self.d_values()) {
            (Some(op), _) => Ok(op.clone()),
            (None, Some(d)) => OperatingPoint::equivalent_from_d(net.node_order(), &d),
            (None, None) => Err(Error::MalformedFixture {
                name: self.name.clone(),
                reason: "no operating point".into(),
            }),
        }
    }

    pub fn network_case(&self) -> Result<NetworkCase> {
        let net = self.reduced()?;
        let op = self.operating_point(&net)?;
        NetworkCase::from_reduced(net, op, &self.droop)
    }

    pub fn expected(&self, key: &str) -> Option<&Expected> {
        self.expected.get(key)
    }
}

pub fn fixture_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Load a built-in fixture, or generate `random-seed-<N>`.
pub fn load_fixture(name: &str) -> Result<Fixture> {
    if let Some(seed) = name.strip_prefix("random-seed-") {
        let seed = seed.parse::<u64>().map_err(|_| Error::UnknownFixture(name.to_string()))?;
        return Ok(random_fixture(seed));
    }
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
    let fx: Fixture = serde_json::from_str(text).map_err(|e| Error::MalformedFixture {
        name: name.to_string(),
        reason: e.to_string(),
    })?;
    fx.validate()?;
    Ok(fx)
}

/// Random passive network with shunt paths to ground and a well-separated
/// set of NMP zeros inside the default oracle range.
pub fn random_fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=5usize);
        if let Some(fx) = random_attempt(&mut rng, n, seed) {
            return fx;
        }
    }
}

fn random_attempt(rng: &mut ChaCha8Rng, n: usize, seed: u64) -> Option<Fixture> {
    let mut b = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || rng.random_bool(0.7) {
                let y = rng.random_range(1.0..10.0);
                b[(i, j)] -= y;
                b[(j, i)] -= y;
                b[(i, i)] += y;
                b[(j, j)] += y;
            }
        }
        b[(i, i)] += rng.random_range(0.5..5.0);
    }
    let order: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
    let converters = order
        .iter()
        .map(|id| ConverterState {
            bus: id.clone(),
            u_pu: rng.random_range(0.9..1.1),
            theta_rad: rng.random_range(-0.5..0.5),
            p_pu: rng.random_range(0.2..1.2),
            q_pu: rng.random_range(-0.3..0.5),
            s_b: 1.0,
        })
        .collect();
    let op = OperatingPoint { converters };
    let net = ReducedNetwork::new(order.clone(), b.clone(), OMEGA0_50HZ).ok()?;
    let mats = network::build_operating_matrices(&net, &op).ok()?;
    let set = zerocalc::zeros_closed_form(&mats, OMEGA0_50HZ);
    if set.branches[0].sigma > 9.0 {
        return None;
    }
    if set.branches.iter().any(|br| br.kind == zerocalc::BranchKind::Marginal) {
        return None;
    }
    let zeros = set.zeros();
    if zeros.is_empty() || zeros[0] < 1.0 || zeros.windows(2).any(|w| w[1] < 1.02 * w[0]) {
        return None;
    }
    Some(Fixture {
        name: format!("random-seed-{seed}"),
        network: Some(GridModel {
            omega0_rad_s: OMEGA0_50HZ,
            buses: Vec::new(),
            branches: Vec::new(),
            b_r: Some(network::rows_of(&b)),
            node_order: Some(order),
        }),
        operating_point: Some(op),
        d: None,
        droop: Vec::new(),
        didactic: None,
        expected: BTreeMap::new(),
        notes: vec![format!("Generated from seed {seed}: {n} converters, shunt paths to ground.")],
    })
}

/// `[[5(1 − s/z)/(s+10), 0.5/(s+20)], [0.5/(s+20), 5/(s+20)]]`.
pub fn didactic_plant(z: f64) -> Result<TransferMatrix> {
    let rf = |num: &[f64], den: &[f64]| RationalFunction::from_real(num, den);
    TransferMatrix::from_rows(vec![
        vec![rf(&[5.0, -5.0 / z], &[10.0, 1.0])?, rf(&[0.5], &[20.0, 1.0])?],
        vec![rf(&[0.5], &[20.0, 1.0])?, rf(&[5.0], &[20.0, 1.0])?],
    ])
}

/// `(Kp + Ki/s)/(0.05 s + 1) · I₂`.
pub fn didactic_controller(kp: f64, ki: f64) -> Result<TransferMatrix> {
    let k = RationalFunction::new(Polynomial::from_real(&[ki, kp]), Polynomial::from_real(&[0.0, 1.0, 0.05]))?;
    Ok(TransferMatrix::scalar_identity(2, &k))
}

/// Loop gain `L = J·K` of the didactic system.
pub fn didactic_loop(z: f64, kp: f64, ki: f64) -> Result<TransferMatrix> {
    didactic_plant(z)?.mul(&didactic_controller(kp, ki)?)
}

/// Parse `didactic:z=40,kp=5,ki=30` (any subset; defaults z=40, kp=5, ki=50).
pub fn parse_didactic(name: &str) -> Result<(f64, f64, f64)> {
    let rest = name
        .strip_prefix("didactic")
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
    let (mut z, mut kp, mut ki) = (40.0, 5.0, 50.0);
    let params = rest.strip_prefix(':').unwrap_or(rest);
    for part in params.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidModel(format!("didactic parameter '{part}' is not KEY=VALUE")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::InvalidModel(format!("didactic parameter '{part}': {e}")))?;
        match key.trim() {
            "z" => z = v,
            "kp" => kp = v,
            "ki" => ki = v,
            other => return Err(Error::InvalidModel(format!("unknown didactic parameter '{other}'"))),
        }
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidModel(format!("didactic zero must be positive, got {z}")));
    }
    Ok((z, kp, ki))
}

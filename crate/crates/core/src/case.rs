//! A network analysis case: reduced network, operating point and Jacobian
//! with droop applied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netjac::NetworkJacobian;
use crate::network::{self, GridModel, OperatingMatrices, OperatingPoint, ReducedNetwork};
use crate::zerocalc;

/// `gain` added at the Q-U diagonal entry of `node` (a label, or a 1-based
/// index when no label matches).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroopDirective {
    pub node: String,
    pub gain: f64,
}

impl std::str::FromStr for DroopDirective {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let (node, gain) = text
            .split_once('=')
            .ok_or_else(|| Error::InvalidModel(format!("droop directive '{text}' is not NODE=GAIN")))?;
        let gain = gain
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidModel(format!("droop gain in '{text}': {e}")))?;
        Ok(Self { node: node.trim().to_string(), gain })
    }
}

pub fn resolve_node(order: &[String], node: &str) -> Result<usize> {
    if let Some(k) = order.iter().position(|id| id == node) {
        return Ok(k);
    }
    match node.parse::<usize>() {
        Ok(k) if (1..=order.len()).contains(&k) => Ok(k - 1),
        Ok(k) => Err(Error::NodeOutOfRange { node: k.saturating_sub(1), count: order.len() }),
        Err(_) => Err(Error::InvalidModel(format!("unknown node '{node}'"))),
    }
}

#[derive(Clone, Debug)]
pub struct NetworkCase {
    pub net: ReducedNetwork,
    pub op: OperatingPoint,
    pub mats: OperatingMatrices,
    /// Jacobian without droop.
    pub base: NetworkJacobian,
    /// Jacobian with every droop directive applied.
    pub jac: NetworkJacobian,
}

impl NetworkCase {
    pub fn build(model: &GridModel, op: &OperatingPoint, droop: &[DroopDirective]) -> Result<Self> {
        Self::from_reduced(network::build_reduced(model)?, op.clone(), droop)
    }

    pub fn from_reduced(net: ReducedNetwork, op: OperatingPoint, droop: &[DroopDirective]) -> Result<Self> {
        let mats = network::build_operating_matrices(&net, &op)?;
        let base = NetworkJacobian::from_operating(&mats, net.omega0())?;
        let mut jac = base.clone();
        for d in droop {
            jac = jac.apply_droop(resolve_node(net.node_order(), &d.node)?, d.gain)?;
        }
        Ok(Self { net, op, mats, base, jac })
    }

    pub fn omega0(&self) -> f64 {
        self.net.omega0()
    }

    pub fn n(&self) -> usize {
        self.net.len()
    }

    /// NMP zeros of `jac`: closed form without droop, determinant oracle
    /// over `[s_min, s_max]` with it.
    pub fn nmp_zeros(&self, s_min: f64, s_max: f64, points: usize) -> Result<Vec<f64>> {
        if self.jac.has_droop() {
            Ok(zerocalc::zeros_oracle(&self.jac, s_min, s_max, points)?.into_iter().map(|r| r.z).collect())
        } else {
            Ok(zerocalc::zeros_closed_form(&self.mats, self.omega0()).zeros())
        }
    }

    /// Smallest NMP zero of `jac` over the default oracle range.
    pub fn dominant_zero(&self) -> Result<f64> {
        let w0 = self.omega0();
        self.nmp_zeros(1.0, 10.0 * w0, zerocalc::DEFAULT_GRID_POINTS)?
            .first()
            .copied()
            .ok_or_else(|| Error::Numerical("network has no NMP zero".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_directive() {
        let d: DroopDirective = "node3=10".parse().unwrap();
        assert_eq!(d, DroopDirective { node: "node3".into(), gain: 10.0 });
        assert!("3".parse::<DroopDirective>().is_err());
        assert!("3=x".parse::<DroopDirective>().is_err());
    }

    #[test]
    fn node_resolution() {
        let order: Vec<String> = vec!["a".into(), "b".into()];
        assert_eq!(resolve_node(&order, "b").unwrap(), 1);
        assert_eq!(resolve_node(&order, "1").unwrap(), 0);
        assert!(matches!(resolve_node(&order, "3"), Err(Error::NodeOutOfRange { .. })));
        assert!(resolve_node(&order, "zz").is_err());
    }
}

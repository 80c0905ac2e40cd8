//! Random planar link placements with power-law path loss.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sinr::NetworkConfig;

/// Transmitter-receiver pairs closer than this are redrawn.
pub const MIN_DISTANCE: f64 = 1e-6;

fn default_side() -> f64 {
    1.0
}

fn default_offset() -> f64 {
    0.1
}

fn default_exponent() -> f64 {
    3.0
}

fn default_noise() -> f64 {
    0.1
}

fn default_p_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub n_links: usize,
    #[serde(default = "default_side")]
    pub square_side: f64,
    /// Distance from each transmitter to its own receiver.
    #[serde(default = "default_offset")]
    pub rx_offset: f64,
    #[serde(default = "default_exponent")]
    pub path_loss_exp: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TopologySpec {
    pub fn new(n_links: usize, seed: u64) -> Self {
        Self {
            n_links,
            square_side: default_side(),
            rx_offset: default_offset(),
            path_loss_exp: default_exponent(),
            noise: default_noise(),
            p_max: default_p_max(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_links == 0 {
            return Err(Error::InvalidParameter("a topology needs at least one link".into()));
        }
        for (name, v) in [
            ("square_side", self.square_side),
            ("rx_offset", self.rx_offset),
            ("path_loss_exp", self.path_loss_exp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.rx_offset < MIN_DISTANCE {
            return Err(Error::InvalidParameter(format!(
                "rx_offset = {} is below the minimum distance {MIN_DISTANCE}",
                self.rx_offset
            )));
        }
        Ok(())
    }
}

/// Transmitters uniform on the square, each receiver `rx_offset` away in a
/// uniform direction, `g[j][i] = d(tx_j, rx_i)^-exp`. A placement putting
/// some transmitter within [`MIN_DISTANCE`] of a foreign receiver is
/// redrawn whole.
pub fn random_topology(spec: &TopologySpec) -> Result<NetworkConfig> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_links;
    loop {
        let tx: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen::<f64>() * spec.square_side, rng.gen::<f64>() * spec.square_side])
            .collect();
        let rx: Vec<[f64; 2]> = tx
            .iter()
            .map(|t| {
                let theta = rng.gen::<f64>() * TAU;
                [t[0] + spec.rx_offset * theta.cos(), t[1] + spec.rx_offset * theta.sin()]
            })
            .collect();
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        let degenerate = (0..n).any(|j| (0..n).any(|i| dist(tx[j], rx[i]) < MIN_DISTANCE));
        if degenerate {
            continue;
        }
        let gains = (0..n)
            .map(|j| (0..n).map(|i| dist(tx[j], rx[i]).powf(-spec.path_loss_exp)).collect())
            .collect();
        return NetworkConfig::new(gains, spec.noise, spec.p_max, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_link_gain() {
        let net = random_topology(&TopologySpec::new(1, 9)).unwrap();
        assert!((net.own_gain(0) - 0.1f64.powi(-3)).abs() < 1e-9);
    }

    #[test]
    fn replay_and_sanity() {
        let spec = TopologySpec::new(5, 42);
        let a = random_topology(&spec).unwrap();
        assert_eq!(a, random_topology(&spec).unwrap());
        assert_ne!(a, random_topology(&TopologySpec { seed: 43, ..spec }).unwrap());
        for row in &a.gains {
            assert!(row.iter().all(|g| g.is_finite() && *g > 0.0));
        }
    }

    #[test]
    fn own_link_is_offset_away() {
        let spec = TopologySpec {
            rx_offset: 0.25,
            path_loss_exp: 2.0,
            ..TopologySpec::new(4, 3)
        };
        let net = random_topology(&spec).unwrap();
        for i in 0..4 {
            assert!((net.own_gain(i) - 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(random_topology(&TopologySpec::new(0, 0)).is_err());
        assert!(random_topology(&TopologySpec {
            rx_offset: 0.0,
            ..TopologySpec::new(2, 0)
        })
        .is_err());
    }
}

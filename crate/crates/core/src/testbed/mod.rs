//! Analytic diffusion environments with exact atomic inputs and
//! brute-force oracles.

mod discrete;
mod gmm;
mod schedule;

use serde::{Deserialize, Serialize};

pub use discrete::{DiscreteDiffusion, DiscreteOracle, DEFAULT_STATE_CAP};
pub use gmm::{Assignment, GmmDiffusion, GmmOracle};
pub use schedule::VpSchedule;

/// Testbed settings stored next to a model in its JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestbedConfig {
    pub schedule: VpSchedule,
    /// Coordinates per categorical group.
    pub block_dim: usize,
    /// Distance between neighbouring component means on the block grid.
    pub spacing: f64,
    /// Isotropic terminal variance of every component.
    pub variance: f64,
    pub discrete_steps: usize,
    /// Per-step probability of resampling a coordinate uniformly.
    pub flip_rate: f64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            schedule: VpSchedule::default(),
            block_dim: 2,
            spacing: 1.0,
            variance: 0.25,
            discrete_steps: 5,
            flip_rate: 0.15,
        }
    }
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

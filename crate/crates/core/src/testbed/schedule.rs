use serde::{Deserialize, Serialize};

/// Variance-preserving schedule with a linear noise rate on `[0, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VpSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub horizon: f64,
}

impl Default for VpSchedule {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 20.0,
            horizon: 1.0,
        }
    }
}

impl VpSchedule {
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + (self.beta_max - self.beta_min) * t / self.horizon
    }

    /// Integral of the noise rate from 0 to `t`.
    pub fn integral(&self, t: f64) -> f64 {
        self.beta_min * t + (self.beta_max - self.beta_min) * t * t / (2.0 * self.horizon)
    }

    /// Signal scale of the marginal at `t`.
    pub fn alpha(&self, t: f64) -> f64 {
        (-0.5 * self.integral(t)).exp()
    }

    /// Noise variance `1 - alpha^2`, computed without cancellation.
    pub fn sigma2(&self, t: f64) -> f64 {
        -(-self.integral(t)).exp_m1()
    }

    pub fn is_valid(&self) -> bool {
        self.horizon > 0.0 && self.beta_min > 0.0 && self.beta_max > 0.0
    }
}

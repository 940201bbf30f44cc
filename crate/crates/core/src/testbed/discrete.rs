//! Finite-state diffusion with exact conditional kernels.
//!
//! States are the feasible worlds of a model. The forward chain resamples each
//! categorical coordinate uniformly with a fixed probability per step (or, for
//! taxonomies, the whole world). For an event `E`, the masked forward masses
//! `m_k^E(y) = P(X_0 in E, X_k = y)` give everything by Bayes:
//! `p(E | x_k) = m_k^E(x_k) / m_k(x_k)` and
//! `p(x_{k-1} | E, x_k) = m_{k-1}^E(x_{k-1}) K_k(x_{k-1}, x_k) / m_k^E(x_k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TestbedConfig;
use crate::calculus::{DiscreteAtomInput, DiscreteAtomicInputs, LogPosterior};
use crate::error::{Error, Result};
use crate::formula::{Formula, World};
use crate::model::{CategoricalModel, DistributionModel, Event, FeasibleWorldSet, WorldLabel, DEFAULT_WORLD_CAP};

/// Largest state space with dense kernels.
pub const DEFAULT_STATE_CAP: usize = 4096;

/// Per-step state masses, `[k][state]`.
type Masses = Vec<Vec<f64>>;

#[derive(Clone, Debug)]
pub struct DiscreteDiffusion {
    model: DistributionModel,
    states: FeasibleWorldSet,
    p0: Vec<f64>,
    steps: usize,
    flip_rate: f64,
    /// Row-major `K(x_{k-1}, x_k)`, shared by every step.
    kernel: Vec<f64>,
    /// Unconditional forward masses `m_k`, `k = 0..=steps`.
    marginals: Vec<Vec<f64>>,
    /// `[atom] -> (masses of E, masses of not-E)`.
    atom_masses: Vec<(Masses, Masses)>,
}

/// Exact posterior and one-step conditional kernel row of a formula.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOracle {
    pub posterior: LogPosterior,
    pub row: Vec<f64>,
}

impl DiscreteDiffusion {
    /// Builds a chain on the model's worlds; `p0` is indexed like the
    /// enumerated worlds and is normalised here.
    pub fn new(model: DistributionModel, p0: Vec<f64>, steps: usize, flip_rate: f64) -> Result<Self> {
        let report = model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("at least one step required".into()));
        }
        if !(0.0..=1.0).contains(&flip_rate) {
            return Err(Error::InvalidInput(format!("flip rate {flip_rate} outside [0, 1]")));
        }
        let states = model.enumerate_worlds(DEFAULT_WORLD_CAP)?;
        let n = states.len();
        if n > DEFAULT_STATE_CAP {
            return Err(Error::CapExceeded {
                what: "discrete state",
                requested: n as u128,
                cap: DEFAULT_STATE_CAP as u128,
            });
        }
        if p0.len() != n || p0.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidInput(format!(
                "terminal law needs {n} nonnegative entries"
            )));
        }
        let total: f64 = p0.iter().sum();
        if total <= 0.0 {
            return Err(Error::WeightSum(total));
        }
        let p0: Vec<f64> = p0.iter().map(|p| p / total).collect();
        let kernel = build_kernel(&model, &states, flip_rate);
        let mut dd = Self {
            model,
            states,
            p0,
            steps,
            flip_rate,
            kernel,
            marginals: Vec::new(),
            atom_masses: Vec::new(),
        };
        dd.marginals = dd.forward(&Event::full(n));
        let registry_len = dd.model.registry().len();
        dd.atom_masses = (0..registry_len)
            .map(|a| {
                let e = dd.states.atom_event(crate::formula::AtomId(a))?;
                Ok((dd.forward(&e), dd.forward(&e.complement())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(dd)
    }

    /// Product terminal law from per-group weights (uniform when absent).
    pub fn categorical(
        model: CategoricalModel,
        group_weights: Option<Vec<Vec<f64>>>,
        steps: usize,
        flip_rate: f64,
    ) -> Result<Self> {
        let weights = group_weights.unwrap_or_else(|| {
            model
                .groups()
                .iter()
                .map(|g| vec![1.0 / g.len() as f64; g.len()])
                .collect()
        });
        if weights.len() != model.groups().len() || weights.iter().zip(model.groups()).any(|(w, g)| w.len() != g.len())
        {
            return Err(Error::InvalidInput("one weight per group value expected".into()));
        }
        let p0 = model
            .assignments()
            .map(|t| t.iter().enumerate().map(|(g, &v)| weights[g][v]).product())
            .collect();
        Self::new(model.into(), p0, steps, flip_rate)
    }

    /// Random product terminal law on a categorical model.
    pub fn random_categorical(model: CategoricalModel, steps: usize, flip_rate: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = model
            .groups()
            .iter()
            .map(|g| {
                let w: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.2..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Self::categorical(model, Some(weights), steps, flip_rate)
    }

    /// Nine states (two groups of three values), five steps, flip rate 0.15,
    /// random product terminal law.
    pub fn default_instance(seed: u64) -> Self {
        let model =
            CategoricalModel::with_values(&[("g1", &["a", "b", "c"]), ("g2", &["a", "b", "c"])]).expect("static model");
        let cfg = TestbedConfig::default();
        Self::random_categorical(model, cfg.discrete_steps, cfg.flip_rate, seed).expect("static testbed")
    }

    pub fn model(&self) -> &DistributionModel {
        &self.model
    }

    pub fn states(&self) -> &FeasibleWorldSet {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn world(&self, state: usize) -> &World {
        &self.states.worlds[state]
    }

    pub fn label(&self, state: usize) -> &WorldLabel {
        &self.states.labels[state]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn flip_rate(&self) -> f64 {
        self.flip_rate
    }

    pub fn terminal(&self) -> &[f64] {
        &self.p0
    }

    /// Marginal of `X_k`.
    pub fn marginal(&self, k: usize) -> &[f64] {
        &self.marginals[k]
    }

    pub fn kernel(&self, from: usize, to: usize) -> f64 {
        self.kernel[from * self.states.len() + to]
    }

    /// `m_k^E` for `k = 0..=steps`.
    pub fn forward(&self, event: &Event) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut m: Vec<f64> = (0..n)
            .map(|i| if event.contains(i) { self.p0[i] } else { 0.0 })
            .collect();
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(m.clone());
        for _ in 0..self.steps {
            let mut next = vec![0.0; n];
            for (x, &mx) in m.iter().enumerate() {
                if mx == 0.0 {
                    continue;
                }
                let row = &self.kernel[x * n..(x + 1) * n];
                for (y, k) in row.iter().enumerate() {
                    next[y] += mx * k;
                }
            }
            m = next;
            out.push(m.clone());
        }
        out
    }

    fn check(&self, step: usize, state: usize) -> Result<()> {
        if step == 0 || step > self.steps {
            return Err(Error::InvalidInput(format!("step {step} outside 1..={}", self.steps)));
        }
        if state >= self.states.len() {
            return Err(Error::InvalidInput(format!("state {state} out of range")));
        }
        Ok(())
    }

    fn row_from(&self, masses: &[Vec<f64>], step: usize, state: usize) -> Vec<f64> {
        let denom = masses[step][state];
        if denom <= 0.0 {
            return vec![0.0; self.states.len()];
        }
        masses[step - 1]
            .iter()
            .enumerate()
            .map(|(y, m)| m * self.kernel(y, state) / denom)
            .collect()
    }

    fn posterior_from(&self, inside: &[Vec<f64>], outside: &[Vec<f64>], step: usize, state: usize) -> LogPosterior {
        let total = self.marginals[step][state].ln();
        LogPosterior {
            log_p: inside[step][state].ln() - total,
            log_q: outside[step][state].ln() - total,
        }
    }

    /// Exact atomic posteriors and conditional rows for the move `x_step -> x_{step-1}`.
    pub fn atomic_inputs(&self, step: usize, state: usize) -> Result<DiscreteAtomicInputs> {
        self.check(step, state)?;
        let uncond_row = self.row_from(&self.marginals, step, state);
        let atoms = self
            .atom_masses
            .iter()
            .map(|(inside, outside)| DiscreteAtomInput {
                posterior: self.posterior_from(inside, outside, step, state),
                row: self.row_from(inside, step, state),
            })
            .collect();
        Ok(DiscreteAtomicInputs { uncond_row, atoms })
    }

    /// Exact posterior and conditional row of `f` by enumeration.
    pub fn formula_oracle(&self, f: &Formula, step: usize, state: usize) -> Result<DiscreteOracle> {
        self.check(step, state)?;
        let event = self.states.event(f)?;
        let inside = self.forward(&event);
        if inside[step][state] <= 0.0 {
            return Err(Error::EmptyEvent);
        }
        let outside = self.forward(&event.complement());
        Ok(DiscreteOracle {
            posterior: self.posterior_from(&inside, &outside, step, state),
            row: self.row_from(&inside, step, state),
        })
    }

    /// `p_0(. | E)`.
    pub fn conditional_terminal(&self, event: &Event) -> Result<Vec<f64>> {
        let mass: f64 = event.indices().map(|i| self.p0[i]).sum();
        if mass <= 0.0 {
            return Err(Error::EmptyEvent);
        }
        Ok((0..self.states.len())
            .map(|i| if event.contains(i) { self.p0[i] / mass } else { 0.0 })
            .collect())
    }
}

fn build_kernel(model: &DistributionModel, states: &FeasibleWorldSet, r: f64) -> Vec<f64> {
    let n = states.len();
    let mut k = vec![0.0; n * n];
    match model {
        DistributionModel::Categorical(m) => {
            let sizes: Vec<f64> = m.groups().iter().map(|g| g.len() as f64).collect();
            let tuples: Vec<&Vec<usize>> = states
                .labels
                .iter()
                .map(|l| match l {
                    WorldLabel::Assignment(t) => t,
                    WorldLabel::Node(_) => unreachable!("categorical worlds carry tuples"),
                })
                .collect();
            for (x, tx) in tuples.iter().enumerate() {
                for (y, ty) in tuples.iter().enumerate() {
                    k[x * n + y] = tx
                        .iter()
                        .zip(ty.iter())
                        .zip(&sizes)
                        .map(|((a, b), s)| if a == b { 1.0 - r + r / s } else { r / s })
                        .product();
                }
            }
        }
        DistributionModel::Taxonomy(_) => {
            for x in 0..n {
                for y in 0..n {
                    k[x * n + y] = if x == y { 1.0 - r + r / n as f64 } else { r / n as f64 };
                }
            }
        }
    }
    k
}

//! Guided generation on the analytic testbeds.
//!
//! The continuous sampler integrates the reverse-time VP SDE with
//! Euler-Maruyama, adding the composed logical score to the unconditional
//! score at every step. The discrete sampler runs the chain backwards through
//! composed one-step kernels.

mod estimate;

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{eval, eval_transition, AtomicInputs, EvalOptions, DEFAULT_EPSILON};
use crate::circuit::GuidanceCircuit;
use crate::error::{Error, Result};
use crate::formula::AtomId;
use crate::model::CategoricalModel;
use crate::testbed::{DiscreteDiffusion, GmmDiffusion};

pub use estimate::{estimate_posteriors_from_scores, posterior_odds, uncond_score_from_conditionals, EstimatorConfig};

/// Where atomic posteriors come from during continuous sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorSource {
    Exact,
    /// Estimated from class-conditional scores with this many log-SNR draws.
    Estimated {
        draws: usize,
    },
}

/// How child scores are combined at circuit nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionRule {
    /// Posterior-weighted rules of the calculus.
    #[default]
    Exact,
    /// Baseline: disjunctions average their children with weight 1/2,
    /// conjunctions add, negations flip the sign.
    ConstantWeights,
}

/// Where the guidance weight `w` is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceScaling {
    /// `s_uncond + w * s_formula`.
    #[default]
    WholeFormula,
    /// Every atomic score is multiplied by `w` before composition.
    PerAtom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub w: f64,
    pub w_not: f64,
    /// Replace every atom `A` by the repulsive score against its most probable
    /// same-group competitor.
    pub repulsive: bool,
    pub posterior: PosteriorSource,
    pub rule: CompositionRule,
    pub scaling: GuidanceScaling,
    pub epsilon: f64,
    /// Evaluate without clamping or capping and fail on singularities.
    pub exact_mode: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            t_min: 1e-3,
            t_max: 1.0,
            w: 1.0,
            w_not: 1.0,
            repulsive: false,
            posterior: PosteriorSource::Exact,
            rule: CompositionRule::Exact,
            scaling: GuidanceScaling::WholeFormula,
            epsilon: DEFAULT_EPSILON,
            exact_mode: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need 0 < t_min < t_max, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        for (name, v) in [("w", self.w), ("w_not", self.w_not)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(Error::InvalidInput(format!(
                "epsilon {} outside [0, 0.5)",
                self.epsilon
            )));
        }
        if let PosteriorSource::Estimated { draws: 0 } = self.posterior {
            return Err(Error::InvalidInput("estimator needs at least one draw".into()));
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        if self.exact_mode {
            EvalOptions::exact()
        } else {
            EvalOptions {
                epsilon: self.epsilon,
                ..EvalOptions::default()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Samples {
    Continuous(Vec<Vec<f64>>),
    /// Indices into the testbed's feasible worlds.
    Discrete(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub samples: Samples,
    pub seed: u64,
    pub config: SamplerConfig,
    /// Kernel rows that needed clipping of negative mass.
    pub repaired: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Continuous(v) => v.len(),
            Samples::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Most probable atom of `target`'s group other than `target`; ties go to
/// the lowest id.
pub fn repulsive_competitor(model: &CategoricalModel, inputs: &AtomicInputs, target: AtomId) -> Result<AtomId> {
    if target.0 >= model.registry().len() {
        return Err(Error::UnassignedAtom(target.0));
    }
    let group = &model.groups()[model.group_of(target)];
    let mut best: Option<(AtomId, f64)> = None;
    for &a in group.atoms() {
        if a == target {
            continue;
        }
        let lp = inputs.atom(a)?.posterior.log_p;
        best = match best {
            Some((b, blp)) if blp > lp || (blp == lp && b.0 < a.0) => Some((b, blp)),
            _ => Some((a, lp)),
        };
    }
    best.map(|(a, _)| a).ok_or(Error::SingletonGroup(target.0))
}

/// `w * s_A - w_not * odds(B) * s_B` with `B` the most probable competitor of `A`.
pub fn repulsive_atomic_score(
    model: &CategoricalModel,
    inputs: &AtomicInputs,
    target: AtomId,
    w: f64,
    w_not: f64,
) -> Result<Vec<f64>> {
    let competitor = repulsive_competitor(model, inputs, target)?;
    let a = inputs.atom(target)?;
    let b = inputs.atom(competitor)?;
    let odds = b.posterior.odds();
    Ok(a.score
        .iter()
        .zip(&b.score)
        .map(|(sa, sb)| w * sa - w_not * (odds * sb))
        .collect())
}

/// Score of the constant-weight baseline composition.
pub fn constant_weight_score(c: &GuidanceCircuit, inputs: &AtomicInputs) -> Result<Vec<f64>> {
    Ok(match c {
        GuidanceCircuit::Atom(a) => inputs.atom(*a)?.score.clone(),
        GuidanceCircuit::Not(x) => constant_weight_score(x, inputs)?.into_iter().map(|v| -v).collect(),
        GuidanceCircuit::AndCi(l, r) => {
            let (l, r) = (constant_weight_score(l, inputs)?, constant_weight_score(r, inputs)?);
            l.iter().zip(&r).map(|(a, b)| a + b).collect()
        }
        GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => {
            let (l, r) = (constant_weight_score(l, inputs)?, constant_weight_score(r, inputs)?);
            l.iter().zip(&r).map(|(a, b)| 0.5 * a + 0.5 * b).collect()
        }
    })
}

/// Full guided score `grad log p_t(x) + guidance` at one state.
pub fn guided_score<R: Rng + ?Sized>(
    g: &GmmDiffusion,
    c: &GuidanceCircuit,
    cfg: &SamplerConfig,
    t: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut inputs = g.atomic_inputs(t, x)?;
    if cfg.w == 0.0 && !(cfg.repulsive && cfg.w_not != 0.0) {
        return Ok(inputs.uncond_score);
    }
    if let PosteriorSource::Estimated { draws } = cfg.posterior {
        let est = EstimatorConfig {
            draws,
            ..EstimatorConfig::default()
        };
        let posts = estimate_posteriors_from_scores(g, t, x, &est, rng)?;
        for (input, p) in inputs.atoms.iter_mut().zip(posts) {
            input.posterior = p;
        }
    }
    let outer = if cfg.repulsive {
        let replaced = c
            .atoms()
            .into_iter()
            .map(|a| Ok((a, repulsive_atomic_score(g.model(), &inputs, a, cfg.w, cfg.w_not)?)))
            .collect::<Result<Vec<_>>>()?;
        for (a, s) in replaced {
            inputs.atoms[a.0].score = s;
        }
        1.0
    } else {
        match cfg.scaling {
            GuidanceScaling::WholeFormula => cfg.w,
            GuidanceScaling::PerAtom => {
                for input in &mut inputs.atoms {
                    input.score.iter_mut().for_each(|v| *v *= cfg.w);
                }
                1.0
            }
        }
    };
    let guidance = match cfg.rule {
        CompositionRule::Exact => eval(c, &inputs, &cfg.eval_options())?.score,
        CompositionRule::ConstantWeights => constant_weight_score(c, &inputs)?,
    };
    Ok(inputs
        .uncond_score
        .iter()
        .zip(&guidance)
        .map(|(u, s)| u + outer * s)
        .collect())
}

fn trajectory(g: &GmmDiffusion, c: &GuidanceCircuit, cfg: &SamplerConfig, index: usize) -> Result<Vec<f64>> {
    let mut rng = sample_rng(cfg.seed, index);
    let mut x: Vec<f64> = (0..g.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let h = (cfg.t_max - cfg.t_min) / cfg.steps as f64;
    for step in 0..cfg.steps {
        let t = cfg.t_max - step as f64 * h;
        let beta = g.schedule().beta(t);
        let score = guided_score(g, c, cfg, t, &x, &mut rng)?;
        let last = step + 1 == cfg.steps;
        let noise = (beta * h).sqrt();
        for (xk, sk) in x.iter_mut().zip(&score) {
            *xk += h * (0.5 * beta * *xk + beta * sk);
            if !last {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xk += noise * z;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
    }
    Ok(x)
}

/// Draws `n` samples by Euler-Maruyama integration from `t_max` down to `t_min`.
///
/// Sample `i` uses its own ChaCha stream `i` under `cfg.seed`, so the batch
/// does not depend on thread scheduling.
pub fn sample_continuous(g: &GmmDiffusion, c: &GuidanceCircuit, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    cfg.validate()?;
    if cfg.t_max > g.schedule().horizon {
        return Err(Error::InvalidTime(cfg.t_max));
    }
    let atoms = g.model().registry().len();
    if let Some(a) = c.atoms().into_iter().find(|a| a.0 >= atoms) {
        return Err(Error::UnassignedAtom(a.0));
    }
    let samples = (0..n)
        .into_par_iter()
        .map(|i| trajectory(g, c, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        samples: Samples::Continuous(samples),
        seed: cfg.seed,
        config: cfg.clone(),
        repaired: 0,
    })
}

struct Transition {
    prob: f64,
    row: Vec<f64>,
    repaired: bool,
}

fn transitions(
    dd: &DiscreteDiffusion,
    c: &GuidanceCircuit,
    opts: &EvalOptions,
    step: usize,
    states: &[usize],
) -> Result<HashMap<usize, Transition>> {
    let mut distinct = states.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct
        .into_par_iter()
        .map(|x| {
            let out = eval_transition(c, &dd.atomic_inputs(step, x)?, opts)?;
            Ok((
                x,
                Transition {
                    prob: out.posterior.prob(),
                    row: out.row,
                    repaired: out.repaired,
                },
            ))
        })
        .collect()
}

/// Ancestral sampling through composed kernels.
///
/// The start state is drawn from `m_T(x) * p_T(formula | x)`, so with exact
/// inputs the terminal law is exactly `p_0(. | formula)`. Discrete guidance is
/// exact conditioning: `w`, the repulsive switch and estimated posteriors do
/// not apply.
pub fn sample_discrete(
    dd: &DiscreteDiffusion,
    c: &GuidanceCircuit,
    cfg: &SamplerConfig,
    n: usize,
) -> Result<SampleBatch> {
    cfg.validate()?;
    if cfg.repulsive || cfg.rule != CompositionRule::Exact || cfg.posterior != PosteriorSource::Exact {
        return Err(Error::InvalidInput(
            "discrete sampling supports exact posteriors and exact composition only".into(),
        ));
    }
    let opts = cfg.eval_options();
    let top = dd.steps();
    let all: Vec<usize> = (0..dd.state_count()).collect();
    let mut table = transitions(dd, c, &opts, top, &all)?;
    let weights: Vec<f64> = all.iter().map(|x| dd.marginal(top)[*x] * table[x].prob).collect();
    let first = WeightedIndex::new(&weights).map_err(|_| Error::ZeroRow)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| sample_rng(cfg.seed, i)).collect();
    let mut states: Vec<usize> = rngs.iter_mut().map(|r| first.sample(r)).collect();
    let mut repaired = 0;
    for step in (1..=top).rev() {
        if step < top {
            table = transitions(dd, c, &opts, step, &states)?;
        }
        repaired += table.values().filter(|t| t.repaired).count();
        let pickers = table
            .drain()
            .map(|(x, t)| Ok((x, WeightedIndex::new(&t.row).map_err(|_| Error::ZeroRow)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        states
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .for_each(|(x, rng)| *x = pickers[x].sample(rng));
    }
    Ok(SampleBatch {
        samples: Samples::Discrete(states),
        seed: cfg.seed,
        config: cfg.clone(),
        repaired,
    })
}

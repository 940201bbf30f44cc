//! Block-product Gaussian mixture under a variance-preserving forward process.
//!
//! Each categorical group owns a disjoint block of coordinates, and a terminal
//! sample draws one value per group independently and places a Gaussian on
//! every block. The noised marginal therefore factorises over blocks at every
//! time, which makes atoms from different groups exactly conditionally
//! independent given the state.

use std::ops::Range;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{log_sum_exp, TestbedConfig, VpSchedule};
use crate::calculus::{AtomInput, AtomicInputs, LogPosterior};
use crate::error::{Error, Result};
use crate::formula::{AtomId, Formula};
use crate::model::CategoricalModel;

/// One value index per group.
pub type Assignment = Vec<usize>;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug)]
pub struct GmmDiffusion {
    model: CategoricalModel,
    schedule: VpSchedule,
    blocks: Vec<Range<usize>>,
    /// `[group][value][coordinate within block]`.
    means: Vec<Vec<Vec<f64>>>,
    /// Diagonal terminal variances, same layout as `means`.
    variances: Vec<Vec<Vec<f64>>>,
    weights: Vec<Vec<f64>>,
    log_weights: Vec<Vec<f64>>,
}

/// Exact posterior and score of a formula.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmOracle {
    pub posterior: LogPosterior,
    pub score: Vec<f64>,
}

/// Per-group component log densities (including log weights) and gradients.
pub(crate) struct GroupTerms {
    pub log_terms: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

impl GroupTerms {
    fn log_norm(&self) -> f64 {
        log_sum_exp(self.log_terms.iter().copied())
    }
}

fn grid_positions(n: usize, block_dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    if block_dim == 1 {
        let c = (n as f64 - 1.0) / 2.0;
        return (0..n).map(|k| vec![(k as f64 - c) * spacing]).collect();
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (cx, cy) = ((cols as f64 - 1.0) / 2.0, (rows as f64 - 1.0) / 2.0);
    (0..n)
        .map(|k| {
            let mut p = vec![0.0; block_dim];
            p[0] = ((k % cols) as f64 - cx) * spacing;
            p[1] = ((k / cols) as f64 - cy) * spacing;
            p
        })
        .collect()
}

impl GmmDiffusion {
    pub fn new(
        model: CategoricalModel,
        schedule: VpSchedule,
        means: Vec<Vec<Vec<f64>>>,
        variances: Vec<Vec<Vec<f64>>>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let report = model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        if !schedule.is_valid() {
            return Err(Error::InvalidInput(
                "schedule rates and horizon must be positive".into(),
            ));
        }
        let groups = model.groups();
        if means.len() != groups.len() || variances.len() != groups.len() || weights.len() != groups.len() {
            return Err(Error::InvalidInput("one entry per group expected".into()));
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        for (g, group) in groups.iter().enumerate() {
            let n = group.len();
            if means[g].len() != n || variances[g].len() != n || weights[g].len() != n {
                return Err(Error::InvalidInput(format!(
                    "group `{}` needs {n} components",
                    group.name
                )));
            }
            let width = means[g][0].len();
            if width == 0
                || means[g].iter().chain(&variances[g]).any(|v| v.len() != width)
                || variances[g].iter().flatten().any(|v| v.is_nan() || *v <= 0.0)
            {
                return Err(Error::InvalidInput(format!(
                    "group `{}` has inconsistent block shapes or nonpositive variances",
                    group.name
                )));
            }
            let total: f64 = weights[g].iter().sum();
            if weights[g].iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::WeightSum(total));
            }
            blocks.push(start..start + width);
            start += width;
        }
        let log_weights = weights.iter().map(|ws| ws.iter().map(|w| w.ln()).collect()).collect();
        Ok(Self {
            model,
            schedule,
            blocks,
            means,
            variances,
            weights,
            log_weights,
        })
    }

    /// Means on a centred grid per block, isotropic variance, given or uniform weights.
    pub fn grid(model: CategoricalModel, config: &TestbedConfig, weights: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if config.block_dim == 0 {
            return Err(Error::InvalidInput("block_dim must be positive".into()));
        }
        let groups = model.groups().to_vec();
        let means: Vec<Vec<Vec<f64>>> = groups
            .iter()
            .map(|g| grid_positions(g.len(), config.block_dim, config.spacing))
            .collect();
        let variances = groups
            .iter()
            .map(|g| vec![vec![config.variance; config.block_dim]; g.len()])
            .collect();
        let weights = weights.unwrap_or_else(|| groups.iter().map(|g| vec![1.0 / g.len() as f64; g.len()]).collect());
        Self::new(model, config.schedule, means, variances, weights)
    }

    /// Two groups of three values, two coordinates per group, uniform weights.
    pub fn default_instance() -> Self {
        let model =
            CategoricalModel::with_values(&[("g1", &["a", "b", "c"]), ("g2", &["a", "b", "c"])]).expect("static model");
        Self::grid(model, &TestbedConfig::default(), None).expect("static testbed")
    }

    pub fn model(&self) -> &CategoricalModel {
        &self.model
    }

    pub fn schedule(&self) -> &VpSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn means(&self) -> &[Vec<Vec<f64>>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<Vec<f64>>] {
        &self.variances
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= self.schedule.horizon) {
            return Err(Error::InvalidTime(t));
        }
        Ok(-0.5 * self.schedule.integral(t))
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "state has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Component terms of group `g` at signal scale `exp(log_alpha)`.
    pub(crate) fn group_terms(&self, g: usize, log_alpha: f64, xb: &[f64]) -> GroupTerms {
        let alpha = log_alpha.exp();
        let a2 = (2.0 * log_alpha).exp();
        let noise = -(2.0 * log_alpha).exp_m1();
        let n = self.means[g].len();
        let mut log_terms = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for v in 0..n {
            let mut lt = self.log_weights[g][v];
            let mut grad = Vec::with_capacity(xb.len());
            for (k, &xk) in xb.iter().enumerate() {
                let var = a2 * self.variances[g][v][k] + noise;
                let diff = xk - alpha * self.means[g][v][k];
                lt -= 0.5 * (LN_2PI + var.ln() + diff * diff / var);
                grad.push(-diff / var);
            }
            log_terms.push(lt);
            grads.push(grad);
        }
        GroupTerms { log_terms, grads }
    }

    fn all_terms(&self, log_alpha: f64, x: &[f64]) -> Vec<GroupTerms> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(g, b)| self.group_terms(g, log_alpha, &x[b.clone()]))
            .collect()
    }

    /// Exact per-atom posteriors and score differences at `(t, x)`.
    pub fn atomic_inputs(&self, t: f64, x: &[f64]) -> Result<AtomicInputs> {
        let log_alpha = self.check_time(t)?;
        self.check_state(x)?;
        let d = self.dim();
        let mut atoms = vec![None; self.model.registry().len()];
        let mut uncond = vec![0.0; d];
        for (g, terms) in self.all_terms(log_alpha, x).into_iter().enumerate() {
            let block = self.blocks[g].clone();
            let lse = terms.log_norm();
            let probs: Vec<f64> = terms.log_terms.iter().map(|l| (l - lse).exp()).collect();
            for (v, grad) in terms.grads.iter().enumerate() {
                for (k, gk) in grad.iter().enumerate() {
                    uncond[block.start + k] += probs[v] * gk;
                }
            }
            for (v, &a) in self.model.groups()[g].atoms().iter().enumerate() {
                let others = log_sum_exp(
                    terms
                        .log_terms
                        .iter()
                        .enumerate()
                        .filter(|(u, _)| *u != v)
                        .map(|(_, l)| *l),
                );
                let mut score = vec![0.0; d];
                // sum over competitors of p_u (g_v - g_u): no cancellation as p_v -> 1
                for (u, gu) in terms.grads.iter().enumerate() {
                    if u == v {
                        continue;
                    }
                    for (k, (gv, gu)) in terms.grads[v].iter().zip(gu).enumerate() {
                        score[block.start + k] += probs[u] * (gv - gu);
                    }
                }
                atoms[a.0] = Some(AtomInput {
                    posterior: LogPosterior {
                        log_p: terms.log_terms[v] - lse,
                        log_q: others - lse,
                    },
                    score,
                });
            }
        }
        Ok(AtomicInputs {
            time: t,
            uncond_score: uncond,
            atoms: atoms.into_iter().map(|a| a.expect("groups cover atoms")).collect(),
        })
    }

    /// `grad log p_t(x)`.
    pub fn unconditional_score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let log_alpha = self.check_time(t)?;
        self.check_state(x)?;
        let mut out = vec![0.0; self.dim()];
        for (g, terms) in self.all_terms(log_alpha, x).into_iter().enumerate() {
            let lse = terms.log_norm();
            for (v, grad) in terms.grads.iter().enumerate() {
                let p = (terms.log_terms[v] - lse).exp();
                for (k, gk) in grad.iter().enumerate() {
                    out[self.blocks[g].start + k] += p * gk;
                }
            }
        }
        Ok(out)
    }

    /// `grad log p_t(x | atom)`.
    pub fn conditional_score(&self, t: f64, x: &[f64], atom: AtomId) -> Result<Vec<f64>> {
        let mut out = self.unconditional_score(t, x)?;
        let log_alpha = self.check_time(t)?;
        let g = self.model.group_of(atom);
        let v = self.model.value_of(atom);
        let block = self.blocks[g].clone();
        let terms = self.group_terms(g, log_alpha, &x[block.clone()]);
        out[block].copy_from_slice(&terms.grads[v]);
        Ok(out)
    }

    /// Within-block conditional scores `grad log p(x_g | value)` of every value
    /// of group `g`, at signal scale `exp(log_alpha)`.
    pub fn class_block_scores(&self, g: usize, log_alpha: f64, xb: &[f64]) -> Vec<Vec<f64>> {
        self.group_terms(g, log_alpha, xb).grads
    }

    /// `ln p_t(x)`.
    pub fn log_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let log_alpha = self.check_time(t)?;
        self.check_state(x)?;
        Ok(self.all_terms(log_alpha, x).iter().map(GroupTerms::log_norm).sum())
    }

    /// Exact posterior and score of `f` by enumerating every value tuple.
    pub fn formula_oracle(&self, f: &Formula, t: f64, x: &[f64]) -> Result<GmmOracle> {
        let log_alpha = self.check_time(t)?;
        self.check_state(x)?;
        let terms = self.all_terms(log_alpha, x);
        let mut sat = Vec::new();
        let mut log_all = Vec::new();
        let mut tuples = Vec::new();
        for tuple in self.model.assignments() {
            let l: f64 = tuple.iter().enumerate().map(|(g, &v)| terms[g].log_terms[v]).sum();
            sat.push(f.evaluate(&self.model.world_for_assignment(&tuple))?);
            log_all.push(l);
            tuples.push(tuple);
        }
        let lse_all = log_sum_exp(log_all.iter().copied());
        let lse_sat = log_sum_exp(log_all.iter().zip(&sat).filter(|(_, s)| **s).map(|(l, _)| *l));
        let lse_unsat = log_sum_exp(log_all.iter().zip(&sat).filter(|(_, s)| !**s).map(|(l, _)| *l));
        if lse_sat == f64::NEG_INFINITY {
            return Err(Error::EmptyEvent);
        }
        let mut score = vec![0.0; self.dim()];
        for ((tuple, l), s) in tuples.iter().zip(&log_all).zip(&sat) {
            let mut w = -(l - lse_all).exp();
            if *s {
                w += (l - lse_sat).exp();
            }
            for (g, &v) in tuple.iter().enumerate() {
                for (k, gk) in terms[g].grads[v].iter().enumerate() {
                    score[self.blocks[g].start + k] += w * gk;
                }
            }
        }
        Ok(GmmOracle {
            posterior: LogPosterior {
                log_p: lse_sat - lse_all,
                log_q: lse_unsat - lse_all,
            },
            score,
        })
    }

    /// Draws from the marginal at `t` (`t = 0` gives the terminal mixture),
    /// returning the states and their component tuples.
    pub fn sample_marginal<R: Rng + ?Sized>(
        &self,
        t: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<Vec<f64>>, Vec<Assignment>)> {
        if !(0.0..=self.schedule.horizon).contains(&t) {
            return Err(Error::InvalidTime(t));
        }
        let log_alpha = -0.5 * self.schedule.integral(t);
        let alpha = log_alpha.exp();
        let a2 = alpha * alpha;
        let noise = self.schedule.sigma2(t);
        let pickers = self
            .weights
            .iter()
            .map(|w| WeightedIndex::new(w).map_err(|e| Error::InvalidInput(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut xs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let tuple: Vec<usize> = pickers.iter().map(|p| p.sample(rng)).collect();
            let mut x = vec![0.0; self.dim()];
            for (g, &v) in tuple.iter().enumerate() {
                for (k, xk) in x[self.blocks[g].clone()].iter_mut().enumerate() {
                    let sd = (a2 * self.variances[g][v][k] + noise).sqrt();
                    let z: f64 = StandardNormal.sample(rng);
                    *xk = alpha * self.means[g][v][k] + sd * z;
                }
            }
            xs.push(x);
            labels.push(tuple);
        }
        Ok((xs, labels))
    }

    /// Most probable component tuple under the terminal mixture.
    pub fn map_assignment(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_state(x)?;
        Ok(self
            .all_terms(0.0, x)
            .iter()
            .map(|terms| {
                terms
                    .log_terms
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (v, &l)| if l > best.1 { (v, l) } else { best },
                    )
                    .0
            })
            .collect())
    }
}

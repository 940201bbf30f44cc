//! Posteriors from conditional scores alone.
//!
//! For a class-conditional model with exact denoisers, the log-likelihood of
//! the current state under class `c` equals, up to a class-independent
//! constant, minus half the integrated denoising error over log-SNR:
//! `ln p(x | c) = -1/2 int E||eps - eps_c(x_lambda)||^2 dlambda + const`,
//! where `x_lambda` further noises `x` to log-SNR `lambda`. Posteriors follow
//! by a softmax with the class prior. Every class is probed with the same
//! (lambda, eps) draws, so shared terms cancel exactly.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::LogPosterior;
use crate::error::{Error, Result};
use crate::testbed::GmmDiffusion;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Stratified log-SNR draws; each draw is used with an antithetic pair.
    pub draws: usize,
    pub log_snr_min: f64,
    pub log_snr_max: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            draws: 256,
            log_snr_min: -15.0,
            log_snr_max: 15.0,
        }
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Estimated per-atom posteriors at `(t, x)`, indexed by `AtomId`.
pub fn estimate_posteriors_from_scores<R: Rng + ?Sized>(
    g: &GmmDiffusion,
    t: f64,
    x: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<Vec<LogPosterior>> {
    if cfg.draws == 0 || cfg.log_snr_min.partial_cmp(&cfg.log_snr_max) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidInput(
            "estimator needs draws >= 1 and a nonempty log-SNR range".into(),
        ));
    }
    if !(t > 0.0 && t <= g.schedule().horizon) {
        return Err(Error::InvalidTime(t));
    }
    if x.len() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "state has dimension {}, expected {}",
            x.len(),
            g.dim()
        )));
    }
    let log_alpha_t = -0.5 * g.schedule().integral(t);
    let span = cfg.log_snr_max - cfg.log_snr_min;
    let model = g.model();
    let mut out = vec![
        LogPosterior {
            log_p: 0.0,
            log_q: f64::NEG_INFINITY
        };
        model.registry().len()
    ];
    for (gi, block) in g.blocks().iter().enumerate() {
        let xb = &x[block.clone()];
        let n = model.groups()[gi].len();
        let mut loss = vec![0.0; n];
        let mut eps = vec![0.0; xb.len()];
        let mut xs = vec![0.0; xb.len()];
        for k in 0..cfg.draws {
            let u: f64 = rng.random();
            let lambda = cfg.log_snr_min + span * (k as f64 + u) / cfg.draws as f64;
            let log_a = 0.5 * log_sigmoid(lambda);
            let a = log_a.exp();
            let sigma = (0.5 * log_sigmoid(-lambda)).exp();
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            for sign in [1.0, -1.0] {
                for ((s, xv), e) in xs.iter_mut().zip(xb).zip(&eps) {
                    *s = a * xv + sign * sigma * e;
                }
                let scores = g.class_block_scores(gi, log_alpha_t + log_a, &xs);
                for (v, score) in scores.iter().enumerate() {
                    let err: f64 = eps
                        .iter()
                        .zip(score)
                        .map(|(e, s)| {
                            let r = sign * e + sigma * s;
                            r * r
                        })
                        .sum();
                    loss[v] += 0.25 * err;
                }
            }
        }
        let scale = span / cfg.draws as f64;
        let logits: Vec<f64> = (0..n).map(|v| g.weights()[gi][v].ln() - scale * loss[v]).collect();
        let lse = crate::testbed::log_sum_exp(logits.iter().copied());
        for (v, &a) in model.groups()[gi].atoms().iter().enumerate() {
            let others =
                crate::testbed::log_sum_exp(logits.iter().enumerate().filter(|(u, _)| *u != v).map(|(_, l)| *l));
            out[a.0] = LogPosterior {
                log_p: logits[v] - lse,
                log_q: others - lse,
            };
        }
    }
    Ok(out)
}

/// Ratio form `p / (1 - p)` of estimated posteriors.
pub fn posterior_odds(posteriors: &[LogPosterior]) -> Vec<f64> {
    posteriors.iter().map(LogPosterior::odds).collect()
}

/// `grad ln p(x) = sum_i p(c_i | x) grad ln p(x | c_i)` over an exhaustive,
/// exclusive set of classes.
pub fn uncond_score_from_conditionals(scores: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() || scores.len() != weights.len() {
        return Err(Error::InvalidInput("one weight per class score expected".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum(total));
    }
    let d = scores[0].len();
    if scores.iter().any(|s| s.len() != d) {
        return Err(Error::InvalidInput("class scores differ in dimension".into()));
    }
    let mut out = vec![0.0; d];
    for (s, w) in scores.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
    }
    Ok(out)
}

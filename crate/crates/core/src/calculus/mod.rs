//! Recursive evaluation of posteriors, scores and transition kernels over a
//! guidance circuit.
//!
//! Every node carries the pair `(ln p, ln(1 - p))` so that posteriors close to
//! 0 or 1 keep full relative precision on both sides.

mod transition;

pub use transition::{eval_transition, DiscreteAtomInput, DiscreteAtomicInputs, TransitionOutput};

use crate::circuit::GuidanceCircuit;
use crate::error::{Error, Result};
use crate::formula::AtomId;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SCORE_CAP: f64 = 3.0;
/// Slack allowed on OR-ME inputs whose posteriors sum above one.
pub const DEFAULT_ME_TOLERANCE: f64 = 1e-9;

/// `ln(1 - e^a)` for `a <= 0`.
pub(crate) fn log1mexp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

pub(crate) fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn and_posterior(l: LogPosterior, r: LogPosterior) -> LogPosterior {
    LogPosterior {
        log_p: l.log_p + r.log_p,
        log_q: logaddexp(l.log_q, l.log_p + r.log_q),
    }
}

pub(crate) fn or_ci_posterior(l: LogPosterior, r: LogPosterior) -> Result<LogPosterior> {
    let log_p = logaddexp(l.log_p, l.log_q + r.log_p);
    if log_p == f64::NEG_INFINITY {
        return Err(Error::ZeroDisjunction);
    }
    Ok(LogPosterior {
        log_p,
        log_q: l.log_q + r.log_q,
    })
}

/// Sum of exclusive posteriors; the flag reports children summing above one.
pub(crate) fn or_me_posterior(l: LogPosterior, r: LogPosterior, opts: &EvalOptions) -> Result<(LogPosterior, bool)> {
    let log_p = logaddexp(l.log_p, r.log_p);
    if log_p == f64::NEG_INFINITY {
        return Err(Error::ZeroDisjunction);
    }
    // 1 - p_l - p_r, anchored at the child with the larger posterior.
    let (big, small) = if l.log_p >= r.log_p { (l, r) } else { (r, l) };
    if small.log_p < big.log_q {
        let log_q = big.log_q + log1mexp(small.log_p - big.log_q);
        return Ok((LogPosterior { log_p, log_q }, false));
    }
    let total = l.prob() + r.prob();
    let inconsistent = total > 1.0 + opts.me_tolerance;
    if inconsistent && opts.exact {
        return Err(Error::InconsistentExclusive { total });
    }
    Ok((
        LogPosterior {
            log_p: log_p.min(0.0),
            log_q: f64::NEG_INFINITY,
        },
        inconsistent,
    ))
}

/// Clamps to `[eps, 1 - eps]`; a NaN posterior is sent to `eps`.
pub(crate) fn clamp_posterior(post: LogPosterior, eps: f64) -> (LogPosterior, bool) {
    if eps <= 0.0 {
        return (post, false);
    }
    let lo = eps.ln();
    let hi = (-eps).ln_1p();
    if post.log_p < lo || post.log_p.is_nan() {
        (LogPosterior { log_p: lo, log_q: hi }, true)
    } else if post.log_q < lo {
        (LogPosterior { log_p: hi, log_q: lo }, true)
    } else {
        (post, false)
    }
}

/// Posterior in log form: `ln p` and `ln(1 - p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPosterior {
    pub log_p: f64,
    pub log_q: f64,
}

impl LogPosterior {
    pub fn from_prob(p: f64) -> Self {
        Self {
            log_p: p.ln(),
            log_q: (-p).ln_1p(),
        }
    }

    pub fn prob(&self) -> f64 {
        self.log_p.exp()
    }

    pub fn complement(self) -> Self {
        Self {
            log_p: self.log_q,
            log_q: self.log_p,
        }
    }

    /// Odds `p / (1 - p)`.
    pub fn odds(&self) -> f64 {
        (self.log_p - self.log_q).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomInput {
    pub posterior: LogPosterior,
    /// `grad log p(x | atom) - grad log p(x)`.
    pub score: Vec<f64>,
}

impl AtomInput {
    pub fn new(posterior: f64, score: Vec<f64>) -> Self {
        Self {
            posterior: LogPosterior::from_prob(posterior),
            score,
        }
    }
}

/// Atomic quantities at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicInputs {
    pub time: f64,
    pub uncond_score: Vec<f64>,
    /// Indexed by `AtomId`.
    pub atoms: Vec<AtomInput>,
}

impl AtomicInputs {
    pub fn dim(&self) -> usize {
        self.uncond_score.len()
    }

    pub fn atom(&self, a: AtomId) -> Result<&AtomInput> {
        self.atoms.get(a.0).ok_or(Error::UnassignedAtom(a.0))
    }

    fn check(&self, c: &GuidanceCircuit) -> Result<()> {
        let d = self.dim();
        for a in c.atoms() {
            let input = self.atom(a)?;
            if input.score.len() != d {
                return Err(Error::InvalidInput(format!(
                    "score of atom #{} has dimension {}, expected {d}",
                    a.0,
                    input.score.len()
                )));
            }
            if input.score.iter().any(|v| !v.is_finite()) || input.posterior.log_p.is_nan() {
                return Err(Error::InvalidInput(format!("non-finite input for atom #{}", a.0)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Posteriors are clamped to `[epsilon, 1 - epsilon]` at every node.
    pub epsilon: f64,
    /// Per-node score norm cap as a multiple of the largest atomic score norm.
    pub score_cap: Option<f64>,
    /// Singularities and inconsistent inputs are errors instead of being
    /// clamped and flagged.
    pub exact: bool,
    pub me_tolerance: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            score_cap: Some(DEFAULT_SCORE_CAP),
            exact: false,
            me_tolerance: DEFAULT_ME_TOLERANCE,
        }
    }
}

impl EvalOptions {
    /// No clamping, no cap, errors on every singularity.
    pub fn exact() -> Self {
        Self {
            epsilon: 0.0,
            score_cap: None,
            exact: true,
            me_tolerance: DEFAULT_ME_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalFlags {
    pub clamped: bool,
    pub capped: bool,
    pub inconsistent_me: bool,
}

impl EvalFlags {
    fn merge(&mut self, other: EvalFlags) {
        self.clamped |= other.clamped;
        self.capped |= other.capped;
        self.inconsistent_me |= other.inconsistent_me;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceOutput {
    pub posterior: f64,
    pub log_posterior: LogPosterior,
    pub score: Vec<f64>,
    pub flags: EvalFlags,
}

/// Per-atom multipliers `alpha_i` with `score = sum_i alpha_i * s_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    /// Atoms in circuit order.
    pub atoms: Vec<AtomId>,
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn get(&self, a: AtomId) -> Option<f64> {
        self.atoms.iter().position(|&x| x == a).map(|i| self.values[i])
    }

    /// `sum_i alpha_i * s_i` with the atomic scores of `inputs`.
    pub fn reconstruct(&self, inputs: &AtomicInputs) -> Result<Vec<f64>> {
        let mut out = vec![0.0; inputs.dim()];
        for (&a, &alpha) in self.atoms.iter().zip(&self.values) {
            for (o, s) in out.iter_mut().zip(&inputs.atom(a)?.score) {
                *o += alpha * s;
            }
        }
        Ok(out)
    }
}

struct NodeValue {
    post: LogPosterior,
    score: Vec<f64>,
    /// Coefficients over the circuit atoms.
    coeffs: Vec<f64>,
}

struct Evaluator<'a> {
    inputs: &'a AtomicInputs,
    opts: &'a EvalOptions,
    atoms: Vec<AtomId>,
    cap: Option<f64>,
    flags: EvalFlags,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

impl Evaluator<'_> {
    fn clamp(&mut self, post: LogPosterior) -> LogPosterior {
        let (post, clamped) = clamp_posterior(post, self.opts.epsilon);
        self.flags.clamped |= clamped;
        post
    }

    fn finish(&mut self, post: LogPosterior, mut score: Vec<f64>, mut coeffs: Vec<f64>) -> NodeValue {
        if let Some(cap) = self.cap {
            let n = norm(&score);
            if n > cap {
                let scale = cap / n;
                score.iter_mut().for_each(|v| *v *= scale);
                coeffs.iter_mut().for_each(|v| *v *= scale);
                self.flags.capped = true;
            }
        }
        let post = self.clamp(post);
        NodeValue { post, score, coeffs }
    }

    fn node(&mut self, c: &GuidanceCircuit) -> Result<NodeValue> {
        let d = self.inputs.dim();
        match c {
            GuidanceCircuit::Atom(a) => {
                let input = self.inputs.atom(*a)?;
                let mut coeffs = vec![0.0; self.atoms.len()];
                let k = self.atoms.iter().position(|x| x == a).expect("atom listed");
                coeffs[k] = 1.0;
                let post = self.clamp(input.posterior);
                Ok(NodeValue {
                    post,
                    score: input.score.clone(),
                    coeffs,
                })
            }
            GuidanceCircuit::Not(x) => {
                let child = self.node(x)?;
                if child.post.log_q == f64::NEG_INFINITY {
                    return Err(Error::SingularNegation);
                }
                let ratio = -child.post.odds();
                let score = child.score.iter().map(|v| ratio * v).collect();
                let coeffs = child.coeffs.iter().map(|v| ratio * v).collect();
                Ok(self.finish(child.post.complement(), score, coeffs))
            }
            GuidanceCircuit::AndCi(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                let post = and_posterior(l.post, r.post);
                let score = l.score.iter().zip(&r.score).map(|(a, b)| a + b).collect();
                let coeffs = l.coeffs.iter().zip(&r.coeffs).map(|(a, b)| a + b).collect();
                Ok(self.finish(post, score, coeffs))
            }
            GuidanceCircuit::OrCi(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                let post = or_ci_posterior(l.post, r.post)?;
                let wl = (l.post.log_p + r.post.log_q - post.log_p).exp();
                let wr = (r.post.log_p + l.post.log_q - post.log_p).exp();
                Ok(self.mix(post, &l, wl, &r, wr, d))
            }
            GuidanceCircuit::OrMe(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                let (post, inconsistent) = or_me_posterior(l.post, r.post, self.opts)?;
                self.flags.inconsistent_me |= inconsistent;
                let wl = (l.post.log_p - post.log_p).exp();
                let wr = (r.post.log_p - post.log_p).exp();
                Ok(self.mix(post, &l, wl, &r, wr, d))
            }
        }
    }

    fn mix(&mut self, post: LogPosterior, l: &NodeValue, wl: f64, r: &NodeValue, wr: f64, d: usize) -> NodeValue {
        let mut score = vec![0.0; d];
        axpy(&mut score, wl, &l.score);
        axpy(&mut score, wr, &r.score);
        let mut coeffs = vec![0.0; self.atoms.len()];
        axpy(&mut coeffs, wl, &l.coeffs);
        axpy(&mut coeffs, wr, &r.coeffs);
        self.finish(post, score, coeffs)
    }
}

fn run(c: &GuidanceCircuit, inputs: &AtomicInputs, opts: &EvalOptions) -> Result<(NodeValue, Vec<AtomId>, EvalFlags)> {
    inputs.check(c)?;
    let atoms = c.atoms();
    let cap = match opts.score_cap {
        Some(factor) if !opts.exact => {
            let max_norm = atoms
                .iter()
                .map(|&a| norm(&inputs.atoms[a.0].score))
                .fold(0.0, f64::max);
            (max_norm > 0.0).then_some(factor * max_norm)
        }
        _ => None,
    };
    let mut ev = Evaluator {
        inputs,
        opts,
        atoms,
        cap,
        flags: EvalFlags::default(),
    };
    let value = ev.node(c)?;
    let mut flags = EvalFlags::default();
    flags.merge(ev.flags);
    Ok((value, ev.atoms, flags))
}

/// Posterior and score of the circuit's formula.
pub fn eval(c: &GuidanceCircuit, inputs: &AtomicInputs, opts: &EvalOptions) -> Result<GuidanceOutput> {
    let (value, _, flags) = run(c, inputs, opts)?;
    Ok(GuidanceOutput {
        posterior: value.post.prob(),
        log_posterior: value.post,
        score: value.score,
        flags,
    })
}

/// Multipliers expressing the composed score as a combination of the
/// atomic scores; an atom occurring at several leaves gets the sum.
pub fn atomic_coefficients(
    c: &GuidanceCircuit,
    inputs: &AtomicInputs,
    opts: &EvalOptions,
) -> Result<CoefficientVector> {
    let (value, atoms, _) = run(c, inputs, opts)?;
    Ok(CoefficientVector {
        atoms,
        values: value.coeffs,
    })
}

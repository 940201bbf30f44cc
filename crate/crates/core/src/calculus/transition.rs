use super::{and_posterior, clamp_posterior, or_ci_posterior, or_me_posterior, EvalFlags, EvalOptions, LogPosterior};
use crate::circuit::GuidanceCircuit;
use crate::error::{Error, Result};
use crate::formula::AtomId;

/// Negative entries smaller than this (relative to the row scale) are
/// treated as rounding and clipped silently.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteAtomInput {
    pub posterior: LogPosterior,
    /// Conditional one-step kernel row `tau(. | atom, x_t)`.
    pub row: Vec<f64>,
}

/// Atomic quantities of a discrete chain at one (step, state).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteAtomicInputs {
    /// Unconditional kernel row `tau(. | x_t)`.
    pub uncond_row: Vec<f64>,
    /// Indexed by `AtomId`.
    pub atoms: Vec<DiscreteAtomInput>,
}

impl DiscreteAtomicInputs {
    pub fn states(&self) -> usize {
        self.uncond_row.len()
    }

    pub fn atom(&self, a: AtomId) -> Result<&DiscreteAtomInput> {
        self.atoms.get(a.0).ok_or(Error::UnassignedAtom(a.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionOutput {
    pub posterior: LogPosterior,
    /// Composed row `tau(. | formula, x_t)`.
    pub row: Vec<f64>,
    /// Negative mass had to be clipped before renormalising.
    pub repaired: bool,
    pub flags: EvalFlags,
}

struct Node {
    post: LogPosterior,
    row: Vec<f64>,
}

struct Composer<'a> {
    inputs: &'a DiscreteAtomicInputs,
    opts: &'a EvalOptions,
    flags: EvalFlags,
}

impl Composer<'_> {
    fn clamp(&mut self, post: LogPosterior) -> LogPosterior {
        let (post, clamped) = clamp_posterior(post, self.opts.epsilon);
        self.flags.clamped |= clamped;
        post
    }

    fn conjoin(&self, l: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        l.iter()
            .zip(r)
            .zip(&self.inputs.uncond_row)
            .enumerate()
            .map(|(state, ((a, b), u))| {
                let num = a * b;
                if *u > 0.0 {
                    Ok(num / u)
                } else if num.abs() > 0.0 {
                    Err(Error::KernelDivision { state })
                } else {
                    Ok(0.0)
                }
            })
            .collect()
    }

    fn node(&mut self, c: &GuidanceCircuit) -> Result<Node> {
        let (post, row) = match c {
            GuidanceCircuit::Atom(a) => {
                let input = self.inputs.atom(*a)?;
                if input.row.len() != self.inputs.states() {
                    return Err(Error::InvalidInput(format!(
                        "kernel row of atom #{} has {} entries, expected {}",
                        a.0,
                        input.row.len(),
                        self.inputs.states()
                    )));
                }
                (input.posterior, input.row.clone())
            }
            GuidanceCircuit::Not(x) => {
                let child = self.node(x)?;
                if child.post.log_q == f64::NEG_INFINITY {
                    return Err(Error::SingularNegation);
                }
                let p = child.post.prob();
                let inv_q = (-child.post.log_q).exp();
                let row = self
                    .inputs
                    .uncond_row
                    .iter()
                    .zip(&child.row)
                    .map(|(u, r)| (u - p * r) * inv_q)
                    .collect();
                (child.post.complement(), row)
            }
            GuidanceCircuit::AndCi(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                (and_posterior(l.post, r.post), self.conjoin(&l.row, &r.row)?)
            }
            GuidanceCircuit::OrCi(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                let post = or_ci_posterior(l.post, r.post)?;
                let wl = (l.post.log_p - post.log_p).exp();
                let wr = (r.post.log_p - post.log_p).exp();
                let wb = (l.post.log_p + r.post.log_p - post.log_p).exp();
                let both = self.conjoin(&l.row, &r.row)?;
                let row = (0..l.row.len())
                    .map(|i| wl * l.row[i] + wr * r.row[i] - wb * both[i])
                    .collect();
                (post, row)
            }
            GuidanceCircuit::OrMe(l, r) => {
                let (l, r) = (self.node(l)?, self.node(r)?);
                let (post, inconsistent) = or_me_posterior(l.post, r.post, self.opts)?;
                self.flags.inconsistent_me |= inconsistent;
                let wl = (l.post.log_p - post.log_p).exp();
                let wr = (r.post.log_p - post.log_p).exp();
                let row = l.row.iter().zip(&r.row).map(|(a, b)| wl * a + wr * b).collect();
                (post, row)
            }
        };
        let post = self.clamp(post);
        Ok(Node { post, row })
    }
}

/// Composes the one-step kernel of the circuit's formula.
///
/// The composed row is clipped at zero and renormalised; clipping beyond
/// rounding level sets `repaired`, or is an error in exact mode.
pub fn eval_transition(
    c: &GuidanceCircuit,
    inputs: &DiscreteAtomicInputs,
    opts: &EvalOptions,
) -> Result<TransitionOutput> {
    let mut composer = Composer {
        inputs,
        opts,
        flags: EvalFlags::default(),
    };
    let Node { post, mut row } = composer.node(c)?;
    let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut repaired = false;
    for (state, v) in row.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite kernel entry at state {state}")));
        }
        if *v < 0.0 {
            if *v < -ROUNDING_SLACK * scale {
                if opts.exact {
                    return Err(Error::NegativeMass { state, mass: *v });
                }
                repaired = true;
            }
            *v = 0.0;
        }
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroRow);
    }
    row.iter_mut().for_each(|v| *v /= total);
    Ok(TransitionOutput {
        posterior: post,
        row,
        repaired,
        flags: composer.flags,
    })
}

//! Conformity and diversity of sample batches.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::formula::{Formula, World};
use crate::sampler::{SampleBatch, Samples};
use crate::testbed::{DiscreteDiffusion, GmmDiffusion};

/// Maps every sample of a batch to the world it is judged to lie in.
pub trait Labeler {
    fn label(&self, batch: &SampleBatch) -> Result<Vec<World>>;
}

/// MAP component tuple under the terminal mixture.
pub struct GmmMapLabeler<'a>(pub &'a GmmDiffusion);

impl Labeler for GmmMapLabeler<'_> {
    fn label(&self, batch: &SampleBatch) -> Result<Vec<World>> {
        let Samples::Continuous(xs) = &batch.samples else {
            return Err(Error::InvalidInput("continuous labeler given discrete samples".into()));
        };
        let model = self.0.model();
        xs.iter()
            .map(|x| Ok(model.world_for_assignment(&self.0.map_assignment(x)?)))
            .collect()
    }
}

/// A discrete sample is its own world.
pub struct DiscreteStateLabeler<'a>(pub &'a DiscreteDiffusion);

impl Labeler for DiscreteStateLabeler<'_> {
    fn label(&self, batch: &SampleBatch) -> Result<Vec<World>> {
        let Samples::Discrete(states) = &batch.samples else {
            return Err(Error::InvalidInput("discrete labeler given continuous samples".into()));
        };
        states
            .iter()
            .map(|&s| {
                if s >= self.0.state_count() {
                    return Err(Error::InvalidInput(format!("state {s} out of range")));
                }
                Ok(self.0.world(s).clone())
            })
            .collect()
    }
}

/// Fraction of worlds satisfying `f`.
pub fn conformity_of_worlds(worlds: &[World], f: &Formula) -> Result<f64> {
    if worlds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut hits = 0usize;
    for w in worlds {
        if f.evaluate(w)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / worlds.len() as f64)
}

/// Fraction of samples whose labelled world satisfies `f`.
pub fn conformity_score(batch: &SampleBatch, f: &Formula, labeler: &dyn Labeler) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    conformity_of_worlds(&labeler.label(batch)?, f)
}

/// Shannon entropy in bits of the empirical distribution of `labels`.
pub fn entropy_of_labels<T: Hash + Eq>(labels: &[T]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    let mut freqs: Vec<usize> = counts.into_values().collect();
    freqs.sort_unstable();
    Ok(freqs
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Entropy in bits of the labelled attribute tuples of a batch.
pub fn joint_entropy(batch: &SampleBatch, labeler: &dyn Labeler) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    entropy_of_labels(&labeler.label(batch)?)
}

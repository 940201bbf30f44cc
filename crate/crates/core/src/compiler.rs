//! Compilation of arbitrary formulas into circuits that satisfy the exact
//! composition conditions.
//!
//! Categorical models: every satisfying value tuple becomes an AND-CI chain
//! of one atom per group, and the tuples are joined by OR-ME. Taxonomies:
//! every satisfying world is the exclusive refinement of its most specific
//! node, written with NOT and OR-ME only, and the refinements are joined by
//! OR-ME.

use crate::circuit::GuidanceCircuit;
use crate::error::{Error, Result};
use crate::formula::{AtomId, Formula};
use crate::model::{CategoricalModel, DistributionModel, TaxonomyModel, WorldLabel, DEFAULT_WORLD_CAP};

pub fn compile(f: &Formula, model: &DistributionModel) -> Result<GuidanceCircuit> {
    match model {
        DistributionModel::Categorical(m) => compile_categorical(f, m),
        DistributionModel::Taxonomy(m) => compile_taxonomy(f, m),
    }
}

pub fn compile_categorical(f: &Formula, model: &CategoricalModel) -> Result<GuidanceCircuit> {
    compile_categorical_with_cap(f, model, DEFAULT_WORLD_CAP)
}

/// As [`compile_categorical`] with an explicit bound on candidate tuples.
pub fn compile_categorical_with_cap(f: &Formula, model: &CategoricalModel, cap: usize) -> Result<GuidanceCircuit> {
    let count = model.world_count();
    if count > cap as u128 {
        return Err(Error::CapExceeded {
            what: "world",
            requested: count,
            cap: cap as u128,
        });
    }
    let mut terms = Vec::new();
    for tuple in model.assignments() {
        if f.evaluate(&model.world_for_assignment(&tuple))? {
            let literals = tuple
                .iter()
                .enumerate()
                .map(|(g, &v)| GuidanceCircuit::Atom(model.atom(g, v)));
            terms.push(GuidanceCircuit::and_ci_all(literals).ok_or(Error::InvalidModel(model.validate()))?);
        }
    }
    GuidanceCircuit::or_me_all(terms).ok_or(Error::Unsatisfiable)
}

/// Compiles via the expanded atom system whose atoms are the exclusive
/// refinements `r_u` ("exactly node u, none of its children"). These are
/// pairwise exclusive and cover the feasible worlds, so the formula is the
/// OR-ME of the refinements of its satisfying worlds; each refinement is then
/// written back with the original atoms.
pub fn compile_taxonomy(f: &Formula, model: &TaxonomyModel) -> Result<GuidanceCircuit> {
    let worlds = model.enumerate_worlds(DEFAULT_WORLD_CAP)?;
    let mut refinements: Vec<usize> = Vec::new();
    for (w, label) in worlds.worlds.iter().zip(&worlds.labels) {
        if f.evaluate(w)? {
            let WorldLabel::Node(u) = label else {
                unreachable!("taxonomy worlds are labelled by node")
            };
            if !refinements.contains(u) {
                refinements.push(*u);
            }
        }
    }
    refinements.sort_unstable();
    let root = model.root();
    let terms = refinements.into_iter().map(|u| refinement(model, root, u));
    GuidanceCircuit::or_me_all(terms).ok_or(Error::Unsatisfiable)
}

/// `r_u` over the original atoms.
fn refinement(model: &TaxonomyModel, root: usize, u: usize) -> GuidanceCircuit {
    let atom = |v: usize| GuidanceCircuit::Atom(AtomId(v));
    let Some(any_child) = GuidanceCircuit::or_me_all(model.children(u).iter().map(|&v| atom(v))) else {
        return atom(u);
    };
    if u == root {
        GuidanceCircuit::not(any_child)
    } else {
        // c_u & ~(children) == ~(~c_u |ME children)
        GuidanceCircuit::not(GuidanceCircuit::or_me(GuidanceCircuit::not(atom(u)), any_child))
    }
}

/// True iff `f` and the formula read back from `c` agree on every feasible world.
pub fn check_equivalence(f: &Formula, c: &GuidanceCircuit, model: &DistributionModel) -> Result<bool> {
    let worlds = model.enumerate_worlds(DEFAULT_WORLD_CAP)?;
    let g = c.to_formula();
    for w in &worlds.worlds {
        if f.evaluate(w)? != g.evaluate(w)? {
            return Ok(false);
        }
    }
    Ok(true)
}

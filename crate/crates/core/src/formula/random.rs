//! Seeded random query generation.
//!
//! Categorical queries follow the attribute-partitioning scheme: every binary
//! operator is drawn uniformly from the allowed set; `&` and `|CI` split the
//! available attribute groups into two nonempty disjoint sides, `|ME` sends
//! both children to one shared group. Negation is applied to each node
//! independently with probability `neg_prob`.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AtomId, Formula, OrKind};
use crate::error::{Error, Result};
use crate::model::CategoricalModel;

pub const DEFAULT_NEG_PROB: f64 = 0.05;

const MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    And,
    OrCi,
    OrMe,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 3] = [BinaryOp::And, BinaryOp::OrCi, BinaryOp::OrMe];
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySpec {
    pub n_ops: usize,
    pub neg_prob: f64,
    /// Operators the generator may draw from.
    pub ops: Vec<BinaryOp>,
    /// Forces the operator at the root when `n_ops > 0`.
    pub root_op: Option<BinaryOp>,
}

impl QuerySpec {
    pub fn new(n_ops: usize) -> Self {
        Self {
            n_ops,
            neg_prob: DEFAULT_NEG_PROB,
            ops: BinaryOp::ALL.to_vec(),
            root_op: None,
        }
    }
}

/// Random satisfiable query with exactly `n_ops` binary operators.
pub fn random_query(model: &CategoricalModel, n_ops: usize, neg_prob: f64, seed: u64) -> Result<Formula> {
    let spec = QuerySpec {
        neg_prob,
        ..QuerySpec::new(n_ops)
    };
    random_query_with(model, &spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_query_with<R: Rng + ?Sized>(model: &CategoricalModel, spec: &QuerySpec, rng: &mut R) -> Result<Formula> {
    if !(0.0..=1.0).contains(&spec.neg_prob) {
        return Err(Error::InvalidInput(format!(
            "negation probability {} outside [0, 1]",
            spec.neg_prob
        )));
    }
    let gen = Generator { model, spec };
    let all: Vec<usize> = (0..model.groups().len()).collect();
    if let Some(cap) = gen.capacity(&all) {
        if spec.n_ops > cap {
            return Err(Error::UnsupportedQuery(format!(
                "{} operators requested but the model hosts at most {cap} with {:?}",
                spec.n_ops, spec.ops
            )));
        }
    }
    if let (Some(op), true) = (spec.root_op, spec.n_ops > 0) {
        if !gen.feasible(op, &all) {
            return Err(Error::UnsupportedQuery(format!(
                "root operator {op:?} needs {}",
                match op {
                    BinaryOp::OrMe => "a group with at least two values",
                    _ => "at least two groups",
                }
            )));
        }
    }
    for _ in 0..MAX_ATTEMPTS {
        if let Some(f) = gen.node(&all, spec.n_ops, true, rng) {
            if model.is_satisfiable(&f)? {
                return Ok(f);
            }
        }
    }
    Err(Error::UnsupportedQuery(format!(
        "no satisfiable query with {} operators found in {MAX_ATTEMPTS} attempts",
        spec.n_ops
    )))
}

struct Generator<'a> {
    model: &'a CategoricalModel,
    spec: &'a QuerySpec,
}

impl Generator<'_> {
    fn me_groups(&self, groups: &[usize]) -> Vec<usize> {
        groups
            .iter()
            .copied()
            .filter(|&g| self.model.groups()[g].len() >= 2)
            .collect()
    }

    /// Maximum operator count hostable on `groups`; `None` means unbounded.
    fn capacity(&self, groups: &[usize]) -> Option<usize> {
        if self.spec.ops.contains(&BinaryOp::OrMe) && !self.me_groups(groups).is_empty() {
            return None;
        }
        let splits = self.spec.ops.iter().any(|op| *op != BinaryOp::OrMe);
        Some(if splits { groups.len().saturating_sub(1) } else { 0 })
    }

    fn feasible(&self, op: BinaryOp, groups: &[usize]) -> bool {
        match op {
            BinaryOp::OrMe => !self.me_groups(groups).is_empty(),
            BinaryOp::And | BinaryOp::OrCi => groups.len() >= 2,
        }
    }

    fn maybe_negate<R: Rng + ?Sized>(&self, f: Formula, rng: &mut R) -> Formula {
        if self.spec.neg_prob > 0.0 && rng.random_bool(self.spec.neg_prob) {
            Formula::not(f)
        } else {
            f
        }
    }

    fn node<R: Rng + ?Sized>(&self, groups: &[usize], n_ops: usize, root: bool, rng: &mut R) -> Option<Formula> {
        if n_ops == 0 {
            let g = *groups.choose(rng)?;
            let atom = *self.model.groups()[g].atoms().choose(rng)?;
            return Some(self.maybe_negate(Formula::Atom(atom), rng));
        }
        let op = match (root, self.spec.root_op) {
            (true, Some(op)) => op,
            _ => {
                let ops: Vec<BinaryOp> = self
                    .spec
                    .ops
                    .iter()
                    .copied()
                    .filter(|&op| self.feasible(op, groups))
                    .collect();
                *ops.choose(rng)?
            }
        };
        let left_ops = rng.random_range(0..n_ops);
        let right_ops = n_ops - 1 - left_ops;
        let f = match op {
            BinaryOp::OrMe => {
                let g = *self.me_groups(groups).choose(rng)?;
                let l = self.node(&[g], left_ops, false, rng)?;
                let r = self.node(&[g], right_ops, false, rng)?;
                Formula::or_kind(OrKind::Me, l, r)
            }
            BinaryOp::And | BinaryOp::OrCi => {
                let (lg, rg) = bipartition(groups, rng);
                let l = self.node(&lg, left_ops, false, rng)?;
                let r = self.node(&rg, right_ops, false, rng)?;
                if op == BinaryOp::And {
                    Formula::and(l, r)
                } else {
                    Formula::or_kind(OrKind::Ci, l, r)
                }
            }
        };
        Some(self.maybe_negate(f, rng))
    }
}

/// Uniform random split of `groups` into two nonempty sides.
fn bipartition<R: Rng + ?Sized>(groups: &[usize], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    loop {
        let (l, r): (Vec<usize>, Vec<usize>) = groups.iter().partition(|_| rng.random_bool(0.5));
        if !l.is_empty() && !r.is_empty() {
            return (l, r);
        }
    }
}

/// Unstructured random formula: `&` and `|` drawn uniformly, atoms drawn
/// uniformly from `atoms`, each node negated with probability `neg_prob`.
pub fn random_formula<R: Rng + ?Sized>(atoms: &[AtomId], n_ops: usize, neg_prob: f64, rng: &mut R) -> Formula {
    let negate = |f: Formula, rng: &mut R| {
        if neg_prob > 0.0 && rng.random_bool(neg_prob) {
            Formula::not(f)
        } else {
            f
        }
    };
    let f = if n_ops == 0 {
        Formula::Atom(*atoms.choose(rng).expect("nonempty atom list"))
    } else {
        let left_ops = rng.random_range(0..n_ops);
        let l = random_formula(atoms, left_ops, neg_prob, rng);
        let r = random_formula(atoms, n_ops - 1 - left_ops, neg_prob, rng);
        if rng.random_bool(0.5) {
            Formula::and(l, r)
        } else {
            Formula::or(l, r)
        }
    };
    negate(f, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CategoricalModel;

    fn cmnist() -> CategoricalModel {
        CategoricalModel::with_values(&[
            ("digit", &["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"]),
            ("color", &["red", "green", "blue", "yellow", "purple", "cyan"]),
        ])
        .unwrap()
    }

    #[test]
    fn zero_ops_is_a_literal() {
        let m = cmnist();
        for seed in 0..20 {
            let f = random_query(&m, 0, 0.5, seed).unwrap();
            match f {
                Formula::Atom(_) => {}
                Formula::Not(inner) => assert!(matches!(*inner, Formula::Atom(_))),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn forced_me_uses_one_group() {
        let m = cmnist();
        let spec = QuerySpec {
            neg_prob: 0.0,
            root_op: Some(BinaryOp::OrMe),
            ..QuerySpec::new(1)
        };
        for seed in 0..20 {
            let f = random_query_with(&m, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let Formula::Or(OrKind::Me, l, r) = f else {
                panic!("root is not |ME");
            };
            let (Formula::Atom(a), Formula::Atom(b)) = (*l, *r) else {
                panic!("children are not atoms");
            };
            assert_eq!(m.group_of(a), m.group_of(b));
        }
    }

    #[test]
    fn operator_count_is_exact_and_seeded() {
        let m = cmnist();
        for n in 0..6 {
            for seed in 0..10 {
                let f = random_query(&m, n, 0.05, seed).unwrap();
                assert_eq!(f.binary_ops(), n);
                assert_eq!(f, random_query(&m, n, 0.05, seed).unwrap());
                assert!(m.is_satisfiable(&f).unwrap());
            }
        }
    }

    #[test]
    fn four_op_queries_mix_ci_over_me_subtrees() {
        // Shape of ((~6 |ME (5 |ME 3)) |CI (red |ME yellow)): a CI split whose
        // sides are single-group ME chains.
        let m = cmnist();
        let spec = QuerySpec {
            neg_prob: 0.0,
            root_op: Some(BinaryOp::OrCi),
            ..QuerySpec::new(4)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_query_with(&m, &spec, &mut rng).unwrap();
        assert_eq!(f.binary_ops(), 4);
        let Formula::Or(OrKind::Ci, l, r) = f else {
            panic!("root is not |CI");
        };
        let groups = |f: &Formula| {
            let mut g: Vec<usize> = f.atoms().iter().map(|&a| m.group_of(a)).collect();
            g.dedup();
            g
        };
        let (gl, gr) = (groups(&l), groups(&r));
        assert_eq!(gl.len(), 1);
        assert_eq!(gr.len(), 1);
        assert_ne!(gl, gr);
    }

    #[test]
    fn structural_limits_are_reported() {
        let single = CategoricalModel::with_values(&[("c", &["a", "b"])]).unwrap();
        let spec = QuerySpec {
            root_op: Some(BinaryOp::And),
            ..QuerySpec::new(1)
        };
        assert!(matches!(
            random_query_with(&single, &spec, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::UnsupportedQuery(_))
        ));
        let and_only = QuerySpec {
            ops: vec![BinaryOp::And],
            ..QuerySpec::new(2)
        };
        assert!(matches!(
            random_query_with(&cmnist(), &and_only, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::UnsupportedQuery(_))
        ));
    }

    #[test]
    fn unstructured_formulas_have_exact_op_count() {
        let atoms: Vec<AtomId> = (0..5).map(AtomId).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..8 {
            assert_eq!(random_formula(&atoms, n, 0.2, &mut rng).binary_ops(), n);
        }
    }
}

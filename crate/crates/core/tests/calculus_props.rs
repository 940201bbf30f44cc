mod common;

use common::{default_model, mixture_oracle, random_probe};
use logiguide::formula::random_query;
use logiguide::testbed::{DiscreteDiffusion, GmmDiffusion};
use logiguide::{
    atomic_coefficients, compile_categorical, eval, eval_transition, AtomId, AtomInput, AtomicInputs, EvalOptions,
    Formula, GuidanceCircuit,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pairs(g: &GmmDiffusion, same_group: bool) -> Vec<(AtomId, AtomId)> {
    let m = g.model();
    let ids: Vec<AtomId> = m.registry().ids().collect();
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if (m.group_of(a) == m.group_of(b)) == same_group {
                out.push((a, b));
            }
        }
    }
    out
}

fn and(a: AtomId, b: AtomId) -> Formula {
    Formula::and(Formula::atom(a), Formula::atom(b))
}

#[test]
fn cross_group_atoms_are_conditionally_independent() {
    let g = GmmDiffusion::default_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (t, x) = random_probe(&g, &mut rng);
        let inputs = g.atomic_inputs(t, &x).unwrap();
        for (a, b) in pairs(&g, false) {
            let joint = mixture_oracle(&g, &and(a, b), t, &x).posterior;
            let product = inputs.atoms[a.0].posterior.prob() * inputs.atoms[b.0].posterior.prob();
            assert!(
                (joint - product).abs() <= 1e-12,
                "t={t} joint={joint} product={product}"
            );
        }
    }
}

#[test]
fn same_group_atoms_never_co_occur() {
    let g = GmmDiffusion::default_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (t, x) = random_probe(&g, &mut rng);
        for (a, b) in pairs(&g, true) {
            assert_eq!(mixture_oracle(&g, &and(a, b), t, &x).posterior, 0.0);
        }
    }
}

#[test]
fn negated_conjunction_matches_compiled_de_morgan_form() {
    let g = GmmDiffusion::default_instance();
    let model = g.model();
    let opts = EvalOptions::exact();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (t, x) = random_probe(&g, &mut rng);
        let inputs = g.atomic_inputs(t, &x).unwrap();
        for (a, b) in pairs(&g, false) {
            let direct = GuidanceCircuit::not(GuidanceCircuit::and_ci(
                GuidanceCircuit::atom(a),
                GuidanceCircuit::atom(b),
            ));
            let either = Formula::or(Formula::not(Formula::atom(a)), Formula::not(Formula::atom(b)));
            let compiled = compile_categorical(&either, model).unwrap();
            let lhs = eval(&direct, &inputs, &opts).unwrap();
            let rhs = eval(&compiled, &inputs, &opts).unwrap();
            assert!((lhs.posterior - rhs.posterior).abs() <= 1e-12);
            let scale = 1.0 + lhs.score.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (l, r) in lhs.score.iter().zip(&rhs.score) {
                assert!((l - r).abs() <= 1e-9 * scale, "{l} vs {r}");
            }
        }
    }
}

#[test]
fn disjunction_and_conjunction_bounds() {
    let g = GmmDiffusion::default_instance();
    let opts = EvalOptions::exact();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (t, x) = random_probe(&g, &mut rng);
        let inputs = g.atomic_inputs(t, &x).unwrap();
        let p = |a: AtomId| inputs.atoms[a.0].posterior.prob();
        for (a, b) in pairs(&g, true) {
            let c = GuidanceCircuit::or_me(GuidanceCircuit::atom(a), GuidanceCircuit::atom(b));
            let out = eval(&c, &inputs, &opts).unwrap();
            assert!((out.posterior - (p(a) + p(b))).abs() <= 1e-14);
        }
        for (a, b) in pairs(&g, false) {
            let c = GuidanceCircuit::and_ci(GuidanceCircuit::atom(a), GuidanceCircuit::atom(b));
            let out = eval(&c, &inputs, &opts).unwrap();
            assert!(out.posterior <= p(a).min(p(b)));
        }
    }
}

fn circuit(n_atoms: usize) -> impl Strategy<Value = GuidanceCircuit> {
    let leaf = (0..n_atoms).prop_map(|i| GuidanceCircuit::atom(AtomId(i)));
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(GuidanceCircuit::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| GuidanceCircuit::and_ci(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| GuidanceCircuit::or_ci(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| GuidanceCircuit::or_me(l, r)),
        ]
    })
}

fn inputs(n_atoms: usize, dim: usize) -> impl Strategy<Value = AtomicInputs> {
    let atom = (0.01f64..0.99, prop::collection::vec(-3.0f64..3.0, dim)).prop_map(|(p, s)| AtomInput::new(p, s));
    (
        prop::collection::vec(atom, n_atoms),
        prop::collection::vec(-1.0f64..1.0, dim),
    )
        .prop_map(|(atoms, u)| AtomicInputs {
            time: 0.5,
            uncond_score: u,
            atoms,
        })
}

/// Same circuit with a fresh atom at every leaf, inputs copied from the
/// original atom.
fn one_atom_per_leaf(c: &GuidanceCircuit, inputs: &AtomicInputs) -> (GuidanceCircuit, AtomicInputs) {
    fn go(c: &GuidanceCircuit, src: &AtomicInputs, dst: &mut Vec<AtomInput>) -> GuidanceCircuit {
        match c {
            GuidanceCircuit::Atom(a) => {
                dst.push(src.atoms[a.0].clone());
                GuidanceCircuit::atom(AtomId(dst.len() - 1))
            }
            GuidanceCircuit::Not(x) => GuidanceCircuit::not(go(x, src, dst)),
            GuidanceCircuit::AndCi(l, r) => GuidanceCircuit::and_ci(go(l, src, dst), go(r, src, dst)),
            GuidanceCircuit::OrCi(l, r) => GuidanceCircuit::or_ci(go(l, src, dst), go(r, src, dst)),
            GuidanceCircuit::OrMe(l, r) => GuidanceCircuit::or_me(go(l, src, dst), go(r, src, dst)),
        }
    }
    let mut atoms = Vec::new();
    let split = go(c, inputs, &mut atoms);
    (
        split,
        AtomicInputs {
            time: inputs.time,
            uncond_score: inputs.uncond_score.clone(),
            atoms,
        },
    )
}

proptest! {
    #[test]
    fn coefficients_reconstruct_the_score(c in circuit(4), inputs in inputs(4, 3)) {
        let opts = EvalOptions::default();
        let out = eval(&c, &inputs, &opts).unwrap();
        let coeffs = atomic_coefficients(&c, &inputs, &opts).unwrap();
        prop_assert_eq!(&coeffs.atoms, &c.atoms());
        let rebuilt = coeffs.reconstruct(&inputs).unwrap();
        // Rounding in both sums is relative to the per-leaf terms, which can
        // dwarf a score that cancels (e.g. under `~(a |ME ~a)`).
        let (split, split_inputs) = one_atom_per_leaf(&c, &inputs);
        let leaf = atomic_coefficients(&split, &split_inputs, &opts).unwrap();
        for (k, (a, b)) in rebuilt.iter().zip(&out.score).enumerate() {
            let terms: f64 = leaf
                .atoms
                .iter()
                .zip(&leaf.values)
                .map(|(id, alpha)| (alpha * split_inputs.atoms[id.0].score[k]).abs())
                .sum();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + terms), "{} vs {} (terms {})", a, b, terms);
        }
    }

    #[test]
    fn evaluation_is_bit_stable(c in circuit(4), inputs in inputs(4, 3)) {
        let opts = EvalOptions::default();
        prop_assert_eq!(eval(&c, &inputs, &opts).unwrap(), eval(&c, &inputs, &opts).unwrap());
    }

    #[test]
    fn exact_discrete_rows_need_no_repair(seed in any::<u64>(), n_ops in 0usize..4) {
        let dd = DiscreteDiffusion::default_instance(seed);
        let model = default_model();
        let f = random_query(&model, n_ops, 0.2, seed).unwrap();
        let c = compile_categorical(&f, &model).unwrap();
        for step in 1..=dd.steps() {
            for state in 0..dd.state_count() {
                let inputs = dd.atomic_inputs(step, state).unwrap();
                let out = eval_transition(&c, &inputs, &EvalOptions::exact()).unwrap();
                prop_assert!(!out.repaired);
                prop_assert!(out.row.iter().all(|v| *v >= 0.0));
                prop_assert!((out.row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn identity_holds_under_a_clamped_tautology() {
    let a = GuidanceCircuit::atom(AtomId(0));
    let c = GuidanceCircuit::not(GuidanceCircuit::or_me(a.clone(), GuidanceCircuit::not(a)));
    let inputs = AtomicInputs {
        time: 0.5,
        uncond_score: vec![0.0; 3],
        atoms: vec![AtomInput::new(0.01, vec![-2.3617514268277837, 0.0, 0.0])],
    };
    let opts = EvalOptions::default();
    let out = eval(&c, &inputs, &opts).unwrap();
    assert!(out.flags.clamped);
    let rebuilt = atomic_coefficients(&c, &inputs, &opts)
        .unwrap()
        .reconstruct(&inputs)
        .unwrap();
    for (a, b) in rebuilt.iter().zip(&out.score) {
        // both are rounding residue of an exactly cancelling score
        assert!(a.abs() <= 1e-9 && b.abs() <= 1e-9, "{a} vs {b}");
    }
}

//! Repulsive atom guidance against the most probable competitor.

use logiguide::metrics::{conformity_score, GmmMapLabeler};
use logiguide::sampler::{repulsive_atomic_score, repulsive_competitor, sample_continuous, SamplerConfig};
use logiguide::testbed::GmmDiffusion;
use logiguide::{eval, parse_formula, AtomId, EvalOptions, GuidanceCircuit};

fn main() -> logiguide::Result<()> {
    let g = GmmDiffusion::default_instance();
    let model = g.model().clone();
    let target = model.registry().lookup("g1.a").expect("registered");
    let x = vec![0.3, -0.2, 0.0, 0.4];
    let inputs = g.atomic_inputs(0.4, &x)?;
    let rival = repulsive_competitor(&model, &inputs, target)?;
    let repulsive = repulsive_atomic_score(&model, &inputs, target, 1.0, 1.0)?;
    let circuit = GuidanceCircuit::and_ci(
        GuidanceCircuit::atom(target),
        GuidanceCircuit::not(GuidanceCircuit::atom(rival)),
    );
    let composed = eval(&circuit, &inputs, &EvalOptions::exact())?;
    println!(
        "competitor of {}: {}",
        model.registry().name(target),
        model.registry().name(rival)
    );
    println!("repulsive score {repulsive:?}");
    println!("A & ~B score    {:?}", composed.score);

    let f = parse_formula("g1.a", model.registry())?;
    let c = GuidanceCircuit::atom(AtomId(target.0));
    for repulsive in [false, true] {
        let cfg = SamplerConfig {
            steps: 300,
            w: 2.0,
            w_not: 1.0,
            repulsive,
            seed: 4,
            ..SamplerConfig::default()
        };
        let batch = sample_continuous(&g, &c, &cfg, 500)?;
        println!(
            "repulsive={repulsive}: conformity {:.3}",
            conformity_score(&batch, &f, &GmmMapLabeler(&g))?
        );
    }
    Ok(())
}

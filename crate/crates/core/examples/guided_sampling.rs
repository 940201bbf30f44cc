//! Exact vs constant-weight disjunction guidance on a mixture with unequal weights.

use std::time::Instant;

use logiguide::metrics::{conformity_score, GmmMapLabeler, Labeler};
use logiguide::sampler::{sample_continuous, CompositionRule, SamplerConfig};
use logiguide::testbed::{GmmDiffusion, TestbedConfig};
use logiguide::{compile_categorical, parse_formula, CategoricalModel};

fn main() -> logiguide::Result<()> {
    let model = CategoricalModel::with_values(&[("shape", &["a", "b", "c"]), ("color", &["red", "blue"])])?;
    let cfg = TestbedConfig {
        variance: 0.01,
        ..TestbedConfig::default()
    };
    let weights = vec![vec![0.4, 0.1, 0.5], vec![0.5, 0.5]];
    let g = GmmDiffusion::grid(model.clone(), &cfg, Some(weights))?;

    let query = parse_formula("shape.a | shape.b", model.registry())?;
    let circuit = compile_categorical(&query, &model)?;
    let a = parse_formula("shape.a", model.registry())?;

    for rule in [CompositionRule::Exact, CompositionRule::ConstantWeights] {
        let sampler = SamplerConfig {
            steps: 500,
            rule,
            seed: 11,
            ..SamplerConfig::default()
        };
        let start = Instant::now();
        let batch = sample_continuous(&g, &circuit, &sampler, 2000)?;
        let labeler = GmmMapLabeler(&g);
        let worlds = labeler.label(&batch)?;
        let sat = worlds.iter().filter(|w| query.evaluate(w).unwrap()).count();
        let share_a = worlds.iter().filter(|w| a.evaluate(w).unwrap()).count() as f64 / sat.max(1) as f64;
        println!(
            "{rule:?}: conformity {:.3}, share of shape.a among satisfying {:.3} (target 0.8), {:.1?}",
            conformity_score(&batch, &query, &labeler)?,
            share_a,
            start.elapsed()
        );
    }
    Ok(())
}

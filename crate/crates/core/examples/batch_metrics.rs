//! Conformity and joint entropy of an unconditional batch.

use logiguide::metrics::{conformity_score, entropy_of_labels, joint_entropy, GmmMapLabeler};
use logiguide::sampler::{sample_continuous, SamplerConfig};
use logiguide::testbed::GmmDiffusion;
use logiguide::{compile_categorical, parse_formula};

fn main() -> logiguide::Result<()> {
    let g = GmmDiffusion::default_instance();
    let model = g.model().clone();
    let everything = compile_categorical(&parse_formula("true", model.registry())?, &model)?;
    let cfg = SamplerConfig {
        steps: 300,
        w: 0.0,
        seed: 2,
        ..SamplerConfig::default()
    };
    let batch = sample_continuous(&g, &everything, &cfg, 2000)?;
    let labeler = GmmMapLabeler(&g);
    for q in ["g1.a", "g1.a | g2.c", "true", "false"] {
        let f = parse_formula(q, model.registry())?;
        println!("conformity({q}) = {:.3}", conformity_score(&batch, &f, &labeler)?);
    }
    println!(
        "joint entropy {:.3} bits (log2 9 = {:.3})",
        joint_entropy(&batch, &labeler)?,
        9f64.log2()
    );
    println!(
        "entropy of [x, x, y, y] = {} bit",
        entropy_of_labels(&["x", "x", "y", "y"])?
    );
    Ok(())
}

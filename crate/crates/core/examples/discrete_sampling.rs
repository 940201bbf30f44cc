//! Composed transition kernels and ancestral sampling on a nine-state chain.

use logiguide::metrics::{conformity_score, joint_entropy, DiscreteStateLabeler};
use logiguide::sampler::{sample_discrete, SamplerConfig, Samples};
use logiguide::testbed::DiscreteDiffusion;
use logiguide::{compile, eval_transition, parse_formula, EvalOptions};

fn main() -> logiguide::Result<()> {
    let dd = DiscreteDiffusion::default_instance(5);
    let model = dd.model().clone();
    let f = parse_formula("~g1.a & (g2.b | g2.c)", model.registry())?;
    let c = compile(&f, &model)?;

    let inputs = dd.atomic_inputs(3, 4)?;
    let composed = eval_transition(&c, &inputs, &EvalOptions::exact())?;
    let oracle = dd.formula_oracle(&f, 3, 4)?;
    println!(
        "posterior at step 3, state 4: {:.6} (oracle {:.6})",
        composed.posterior.prob(),
        oracle.posterior.prob()
    );

    let cfg = SamplerConfig {
        exact_mode: true,
        seed: 1,
        ..SamplerConfig::default()
    };
    let batch = sample_discrete(&dd, &c, &cfg, 5000)?;
    let Samples::Discrete(states) = &batch.samples else {
        unreachable!()
    };
    let target = dd.conditional_terminal(&dd.states().event(&f)?)?;
    println!("state  empirical  target");
    for (s, p) in target.iter().enumerate() {
        let freq = states.iter().filter(|x| **x == s).count() as f64 / states.len() as f64;
        println!("{s:>5}  {freq:>9.4}  {p:>6.4}");
    }
    let labeler = DiscreteStateLabeler(&dd);
    println!(
        "conformity {:.3}, entropy {:.3} bits, repaired rows {}",
        conformity_score(&batch, &f, &labeler)?,
        joint_entropy(&batch, &labeler)?,
        batch.repaired
    );
    Ok(())
}

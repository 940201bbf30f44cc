//! Compose posteriors and scores on the Gaussian-mixture testbed and compare
//! against brute-force enumeration.

use logiguide::testbed::GmmDiffusion;
use logiguide::{atomic_coefficients, compile_categorical, eval, parse_formula, EvalOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> logiguide::Result<()> {
    let g = GmmDiffusion::default_instance();
    let model = g.model().clone();
    let f = parse_formula("(g1.a & ~g2.b) | g1.c", model.registry())?;
    let c = compile_categorical(&f, &model)?;
    println!("circuit {}", c.to_sexp(model.registry()));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in [0.9, 0.5, 0.1, 0.02] {
        let (xs, _) = g.sample_marginal(t, 1, &mut rng)?;
        let inputs = g.atomic_inputs(t, &xs[0])?;
        let out = eval(&c, &inputs, &EvalOptions::exact())?;
        let oracle = g.formula_oracle(&f, t, &xs[0])?;
        let coeffs = atomic_coefficients(&c, &inputs, &EvalOptions::exact())?;
        let score_dev = out
            .score
            .iter()
            .zip(&oracle.score)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "t={t:<5} posterior {:.6} (oracle {:.6})  max score dev {:.1e}  coefficients {:?}",
            out.posterior,
            oracle.posterior.prob(),
            score_dev,
            coeffs.values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}

//! Class posteriors and the unconditional score recovered from class-conditional
//! scores alone.

use logiguide::sampler::{estimate_posteriors_from_scores, uncond_score_from_conditionals, EstimatorConfig};
use logiguide::testbed::GmmDiffusion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> logiguide::Result<()> {
    let g = GmmDiffusion::default_instance();
    let model = g.model().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for draws in [16, 64, 256] {
        let cfg = EstimatorConfig {
            draws,
            ..EstimatorConfig::default()
        };
        let mut err = 0.0;
        let mut count = 0;
        for _ in 0..50 {
            let t = 0.3;
            let (xs, _) = g.sample_marginal(t, 1, &mut rng)?;
            let exact = g.atomic_inputs(t, &xs[0])?;
            let est = estimate_posteriors_from_scores(&g, t, &xs[0], &cfg, &mut rng)?;
            for (e, a) in est.iter().zip(&exact.atoms) {
                err += (e.prob() - a.posterior.prob()).abs();
                count += 1;
            }
        }
        println!("draws {draws:>4}: mean |estimate - exact| = {:.4}", err / count as f64);
    }

    let t = 0.5;
    let (xs, _) = g.sample_marginal(t, 1, &mut rng)?;
    let inputs = g.atomic_inputs(t, &xs[0])?;
    let group = &model.groups()[0];
    let mut scores = Vec::new();
    let mut weights = Vec::new();
    for &a in group.atoms() {
        scores.push(g.conditional_score(t, &xs[0], a)?);
        weights.push(inputs.atom(a)?.posterior.prob());
    }
    let rebuilt = uncond_score_from_conditionals(&scores, &weights)?;
    let dev = rebuilt
        .iter()
        .zip(&inputs.uncond_score)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "unconditional score rebuilt from `{}` classes: max dev {dev:.1e}",
        group.name
    );
    Ok(())
}

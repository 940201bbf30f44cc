#![allow(dead_code)]

use logiguide::model::{NodeSpec, WorldLabel};
use logiguide::testbed::{DiscreteDiffusion, GmmDiffusion, TestbedConfig};
use logiguide::{CategoricalModel, Formula, TaxonomyModel};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn default_model() -> CategoricalModel {
    CategoricalModel::with_values(&[("g1", &["a", "b", "c"]), ("g2", &["a", "b", "c"])]).unwrap()
}

/// Well separated components so that MAP labels reflect the sampled class.
pub fn sharp_testbed(weights: Option<Vec<Vec<f64>>>) -> GmmDiffusion {
    let cfg = TestbedConfig {
        variance: 0.01,
        ..TestbedConfig::default()
    };
    GmmDiffusion::grid(default_model(), &cfg, weights).unwrap()
}

pub fn max_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random time in `[0.01, 1]` and a state drawn from the marginal at that time,
/// occasionally replaced by a uniform point in a wide box.
pub fn random_probe<R: Rng>(g: &GmmDiffusion, rng: &mut R) -> (f64, Vec<f64>) {
    let t = rng.random_range(0.01..=1.0);
    if rng.random_bool(0.2) {
        let x = (0..g.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        return (t, x);
    }
    let (mut xs, _) = g.sample_marginal(t, 1, rng).unwrap();
    (t, xs.remove(0))
}

/// Brute-force reference for the mixture testbed, written from the component
/// parameters without the library's block machinery.
pub struct MixtureOracle {
    pub log_p: f64,
    pub posterior: f64,
    pub score: Vec<f64>,
}

fn log_alpha(g: &GmmDiffusion, t: f64) -> f64 {
    let s = g.schedule();
    -0.5 * (s.beta_min * t + 0.5 * (s.beta_max - s.beta_min) * t * t / s.horizon)
}

/// Per tuple: log joint density and its gradient in `x`.
fn tuple_terms(g: &GmmDiffusion, t: f64, x: &[f64]) -> Vec<(Vec<usize>, f64, Vec<f64>)> {
    let la = log_alpha(g, t);
    let alpha = la.exp();
    let noise = -(2.0 * la).exp_m1();
    let model = g.model();
    let mut out = Vec::new();
    for tuple in model.assignments() {
        let mut logd = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (gi, &v) in tuple.iter().enumerate() {
            logd += g.weights()[gi][v].ln();
            let block = g.blocks()[gi].clone();
            for (k, coord) in block.enumerate() {
                let mean = alpha * g.means()[gi][v][k];
                let var = alpha * alpha * g.variances()[gi][v][k] + noise;
                let d = x[coord] - mean;
                logd += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * d * d / var;
                grad[coord] = -d / var;
            }
        }
        out.push((tuple, logd, grad));
    }
    out
}

pub fn mixture_oracle(g: &GmmDiffusion, f: &Formula, t: f64, x: &[f64]) -> MixtureOracle {
    let terms = tuple_terms(g, t, x);
    let model = g.model();
    let max = terms.iter().map(|(_, l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut sat = 0.0;
    let mut grad_all = vec![0.0; x.len()];
    let mut grad_sat = vec![0.0; x.len()];
    for (tuple, l, grad) in &terms {
        let w = (l - max).exp();
        total += w;
        for (a, gk) in grad_all.iter_mut().zip(grad) {
            *a += w * gk;
        }
        if f.evaluate(&model.world_for_assignment(tuple)).unwrap() {
            sat += w;
            for (a, gk) in grad_sat.iter_mut().zip(grad) {
                *a += w * gk;
            }
        }
    }
    let score = grad_sat
        .iter()
        .zip(&grad_all)
        .map(|(s, a)| s / sat - a / total)
        .collect();
    MixtureOracle {
        log_p: sat.ln() - total.ln(),
        posterior: sat / total,
        score,
    }
}

/// Exact truth probability and one-step row by explicit matrix powers of a
/// kernel rebuilt from per-coordinate resampling factors.
pub struct ChainOracle {
    pub n: usize,
    pub kernel: Vec<Vec<f64>>,
    pub p0: Vec<f64>,
    /// `powers[k][x0][y] = K^k(x0, y)`.
    pub powers: Vec<Vec<Vec<f64>>>,
}

impl ChainOracle {
    pub fn categorical(dd: &DiscreteDiffusion) -> Self {
        let model = dd.model().as_categorical().expect("categorical chain").clone();
        let sizes: Vec<usize> = model.groups().iter().map(|g| g.len()).collect();
        let n = dd.state_count();
        let tuple = |s: usize| match dd.label(s) {
            WorldLabel::Assignment(t) => t.clone(),
            WorldLabel::Node(_) => panic!("categorical states carry tuples"),
        };
        let r = dd.flip_rate();
        let kernel: Vec<Vec<f64>> = (0..n)
            .map(|x| {
                let tx = tuple(x);
                (0..n)
                    .map(|y| {
                        let ty = tuple(y);
                        tx.iter()
                            .zip(&ty)
                            .zip(&sizes)
                            .map(|((a, b), &m)| (if a == b { 1.0 - r } else { 0.0 }) + r / m as f64)
                            .product()
                    })
                    .collect()
            })
            .collect();
        let p0 = dd.marginal(0).to_vec();
        let mut powers = vec![(0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect::<Vec<Vec<f64>>>()];
        for _ in 0..dd.steps() {
            let last = powers.last().unwrap();
            let next = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|m| last[i][m] * kernel[m][j]).sum())
                        .collect()
                })
                .collect();
            powers.push(next);
        }
        Self { n, kernel, p0, powers }
    }

    /// `P(formula | X_k = y)` and `P(X_{k-1} = . | X_k = y, formula)`.
    pub fn query(&self, sat: &[bool], k: usize, y: usize) -> (f64, Vec<f64>) {
        let mut inside = 0.0;
        let mut total = 0.0;
        for (x0, &inside_sat) in sat.iter().enumerate() {
            let m = self.p0[x0] * self.powers[k][x0][y];
            total += m;
            if inside_sat {
                inside += m;
            }
        }
        let row = (0..self.n)
            .map(|z| {
                (0..self.n)
                    .filter(|x0| sat[*x0])
                    .map(|x0| self.p0[x0] * self.powers[k - 1][x0][z] * self.kernel[z][y])
                    .sum::<f64>()
                    / inside
            })
            .collect();
        (inside / total, row)
    }
}

pub fn satisfying_states(dd: &DiscreteDiffusion, f: &Formula) -> Vec<bool> {
    (0..dd.state_count())
        .map(|s| f.evaluate(dd.world(s)).unwrap())
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Permutation p-value of the two-sample energy-distance statistic.
pub fn energy_distance_p_value<R: Rng>(xs: &[Vec<f64>], ys: &[Vec<f64>], permutations: usize, rng: &mut R) -> f64 {
    let pooled: Vec<&Vec<f64>> = xs.iter().chain(ys).collect();
    let n = pooled.len();
    let d: Vec<f32> = (0..n * n)
        .into_par_iter()
        .map(|ij| distance(pooled[ij / n], pooled[ij % n]) as f32)
        .collect();
    let nx = xs.len();
    let stat = |labels: &[bool]| -> f64 {
        let (mut xy, mut xx, mut yy) = (0.0f64, 0.0f64, 0.0f64);
        let rows: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
                for j in 0..n {
                    let v = d[i * n + j] as f64;
                    match (labels[i], labels[j]) {
                        (true, false) => a += v,
                        (true, true) => b += v,
                        (false, false) => c += v,
                        _ => {}
                    }
                }
                (a, b, c)
            })
            .collect();
        for (a, b, c) in rows {
            xy += a;
            xx += b;
            yy += c;
        }
        let ny = n - nx;
        2.0 * xy / (nx * ny) as f64 - xx / (nx * nx) as f64 - yy / (ny * ny) as f64
    };
    let mut labels: Vec<bool> = (0..n).map(|i| i < nx).collect();
    let observed = stat(&labels);
    let mut exceed = 0;
    for _ in 0..permutations {
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    (exceed + 1) as f64 / (permutations + 1) as f64
}

/// Pearson goodness-of-fit p-value over the cells with positive expected mass.
/// Observations in cells of zero expected mass give `0`.
pub fn chi_square_p_value(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return 0.0;
            }
            continue;
        }
        let e = p * n as f64;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if cells <= 1 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

pub fn histogram(states: &[usize], n: usize) -> Vec<usize> {
    let mut h = vec![0; n];
    for &s in states {
        h[s] += 1;
    }
    h
}

/// Random tree with 6 to 12 nodes and depth at least `min_depth`; about one
/// node in five is marked exhaustive.
pub fn random_taxonomy<R: Rng>(rng: &mut R, min_depth: usize) -> TaxonomyModel {
    loop {
        let n: usize = rng.random_range(6..=12);
        let mut specs = vec![NodeSpec::new("n0", None)];
        let mut depth = vec![0usize];
        for i in 1..n {
            // bias towards recent nodes to grow deep chains
            let lo = i.saturating_sub(3);
            let parent = rng.random_range(lo..i);
            specs.push(NodeSpec::new(&format!("n{i}"), Some(&format!("n{parent}"))));
            depth.push(depth[parent] + 1);
        }
        for s in specs.iter_mut() {
            s.exhaustive = rng.random_bool(0.2);
        }
        if *depth.iter().max().unwrap() < min_depth {
            continue;
        }
        if let Ok(t) = TaxonomyModel::new(&specs, None) {
            return t;
        }
    }
}

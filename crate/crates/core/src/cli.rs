//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::calculus::{atomic_coefficients, eval, eval_transition, EvalOptions};
use crate::circuit::{validate_structure, GuidanceCircuit};
use crate::compiler::{check_equivalence, compile};
use crate::error::{Error, Result};
use crate::formula::{parse_formula, random_formula, random_query, Formula, DEFAULT_NEG_PROB};
use crate::metrics::{conformity_score, joint_entropy, DiscreteStateLabeler, GmmMapLabeler, Labeler};
use crate::model::{DistributionModel, ModelFile, WorldLabel};
use crate::sampler::{
    sample_continuous, sample_discrete, CompositionRule, GuidanceScaling, PosteriorSource, SampleBatch, SamplerConfig,
    Samples,
};
use crate::testbed::{DiscreteDiffusion, GmmDiffusion};

pub const THREADS_ENV: &str = "LOGIGUIDE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "logiguide",
    version,
    about = "Exact logical composition of diffusion guidance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a query into a guidance circuit and check it.
    Compile(CompileArgs),
    /// Evaluate a circuit at probe points.
    Eval(EvalArgs),
    /// Random-formula campaign against the enumeration oracles.
    Verify(VerifyArgs),
    /// Guided generation.
    Sample(SampleArgs),
    /// Conformity and entropy of a batch, plus a sweep over guidance weights.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with = "circuit")]
    pub query: Option<String>,
    /// S-expression file (or inline s-expression).
    #[arg(long)]
    pub circuit: Option<String>,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// JSON array of `{"t": .., "x": [..]}` (continuous) or `{"step": .., "state": ..}` (discrete).
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Random probes when no points file is given.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the discrete testbed even for categorical models.
    #[arg(long)]
    pub discrete: bool,
    #[arg(long)]
    pub exact_mode: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_formulas: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continuous probes per formula.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    /// Largest number of binary operators per formula.
    #[arg(long, default_value_t = 4)]
    pub max_ops: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PosteriorMode {
    Exact,
    Estimated,
}

#[derive(Args, Debug, Clone)]
pub struct GuidanceArgs {
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    #[arg(long = "w-not", default_value_t = 1.0)]
    pub w_not: f64,
    #[arg(long)]
    pub repulsive: bool,
    #[arg(long, value_enum, default_value_t = PosteriorMode::Exact)]
    pub posterior_mode: PosteriorMode,
    /// Log-SNR draws of the posterior estimator.
    #[arg(long, default_value_t = 256)]
    pub draws: usize,
    /// Constant 1/2 disjunction weights instead of the exact rules.
    #[arg(long)]
    pub baseline: bool,
    /// Apply `w` to every atom instead of the whole formula.
    #[arg(long)]
    pub per_atom: bool,
    #[arg(long)]
    pub exact_mode: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the discrete testbed even for categorical models.
    #[arg(long)]
    pub discrete: bool,
}

impl GuidanceArgs {
    fn config(&self, w: f64) -> SamplerConfig {
        SamplerConfig {
            steps: self.steps,
            w,
            w_not: self.w_not,
            repulsive: self.repulsive,
            posterior: match self.posterior_mode {
                PosteriorMode::Exact => PosteriorSource::Exact,
                PosteriorMode::Estimated => PosteriorSource::Estimated { draws: self.draws },
            },
            rule: if self.baseline {
                CompositionRule::ConstantWeights
            } else {
                CompositionRule::Exact
            },
            scaling: if self.per_atom {
                GuidanceScaling::PerAtom
            } else {
                GuidanceScaling::WholeFormula
            },
            exact_mode: self.exact_mode,
            seed: self.seed,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub guidance: GuidanceArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub guidance: GuidanceArgs,
    /// Batch JSON written by `sample`.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Guidance weights of the sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4")]
    pub weights: Vec<f64>,
    /// Samples per sweep point.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Runs the command line and maps failures to one `error kind=.. message=..` line.
pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(e)) => {
            if e.use_stderr() {
                eprintln!("error kind=usage message={}", one_line(&e.to_string()));
                ExitCode::from(2)
            } else {
                let _ = e.print();
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Failed(e)) => {
            eprintln!("error kind={} message={}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug)]
pub enum RunError {
    Usage(clap::Error),
    Failed(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Failed(e)
    }
}

pub fn run<I, T>(args: I, out: &mut dyn Write) -> std::result::Result<(), RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(RunError::Usage)?;
    configure_threads()?;
    match cli.command {
        Command::Compile(a) => cmd_compile(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Sample(a) => cmd_sample(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
    .map_err(RunError::Failed)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A pool built earlier in the same process wins.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

struct Target {
    file: ModelFile,
    model_text: String,
    circuit: GuidanceCircuit,
    formula: Formula,
}

fn load_target(args: &TargetArgs) -> Result<Target> {
    let model_text = std::fs::read_to_string(&args.model)?;
    let file = ModelFile::from_json(&model_text)?;
    let registry = file.model.registry();
    let (circuit, formula) = match (&args.query, &args.circuit) {
        (Some(q), _) => {
            let f = parse_formula(q, registry)?;
            (compile(&f, &file.model)?, f)
        }
        (None, Some(c)) => {
            let text = if Path::new(c).is_file() {
                std::fs::read_to_string(c)?
            } else {
                c.clone()
            };
            let circuit = GuidanceCircuit::parse_sexp(text.trim(), registry)?;
            let f = circuit.to_formula();
            (circuit, f)
        }
        (None, None) => return Err(Error::InvalidInput("one of --query or --circuit is required".into())),
    };
    Ok(Target {
        file,
        model_text,
        circuit,
        formula,
    })
}

fn gmm_testbed(file: &ModelFile) -> Result<GmmDiffusion> {
    let model = file
        .model
        .as_categorical()
        .ok_or_else(|| Error::UnsupportedQuery("the continuous testbed needs a categorical model".into()))?;
    GmmDiffusion::grid(model.clone(), &file.testbed, file.group_weights.clone())
}

fn discrete_testbed(file: &ModelFile) -> Result<DiscreteDiffusion> {
    let steps = file.testbed.discrete_steps;
    let rate = file.testbed.flip_rate;
    match &file.model {
        DistributionModel::Categorical(m) => {
            DiscreteDiffusion::categorical(m.clone(), file.group_weights.clone(), steps, rate)
        }
        DistributionModel::Taxonomy(t) => {
            let n = t.world_count();
            let p0 = file.world_weights.clone().unwrap_or_else(|| vec![1.0; n]);
            DiscreteDiffusion::new(file.model.clone(), p0, steps, rate)
        }
    }
}

fn use_discrete(file: &ModelFile, forced: bool) -> bool {
    forced || file.model.as_categorical().is_none()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_compile(args: &CompileArgs, out: &mut dyn Write) -> Result<()> {
    let target = load_target(&args.target)?;
    let model = &target.file.model;
    let report = validate_structure(&target.circuit, model)?;
    let equivalent = check_equivalence(&target.formula, &target.circuit, model)?;
    let sexp = target.circuit.to_sexp(model.registry()).to_string();
    writeln!(out, "{sexp}")?;
    writeln!(out, "nodes: {}", target.circuit.node_count())?;
    writeln!(out, "valid: {}", report.ok)?;
    if report.degenerate {
        writeln!(out, "degenerate: true")?;
    }
    writeln!(out, "equivalent: {equivalent}")?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("circuit.sexp"), sexp + "\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Probe {
    Continuous { t: f64, x: Vec<f64> },
    Discrete { step: usize, state: usize },
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let target = load_target(&args.target)?;
    let opts = if args.exact_mode {
        EvalOptions::exact()
    } else {
        EvalOptions::default()
    };
    let probes: Option<Vec<Probe>> = match &args.points {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let registry = target.file.model.registry();
    let mut results = Vec::new();
    if use_discrete(&target.file, args.discrete) {
        let dd = discrete_testbed(&target.file)?;
        let points: Vec<(usize, usize)> = match probes {
            Some(ps) => ps
                .into_iter()
                .map(|p| match p {
                    Probe::Discrete { step, state } => Ok((step, state)),
                    Probe::Continuous { .. } => Err(Error::InvalidInput("discrete probes need step and state".into())),
                })
                .collect::<Result<_>>()?,
            None => (0..args.n)
                .map(|_| (rng.random_range(1..=dd.steps()), rng.random_range(0..dd.state_count())))
                .collect(),
        };
        for (step, state) in points {
            let o = eval_transition(&target.circuit, &dd.atomic_inputs(step, state)?, &opts)?;
            results.push(json!({
                "step": step,
                "state": state,
                "posterior": o.posterior.prob(),
                "log_posterior": [o.posterior.log_p, o.posterior.log_q],
                "row": o.row,
                "repaired": o.repaired,
            }));
        }
    } else {
        let g = gmm_testbed(&target.file)?;
        let points: Vec<(f64, Vec<f64>)> = match probes {
            Some(ps) => ps
                .into_iter()
                .map(|p| match p {
                    Probe::Continuous { t, x } => Ok((t, x)),
                    Probe::Discrete { .. } => Err(Error::InvalidInput("continuous probes need t and x".into())),
                })
                .collect::<Result<_>>()?,
            None => (0..args.n)
                .map(|_| {
                    let t = rng.random_range(0.05..=g.schedule().horizon);
                    let (mut xs, _) = g.sample_marginal(t, 1, &mut rng)?;
                    Ok((t, xs.remove(0)))
                })
                .collect::<Result<_>>()?,
        };
        for (t, x) in points {
            let inputs = g.atomic_inputs(t, &x)?;
            let o = eval(&target.circuit, &inputs, &opts)?;
            let coeffs = atomic_coefficients(&target.circuit, &inputs, &opts)?;
            let named: serde_json::Map<String, serde_json::Value> = coeffs
                .atoms
                .iter()
                .zip(&coeffs.values)
                .map(|(a, v)| (registry.name(*a).to_string(), json!(v)))
                .collect();
            results.push(json!({
                "t": t,
                "x": x,
                "posterior": o.posterior,
                "log_posterior": [o.log_posterior.log_p, o.log_posterior.log_q],
                "score": o.score,
                "coefficients": named,
                "clamped": o.flags.clamped,
                "capped": o.flags.capped,
            }));
        }
    }
    let doc = json!({
        "circuit": target.circuit.to_sexp(registry).to_string(),
        "results": results,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("eval.json"), &doc)?;
    }
    Ok(())
}

/// Worst deviations found by a verification campaign.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifySummary {
    pub formulas: usize,
    pub equivalence_failures: usize,
    pub structural_violations: usize,
    pub max_posterior_dev: f64,
    pub max_score_dev: f64,
    pub max_coefficient_dev: f64,
    pub max_discrete_posterior_dev: f64,
    pub max_row_dev: f64,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compiles random formulas and compares every composed quantity with the
/// testbeds' enumeration oracles.
pub fn verify_campaign(
    file: &ModelFile,
    n_formulas: usize,
    probes: usize,
    max_ops: usize,
    seed: u64,
) -> Result<VerifySummary> {
    let model = &file.model;
    let dd = discrete_testbed(file)?;
    let gmm = model.as_categorical().map(|_| gmm_testbed(file)).transpose()?;
    let exact = EvalOptions::exact();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<_> = model.registry().ids().collect();
    let mut s = VerifySummary::default();
    while s.formulas < n_formulas {
        let n_ops = rng.random_range(0..=max_ops);
        let f = match model {
            DistributionModel::Categorical(m) => random_query(m, n_ops, DEFAULT_NEG_PROB, rng.random())?,
            DistributionModel::Taxonomy(_) => {
                let f = random_formula(&atoms, n_ops, 0.2, &mut rng);
                if !model.is_satisfiable(&f)? {
                    continue;
                }
                f
            }
        };
        s.formulas += 1;
        let c = compile(&f, model)?;
        if !check_equivalence(&f, &c, model)? {
            s.equivalence_failures += 1;
        }
        if !validate_structure(&c, model)?.ok {
            s.structural_violations += 1;
        }
        for step in 1..=dd.steps() {
            for state in 0..dd.state_count() {
                let got = eval_transition(&c, &dd.atomic_inputs(step, state)?, &exact)?;
                let want = dd.formula_oracle(&f, step, state)?;
                s.max_discrete_posterior_dev = s
                    .max_discrete_posterior_dev
                    .max((got.posterior.prob() - want.posterior.prob()).abs());
                s.max_row_dev = s.max_row_dev.max(max_abs_dev(&got.row, &want.row));
            }
        }
        if let Some(g) = &gmm {
            for _ in 0..probes {
                let t = rng.random_range(0.05..=g.schedule().horizon);
                let (xs, _) = g.sample_marginal(t, 1, &mut rng)?;
                let x = &xs[0];
                let inputs = g.atomic_inputs(t, x)?;
                let got = eval(&c, &inputs, &exact)?;
                let want = g.formula_oracle(&f, t, x)?;
                s.max_posterior_dev = s.max_posterior_dev.max(rel_dev(got.posterior, want.posterior.prob()));
                s.max_score_dev = s.max_score_dev.max(max_abs_dev(&got.score, &want.score));
                let rebuilt = atomic_coefficients(&c, &inputs, &exact)?.reconstruct(&inputs)?;
                s.max_coefficient_dev = s.max_coefficient_dev.max(max_abs_dev(&rebuilt, &got.score));
            }
        }
    }
    Ok(s)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let s = verify_campaign(&file, args.n_formulas, args.probes, args.max_ops, args.seed)?;
    writeln!(out, "formulas: {}", s.formulas)?;
    writeln!(out, "equivalence failures: {}", s.equivalence_failures)?;
    writeln!(out, "structural violations: {}", s.structural_violations)?;
    if file.model.as_categorical().is_some() {
        writeln!(out, "max posterior dev: {:.3e}", s.max_posterior_dev)?;
        writeln!(out, "max score dev: {:.3e}", s.max_score_dev)?;
        writeln!(out, "max coefficient dev: {:.3e}", s.max_coefficient_dev)?;
    }
    writeln!(out, "max discrete posterior dev: {:.3e}", s.max_discrete_posterior_dev)?;
    writeln!(out, "max row dev: {:.3e}", s.max_row_dev)?;
    let worst = [s.max_posterior_dev, s.max_discrete_posterior_dev, s.max_row_dev]
        .into_iter()
        .fold(0.0, f64::max);
    if s.equivalence_failures > 0 || s.structural_violations > 0 || worst > 1e-9 || s.max_score_dev > 1e-8 {
        return Err(Error::VerificationFailed(format!(
            "{} equivalence failures, {} structural violations, worst deviation {worst:.3e}",
            s.equivalence_failures, s.structural_violations
        )));
    }
    Ok(())
}

fn run_batch(target: &Target, guidance: &GuidanceArgs, w: f64, n: usize) -> Result<(SampleBatch, Testbed)> {
    let cfg = guidance.config(w);
    if use_discrete(&target.file, guidance.discrete) {
        let dd = discrete_testbed(&target.file)?;
        let batch = sample_discrete(&dd, &target.circuit, &cfg, n)?;
        Ok((batch, Testbed::Discrete(dd)))
    } else {
        let g = gmm_testbed(&target.file)?;
        let batch = sample_continuous(&g, &target.circuit, &cfg, n)?;
        Ok((batch, Testbed::Continuous(g)))
    }
}

enum Testbed {
    Continuous(GmmDiffusion),
    Discrete(DiscreteDiffusion),
}

impl Testbed {
    fn labeler(&self) -> Box<dyn Labeler + '_> {
        match self {
            Testbed::Continuous(g) => Box::new(GmmMapLabeler(g)),
            Testbed::Discrete(d) => Box::new(DiscreteStateLabeler(d)),
        }
    }
}

#[derive(Serialize)]
struct Metrics {
    conformity: f64,
    joint_entropy_bits: f64,
}

fn metrics(batch: &SampleBatch, f: &Formula, labeler: &dyn Labeler) -> Result<Metrics> {
    Ok(Metrics {
        conformity: conformity_score(batch, f, labeler)?,
        joint_entropy_bits: joint_entropy(batch, labeler)?,
    })
}

fn write_samples_csv(path: &Path, batch: &SampleBatch, target: &Target, testbed: &Testbed) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let model = &target.file.model;
    let registry = model.registry();
    let labels = testbed.labeler().label(batch)?;
    let categorical = model.as_categorical();
    let mut header: Vec<String> = match &batch.samples {
        Samples::Continuous(xs) => (0..xs.first().map_or(0, Vec::len)).map(|k| format!("x{k}")).collect(),
        Samples::Discrete(_) => vec!["state".into()],
    };
    match categorical {
        Some(m) => header.extend(m.groups().iter().map(|g| g.name.clone())),
        None => header.push("node".into()),
    }
    header.push("satisfies".into());
    w.write_record(&header)?;
    for (i, world) in labels.iter().enumerate() {
        let mut row: Vec<String> = match &batch.samples {
            Samples::Continuous(xs) => xs[i].iter().map(|v| v.to_string()).collect(),
            Samples::Discrete(states) => vec![states[i].to_string()],
        };
        match (categorical, &batch.samples, testbed) {
            (Some(m), _, _) => {
                for g in m.groups() {
                    let v = g
                        .atoms()
                        .iter()
                        .position(|a| world.get(*a) == Some(true))
                        .map_or_else(String::new, |v| g.values[v].clone());
                    row.push(v);
                }
            }
            (None, Samples::Discrete(states), Testbed::Discrete(dd)) => match dd.label(states[i]) {
                WorldLabel::Node(u) => row.push(registry.names()[*u].clone()),
                WorldLabel::Assignment(_) => row.push(String::new()),
            },
            _ => row.push(String::new()),
        }
        row.push(target.formula.evaluate(world)?.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn config_hash(target: &Target, cfg: &SamplerConfig, n: usize, discrete: bool) -> Result<String> {
    let doc = json!({
        "model": target.model_text,
        "circuit": target.circuit.to_sexp(target.file.model.registry()).to_string(),
        "config": cfg,
        "n": n,
        "discrete": discrete,
    });
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&doc)?)))
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let target = load_target(&args.target)?;
    let (batch, testbed) = run_batch(&target, &args.guidance, args.guidance.w, args.n)?;
    let labeler = testbed.labeler();
    let m = metrics(&batch, &target.formula, labeler.as_ref())?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_samples_csv(&args.out_dir.join("samples.csv"), &batch, &target, &testbed)?;
    write_json(&args.out_dir.join("batch.json"), &batch)?;
    let discrete = matches!(testbed, Testbed::Discrete(_));
    let manifest = json!({
        "tool": "logiguide",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(&target, &batch.config, args.n, discrete)?,
        "seed": batch.seed,
        "n": args.n,
        "testbed": if discrete { "discrete" } else { "continuous" },
        "model": target.model_text,
        "circuit": target.circuit.to_sexp(target.file.model.registry()).to_string(),
        "config": batch.config,
        "repaired_rows": batch.repaired,
        "metrics": m,
    });
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    writeln!(
        out,
        "wrote {} samples to {}: conformity {:.4}, joint entropy {:.4} bits",
        batch.len(),
        args.out_dir.display(),
        m.conformity,
        m.joint_entropy_bits
    )?;
    Ok(())
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let target = load_target(&args.target)?;
    let discrete = use_discrete(&target.file, args.guidance.discrete);
    if let Some(path) = &args.batch {
        let batch: SampleBatch = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let testbed = match batch.samples {
            Samples::Continuous(_) => Testbed::Continuous(gmm_testbed(&target.file)?),
            Samples::Discrete(_) => Testbed::Discrete(discrete_testbed(&target.file)?),
        };
        let m = metrics(&batch, &target.formula, testbed.labeler().as_ref())?;
        writeln!(out, "batch        n  conformity  entropy_bits")?;
        writeln!(
            out,
            "given {:>8}  {:>10.4}  {:>12.4}",
            batch.len(),
            m.conformity,
            m.joint_entropy_bits
        )?;
    }
    let weights: Vec<f64> = if discrete {
        vec![args.guidance.w]
    } else {
        args.weights.clone()
    };
    std::fs::create_dir_all(&args.out_dir)?;
    let mut csv = csv::Writer::from_path(args.out_dir.join("conformity_vs_w.csv"))?;
    csv.write_record(["w", "conformity", "joint_entropy_bits"])?;
    writeln!(out, "{:>8}  {:>10}  {:>12}", "w", "conformity", "entropy_bits")?;
    for w in weights {
        let (batch, testbed) = run_batch(&target, &args.guidance, w, args.n)?;
        let m = metrics(&batch, &target.formula, testbed.labeler().as_ref())?;
        writeln!(out, "{w:>8.3}  {:>10.4}  {:>12.4}", m.conformity, m.joint_entropy_bits)?;
        csv.write_record([
            w.to_string(),
            m.conformity.to_string(),
            m.joint_entropy_bits.to_string(),
        ])?;
    }
    csv.flush()?;
    if discrete {
        writeln!(
            out,
            "discrete guidance is exact conditioning; the weight sweep is skipped"
        )?;
    }
    Ok(())
}

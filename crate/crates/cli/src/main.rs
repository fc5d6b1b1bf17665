//! `levelset`: learn feasibility models, sample from them, run benchmarks
//! and the acceptance checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelset_core::adaptive::{AdaptiveSampler, RejectionSampler};
use levelset_core::bench::{benchmark_table, learn_model, prepare_oracle, summary_table, TrainConfig};
use levelset_core::config::ExperimentConfig;
use levelset_core::diverse::{diversity_score, DiverseSampler, KernelState};
use levelset_core::io;
use levelset_core::levelset::{most_likely_feasible, relaxed_beta};
use levelset_core::oracles::{by_name, Oracle};
use levelset_core::planner::{derive_seed, run_kernel_learning};
use levelset_core::verify::{default_model_hyper, Verifier, CRITERIA};
use levelset_core::{par, Dataset, Error, GpHyper, PosteriorModel, Predictor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser, Debug)]
#[command(name = "levelset", version, about = "Learn and sample feasible action parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Actively learn a score model for an oracle; writes model.json and dataset.csv.
    Learn(Common),
    /// Draw samples from the high-probability super-level-set of a model.
    Sample(Common),
    /// Benchmark samplers (`--mode table`, default) or kernel learning (`--mode curve`).
    Bench(Common),
    /// Run the acceptance checks, or check a saved model's first recommendation.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (learn) or file (sample, bench).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampler for `sample` (adaptive, rejection, diverse); table or curve for `bench`.
    #[arg(long)]
    mode: Option<String>,
    /// Number of samples to draw.
    #[arg(long)]
    count: Option<usize>,
    /// Model JSON written by `learn`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset CSV written by `learn`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Diversity kernel JSON for `sample --mode diverse`.
    #[arg(long)]
    kernel: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Print criterion identifiers without running them.
    #[arg(long)]
    list: bool,
    /// Criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    criterion: Vec<String>,
    #[command(flatten)]
    common: Common,
}

/// Failure categories mapped onto exit codes.
enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::InvalidBounds(_)
            | Error::UnknownOracle(_)
            | Error::DimensionMismatch { .. }
            | Error::Json(_)
            | Error::Csv(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Learn(c) => with_config(&c, false, |cfg| cmd_learn(cfg, &c)),
        Command::Sample(c) => with_config(&c, false, |cfg| cmd_sample(cfg, &c)),
        Command::Bench(c) => with_config(&c, true, |cfg| cmd_bench(cfg, &c)),
        Command::Verify(v) => cmd_verify(&v),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn resolve(c: &Common, require_seed: bool) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if require_seed && c.seed.is_none() {
        return Err(Failure::Config("--seed is required".into()));
    }
    if let Some(v) = &c.oracle {
        cfg.oracle = v.clone();
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = c.$f { cfg.$f = v; })* };
    }
    set!(budget, delta, rho, epsilon, gamma, seed, workers, count);
    if let Some(m) = &c.mode {
        cfg.mode = Some(m.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_config(c: &Common, require_seed: bool, f: impl FnOnce(&ExperimentConfig) -> Outcome + Send) -> Outcome {
    let cfg = resolve(c, require_seed)?;
    par::with_workers(cfg.workers, || f(&cfg))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn context_for(cfg: &ExperimentConfig, oracle: &dyn Oracle) -> Result<Vec<f64>, Failure> {
    let ctx = cfg.context.clone().unwrap_or_else(|| oracle.nominal_context());
    if ctx.len() != oracle.dim_context() {
        return Err(Failure::Config(format!(
            "oracle {} takes {} context values, got {}",
            oracle.name(),
            oracle.dim_context(),
            ctx.len()
        )));
    }
    Ok(ctx)
}

fn cmd_learn(cfg: &ExperimentConfig, c: &Common) -> Outcome {
    let oracle = by_name(&cfg.oracle)?;
    let context = context_for(cfg, oracle.as_ref())?;
    let train = TrainConfig {
        init_points: cfg.init_points,
        acquisition: cfg.acquisition(),
        noise_sd: cfg.noise_sd,
        extra_uniform: 0,
    };
    let out = learn_model(oracle.as_ref(), &context, &train, cfg.seed)?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let json = cfg.to_json();
    let mut w = create(&dir.join("dataset.csv"))?;
    io::write_dataset_csv(&mut w, &out.dataset, &json)?;
    w.flush().map_err(|e| Failure::Run(e.to_string()))?;
    let mut m = create(&dir.join("model.json"))?;
    writeln!(m, "{}", io::model_to_json(&out.hyper)).map_err(|e| Failure::Run(e.to_string()))?;
    m.flush().map_err(|e| Failure::Run(e.to_string()))?;
    println!(
        "learned {} with {} observations; wrote {}",
        oracle.name(),
        out.dataset.len(),
        dir.display()
    );
    Ok(true)
}

fn read_model(path: &Path) -> Result<GpHyper, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    io::model_from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn read_data(path: &Path, noise_sd: f64) -> Result<Dataset, Failure> {
    let f = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    io::read_dataset_csv(f, noise_sd).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Loads `--data`/`--model`, or trains a model with the oracle's benchmark
/// settings when no data is given.
fn load_or_learn(cfg: &ExperimentConfig, c: &Common, oracle: &dyn Oracle, context: &[f64]) -> Result<PosteriorModel, Failure> {
    match &c.data {
        Some(d) => {
            let hyper = match &c.model {
                Some(m) => read_model(m)?,
                None => default_model_hyper(oracle),
            };
            let mut ds = read_data(d, hyper.noise_sd)?;
            ds.set_noise_sd(hyper.noise_sd);
            if ds.dim_theta() != oracle.dim_theta() || ds.dim_context() != oracle.dim_context() {
                return Err(Failure::Config(format!("dataset columns do not match oracle {}", oracle.name())));
            }
            Ok(PosteriorModel::new(&ds, hyper)?)
        }
        None => {
            if c.model.is_some() {
                return Err(Failure::Config("--model needs --data".into()));
            }
            let out = learn_model(oracle, context, &TrainConfig::for_oracle(oracle.name()), cfg.seed)?;
            Ok(out.model()?)
        }
    }
}

fn cmd_sample(cfg: &ExperimentConfig, c: &Common) -> Outcome {
    let oracle = by_name(&cfg.oracle)?;
    let context = context_for(cfg, oracle.as_ref())?;
    let model = load_or_learn(cfg, c, oracle.as_ref(), &context)?;
    let bounds = oracle.theta_bounds();
    let mode = cfg.mode.as_deref().unwrap_or("adaptive");
    let sampler_cfg = cfg.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1]));
    let rb = relaxed_beta(&model, &context, &bounds, cfg.rho, &sampler_cfg.maximizer, &mut rng)?;
    let mut draw_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));
    let mut thetas: Vec<Vec<f64>> = Vec::with_capacity(cfg.count);
    let mut kernel_out = None;
    match mode {
        "rejection" => {
            let mut s = RejectionSampler::new(&model, context.clone(), bounds.clone(), rb.beta);
            for _ in 0..cfg.count {
                thetas.push(s.next_sample(&mut draw_rng)?);
            }
        }
        "adaptive" | "diverse" => {
            let inner = AdaptiveSampler::new(&model, context.clone(), bounds.clone(), rb.beta, rb.argmax.clone(), sampler_cfg)?;
            if mode == "adaptive" {
                let mut s = inner;
                for _ in 0..cfg.count {
                    thetas.push(s.next_sample(&mut draw_rng)?);
                }
            } else {
                let kernel = match &c.kernel {
                    Some(p) => {
                        let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
                        io::kernel_from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
                    }
                    None => cfg.kernel(bounds.dim()),
                };
                let mut s = DiverseSampler::new(inner, kernel, false)?;
                for _ in 0..cfg.count {
                    thetas.push(s.next_sample(&mut draw_rng)?);
                }
                kernel_out = Some(s.kernel().clone());
            }
        }
        other => return Err(Failure::Config(format!("unknown sample mode {other}"))),
    }
    let rows: Vec<io::SampleRow> = thetas
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (mean, sd) = Predictor::predict(&model, t, &context);
            io::SampleRow {
                theta: t.clone(),
                mean,
                sd,
                margin: mean - rb.beta * sd,
                diversity: kernel_out.as_ref().map(|k| {
                    let unit: Vec<Vec<f64>> = thetas[..=i].iter().map(|p| bounds.normalize(p)).collect();
                    diversity_score(&unit, &k.l, k.zeta)
                }),
            }
        })
        .collect();
    let extra = vec![format!("beta: {}", rb.beta), format!("mode: {mode}")];
    let json = cfg.to_json();
    match &c.out {
        Some(p) => {
            let mut w = create(p)?;
            io::write_samples_csv(&mut w, &rows, bounds.dim(), &json, &extra)?;
            w.flush().map_err(|e| Failure::Run(e.to_string()))?;
            if let Some(k) = &kernel_out {
                let kp = p.with_extension("kernel.json");
                let mut kw = create(&kp)?;
                writeln!(kw, "{}", io::kernel_to_json(k)).map_err(|e| Failure::Run(e.to_string()))?;
            }
            println!("wrote {} samples to {}", rows.len(), p.display());
        }
        None => io::write_samples_csv(std::io::stdout().lock(), &rows, bounds.dim(), &json, &extra)?,
    }
    Ok(true)
}

fn cmd_bench(cfg: &ExperimentConfig, c: &Common) -> Outcome {
    let json = cfg.to_json();
    match cfg.mode.as_deref().unwrap_or("table") {
        "table" => {
            let rows = benchmark_table(&cfg.bench()?)?;
            match &c.out {
                Some(p) => {
                    let mut w = create(p)?;
                    io::write_metrics_csv(&mut w, &rows, &json)?;
                    w.flush().map_err(|e| Failure::Run(e.to_string()))?;
                }
                None => io::write_metrics_csv(std::io::stdout().lock(), &rows, &json)?,
            }
            eprintln!("{}", summary_table(&rows));
            Ok(true)
        }
        "curve" => {
            let curve = cfg.curve();
            let prep = prepare_oracle("rectangles", &curve.sampler, derive_seed(cfg.seed, &[20, 0]))?;
            let kinds = cfg.curve_kinds()?;
            for kind in &kinds {
                let k0 = KernelState {
                    epsilon: cfg.epsilon,
                    ..cfg.kernel(2)
                };
                let (rows, kernel) = run_kernel_learning(&prep.model, &prep.setup, *kind, k0, &curve)?;
                let extra = vec![
                    format!("sampler: {}", kind.as_str()),
                    format!("final kernel l: {:?}", kernel.l),
                ];
                let target = c.out.as_ref().map(|p| {
                    if kinds.len() == 1 {
                        p.clone()
                    } else {
                        let stem = p.file_stem().map_or("curve".into(), |s| s.to_string_lossy().into_owned());
                        p.with_file_name(format!("{stem}_{}.csv", kind.as_str()))
                    }
                });
                match target {
                    Some(p) => {
                        let mut w = create(&p)?;
                        io::write_curve_csv(&mut w, &rows, &json, &extra)?;
                        w.flush().map_err(|e| Failure::Run(e.to_string()))?;
                        eprintln!("{}: final mean J {:.3}, wrote {}", kind.as_str(), rows.last().map_or(0.0, |r| r.mean_j), p.display());
                    }
                    None => io::write_curve_csv(std::io::stdout().lock(), &rows, &json, &extra)?,
                }
            }
            Ok(true)
        }
        other => Err(Failure::Config(format!("unknown bench mode {other}"))),
    }
}

fn cmd_verify(v: &VerifyArgs) -> Outcome {
    if v.list {
        for (id, title) in CRITERIA {
            println!("{id}\t{title}");
        }
        return Ok(true);
    }
    let cfg = resolve(&v.common, false)?;
    if v.common.model.is_some() || v.common.data.is_some() {
        return par::with_workers(cfg.workers, || verify_model(&cfg, &v.common));
    }
    let unknown: Vec<&String> = v.criterion.iter().filter(|id| !CRITERIA.iter().any(|(c, _)| c == id)).collect();
    if !unknown.is_empty() {
        return Err(Failure::Config(format!("unknown criteria {unknown:?}")));
    }
    par::with_workers(cfg.workers, || {
        let mut verifier = Verifier::new(cfg.seed);
        let mut all = true;
        for (id, _) in CRITERIA {
            if !v.criterion.is_empty() && !v.criterion.iter().any(|c| c == id) {
                continue;
            }
            if let Some(report) = verifier.run(id) {
                println!("{}", report.line());
                all &= report.passed;
            }
        }
        Ok(all)
    })
}

/// Checks that the saved model's most-likely-feasible point is truly feasible.
fn verify_model(cfg: &ExperimentConfig, c: &Common) -> Outcome {
    let (Some(model_path), Some(data_path)) = (&c.model, &c.data) else {
        return Err(Failure::Config("model verification needs both --model and --data".into()));
    };
    let hyper = read_model(model_path)?;
    let oracle = by_name(&cfg.oracle)?;
    let context = context_for(cfg, oracle.as_ref())?;
    let ds = read_data(data_path, hyper.noise_sd)?;
    let model = PosteriorModel::new(&ds, hyper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1]));
    let (theta, z) = most_likely_feasible(&model, &context, &oracle.theta_bounds(), &cfg.maximizer(), &mut rng);
    let ok = oracle.feasible(&theta, &context);
    println!(
        "first recommendation {:?} (mu/sigma {z:.2}) is {}",
        theta,
        if ok { "feasible" } else { "infeasible" }
    );
    Ok(ok)
}

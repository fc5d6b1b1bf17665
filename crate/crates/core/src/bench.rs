//! Sampler benchmark: false-positive rate, time for 50 draws, draws needed
//! for 5 true positives, and diversity of those positives, per oracle and
//! sampler.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::active::{active_learn, default_hyper, AcquisitionConfig, ActiveOutcome};
use crate::adaptive::{AdaptiveSampler, RejectionSampler, SamplerConfig};
use crate::diverse::{diversity_score, DiverseSampler, KernelState};
use crate::error::{Error, Result};
use crate::gp::PosteriorModel;
use crate::levelset::relaxed_beta;
use crate::oracles::{by_name, NoisyOracle, Oracle};
use crate::par;
use crate::planner::{derive_seed, SamplerSetup};
use crate::stats;
use crate::types::Dataset;

/// How a benchmark model is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Uniform design points before active learning.
    pub init_points: usize,
    pub acquisition: AcquisitionConfig,
    pub noise_sd: f64,
    /// Uniform points added after learning, conditioned on with the learned
    /// hyperparameters.
    pub extra_uniform: usize,
}

impl TrainConfig {
    pub fn for_oracle(name: &str) -> Self {
        let (init_points, budget, extra_uniform) = match name {
            "rectangles" => (10, 60, 0),
            "disk" => (10, 40, 0),
            "pour" => (30, 60, 0),
            "push" => (30, 60, 0),
            "scoop" => (40, 80, 1200),
            _ => (20, 50, 0),
        };
        Self {
            init_points,
            acquisition: AcquisitionConfig {
                budget,
                ..Default::default()
            },
            noise_sd: 0.01,
            extra_uniform,
        }
    }
}

/// Uniform design, straddle learning at `context`, then optional extra
/// uniform observations.
pub fn learn_model(oracle: &dyn Oracle, context: &[f64], cfg: &TrainConfig, seed: u64) -> Result<ActiveOutcome> {
    let bounds = oracle.theta_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = NoisyOracle::new(oracle, cfg.noise_sd, derive_seed(seed, &[0]));
    let mut ds = Dataset::new(bounds.dim(), oracle.dim_context(), cfg.noise_sd)?;
    for _ in 0..cfg.init_points {
        let theta = bounds.sample_uniform(&mut rng);
        let y = crate::active::ScoreOracle::evaluate(&mut noisy, &theta, context)?;
        ds.push(&theta, context, y)?;
    }
    let hyper = default_hyper(&bounds, oracle.context_bounds().as_ref());
    let mut out = active_learn(&mut noisy, context, &bounds, ds, hyper, &cfg.acquisition, &mut rng)?;
    for _ in 0..cfg.extra_uniform {
        let theta = bounds.sample_uniform(&mut rng);
        let y = crate::active::ScoreOracle::evaluate(&mut noisy, &theta, context)?;
        out.dataset.push(&theta, context, y)?;
    }
    Ok(out)
}

/// A trained model with its sampler threshold and seed at the nominal context.
#[derive(Debug)]
pub struct PreparedOracle {
    pub oracle: Box<dyn Oracle>,
    pub model: PosteriorModel,
    pub setup: SamplerSetup,
}

pub fn prepare_oracle(name: &str, sampler: &SamplerConfig, seed: u64) -> Result<PreparedOracle> {
    let oracle = by_name(name)?;
    let context = oracle.nominal_context();
    let out = learn_model(oracle.as_ref(), &context, &TrainConfig::for_oracle(name), seed)?;
    let model = out.model()?;
    let bounds = oracle.theta_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let rb = relaxed_beta(&model, &context, &bounds, sampler.rho, &sampler.maximizer, &mut rng)?;
    Ok(PreparedOracle {
        oracle,
        model,
        setup: SamplerSetup {
            context,
            bounds,
            beta: rb.beta,
            seed: rb.argmax,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Rejection,
    Adaptive,
    Diverse,
}

impl SamplerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(Self::Rejection),
            "adaptive" => Ok(Self::Adaptive),
            "diverse" => Ok(Self::Diverse),
            _ => Err(Error::InvalidArgument(format!("unknown sampler {s}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rejection => "rejection",
            Self::Adaptive => "adaptive",
            Self::Diverse => "diverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub oracles: Vec<String>,
    pub samplers: Vec<SamplerKind>,
    pub trials: usize,
    pub draws: usize,
    pub positives: usize,
    pub positives_cap: usize,
    pub time_cap_s: f64,
    pub zeta: f64,
    pub seed: u64,
    pub sampler: SamplerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            oracles: vec!["rectangles".into(), "pour".into(), "push".into()],
            samplers: vec![SamplerKind::Rejection, SamplerKind::Adaptive, SamplerKind::Diverse],
            trials: 10,
            draws: 50,
            positives: 5,
            positives_cap: 100,
            time_cap_s: 10.0,
            zeta: 0.1,
            seed: 0,
            sampler: SamplerConfig::default(),
        }
    }
}

/// Raw measurements of one trial; `None` marks a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub fp_percent: Option<f64>,
    pub t50: Option<f64>,
    pub n5: Option<usize>,
    pub diversity: Option<f64>,
    /// Diversity of the first `positives` draws, feasible or not.
    pub diversity_first: Option<f64>,
    pub timed_out: bool,
}

enum AnySampler<'a> {
    Rejection(RejectionSampler<'a, PosteriorModel>),
    Adaptive(AdaptiveSampler<'a, PosteriorModel>),
    Diverse(DiverseSampler<'a, PosteriorModel>),
}

impl AnySampler<'_> {
    fn next(&mut self, rng: &mut ChaCha8Rng, deadline: Instant) -> Result<Option<Vec<f64>>> {
        match self {
            Self::Rejection(s) => s.next_before(rng, Some(deadline)),
            Self::Adaptive(s) => s.next_sample(rng).map(Some),
            Self::Diverse(s) => s.next_sample(rng).map(Some),
        }
    }
}

/// Runs one trial: at least `draws` samples, continuing until `positives`
/// true positives are found or `positives_cap` samples are drawn.
pub fn run_trial(prep: &PreparedOracle, kind: SamplerKind, cfg: &BenchConfig, seed: u64) -> TrialOutcome {
    let s = &prep.setup;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failed = TrialOutcome {
        fp_percent: None,
        t50: None,
        n5: None,
        diversity: None,
        diversity_first: None,
        timed_out: false,
    };
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(cfg.time_cap_s);
    let adaptive = || AdaptiveSampler::new(&prep.model, s.context.clone(), s.bounds.clone(), s.beta, s.seed.clone(), cfg.sampler.clone());
    let mut sampler = match kind {
        SamplerKind::Rejection => AnySampler::Rejection(RejectionSampler::new(&prep.model, s.context.clone(), s.bounds.clone(), s.beta)),
        SamplerKind::Adaptive => match adaptive() {
            Ok(a) => AnySampler::Adaptive(a),
            Err(_) => return failed,
        },
        SamplerKind::Diverse => {
            let k = KernelState {
                zeta: cfg.zeta,
                ..KernelState::unit(s.bounds.dim())
            };
            match adaptive().and_then(|a| DiverseSampler::new(a, k, false)) {
                Ok(d) => AnySampler::Diverse(d),
                Err(_) => return failed,
            }
        }
    };
    let mut infeasible = 0usize;
    let mut drawn = 0usize;
    let mut t50 = None;
    let mut positives: Vec<Vec<f64>> = Vec::new();
    let mut first: Vec<Vec<f64>> = Vec::new();
    let mut n5 = None;
    let mut timed_out = false;
    loop {
        let done_draws = drawn >= cfg.draws;
        let done_pos = n5.is_some() || drawn >= cfg.positives_cap;
        if done_draws && done_pos {
            break;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        let theta = match sampler.next(&mut rng, deadline) {
            Ok(Some(t)) => t,
            Ok(None) => {
                timed_out = true;
                break;
            }
            Err(_) => return failed,
        };
        drawn += 1;
        if first.len() < cfg.positives {
            first.push(s.bounds.normalize(&theta));
        }
        let ok = prep.oracle.feasible(&theta, &s.context);
        if drawn <= cfg.draws && !ok {
            infeasible += 1;
        }
        if drawn == cfg.draws {
            t50 = Some(start.elapsed().as_secs_f64());
        }
        if ok && positives.len() < cfg.positives {
            positives.push(s.bounds.normalize(&theta));
            if positives.len() == cfg.positives {
                n5 = Some(drawn);
            }
        }
    }
    let reached = drawn >= cfg.draws;
    let l = vec![1.0; s.bounds.dim()];
    TrialOutcome {
        fp_percent: reached.then(|| 100.0 * infeasible as f64 / cfg.draws as f64),
        t50: if reached { t50 } else { None },
        diversity: n5.map(|_| diversity_score(&positives, &l, cfg.zeta)),
        n5,
        diversity_first: (first.len() == cfg.positives).then(|| diversity_score(&first, &l, cfg.zeta)),
        timed_out,
    }
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub oracle: String,
    pub sampler: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub failures: usize,
}

/// Metrics whose values depend on wall time.
pub const TIMING_METRICS: [&str; 2] = ["t50_s", "time_cap_hits"];

fn summarize(oracle: &str, sampler: &str, metric: &str, vals: &[Option<f64>]) -> MetricRow {
    let ok: Vec<f64> = vals.iter().flatten().copied().collect();
    MetricRow {
        oracle: oracle.into(),
        sampler: sampler.into(),
        metric: metric.into(),
        mean: if ok.is_empty() { f64::NAN } else { stats::mean(&ok) },
        sd: if ok.len() < 2 { 0.0 } else { stats::std_dev(&ok) },
        failures: vals.len() - ok.len(),
    }
}

/// All trials of one sampler. Trial `t` uses the same seed for every
/// sampler, so outcomes are paired.
pub fn trial_outcomes(prep: &PreparedOracle, kind: SamplerKind, oracle_index: usize, cfg: &BenchConfig) -> Vec<TrialOutcome> {
    par::map_range(cfg.trials, |t| run_trial(prep, kind, cfg, derive_seed(cfg.seed, &[10, oracle_index as u64, t as u64])))
}

/// Rows for one prepared oracle.
pub fn benchmark_oracle(prep: &PreparedOracle, oracle_index: usize, cfg: &BenchConfig) -> Vec<MetricRow> {
    let name = prep.oracle.name();
    let mut rows = Vec::new();
    for kind in &cfg.samplers {
        let outs = trial_outcomes(prep, *kind, oracle_index, cfg);
        let k = kind.as_str();
        rows.push(summarize(name, k, "fp_percent", &outs.iter().map(|o| o.fp_percent).collect::<Vec<_>>()));
        rows.push(summarize(name, k, "t50_s", &outs.iter().map(|o| o.t50).collect::<Vec<_>>()));
        rows.push(summarize(name, k, "n5", &outs.iter().map(|o| o.n5.map(|v| v as f64)).collect::<Vec<_>>()));
        rows.push(summarize(name, k, "diversity", &outs.iter().map(|o| o.diversity).collect::<Vec<_>>()));
        rows.push(summarize(name, k, "diversity_first5", &outs.iter().map(|o| o.diversity_first).collect::<Vec<_>>()));
        let timeouts = outs.iter().filter(|o| o.timed_out).count();
        rows.push(MetricRow {
            oracle: name.into(),
            sampler: k.into(),
            metric: "time_cap_hits".into(),
            mean: timeouts as f64,
            sd: 0.0,
            failures: timeouts,
        });
    }
    rows
}

/// Trains every configured oracle and benchmarks every configured sampler.
pub fn benchmark_table(cfg: &BenchConfig) -> Result<Vec<MetricRow>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    cfg.sampler.validate()?;
    let mut rows = Vec::new();
    for (i, name) in cfg.oracles.iter().enumerate() {
        let prep = prepare_oracle(name, &cfg.sampler, derive_seed(cfg.seed, &[20, i as u64]))?;
        rows.extend(benchmark_oracle(&prep, i, cfg));
    }
    Ok(rows)
}

/// Human-readable table with one line per (oracle, sampler).
pub fn summary_table(rows: &[MetricRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<10} {:>16} {:>16} {:>14} {:>16} {:>5}",
        "oracle", "sampler", "FP %", "T50 s", "N5", "diversity", "cap"
    );
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !pairs.contains(&(r.oracle.as_str(), r.sampler.as_str())) {
            pairs.push((&r.oracle, &r.sampler));
        }
    }
    for (o, s) in pairs {
        let get = |m: &str| rows.iter().find(|r| r.oracle == o && r.sampler == s && r.metric == m);
        let cell = |m: &str| match get(m) {
            Some(r) if r.mean.is_finite() => format!("{:.2}±{:.2}", r.mean, r.sd),
            _ => "-".into(),
        };
        let cap = get("time_cap_hits").map_or(0, |r| r.failures);
        let _ = writeln!(
            out,
            "{:<12} {:<10} {:>16} {:>16} {:>14} {:>16} {:>5}",
            o,
            s,
            cell("fp_percent"),
            cell("t50_s"),
            cell("n5"),
            cell("diversity"),
            cap
        );
    }
    out
}

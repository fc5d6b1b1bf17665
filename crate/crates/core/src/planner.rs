//! Single-constraint backtracking planner and the Task I protocol.
//!
//! A task hides an obstacle over one of the two feasible rectangles. The
//! planner pulls samples until one lands in the unblocked rectangle; the
//! sampler is rewarded `gamma^n` for the sample that completed the plan at
//! draw `n`.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveSampler, RejectionSampler, SamplerConfig};
use crate::diverse::{DiverseSampler, KernelState};
use crate::error::{Error, Result};
use crate::oracles::{Oracle, Rect, TwoRectangles};
use crate::par;
use crate::stats;
use crate::types::Bounds;
use crate::Predictor;

/// Anything the planner can pull action parameters from.
pub trait ThetaSampler {
    fn next_theta(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

impl<M: Predictor + ?Sized> ThetaSampler for AdaptiveSampler<'_, M> {
    fn next_theta(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.next_sample(rng)
    }
}

impl<M: Predictor + ?Sized> ThetaSampler for RejectionSampler<'_, M> {
    fn next_theta(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.next_sample(rng)
    }
}

impl<M: Predictor + ?Sized> ThetaSampler for DiverseSampler<'_, M> {
    fn next_theta(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.next_sample(rng)
    }
}

/// Which rectangle the obstacle covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blocked {
    Large,
    Small,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub seed: u64,
    pub blocked: Blocked,
    pub geometry: TwoRectangles,
}

impl TaskInstance {
    pub fn blocked_rect(&self) -> Rect {
        match self.blocked {
            Blocked::Large => self.geometry.large,
            Blocked::Small => self.geometry.small,
        }
    }

    /// Feasible under the constraint and clear of the obstacle.
    pub fn succeeds(&self, theta: &[f64]) -> bool {
        self.geometry.feasible(theta, &[]) && !self.blocked_rect().contains(theta)
    }
}

/// Task I instance: default geometry, obstacle side from a fair coin.
pub fn oracle_task1(seed: u64) -> TaskInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocked = if rng.next_u32() & 1 == 0 {
        Blocked::Large
    } else {
        Blocked::Small
    };
    TaskInstance {
        seed,
        blocked,
        geometry: TwoRectangles::default(),
    }
}

/// Trace of one planning attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    /// `s(phi, n)` for `n = 1..=samples`.
    pub contributes: Vec<bool>,
    pub plan_found: bool,
    pub samples: usize,
    pub wall_time: f64,
}

/// Draws up to `max_samples` samples until one succeeds. Sampler errors end
/// the attempt without a plan.
pub fn plan_attempt(task: &TaskInstance, sampler: &mut dyn ThetaSampler, max_samples: usize, rng: &mut dyn RngCore) -> TaskRecord {
    let start = Instant::now();
    let mut contributes = Vec::new();
    let mut plan_found = false;
    for _ in 0..max_samples {
        let Ok(theta) = sampler.next_theta(rng) else { break };
        let ok = task.succeeds(&theta);
        contributes.push(ok);
        if ok {
            plan_found = true;
            break;
        }
    }
    TaskRecord {
        samples: contributes.len(),
        contributes,
        plan_found,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// `sum_n s(phi, n) gamma^n` with `n` starting at one.
pub fn reward(record: &TaskRecord, gamma: f64) -> f64 {
    record
        .contributes
        .iter()
        .enumerate()
        .filter(|(_, s)| **s)
        .map(|(i, _)| gamma.powi(i as i32 + 1))
        .sum()
}

/// Expected reward of trying the large rectangle first and the small one
/// second, with the obstacle on either side with probability one half.
pub fn optimal_task1_value(gamma: f64) -> f64 {
    0.5 * gamma + 0.5 * gamma * gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSampler {
    Adaptive,
    Diverse,
    DiverseLk,
}

impl CurveSampler {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "diverse" => Ok(Self::Diverse),
            "diverse-lk" => Ok(Self::DiverseLk),
            _ => Err(Error::InvalidArgument(format!("unknown curve sampler {s}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::Diverse => "diverse",
            Self::DiverseLk => "diverse-lk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub episodes: usize,
    pub train_tasks_per_episode: usize,
    pub test_tasks: usize,
    pub repetitions: usize,
    pub max_samples: usize,
    pub gamma: f64,
    pub seed: u64,
    pub sampler: SamplerConfig,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            train_tasks_per_episode: 1,
            test_tasks: 50,
            repetitions: 5,
            max_samples: 10,
            gamma: 0.6,
            seed: 0,
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_j: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Shared sampler inputs for a fixed model and context: threshold and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSetup {
    pub context: Vec<f64>,
    pub bounds: Bounds,
    pub beta: f64,
    pub seed: Vec<f64>,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_add(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(base, |acc, &p| mix(acc, p))
}

#[allow(clippy::too_many_arguments)]
fn run_task<M: Predictor + ?Sized>(
    model: &M,
    setup: &SamplerSetup,
    kind: CurveSampler,
    kernel: &KernelState,
    learn: bool,
    task: &TaskInstance,
    cfg: &CurveConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(TaskRecord, KernelState)> {
    let inner = AdaptiveSampler::new(model, setup.context.clone(), setup.bounds.clone(), setup.beta, setup.seed.clone(), cfg.sampler.clone())?;
    match kind {
        CurveSampler::Adaptive => {
            let mut s = inner;
            Ok((plan_attempt(task, &mut s, cfg.max_samples, rng), kernel.clone()))
        }
        CurveSampler::Diverse | CurveSampler::DiverseLk => {
            let mut s = DiverseSampler::new(inner, kernel.clone(), learn)?;
            let rec = plan_attempt(task, &mut s, cfg.max_samples, rng);
            Ok((rec, s.kernel().clone()))
        }
    }
}

/// Learning curve of mean reward over a fixed test set.
///
/// Episode `e` first evaluates the current kernel on `test_tasks` tasks,
/// `repetitions` times each, with the kernel frozen; then, for `diverse-lk`,
/// it runs `train_tasks_per_episode` fresh training tasks with kernel
/// learning on and carries the kernel forward.
pub fn run_kernel_learning<M: Predictor + ?Sized>(
    model: &M,
    setup: &SamplerSetup,
    kind: CurveSampler,
    initial: KernelState,
    cfg: &CurveConfig,
) -> Result<(Vec<CurveRow>, KernelState)> {
    let test: Vec<TaskInstance> = (0..cfg.test_tasks)
        .map(|i| oracle_task1(derive_seed(cfg.seed, &[1, i as u64])))
        .collect();
    let mut kernel = initial;
    let mut rows = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        let n = cfg.test_tasks * cfg.repetitions;
        let js = par::map_range(n, |k| {
            let (i, r) = (k / cfg.repetitions, k % cfg.repetitions);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, e as u64, i as u64, r as u64]));
            run_task(model, setup, kind, &kernel, false, &test[i], cfg, &mut rng).map(|(rec, _)| reward(&rec, cfg.gamma))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let (lo, hi) = stats::mean_ci95(&js);
        rows.push(CurveRow {
            episode: e + 1,
            mean_j: stats::mean(&js),
            ci_lo: lo,
            ci_hi: hi,
        });
        if kind == CurveSampler::DiverseLk {
            for t in 0..cfg.train_tasks_per_episode {
                let seed = derive_seed(cfg.seed, &[3, e as u64, t as u64]);
                let task = oracle_task1(seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                kernel = run_task(model, setup, kind, &kernel, true, &task, cfg, &mut rng)?.1;
            }
        }
    }
    Ok((rows, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<Vec<f64>>);

    impl ThetaSampler for Fixed {
        fn next_theta(&mut self, _: &mut dyn RngCore) -> Result<Vec<f64>> {
            if self.0.is_empty() {
                return Err(Error::SamplerExhausted);
            }
            Ok(self.0.remove(0))
        }
    }

    fn task(blocked: Blocked) -> TaskInstance {
        TaskInstance {
            seed: 0,
            blocked,
            geometry: TwoRectangles::default(),
        }
    }

    #[test]
    fn reward_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = task(Blocked::Small);
        let r = plan_attempt(&t, &mut Fixed(vec![vec![0.29, 0.5]]), 10, &mut rng);
        assert!(r.plan_found);
        assert!((reward(&r, 0.6) - 0.6).abs() < 1e-15);
        let r = plan_attempt(&t, &mut Fixed(vec![vec![0.0, 0.0], vec![0.53, 0.5], vec![0.29, 0.5]]), 10, &mut rng);
        assert_eq!(r.contributes, vec![false, false, true]);
        assert!((reward(&r, 0.6) - 0.216).abs() < 1e-12);
        let r = plan_attempt(&t, &mut Fixed(vec![vec![0.0, 0.0]; 10]), 10, &mut rng);
        assert_eq!(reward(&r, 0.6), 0.0);
        assert!(!r.plan_found);
        let both = TaskRecord {
            contributes: vec![true, false, true],
            plan_found: true,
            samples: 3,
            wall_time: 0.0,
        };
        assert!((reward(&both, 0.6) - 0.816).abs() < 1e-12);
    }

    #[test]
    fn exhaustion_closes_record() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = plan_attempt(&task(Blocked::Large), &mut Fixed(vec![vec![0.29, 0.5]]), 10, &mut rng);
        assert!(!r.plan_found);
        assert_eq!(r.samples, 1);
    }

    #[test]
    fn task_determinism_and_fairness() {
        assert_eq!(oracle_task1(42), oracle_task1(42));
        let large = (0..10_000).filter(|&s| oracle_task1(s).blocked == Blocked::Large).count();
        assert!((large as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn blocked_rectangle_rejects() {
        let t = task(Blocked::Large);
        assert!(t.geometry.feasible(&[0.29, 0.5], &[]));
        assert!(!t.succeeds(&[0.29, 0.5]));
        assert!(t.succeeds(&[0.53, 0.5]));
    }

    #[test]
    fn optimal_value() {
        assert!((optimal_task1_value(0.6) - 0.48).abs() < 1e-15);
    }

    #[test]
    fn zero_episodes_is_empty() {
        let o = crate::oracles::Disk::default();
        let m = crate::oracles::ExactModel { oracle: &o, sd: 1.0 };
        let setup = SamplerSetup {
            context: vec![],
            bounds: Bounds::unit(2),
            beta: 0.0,
            seed: vec![0.3, 0.6],
        };
        let cfg = CurveConfig {
            episodes: 0,
            ..Default::default()
        };
        let (rows, k) = run_kernel_learning(&m, &setup, CurveSampler::DiverseLk, KernelState::unit(2), &cfg).unwrap();
        assert!(rows.is_empty());
        assert_eq!(k, KernelState::unit(2));
    }
}

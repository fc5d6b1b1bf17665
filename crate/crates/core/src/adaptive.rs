//! Adaptive importance sampler over the high-probability super-level-set.
//!
//! [`sample_buffer`] grows a pool of certified points by alternating
//! proposals from a truncated Gaussian mixture centred on the pool with
//! uniform proposals over the box. Accepted mixture draws carry weight
//! `1 / pdf`, accepted uniform draws carry `Vol(B)`; both are inverse proposal
//! densities, so the weighted pool approximates the uniform distribution on
//! the certified set. The proposal variance doubles when at least half the
//! mixture draws are accepted and halves otherwise.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::levelset::{is_member, relaxed_beta};
use crate::optimize::MultiStart;
use crate::par;
use crate::tgmm::Tgmm;
use crate::types::Bounds;
use crate::Predictor;

pub const VARIANCE_MIN: f64 = 1e-6;
pub const VARIANCE_MAX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Proposals per source (mixture and uniform) per iteration: `n`.
    pub batch: usize,
    /// Buffer size returned by each refill: `m`.
    pub buffer: usize,
    pub max_iterations: usize,
    pub initial_variance: f64,
    /// Relaxation applied to the best `mu/sigma` when picking `beta`.
    pub rho: f64,
    pub maximizer: MultiStart,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            batch: 100,
            buffer: 50,
            max_iterations: 1000,
            initial_variance: 1.0,
            rho: 0.95,
            maximizer: MultiStart::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.buffer == 0 {
            return Err(Error::InvalidArgument("batch and buffer sizes must be >= 1".into()));
        }
        if !(self.initial_variance > 0.0) {
            return Err(Error::InvalidArgument("initial variance must be positive".into()));
        }
        Ok(())
    }
}

/// Halves `v` when fewer than half the proposals were accepted, doubles it
/// otherwise, clamped to `[VARIANCE_MIN, VARIANCE_MAX]`.
pub fn update_variance(v: &mut [f64], accepted: usize, proposed: usize) {
    let factor = if 2 * accepted < proposed { 0.5 } else { 2.0 };
    for x in v.iter_mut() {
        *x = (*x * factor).clamp(VARIANCE_MIN, VARIANCE_MAX);
    }
}

/// Draws `m` distinct indices, each with probability proportional to its
/// remaining weight, in draw order.
pub fn weighted_without_replacement<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut total: f64 = w.iter().sum();
    let mut out = Vec::with_capacity(m.min(w.len()));
    for _ in 0..m.min(w.len()) {
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, wi) in w.iter().enumerate() {
            if *wi <= 0.0 {
                continue;
            }
            pick = Some(i);
            if u < *wi {
                break;
            }
            u -= wi;
        }
        let Some(i) = pick else { break };
        total -= w[i];
        w[i] = 0.0;
        out.push(i);
        // guard against drift in the running total
        if total <= 0.0 {
            total = w.iter().sum();
        }
    }
    out
}

/// Output of one buffer refill.
#[derive(Debug, Clone)]
pub struct BufferDraw {
    pub candidates: Vec<Vec<f64>>,
    /// Normalized weights aligned with `candidates`.
    pub weights: Vec<f64>,
    /// Proposal variance at exit.
    pub variance: Vec<f64>,
    pub iterations: usize,
    /// Membership evaluations spent.
    pub evaluations: usize,
}

/// Grows a certified pool from `init` until it exceeds `cfg.buffer` points,
/// then returns `cfg.buffer` of them drawn by weight without replacement.
///
/// Points of `init` that fail membership are dropped. Fails with
/// [`Error::LevelSetUnreachable`] after `cfg.max_iterations` rounds.
pub fn sample_buffer<M, R>(
    model: &M,
    context: &[f64],
    bounds: &Bounds,
    beta: f64,
    init: &[Vec<f64>],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<BufferDraw>
where
    M: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_dim(model.dim_theta(), bounds.dim())?;
    let member = |theta: &Vec<f64>| {
        let (m, s) = model.predict(theta, context);
        is_member(m, s, beta)
    };
    let init_ok = par::map_slice(init, member);
    let mut evaluations = init.len();
    let mut pool: Vec<Vec<f64>> = init
        .iter()
        .zip(&init_ok)
        .filter(|(_, ok)| **ok)
        .map(|(t, _)| t.clone())
        .collect();
    let mut raw: Vec<f64> = vec![1.0; pool.len()];
    let mut v = vec![cfg.initial_variance; bounds.dim()];
    let vol = bounds.volume();

    for it in 1..=cfg.max_iterations {
        let mut accepted: Vec<(Vec<f64>, f64)> = Vec::new();
        if !pool.is_empty() {
            let mix = Tgmm::new(&raw, pool.clone(), v.clone(), bounds.clone())?;
            let proposals = mix.sample(cfg.batch, rng);
            let ok = par::map_slice(&proposals, member);
            evaluations += proposals.len();
            for (theta, ok) in proposals.into_iter().zip(ok) {
                if !ok {
                    continue;
                }
                let pdf = mix.pdf(&theta)?;
                if pdf > 0.0 && pdf.is_finite() {
                    accepted.push((theta, 1.0 / pdf));
                }
            }
            update_variance(&mut v, accepted.len(), cfg.batch);
        }
        let uniform: Vec<Vec<f64>> = (0..cfg.batch).map(|_| bounds.sample_uniform(rng)).collect();
        let ok = par::map_slice(&uniform, member);
        evaluations += uniform.len();
        for (theta, ok) in uniform.into_iter().zip(ok) {
            if ok {
                pool.push(theta);
                raw.push(vol);
            }
        }
        for (theta, w) in accepted {
            pool.push(theta);
            raw.push(w);
        }
        if pool.len() > cfg.buffer {
            let picks = weighted_without_replacement(&raw, cfg.buffer, rng);
            let total: f64 = picks.iter().map(|&i| raw[i]).sum();
            return Ok(BufferDraw {
                candidates: picks.iter().map(|&i| pool[i].clone()).collect(),
                weights: picks.iter().map(|&i| raw[i] / total).collect(),
                variance: v,
                iterations: it,
                evaluations,
            });
        }
    }
    Err(Error::LevelSetUnreachable {
        iterations: cfg.max_iterations,
        candidates: pool.len(),
    })
}

/// Sampler state between yields.
#[derive(Debug, Clone, Default)]
pub struct BufferState {
    pub candidates: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub variance: Vec<f64>,
    pub beta: f64,
    pub batch: usize,
    pub target: usize,
}

/// Infinite stream of certified samples: yields the head of the buffer and
/// refills whenever fewer than `m/2` candidates remain. Survivors seed the
/// next refill.
#[derive(Debug, Clone)]
pub struct AdaptiveSampler<'a, M: Predictor + ?Sized> {
    model: &'a M,
    context: Vec<f64>,
    bounds: Bounds,
    cfg: SamplerConfig,
    seed: Vec<f64>,
    state: BufferState,
    evaluations: usize,
    refills: usize,
}

impl<'a, M: Predictor + ?Sized> AdaptiveSampler<'a, M> {
    /// Sampler with an explicit threshold and seed point.
    pub fn new(model: &'a M, context: Vec<f64>, bounds: Bounds, beta: f64, seed: Vec<f64>, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        check_dim(model.dim_context(), context.len())?;
        check_dim(bounds.dim(), seed.len())?;
        let state = BufferState {
            beta,
            batch: cfg.batch,
            target: cfg.buffer,
            variance: vec![cfg.initial_variance; bounds.dim()],
            ..Default::default()
        };
        Ok(Self {
            model,
            context,
            bounds,
            cfg,
            seed,
            state,
            evaluations: 0,
            refills: 0,
        })
    }

    /// Sampler whose threshold is relaxed from the best `mu/sigma` and whose
    /// seed is the point attaining it.
    pub fn with_relaxed_beta<R: Rng + ?Sized>(model: &'a M, context: Vec<f64>, bounds: Bounds, cfg: SamplerConfig, rng: &mut R) -> Result<Self> {
        let rb = relaxed_beta(model, &context, &bounds, cfg.rho, &cfg.maximizer, rng)?;
        Self::new(model, context, bounds, rb.beta, rb.argmax, cfg)
    }

    pub fn beta(&self) -> f64 {
        self.state.beta
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    pub fn state(&self) -> &BufferState {
        &self.state
    }

    pub fn model(&self) -> &'a M {
        self.model
    }

    pub fn context(&self) -> &[f64] {
        &self.context
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Membership evaluations spent so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn refills(&self) -> usize {
        self.refills
    }

    /// Refills the buffer if it has dropped below half of `m`.
    pub fn ensure_buffer<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if 2 * self.state.candidates.len() >= self.cfg.buffer {
            return Ok(());
        }
        let init = if self.state.candidates.is_empty() {
            vec![self.seed.clone()]
        } else {
            std::mem::take(&mut self.state.candidates)
        };
        let draw = sample_buffer(self.model, &self.context, &self.bounds, self.state.beta, &init, &self.cfg, rng)?;
        self.evaluations += draw.evaluations;
        self.refills += 1;
        self.state.candidates = draw.candidates;
        self.state.weights = draw.weights;
        self.state.variance = draw.variance;
        Ok(())
    }

    /// Removes candidate `i` from the buffer.
    pub(crate) fn take(&mut self, i: usize) -> Vec<f64> {
        self.state.weights.remove(i);
        self.state.candidates.remove(i)
    }

    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        self.ensure_buffer(rng)?;
        let theta = self.take(0);
        let (m, s) = self.model.predict(&theta, &self.context);
        assert!(is_member(m, s, self.state.beta), "yielded a non-member");
        Ok(theta)
    }
}

/// Uniform rejection sampling from the certified set.
#[derive(Debug, Clone)]
pub struct RejectionSampler<'a, M: Predictor + ?Sized> {
    model: &'a M,
    context: Vec<f64>,
    bounds: Bounds,
    beta: f64,
    evaluations: usize,
}

impl<'a, M: Predictor + ?Sized> RejectionSampler<'a, M> {
    pub fn new(model: &'a M, context: Vec<f64>, bounds: Bounds, beta: f64) -> Self {
        Self {
            model,
            context,
            bounds,
            beta,
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Draws until a member is found or `deadline` passes (`Ok(None)`).
    pub fn next_before<R: Rng + ?Sized>(&mut self, rng: &mut R, deadline: Option<Instant>) -> Result<Option<Vec<f64>>> {
        loop {
            for _ in 0..64 {
                let theta = self.bounds.sample_uniform(rng);
                self.evaluations += 1;
                let (m, s) = self.model.predict(&theta, &self.context);
                if is_member(m, s, self.beta) {
                    return Ok(Some(theta));
                }
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(None);
            }
        }
    }

    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        self.next_before(rng, None).map(|t| t.expect("no deadline"))
    }
}

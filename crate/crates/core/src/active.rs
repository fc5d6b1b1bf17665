//! Active level-set learning with the straddle acquisition
//! `psi(theta) = -|mu| + c * sigma`.
//!
//! Each round fits the GP to the data so far, queries the oracle at the
//! acquisition maximizer and appends the observation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, FitOptions, GpHyper, PosteriorModel};
use crate::levelset::most_likely_feasible;
use crate::optimize::{maximize, MultiStart};
use crate::types::{Bounds, Dataset, KernelParams};
use crate::Predictor;

/// A (possibly noisy) score function that can be queried for training data.
pub trait ScoreOracle {
    fn dim_theta(&self) -> usize;
    fn dim_context(&self) -> usize;
    fn evaluate(&mut self, theta: &[f64], context: &[f64]) -> Result<f64>;
    /// Number of `evaluate` calls so far.
    fn evaluations(&self) -> usize;
}

/// How query points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    Straddle,
    /// Baseline: uniform queries over the box.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub straddle_coeff: f64,
    pub budget: usize,
    pub maximizer: MultiStart,
    /// Uniform queries issued first when starting from an empty dataset.
    pub cold_start: usize,
    pub fit_restarts: usize,
    pub fit_iters: usize,
    pub strategy: Acquisition,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            straddle_coeff: 1.96,
            budget: 50,
            maximizer: MultiStart::default(),
            cold_start: 3,
            fit_restarts: 1,
            fit_iters: 60,
            strategy: Acquisition::Straddle,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.straddle_coeff > 0.0) {
            return Err(Error::InvalidArgument("straddle_coeff must be positive".into()));
        }
        Ok(())
    }
}

pub fn straddle(mean: f64, sd: f64, coeff: f64) -> f64 {
    -mean.abs() + coeff * sd
}

pub fn straddle_score<M: Predictor + ?Sized>(model: &M, theta: &[f64], context: &[f64], coeff: f64) -> f64 {
    let (m, s) = model.predict(theta, context);
    straddle(m, s, coeff)
}

/// `argmax_theta psi(theta; alpha)` over `bounds`.
pub fn maximize_acquisition<M, R>(
    model: &M,
    context: &[f64],
    bounds: &Bounds,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Vec<f64>
where
    M: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    let coeff = cfg.straddle_coeff;
    maximize(
        |theta: &[f64]| straddle_score(model, theta, context, coeff),
        bounds,
        &cfg.maximizer,
        rng,
    )
    .point
}

/// Starting hyperparameters: one inverse lengthscale per box width, unit
/// signal variance, small noise.
pub fn default_hyper(theta_bounds: &Bounds, context_bounds: Option<&Bounds>) -> GpHyper {
    let mut l: Vec<f64> = (0..theta_bounds.dim()).map(|d| 2.0 / theta_bounds.width(d)).collect();
    if let Some(cb) = context_bounds {
        l.extend((0..cb.dim()).map(|d| 1.0 / cb.width(d)));
    }
    GpHyper {
        kernel: KernelParams {
            inv_lengthscales: l,
            signal_variance: 1.0,
        },
        noise_sd: 0.05,
    }
}

/// Data set and hyperparameters after a learning run.
#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    pub dataset: Dataset,
    pub hyper: GpHyper,
}

impl ActiveOutcome {
    pub fn model(&self) -> Result<PosteriorModel> {
        PosteriorModel::new(&self.dataset, self.hyper.clone())
    }
}

fn refit<R: Rng + ?Sized>(ds: &Dataset, hyper: &GpHyper, floor: &[f64], restarts: usize, iters: usize, rng: &mut R) -> GpHyper {
    if ds.len() < 2 {
        return hyper.clone();
    }
    let opts = FitOptions {
        restarts,
        max_iters: iters,
        seed: rng.random(),
        min_inv_lengthscales: floor.to_vec(),
    };
    fit_hyperparams(ds, hyper, &opts).unwrap_or_else(|_| hyper.clone())
}

/// Runs `cfg.budget` rounds of predict → argmax → evaluate → append for a
/// single context, refitting hyperparameters after every evaluation.
pub fn active_learn<O, R>(
    oracle: &mut O,
    context: &[f64],
    bounds: &Bounds,
    init: Dataset,
    hyper: GpHyper,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<ActiveOutcome>
where
    O: ScoreOracle + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    crate::error::check_dim(oracle.dim_theta(), bounds.dim())?;
    crate::error::check_dim(init.dim_theta(), bounds.dim())?;
    crate::error::check_dim(init.dim_context(), context.len())?;
    crate::error::check_dim(init.input_dim(), hyper.dim())?;
    let mut ds = init;
    let cold = if ds.is_empty() { cfg.cold_start } else { 0 };
    let mut hyper = hyper;
    // Lengthscales longer than the search box are not identifiable from the
    // queried data, so the fit is kept from drifting there.
    let floor: Vec<f64> = (0..bounds.dim()).map(|d| 1.0 / bounds.width(d)).collect();
    if cfg.budget > 0 && cfg.strategy == Acquisition::Straddle {
        hyper = refit(&ds, &hyper, &floor, cfg.fit_restarts, cfg.fit_iters, rng);
    }
    for t in 0..cfg.budget {
        let theta = if t < cold || cfg.strategy == Acquisition::Uniform {
            bounds.sample_uniform(rng)
        } else {
            let model = PosteriorModel::new(&ds, hyper.clone())?;
            let mut theta = maximize_acquisition(&model, context, bounds, cfg, rng);
            bounds.clamp(&mut theta);
            theta
        };
        let y = oracle.evaluate(&theta, context)?;
        ds.push(&theta, context, y)?;
        if cfg.strategy == Acquisition::Straddle {
            hyper = refit(&ds, &hyper, &floor, cfg.fit_restarts, cfg.fit_iters, rng);
        }
    }
    if cfg.budget > 0 && cfg.strategy == Acquisition::Uniform {
        hyper = refit(&ds, &hyper, &floor, cfg.fit_restarts + 2, cfg.fit_iters, rng);
    }
    ds.set_noise_sd(hyper.noise_sd);
    Ok(ActiveOutcome { dataset: ds, hyper })
}

/// First recommendation for a context: the point most likely to be feasible.
pub fn recommend<M, R>(model: &M, context: &[f64], bounds: &Bounds, maximizer: &MultiStart, rng: &mut R) -> Vec<f64>
where
    M: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    most_likely_feasible(model, context, bounds, maximizer, rng).0
}

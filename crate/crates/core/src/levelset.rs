//! High-probability super-level-set: confidence thresholds and membership.
//!
//! A point `theta` is certified for context `alpha` when
//! `mu(theta, alpha) > beta * sigma(theta, alpha)`. The union-bound threshold
//! `beta_i = sqrt(2 ln(pi_i / (2 delta)))` makes every one of `T` certified
//! draws feasible with probability at least `1 - delta`, provided
//! `Σ 1/pi_i <= 1`. When that set is empty in practice the threshold is
//! relaxed to `Φ⁻¹(rho · Φ(max mu/sigma))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::optimize::{maximize, MultiStart};
use crate::types::Bounds;
use crate::Predictor;

/// How the per-draw weights `pi_i` are allotted over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiRule {
    /// `pi_i = T` for every draw.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetConfig {
    pub delta: f64,
    pub rho: f64,
    pub horizon: usize,
    pub pi_rule: PiRule,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            rho: 0.95,
            horizon: 50,
            pi_rule: PiRule::Uniform,
        }
    }
}

impl LevelSetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("rho {} not in (0, 1]", self.rho)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        Ok(())
    }

    /// `pi_i` for the 1-based draw index `i`.
    pub fn pi(&self, _i: usize) -> f64 {
        match self.pi_rule {
            PiRule::Uniform => self.horizon as f64,
        }
    }
}

/// Union-bound threshold for draw `i` (1-based).
pub fn beta_star(cfg: &LevelSetConfig, i: usize) -> Result<f64> {
    cfg.validate()?;
    beta_star_for(cfg.delta, cfg.pi(i))
}

/// `sqrt(2 ln(pi / (2 delta)))`. A log argument below one makes the bound
/// vacuous and is rejected.
pub fn beta_star_for(delta: f64, pi: f64) -> Result<f64> {
    let arg = pi / (2.0 * delta);
    if !(arg >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "pi / (2 delta) = {arg} < 1: bound is vacuous"
        )));
    }
    Ok((2.0 * arg.ln()).sqrt())
}

/// `Φ⁻¹(rho · Φ(z_star))`.
pub fn relax_beta(z_star: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} not in (0, 1]")));
    }
    if rho == 1.0 {
        return Ok(z_star);
    }
    let p = rho * normal::cdf(z_star);
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho * Phi(z*) = {p} is not positive"
        )));
    }
    Ok(normal::quantile(p))
}

/// `mu / sigma`, with a zero standard deviation mapped to ±∞ by the sign of `mu`.
pub fn z_score(mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        mean / sd
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Outcome of [`relaxed_beta`]: the threshold together with the point that
/// maximized `mu/sigma`, which seeds the samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedBeta {
    pub beta: f64,
    pub z_star: f64,
    pub argmax: Vec<f64>,
}

/// Most-likely-feasible point: `argmax_theta mu/sigma` by multi-start search.
pub fn most_likely_feasible<M, R>(
    model: &M,
    context: &[f64],
    bounds: &Bounds,
    maximizer: &MultiStart,
    rng: &mut R,
) -> (Vec<f64>, f64)
where
    M: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    let best = maximize(
        |theta: &[f64]| {
            let (m, s) = model.predict(theta, context);
            z_score(m, s)
        },
        bounds,
        maximizer,
        rng,
    );
    (best.point, best.value)
}

/// Relaxed threshold with `z*` from the multi-start maximizer.
pub fn relaxed_beta<M, R>(
    model: &M,
    context: &[f64],
    bounds: &Bounds,
    rho: f64,
    maximizer: &MultiStart,
    rng: &mut R,
) -> Result<RelaxedBeta>
where
    M: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    let (argmax, z_star) = most_likely_feasible(model, context, bounds, maximizer, rng);
    let beta = relax_beta(z_star, rho)?;
    Ok(RelaxedBeta {
        beta,
        z_star,
        argmax,
    })
}

/// Strict membership test `mu > beta * sigma`.
pub fn is_member(mean: f64, sd: f64, beta: f64) -> bool {
    mean > beta * sd
}

pub fn membership<M: Predictor + ?Sized>(model: &M, context: &[f64], beta: f64, theta: &[f64]) -> bool {
    let (m, s) = model.predict(theta, context);
    is_member(m, s, beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_star_values() {
        let cfg = LevelSetConfig {
            delta: 0.05,
            horizon: 1,
            ..Default::default()
        };
        assert!((beta_star(&cfg, 1).unwrap() - (2.0 * 10f64.ln()).sqrt()).abs() < 1e-12);
        assert!((beta_star(&cfg, 1).unwrap() - 2.145_966_026_289_347).abs() < 1e-12);
        let cfg10 = LevelSetConfig {
            horizon: 10,
            ..cfg.clone()
        };
        assert!((beta_star(&cfg10, 3).unwrap() - 3.034_854_258_770_293).abs() < 1e-12);
        assert_eq!(beta_star_for(0.5, 1.0).unwrap(), 0.0);
        assert!(beta_star_for(0.9, 1.0).is_err());
    }

    #[test]
    fn relax_identities() {
        let z = normal::quantile(0.99);
        assert!((relax_beta(z, 0.95).unwrap() - normal::quantile(0.9405)).abs() < 1e-10);
        assert!((relax_beta(z, 0.95).unwrap() - 1.559_2).abs() < 1e-3);
        assert_eq!(relax_beta(1.234, 1.0).unwrap(), 1.234);
        assert!((relax_beta(0.0, 0.95).unwrap() - normal::quantile(0.475)).abs() < 1e-12);
        assert!((relax_beta(0.0, 0.95).unwrap() + 0.062_706_777_943_213).abs() < 1e-9);
        assert!(relax_beta(f64::NEG_INFINITY, 0.95).is_err());
        assert!(relax_beta(1.0, 0.0).is_err());
    }

    #[test]
    fn membership_is_strict() {
        assert!(is_member(1.0, 0.1, 2.0));
        assert!(!is_member(0.0, 1.0, 0.0));
    }
}

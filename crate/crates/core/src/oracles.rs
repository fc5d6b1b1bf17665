//! Analytic score functions with exact ground truth.
//!
//! Each oracle defines `g(theta, context)` with `g > 0` exactly on the
//! feasible set, so false positives of a sampler can be counted without
//! simulation.

use std::f64::consts::PI;
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::active::ScoreOracle;
use crate::error::{check_dim, Error, Result};
use crate::normal;
use crate::types::Bounds;
use crate::Predictor;

pub trait Oracle: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn theta_bounds(&self) -> Bounds;
    /// `None` when the oracle takes no context.
    fn context_bounds(&self) -> Option<Bounds>;
    /// Context used by the benchmarks.
    fn nominal_context(&self) -> Vec<f64>;
    fn score(&self, theta: &[f64], context: &[f64]) -> f64;

    fn dim_theta(&self) -> usize {
        self.theta_bounds().dim()
    }

    fn dim_context(&self) -> usize {
        self.context_bounds().map_or(0, |b| b.dim())
    }

    fn feasible(&self, theta: &[f64], context: &[f64]) -> bool {
        self.score(theta, context) > 0.0
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    /// Positive depth inside, negative Euclidean distance outside.
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        let dx = (self.x0 - p[0]).max(p[0] - self.x1);
        let dy = (self.y0 - p[1]).max(p[1] - self.y1);
        if dx < 0.0 && dy < 0.0 {
            -dx.max(dy)
        } else {
            -(dx.max(0.0).hypot(dy.max(0.0)))
        }
    }
}

/// Two disjoint rectangles of unequal size in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRectangles {
    pub large: Rect,
    pub small: Rect,
    /// Distance beyond which the score saturates.
    pub saturation: f64,
}

impl Default for TwoRectangles {
    fn default() -> Self {
        Self {
            large: Rect {
                x0: 0.25,
                x1: 0.325,
                y0: 0.1,
                y1: 0.9,
            },
            small: Rect {
                x0: 0.5,
                x1: 0.56,
                y0: 1.0 / 3.0,
                y1: 2.0 / 3.0,
            },
            saturation: 0.1,
        }
    }
}

impl Oracle for TwoRectangles {
    fn name(&self) -> &'static str {
        "rectangles"
    }

    fn theta_bounds(&self) -> Bounds {
        Bounds::unit(2)
    }

    fn context_bounds(&self) -> Option<Bounds> {
        None
    }

    fn nominal_context(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Ten times the signed distance to the union, saturated at `saturation`.
    fn score(&self, theta: &[f64], _: &[f64]) -> f64 {
        let sd = self.large.signed_distance(theta).max(self.small.signed_distance(theta));
        10.0 * sd.clamp(-self.saturation, self.saturation)
    }
}

/// Ellipsoid quadratic form `sum_d ((theta_d - c_d) / r)^2`.
fn quad_form(theta: &[f64], center: impl Fn(usize) -> f64, r: f64) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(d, t)| ((t - center(d)) / r).powi(2))
        .sum()
}

/// Pour-like constraint: 4 context and 4 action dimensions. The feasible
/// set is a ball of 1% volume whose centre moves with the context; the score
/// has the exponential shape of a poured-fraction threshold at 95%.
#[derive(Debug, Clone, Copy, Default)]
pub struct PourLike;

impl PourLike {
    /// Radius giving a 1% volume ball in four dimensions.
    pub fn radius() -> f64 {
        (0.01 * 2.0 / (PI * PI)).powf(0.25)
    }

    fn center(context: &[f64], d: usize) -> f64 {
        0.3 + 0.4 * context[d]
    }
}

impl Oracle for PourLike {
    fn name(&self) -> &'static str {
        "pour"
    }

    fn theta_bounds(&self) -> Bounds {
        Bounds::unit(4)
    }

    fn context_bounds(&self) -> Option<Bounds> {
        Some(Bounds::unit(4))
    }

    fn nominal_context(&self) -> Vec<f64> {
        vec![0.5; 4]
    }

    fn score(&self, theta: &[f64], context: &[f64]) -> f64 {
        // poured fraction x = 1 - 0.05 q, so exp(2 (10 x - 9.5)) - 1 = exp(1 - q) - 1
        let q = quad_form(theta, |d| Self::center(context, d), Self::radius());
        let x = 1.0 - 0.05 * q;
        (2.0 * (10.0 * x - 9.5)).exp() - 1.0
    }
}

/// Scoop-like constraint: 2 context and 7 action dimensions, 0.1% volume,
/// score `x - 0.5` with `x` the filled fraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoopLike;

impl ScoopLike {
    /// Radius giving a 0.1% volume ball in seven dimensions.
    pub fn radius() -> f64 {
        let unit_ball = 16.0 * PI.powi(3) / 105.0;
        (0.001 / unit_ball).powf(1.0 / 7.0)
    }
}

impl Oracle for ScoopLike {
    fn name(&self) -> &'static str {
        "scoop"
    }

    fn theta_bounds(&self) -> Bounds {
        Bounds::unit(7)
    }

    fn context_bounds(&self) -> Option<Bounds> {
        Some(Bounds::unit(2))
    }

    fn nominal_context(&self) -> Vec<f64> {
        vec![0.5; 2]
    }

    fn score(&self, theta: &[f64], context: &[f64]) -> f64 {
        let q = quad_form(theta, |d| 0.4 + 0.2 * context[d % 2], Self::radius());
        0.5f64.powf(q) - 0.5
    }
}

/// Push-like constraint: 6 action dimensions drive a planar object to
/// `x(theta)`; the context is the goal; score `2 - |x - goal|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PushLike;

impl PushLike {
    pub fn end_position(theta: &[f64]) -> [f64; 2] {
        let c = |i: usize| theta[i] - 0.5;
        [
            3.0 * (6.0 * c(0) + 3.0 * c(2) + 1.5 * c(4)),
            3.0 * (6.0 * c(1) + 3.0 * c(3) + 1.5 * c(5)),
        ]
    }
}

impl Oracle for PushLike {
    fn name(&self) -> &'static str {
        "push"
    }

    fn theta_bounds(&self) -> Bounds {
        Bounds::unit(6)
    }

    fn context_bounds(&self) -> Option<Bounds> {
        Some(Bounds::new(vec![-4.0, -4.0], vec![4.0, 4.0]).expect("valid box"))
    }

    fn nominal_context(&self) -> Vec<f64> {
        vec![1.0, -0.5]
    }

    fn score(&self, theta: &[f64], context: &[f64]) -> f64 {
        let x = Self::end_position(theta);
        2.0 - (x[0] - context[0]).hypot(x[1] - context[1])
    }
}

/// Disk in the unit square covering `area` of it.
#[derive(Debug, Clone, Copy)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn with_area(area: f64) -> Self {
        Self {
            center: [0.3, 0.6],
            radius: (area / PI).sqrt(),
        }
    }

    pub fn distance(&self, theta: &[f64]) -> f64 {
        (theta[0] - self.center[0]).hypot(theta[1] - self.center[1])
    }
}

impl Default for Disk {
    fn default() -> Self {
        Self::with_area(0.01)
    }
}

impl Oracle for Disk {
    fn name(&self) -> &'static str {
        "disk"
    }

    fn theta_bounds(&self) -> Bounds {
        Bounds::unit(2)
    }

    fn context_bounds(&self) -> Option<Bounds> {
        None
    }

    fn nominal_context(&self) -> Vec<f64> {
        Vec::new()
    }

    fn score(&self, theta: &[f64], _: &[f64]) -> f64 {
        10.0 * (self.radius - self.distance(theta))
    }
}

pub const ORACLE_NAMES: [&str; 5] = ["rectangles", "pour", "push", "scoop", "disk"];

pub fn by_name(name: &str) -> Result<Box<dyn Oracle>> {
    Ok(match name {
        "rectangles" => Box::new(TwoRectangles::default()),
        "pour" => Box::new(PourLike),
        "push" => Box::new(PushLike),
        "scoop" => Box::new(ScoopLike),
        "disk" => Box::new(Disk::default()),
        other => return Err(Error::UnknownOracle(other.to_string())),
    })
}

/// Gaussian observation noise on top of an analytic oracle, with its own
/// seeded stream so evaluations are reproducible.
#[derive(Debug)]
pub struct NoisyOracle<'a> {
    oracle: &'a dyn Oracle,
    noise_sd: f64,
    rng: ChaCha8Rng,
    count: usize,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(oracle: &'a dyn Oracle, noise_sd: f64, seed: u64) -> Self {
        Self {
            oracle,
            noise_sd,
            rng: ChaCha8Rng::seed_from_u64(seed),
            count: 0,
        }
    }
}

impl ScoreOracle for NoisyOracle<'_> {
    fn dim_theta(&self) -> usize {
        self.oracle.dim_theta()
    }

    fn dim_context(&self) -> usize {
        self.oracle.dim_context()
    }

    fn evaluate(&mut self, theta: &[f64], context: &[f64]) -> Result<f64> {
        check_dim(self.dim_theta(), theta.len())?;
        check_dim(self.dim_context(), context.len())?;
        self.count += 1;
        let u: f64 = self.rng.random_range(f64::EPSILON..1.0);
        Ok(self.oracle.score(theta, context) + self.noise_sd * normal::quantile(u))
    }

    fn evaluations(&self) -> usize {
        self.count
    }
}

/// Treats the true score as a posterior mean with constant spread.
#[derive(Debug, Clone, Copy)]
pub struct ExactModel<'a> {
    pub oracle: &'a dyn Oracle,
    pub sd: f64,
}

impl Predictor for ExactModel<'_> {
    fn dim_theta(&self) -> usize {
        self.oracle.dim_theta()
    }

    fn dim_context(&self) -> usize {
        self.oracle.dim_context()
    }

    fn predict(&self, theta: &[f64], context: &[f64]) -> (f64, f64) {
        (self.oracle.score(theta, context), self.sd)
    }
}

/// Monte-Carlo estimate of the feasible fraction of the action box.
pub fn feasible_fraction(oracle: &dyn Oracle, context: &[f64], n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = oracle.theta_bounds();
    let hits = (0..n).filter(|_| oracle.feasible(&b.sample_uniform(&mut rng), context)).count();
    hits as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_areas() {
        let r = TwoRectangles::default();
        assert!((r.large.area() - 0.06).abs() < 1e-12);
        assert!((r.small.area() - 0.02).abs() < 1e-12);
        assert!(r.feasible(&[0.29, 0.5], &[]));
        assert!(r.feasible(&[0.53, 0.5], &[]));
        assert!(!r.feasible(&[0.4, 0.5], &[]));
        assert!((r.score(&[0.3, 0.05], &[]) + 0.5).abs() < 1e-12);
        assert!((r.score(&[0.9, 0.5], &[]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn signed_distance_cases() {
        let r = Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 2.0,
        };
        assert!((r.signed_distance(&[0.5, 1.0]) - 0.5).abs() < 1e-12);
        assert!((r.signed_distance(&[2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((r.signed_distance(&[4.0, 6.0]) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn volumes_match_design() {
        let pour = feasible_fraction(&PourLike, &PourLike.nominal_context(), 200_000, 1);
        assert!((pour - 0.01).abs() < 0.0015, "{pour}");
        let disk = feasible_fraction(&Disk::default(), &[], 200_000, 2);
        assert!((disk - 0.01).abs() < 0.0015, "{disk}");
        let scoop = feasible_fraction(&ScoopLike, &ScoopLike.nominal_context(), 1_000_000, 3);
        assert!((scoop - 0.001).abs() < 0.0002, "{scoop}");
    }

    #[test]
    fn pour_threshold_shape() {
        let c = PourLike.nominal_context();
        let centre = vec![0.5; 4];
        assert!((PourLike.score(&centre, &c) - (1f64.exp() - 1.0)).abs() < 1e-12);
        let mut edge = centre.clone();
        edge[0] += PourLike::radius();
        assert!(PourLike.score(&edge, &c).abs() < 1e-12);
    }

    #[test]
    fn noisy_oracle_counts_and_repeats() {
        let r = TwoRectangles::default();
        let mut a = NoisyOracle::new(&r, 0.01, 7);
        let mut b = NoisyOracle::new(&r, 0.01, 7);
        for _ in 0..5 {
            assert_eq!(a.evaluate(&[0.2, 0.2], &[]).unwrap(), b.evaluate(&[0.2, 0.2], &[]).unwrap());
        }
        assert_eq!(a.evaluations(), 5);
        assert!(a.evaluate(&[0.2], &[]).is_err());
    }

    #[test]
    fn unknown_oracle() {
        assert!(matches!(by_name("kitchen"), Err(Error::UnknownOracle(_))));
        for n in ORACLE_NAMES {
            assert_eq!(by_name(n).unwrap().name(), n);
        }
    }
}

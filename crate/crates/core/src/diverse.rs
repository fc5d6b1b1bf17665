//! Diversity-aware selection from the certified buffer and task-level kernel
//! learning from planner rejections.
//!
//! Diversity is measured with a unit-variance squared-exponential kernel
//! `xi` on features normalized to the unit box. `D(S) = log det(Xi/zeta^2 + I)`
//! and the conditional variance `eta_S(theta)` is the posterior variance of a
//! GP with kernel `xi` and noise `zeta` after observing `S`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveSampler;
use crate::error::{Error, Result};
use crate::gp::scaled_sq_dist;
use crate::levelset::is_member;
use crate::linalg::LowerFactor;
use crate::par;
use crate::Predictor;
use nalgebra::DMatrix;

pub const DEFAULT_ZETA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.3;
/// Floor for inverse lengthscales shrunk by [`kernel_update`].
pub const L_MIN: f64 = 1e-3;

/// Persisted diversity kernel: inverse lengthscales, noise and learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelState {
    pub l: Vec<f64>,
    #[serde(alias = "ζ")]
    pub zeta: f64,
    #[serde(alias = "ε")]
    pub epsilon: f64,
}

impl KernelState {
    /// All-ones inverse lengthscales with the default noise and rate.
    pub fn unit(dim: usize) -> Self {
        Self {
            l: vec![1.0; dim],
            zeta: DEFAULT_ZETA,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("inverse lengthscales must be non-negative".into()));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::InvalidArgument("zeta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument("epsilon must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn xi(a: &[f64], b: &[f64], l: &[f64]) -> f64 {
    (-scaled_sq_dist(a, b, l)).exp()
}

fn gram(s: &[Vec<f64>], l: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(s.len(), s.len(), |i, j| xi(&s[i], &s[j], l))
}

/// `log det(Xi^S / zeta^2 + I)`; zero for the empty set.
pub fn diversity_score(s: &[Vec<f64>], l: &[f64], zeta: f64) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let z2 = zeta * zeta;
    let m = gram(s, l) / z2 + DMatrix::identity(s.len(), s.len());
    LowerFactor::new(&m).expect("Gram matrix plus identity is positive definite").log_det()
}

/// Cached factorization of `Xi^S + zeta^2 I` for repeated conditional
/// variance queries against a fixed `S`.
#[derive(Debug, Clone)]
pub struct Conditioner {
    points: Vec<Vec<f64>>,
    l: Vec<f64>,
    factor: Option<LowerFactor>,
}

impl Conditioner {
    pub fn new(s: &[Vec<f64>], l: &[f64], zeta: f64) -> Self {
        let factor = if s.is_empty() {
            None
        } else {
            let m = gram(s, l) + DMatrix::identity(s.len(), s.len()) * (zeta * zeta);
            Some(LowerFactor::new(&m).expect("Gram matrix plus noise is positive definite"))
        };
        Self {
            points: s.to_vec(),
            l: l.to_vec(),
            factor,
        }
    }

    fn quad(&self, k: &mut [f64]) -> f64 {
        match &self.factor {
            None => 0.0,
            Some(f) => {
                f.forward_in_place(k);
                k.iter().map(|v| v * v).sum()
            }
        }
    }

    /// `eta_S(theta)`, clamped at zero.
    pub fn eta(&self, theta: &[f64]) -> f64 {
        let mut k: Vec<f64> = self.points.iter().map(|p| xi(theta, p, &self.l)).collect();
        (1.0 - self.quad(&mut k)).max(0.0)
    }

    /// Per-dimension importances `tau_S^theta(d)`: the conditional variance
    /// with every other inverse lengthscale zeroed, reusing the full-kernel
    /// factorization.
    pub fn tau(&self, theta: &[f64]) -> Vec<f64> {
        (0..theta.len())
            .map(|d| {
                let ld = self.l[d];
                let mut k: Vec<f64> = self
                    .points
                    .iter()
                    .map(|p| (-(ld * (theta[d] - p[d])).powi(2)).exp())
                    .collect();
                (1.0 - self.quad(&mut k)).clamp(0.0, 1.0)
            })
            .collect()
    }
}

pub fn conditional_variance(theta: &[f64], s: &[Vec<f64>], l: &[f64], zeta: f64) -> f64 {
    Conditioner::new(s, l, zeta).eta(theta)
}

pub fn feature_importance(theta: &[f64], s: &[Vec<f64>], l: &[f64], zeta: f64) -> Vec<f64> {
    Conditioner::new(s, l, zeta).tau(theta)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Shrinks the inverse lengthscale of the most important feature of the
/// rejected `theta` by `(1 - epsilon)`. Returns the updated vector and the
/// chosen dimension.
pub fn kernel_update(l: &[f64], theta_failed: &[f64], s: &[Vec<f64>], epsilon: f64, zeta: f64) -> (Vec<f64>, usize) {
    let tau = feature_importance(theta_failed, s, l, zeta);
    let d = argmax(&tau);
    let mut out = l.to_vec();
    if out[d] > L_MIN {
        out[d] = ((1.0 - epsilon) * out[d]).max(L_MIN);
    }
    (out, d)
}

/// Greedy selection of `k` indices from `pool` maximizing `eta` at each step.
pub fn greedy_select(pool: &[Vec<f64>], k: usize, l: &[f64], zeta: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k.min(pool.len()) {
        let s: Vec<Vec<f64>> = chosen.iter().map(|&i| pool[i].clone()).collect();
        let c = Conditioner::new(&s, l, zeta);
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in pool.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let e = c.eta(p);
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((i, e));
            }
        }
        chosen.push(best.expect("pool not exhausted").0);
    }
    chosen
}

/// Diverse sampler over a certified buffer, with optional kernel learning.
///
/// The first yield is the seed (`argmax mu/sigma`); every later yield is the
/// buffered candidate with the largest conditional variance given the
/// samples yielded so far. When learning is enabled, each call after the
/// second treats the previous yield as rejected and shrinks one inverse
/// lengthscale before selecting.
#[derive(Debug, Clone)]
pub struct DiverseSampler<'a, M: Predictor + ?Sized> {
    inner: AdaptiveSampler<'a, M>,
    kernel: KernelState,
    learn: bool,
    history: Vec<Vec<f64>>,
    updates: Vec<usize>,
}

impl<'a, M: Predictor + ?Sized> DiverseSampler<'a, M> {
    pub fn new(inner: AdaptiveSampler<'a, M>, kernel: KernelState, learn: bool) -> Result<Self> {
        kernel.validate()?;
        crate::error::check_dim(inner.bounds().dim(), kernel.l.len())?;
        Ok(Self {
            inner,
            kernel,
            learn,
            history: Vec::new(),
            updates: Vec::new(),
        })
    }

    pub fn kernel(&self) -> &KernelState {
        &self.kernel
    }

    /// Samples yielded so far.
    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    /// Dimensions shrunk by kernel learning, in order.
    pub fn updates(&self) -> &[usize] {
        &self.updates
    }

    pub fn inner(&self) -> &AdaptiveSampler<'a, M> {
        &self.inner
    }

    fn features(&self, theta: &[f64]) -> Vec<f64> {
        self.inner.bounds().normalize(theta)
    }

    /// Applies one rejection update for the last yield, if it had predecessors.
    fn learn_from_last(&mut self) {
        let n = self.history.len();
        if n < 2 {
            return;
        }
        let s: Vec<Vec<f64>> = self.history[..n - 1].iter().map(|t| self.features(t)).collect();
        let theta = self.features(&self.history[n - 1]);
        let (l, d) = kernel_update(&self.kernel.l, &theta, &s, self.kernel.epsilon, self.kernel.zeta);
        self.kernel.l = l;
        self.updates.push(d);
    }

    /// Next sample together with the samples yielded before it.
    pub fn next_with_history<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.learn {
            self.learn_from_last();
        }
        let seed = self.inner.seed().to_vec();
        let (m, s) = self.inner.model().predict(&seed, self.inner.context());
        let theta = if self.history.is_empty() && is_member(m, s, self.inner.beta()) {
            seed
        } else {
            self.inner.ensure_buffer(rng)?;
            let feats: Vec<Vec<f64>> = self.history.iter().map(|t| self.features(t)).collect();
            let cond = Conditioner::new(&feats, &self.kernel.l, self.kernel.zeta);
            let cands = &self.inner.state().candidates;
            let scores = par::map_slice(cands, |c| {
                if self.history.contains(c) {
                    f64::NEG_INFINITY
                } else {
                    cond.eta(&self.features(c))
                }
            });
            let i = argmax(&scores);
            self.inner.take(i)
        };
        let before = self.history.clone();
        self.history.push(theta.clone());
        Ok((theta, before))
    }

    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        self.next_with_history(rng).map(|(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity_score(&[], &[1.0], 0.1), 0.0);
        let d = diversity_score(&[vec![0.3]], &[1.0], 0.1);
        assert!((d - 101f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn conditional_variance_examples() {
        assert_eq!(conditional_variance(&[0.2, 0.4], &[], &[1.0, 1.0], 0.1), 1.0);
        let e = conditional_variance(&[0.2], &[vec![0.2]], &[1.0], 0.1);
        assert!((e - (1.0 - 1.0 / 1.01)).abs() < 1e-12);
    }

    #[test]
    fn importance_examples() {
        let tau = feature_importance(&[0.2, 0.7], &[vec![0.2, 0.7]], &[1.0, 1.0], 0.1);
        for t in tau {
            assert!((t - (1.0 - 1.0 / 1.01)).abs() < 1e-12);
        }
        // far in dimension 0 only
        let tau = feature_importance(&[0.9, 0.5], &[vec![0.0, 0.5]], &[3.0, 3.0], 0.1);
        assert_eq!(argmax(&tau), 0);
        // zeroed dimension sees an all-ones kernel vector
        let s = vec![vec![0.1, 0.1], vec![0.8, 0.3]];
        let tau = feature_importance(&[0.5, 0.5], &s, &[0.0, 1.0], 0.1);
        let m = DMatrix::from_fn(2, 2, |i, j| xi(&s[i], &s[j], &[0.0, 1.0])) + DMatrix::identity(2, 2) * 0.01;
        let ones = nalgebra::DVector::from_element(2, 1.0);
        let q = (ones.transpose() * m.try_inverse().unwrap() * &ones)[(0, 0)];
        assert!((tau[0] - (1.0 - q).max(0.0)).abs() < 1e-10);
    }

    #[test]
    fn update_examples() {
        let (l, d) = kernel_update(&[1.0, 1.0], &[0.9, 0.5], &[vec![0.0, 0.5]], 0.3, 0.1);
        assert_eq!(d, 0);
        assert!((l[0] - 0.7).abs() < 1e-15 && l[1] == 1.0);
        let (same, _) = kernel_update(&[1.0, 1.0], &[0.9, 0.5], &[vec![0.0, 0.5]], 0.0, 0.1);
        assert_eq!(same, vec![1.0, 1.0]);
        let mut l = vec![1.0, 1.0];
        for k in 1..=40 {
            l = kernel_update(&l, &[0.9, 0.5], &[vec![0.0, 0.5]], 0.3, 0.1).0;
            assert!(l[0] >= L_MIN);
            if k <= 5 {
                assert!((l[0] - 0.7f64.powi(k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_state_json() {
        let k: KernelState = serde_json::from_str(r#"{"l":[1.0,0.5],"ζ":0.1,"ε":0.3}"#).unwrap();
        assert_eq!(k.l, vec![1.0, 0.5]);
        assert!(serde_json::from_str::<KernelState>(r#"{"l":[1.0],"zeta":0.1,"epsilon":0.3,"x":1}"#).is_err());
    }

    #[test]
    fn greedy_picks_spread_points() {
        let pool: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64 / 10.0]).collect();
        let pick = greedy_select(&pool, 2, &[3.0], 0.1);
        assert_eq!(pick[0], 0);
        assert_eq!(pick[1], 10);
    }
}

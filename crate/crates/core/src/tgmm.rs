//! Mixture of axis-aligned Gaussians, each truncated to the bounding box,
//! with one diagonal variance vector shared by all components.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::normal::TruncatedNormal;
use crate::types::Bounds;

#[derive(Debug, Clone)]
pub struct Tgmm {
    /// Normalized mixture weights.
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    means: Vec<Vec<f64>>,
    variance: Vec<f64>,
    bounds: Bounds,
    /// `components[j][d]`
    components: Vec<Vec<TruncatedNormal>>,
}

impl Tgmm {
    /// `weights` need not be normalized but must be non-negative with a
    /// positive sum. Every mean must lie inside `bounds`.
    pub fn new(weights: &[f64], means: Vec<Vec<f64>>, variance: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        check_dim(means.len(), weights.len())?;
        check_dim(bounds.dim(), variance.len())?;
        if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("variances must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be non-negative with positive sum".into()));
        }
        for m in &means {
            check_dim(bounds.dim(), m.len())?;
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let sds: Vec<f64> = variance.iter().map(|v| v.sqrt()).collect();
        let components = means
            .iter()
            .map(|m| {
                (0..bounds.dim())
                    .map(|d| TruncatedNormal::new(m[d], sds[d], bounds.lower()[d], bounds.upper()[d]))
                    .collect()
            })
            .collect();
        Ok(Self {
            weights,
            cumulative,
            means,
            variance,
            bounds,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn pick_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let j = self.cumulative.partition_point(|c| *c <= u);
        j.min(self.weights.len() - 1)
    }

    /// `n` i.i.d. draws: pick a component by weight, then inverse-CDF sample
    /// each coordinate of its truncated normal.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let j = self.pick_component(rng);
                let mut x: Vec<f64> = self.components[j]
                    .iter()
                    .map(|c| c.sample_from_uniform(rng.random()))
                    .collect();
                self.bounds.clamp(&mut x);
                x
            })
            .collect()
    }

    /// Log density at `theta`, which must lie inside the bounds.
    pub fn ln_pdf(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.bounds.dim(), theta.len())?;
        if !self.bounds.contains(theta) {
            return Err(Error::OutsideBounds);
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(comp, w)| w.ln() + comp.iter().zip(theta).map(|(c, x)| c.ln_pdf(*x)).sum::<f64>())
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(max);
        }
        Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    /// Σ_j w_j Π_d truncnorm_pdf(theta_d; mean_jd, v_d, bounds_d).
    pub fn pdf(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.ln_pdf(theta)?.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huge_variance_is_uniform_density() {
        let t = Tgmm::new(&[1.0], vec![vec![0.5, 0.5]], vec![1e8, 1e8], Bounds::unit(2)).unwrap();
        assert!((t.pdf(&[0.1, 0.8]).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn duplicate_components_match_single() {
        let b = Bounds::unit(2);
        let one = Tgmm::new(&[1.0], vec![vec![0.3, 0.6]], vec![0.01, 0.04], b.clone()).unwrap();
        let two = Tgmm::new(&[0.5, 0.5], vec![vec![0.3, 0.6], vec![0.3, 0.6]], vec![0.01, 0.04], b).unwrap();
        for x in [[0.3, 0.6], [0.0, 0.0], [0.9, 0.1]] {
            let (a, c) = (one.pdf(&x).unwrap(), two.pdf(&x).unwrap());
            assert!((a - c).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn corner_component_stays_inside() {
        let b = Bounds::unit(3);
        let t = Tgmm::new(&[1.0], vec![vec![1.0, 0.0, 1.0]], vec![1e-4; 3], b.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in t.sample(2000, &mut rng) {
            assert!(b.contains(&x));
        }
    }

    #[test]
    fn rejects_points_outside() {
        let t = Tgmm::new(&[1.0], vec![vec![0.5]], vec![0.1], Bounds::unit(1)).unwrap();
        assert!(matches!(t.pdf(&[1.5]), Err(Error::OutsideBounds)));
    }
}

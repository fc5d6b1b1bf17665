//! Standard normal helpers and the one-dimensional truncated normal.

use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function `1 - cdf(x)`, accurate in the right tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile. Returns ±inf at the endpoints.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erfc_inv(2.0 * p)
    }
}

/// Inverse of [`sf`].
fn isf(q: f64) -> f64 {
    -quantile(q)
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn pdf(x: f64) -> f64 {
    ln_pdf(x).exp()
}

/// Normal distribution with mean `mean` and standard deviation `sd`
/// truncated to `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal {
    mean: f64,
    sd: f64,
    a: f64,
    b: f64,
    /// Sample via the survival function when the whole interval is right of
    /// the mean, where the CDF loses precision.
    upper_tail: bool,
    lo_p: f64,
    hi_p: f64,
    ln_mass: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(sd > 0.0 && lo < hi);
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        let upper_tail = a > 0.0;
        let (lo_p, hi_p) = if upper_tail {
            (sf(a), sf(b))
        } else {
            (cdf(a), cdf(b))
        };
        let mass = (hi_p - lo_p).abs();
        // Both ends deep in the same tail: fall back to an exponential-tail
        // approximation of the mass so the density stays finite.
        let ln_mass = if mass > 0.0 {
            mass.ln()
        } else {
            let t = if upper_tail { a } else { -b };
            ln_pdf(t) - t.ln()
        };
        Self {
            mean,
            sd,
            a,
            b,
            upper_tail,
            lo_p,
            hi_p,
            ln_mass,
        }
    }

    /// Inverse-CDF draw for a uniform `u` in `[0, 1)`.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        let z = if self.upper_tail {
            let q = self.lo_p - u * (self.lo_p - self.hi_p);
            isf(q)
        } else {
            let p = self.lo_p + u * (self.hi_p - self.lo_p);
            quantile(p)
        };
        let z = if z.is_finite() { z.clamp(self.a, self.b) } else if self.upper_tail { self.a } else { self.b };
        self.mean + self.sd * z
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        if z < self.a || z > self.b {
            return f64::NEG_INFINITY;
        }
        ln_pdf(z) - self.sd.ln() - self.ln_mass
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_quantile_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-10);
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((quantile(0.99) - 2.326_347_874_040_841).abs() < 1e-9);
        for &p in &[1e-10, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12 * p.max(1e-3) * 1e3);
        }
        assert!((sf(10.0) - 7.619_853_024_160_527e-24).abs() < 1e-33);
    }

    #[test]
    fn truncated_pdf_integrates_to_one() {
        for &(m, s, lo, hi) in &[
            (0.5, 0.1, 0.0, 1.0),
            (0.0, 0.05, 0.0, 1.0),
            (0.9, 2.0, 0.0, 1.0),
            (-3.0, 0.5, 0.0, 1.0),
        ] {
            let t = TruncatedNormal::new(m, s, lo, hi);
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let integral: f64 = (0..n).map(|i| t.pdf(lo + (i as f64 + 0.5) * h) * h).sum();
            assert!((integral - 1.0).abs() < 1e-3, "{m} {s}: {integral}");
        }
    }

    #[test]
    fn far_tail_sampling_stays_inside() {
        let t = TruncatedNormal::new(-5.0, 0.01, 0.0, 1.0);
        for i in 0..100 {
            let x = t.sample_from_uniform(i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&x));
        }
        assert!(t.pdf(0.0).is_finite());
    }
}

//! Derivative-free multi-start maximizer over a box: uniform seeds, each
//! refined by cyclic per-coordinate golden-section line searches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::par;
use crate::types::Bounds;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
/// Evaluations spent on one coordinate line search.
const LINE_EVALS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    /// Number of uniform seeds.
    pub restarts: usize,
    /// Golden-section evaluations spent refining each seed.
    pub local_steps: usize,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self {
            restarts: 64,
            local_steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Maximizes `f` over `bounds`. Seeds are drawn from `rng` up front, so the
/// result is deterministic for a given rng state whether or not the
/// refinement runs in parallel. Ties resolve to the lowest seed index.
pub fn maximize<F, R>(f: F, bounds: &Bounds, cfg: &MultiStart, rng: &mut R) -> Maximum
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    R: Rng + ?Sized,
{
    let seeds: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|_| bounds.sample_uniform(rng))
        .collect();
    maximize_from(f, bounds, &seeds, cfg.local_steps)
}

/// Refines every seed and returns the best result. `seeds` must be non-empty.
pub fn maximize_from<F>(f: F, bounds: &Bounds, seeds: &[Vec<f64>], local_steps: usize) -> Maximum
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    assert!(!seeds.is_empty(), "maximizer needs at least one seed");
    let results = par::map_slice(seeds, |s| refine(&f, bounds, s, local_steps));
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value > results[best].value {
            best = i;
        }
    }
    results.into_iter().nth(best).expect("non-empty")
}

fn score<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn refine<F: Fn(&[f64]) -> f64>(f: &F, bounds: &Bounds, start: &[f64], steps: usize) -> Maximum {
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let mut fx = score(f, &x);
    let dims = x.len();
    let mut half_width: Vec<f64> = (0..dims).map(|d| 0.25 * bounds.width(d)).collect();
    let mut remaining = steps;
    let mut d = 0;
    let mut probe = x.clone();
    while remaining >= 2 {
        let evals = LINE_EVALS.min(remaining);
        remaining -= evals;
        let mut a = (x[d] - half_width[d]).max(bounds.lower()[d]);
        let mut b = (x[d] + half_width[d]).min(bounds.upper()[d]);
        probe.copy_from_slice(&x);
        let eval = |t: f64, probe: &mut Vec<f64>| {
            probe[d] = t;
            score(f, probe)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut e = a + INV_PHI * (b - a);
        let mut fc = eval(c, &mut probe);
        let mut fe = eval(e, &mut probe);
        let (mut best_t, mut best_f) = if fc >= fe { (c, fc) } else { (e, fe) };
        for _ in 2..evals {
            if fc >= fe {
                b = e;
                e = c;
                fe = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c, &mut probe);
                if fc > best_f {
                    best_t = c;
                    best_f = fc;
                }
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + INV_PHI * (b - a);
                fe = eval(e, &mut probe);
                if fe > best_f {
                    best_t = e;
                    best_f = fe;
                }
            }
        }
        if best_f > fx {
            x[d] = best_t;
            fx = best_f;
        }
        half_width[d] *= 0.5;
        d = (d + 1) % dims;
    }
    Maximum { point: x, value: fx }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn finds_quadratic_peak() {
        let b = Bounds::unit(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = maximize(
            |x: &[f64]| -((x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2) + (x[2] - 0.5).powi(2)),
            &b,
            &MultiStart::default(),
            &mut rng,
        );
        assert!(m.value > -1e-3, "{m:?}");
        assert!(b.contains(&m.point));
    }

    #[test]
    fn constant_objective_keeps_first_seed() {
        let b = Bounds::unit(2);
        let seeds = vec![vec![0.1, 0.2], vec![0.5, 0.5]];
        let m = maximize_from(|_: &[f64]| 1.0, &b, &seeds, 50);
        assert_eq!(m.point, seeds[0]);
    }

    #[test]
    fn single_seed_no_steps_returns_seed() {
        let b = Bounds::unit(2);
        let seeds = vec![vec![0.4, 0.9]];
        let m = maximize_from(|x: &[f64]| x[0], &b, &seeds, 0);
        assert_eq!(m.point, seeds[0]);
    }

    #[test]
    fn never_worse_than_seed() {
        let b = Bounds::unit(2);
        let seeds: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, 0.5]).collect();
        let f = |x: &[f64]| (10.0 * x[0]).sin() + x[1];
        let m = maximize_from(f, &b, &seeds, 50);
        for s in &seeds {
            assert!(m.value >= f(s));
        }
    }
}

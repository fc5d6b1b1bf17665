//! Small statistics helpers used by the harness and the acceptance checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided 95% confidence interval of the mean (normal approximation).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, m);
    }
    let h = 1.959_963_984_540_054 * std_dev(xs) / (xs.len() as f64).sqrt();
    (m - h, m + h)
}

/// Pearson chi-square goodness of fit against equal expected counts.
/// Returns `(statistic, p_value)`.
pub fn chi_square_uniform(counts: &[usize]) -> (f64, f64) {
    let k = counts.len();
    let n: usize = counts.iter().sum();
    let expected = n as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("k >= 2");
    (stat, 1.0 - dist.cdf(stat))
}

/// One-sample Kolmogorov–Smirnov test against U(0, 1).
/// Returns `(statistic, asymptotic p_value)`.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Ordinary least-squares slope of `ys` against `xs` with its 95% CI.
pub fn ols_slope_ci95(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    assert!(n >= 3 && n == ys.len(), "need at least three paired points");
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (sse / (n - 2) as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
        .expect("dof > 0")
        .inverse_cdf(0.975);
    (slope, slope - t * se, slope + t * se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
        assert_eq!(std_dev(&[4.0]), 0.0);
    }

    #[test]
    fn chi_square_reference() {
        // statistic 0 -> p = 1
        let (s, p) = chi_square_uniform(&[10, 10, 10, 10]);
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        // 1 dof, stat = 3.841 -> p = 0.05
        let (s, p) = chi_square_uniform(&[60, 40]);
        assert!((s - 4.0).abs() < 1e-12);
        assert!((p - 0.045_500_263_896_358_4).abs() < 1e-9);
    }

    #[test]
    fn ks_on_grid_is_uniform() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_uniform(&xs);
        assert!(d < 1e-3 + 1e-12);
        assert!(p > 0.99);
        let skewed: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skewed).1 < 1e-6);
    }

    #[test]
    fn slope_of_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0 + if (*x as i32) % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let (s, lo, hi) = ols_slope_ci95(&xs, &ys);
        assert!((s - 2.0).abs() < 0.05);
        assert!(lo < 2.0 && hi > 2.0);
    }
}

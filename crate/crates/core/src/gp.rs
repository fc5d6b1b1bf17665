//! Gaussian-process regression with an anisotropic squared-exponential
//! kernel: posterior prediction, log marginal likelihood and its gradient,
//! and multi-restart hyperparameter fitting in log space.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::LowerFactor;
use crate::types::{Dataset, KernelParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Lower and upper clamp applied to every hyperparameter while fitting.
pub const HYPER_MIN: f64 = 1e-3;
pub const HYPER_MAX: f64 = 1e3;

/// `signal_variance * exp(-Σ l_d² (x_d - x2_d)²)`.
pub fn kernel_eval(x: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    check_dim(params.dim(), x.len())?;
    check_dim(params.dim(), x2.len())?;
    Ok(params.signal_variance * (-scaled_sq_dist(x, x2, &params.inv_lengthscales)).exp())
}

#[inline]
pub(crate) fn scaled_sq_dist(x: &[f64], x2: &[f64], l: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .zip(l)
        .map(|((a, b), l)| {
            let r = l * (a - b);
            r * r
        })
        .sum()
}

/// Kernel parameters plus observation noise: everything the model file stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelFile", into = "ModelFile")]
pub struct GpHyper {
    pub kernel: KernelParams,
    pub noise_sd: f64,
}

/// On-disk layout `{l: [...], signal_variance, noise_sd}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    l: Vec<f64>,
    signal_variance: f64,
    noise_sd: f64,
}

impl From<ModelFile> for GpHyper {
    fn from(m: ModelFile) -> Self {
        Self {
            kernel: KernelParams {
                inv_lengthscales: m.l,
                signal_variance: m.signal_variance,
            },
            noise_sd: m.noise_sd,
        }
    }
}

impl From<GpHyper> for ModelFile {
    fn from(h: GpHyper) -> Self {
        Self {
            l: h.kernel.inv_lengthscales,
            signal_variance: h.kernel.signal_variance,
            noise_sd: h.noise_sd,
        }
    }
}

impl GpHyper {
    pub fn new(kernel: KernelParams, noise_sd: f64) -> Result<Self> {
        let kernel = KernelParams::new(kernel.inv_lengthscales, kernel.signal_variance)?;
        if !(noise_sd.is_finite() && noise_sd > 0.0) {
            return Err(Error::InvalidArgument("noise_sd must be positive".into()));
        }
        Ok(Self { kernel, noise_sd })
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `[ln l_0, .., ln l_{D-1}, ln signal_variance, ln noise_sd]`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .kernel
            .inv_lengthscales
            .iter()
            .map(|l| l.max(f64::MIN_POSITIVE).ln())
            .collect();
        v.push(self.kernel.signal_variance.ln());
        v.push(self.noise_sd.ln());
        v
    }

    pub fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Self {
            kernel: KernelParams {
                inv_lengthscales: v[..d].iter().map(|x| x.exp()).collect(),
                signal_variance: v[d].exp(),
            },
            noise_sd: v[d + 1].exp(),
        }
    }

    fn clamped(&self) -> Self {
        let lo = HYPER_MIN.ln();
        let hi = HYPER_MAX.ln();
        Self::from_log(&self.to_log().iter().map(|x| x.clamp(lo, hi)).collect::<Vec<_>>())
    }
}

/// Noise-free kernel matrix over `inputs`.
fn kernel_matrix(inputs: &[Vec<f64>], kernel: &KernelParams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.signal_variance;
        for j in 0..i {
            let v = kernel.signal_variance
                * (-scaled_sq_dist(&inputs[i], &inputs[j], &kernel.inv_lengthscales)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn noisy_factor(inputs: &[Vec<f64>], hyper: &GpHyper) -> Result<(DMatrix<f64>, LowerFactor)> {
    let kf = kernel_matrix(inputs, &hyper.kernel);
    let mut k = kf.clone();
    let noise = hyper.noise_sd * hyper.noise_sd;
    for i in 0..inputs.len() {
        k[(i, i)] += noise;
    }
    let factor = LowerFactor::new(&k)?;
    Ok((kf, factor))
}

/// Fitted posterior GP. Immutable once built; safe to share across threads.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    dim_theta: usize,
    dim_context: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    hyper: GpHyper,
    factor: Option<LowerFactor>,
    /// `(K + ζ²I)⁻¹ y`
    weights: Vec<f64>,
}

impl PosteriorModel {
    pub fn new(dataset: &Dataset, hyper: GpHyper) -> Result<Self> {
        check_dim(dataset.input_dim(), hyper.dim())?;
        let (factor, weights) = if dataset.is_empty() {
            (None, Vec::new())
        } else {
            let (_, factor) = noisy_factor(dataset.inputs(), &hyper)?;
            let weights = factor.solve(dataset.outputs());
            (Some(factor), weights)
        };
        Ok(Self {
            dim_theta: dataset.dim_theta(),
            dim_context: dataset.dim_context(),
            inputs: dataset.inputs().to_vec(),
            outputs: dataset.outputs().to_vec(),
            hyper,
            factor,
            weights,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn dim_theta(&self) -> usize {
        self.dim_theta
    }

    pub fn dim_context(&self) -> usize {
        self.dim_context
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Jitter added during factorization, if any.
    pub fn jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, LowerFactor::jitter)
    }

    /// Kernel vector against the training inputs for the point `[theta, context]`.
    fn cross_kernel(&self, theta: &[f64], context: &[f64]) -> Vec<f64> {
        let l = &self.hyper.kernel.inv_lengthscales;
        let (lt, lc) = l.split_at(self.dim_theta);
        let sv = self.hyper.kernel.signal_variance;
        self.inputs
            .iter()
            .map(|row| {
                let (rt, rc) = row.split_at(self.dim_theta);
                sv * (-(scaled_sq_dist(theta, rt, lt) + scaled_sq_dist(context, rc, lc))).exp()
            })
            .collect()
    }

    /// Posterior mean and standard deviation at `x = [theta, context]`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim_theta + self.dim_context, x.len())?;
        let (theta, context) = x.split_at(self.dim_theta);
        Ok(self.predict_split(theta, context))
    }

    /// Same as [`predict`](Self::predict) with theta and context passed separately.
    /// Dimensions are only checked in debug builds.
    pub fn predict_split(&self, theta: &[f64], context: &[f64]) -> (f64, f64) {
        debug_assert_eq!(theta.len(), self.dim_theta);
        debug_assert_eq!(context.len(), self.dim_context);
        let sv = self.hyper.kernel.signal_variance;
        let Some(factor) = &self.factor else {
            return (0.0, sv.sqrt());
        };
        let mut k = self.cross_kernel(theta, context);
        let mean: f64 = k.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        factor.forward_in_place(&mut k);
        let var = sv - k.iter().map(|v| v * v).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    /// Joint posterior covariance over a list of `[theta, context]` points.
    pub fn covariance(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = self.dim_theta + self.dim_context;
        for p in points {
            check_dim(d, p.len())?;
        }
        let prior = kernel_matrix(points, &self.hyper.kernel);
        let Some(factor) = &self.factor else {
            return Ok(prior);
        };
        let vs: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                let (t, c) = p.split_at(self.dim_theta);
                let mut k = self.cross_kernel(t, c);
                factor.forward_in_place(&mut k);
                k
            })
            .collect();
        let m = points.len();
        let mut cov = prior;
        for i in 0..m {
            for j in 0..=i {
                let r: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                cov[(i, j)] -= r;
                if i != j {
                    cov[(j, i)] -= r;
                }
            }
        }
        Ok(cov)
    }

    /// Log marginal likelihood of the training data under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        match &self.factor {
            None => 0.0,
            Some(f) => lml_from_factor(f, &self.outputs, &self.weights),
        }
    }
}

fn lml_from_factor(factor: &LowerFactor, y: &[f64], alpha: &[f64]) -> f64 {
    let fit: f64 = y.iter().zip(alpha).map(|(a, b)| a * b).sum();
    -0.5 * fit - 0.5 * factor.log_det() - 0.5 * y.len() as f64 * LN_2PI
}

/// `log N(y | 0, K + ζ²I)` with ζ taken from the dataset.
pub fn log_marginal_likelihood(dataset: &Dataset, params: &KernelParams) -> Result<f64> {
    let hyper = GpHyper::new(params.clone(), dataset.noise_sd())?;
    lml(dataset.inputs(), dataset.outputs(), &hyper)
}

/// Log marginal likelihood for raw inputs and hyperparameters.
pub fn lml(inputs: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(inputs.len(), y.len())?;
    let (_, factor) = noisy_factor(inputs, hyper)?;
    let alpha = factor.solve(y);
    Ok(lml_from_factor(&factor, y, &alpha))
}

/// Log marginal likelihood and its gradient with respect to
/// [`GpHyper::to_log`] coordinates.
pub fn lml_with_gradient(inputs: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(inputs.len(), y.len())?;
    let n = inputs.len();
    let dims = hyper.dim();
    let (kf, factor) = noisy_factor(inputs, hyper)?;
    let alpha = factor.solve(y);
    let value = lml_from_factor(&factor, y, &alpha);
    let kinv = factor.inverse();

    let l2: Vec<f64> = hyper.kernel.inv_lengthscales.iter().map(|l| l * l).collect();
    let mut grad = vec![0.0; dims + 2];
    // trace terms: ½ Σ_ij W_ij ∂K_ij with W = ααᵀ − K⁻¹
    let mut trace_w = 0.0;
    for i in 0..n {
        let wii = alpha[i] * alpha[i] - kinv[(i, i)];
        trace_w += wii;
        grad[dims] += 0.5 * wii * kf[(i, i)];
        for j in 0..i {
            let w = 2.0 * (alpha[i] * alpha[j] - kinv[(i, j)]);
            let kij = kf[(i, j)];
            grad[dims] += 0.5 * w * kij;
            let (xi, xj) = (&inputs[i], &inputs[j]);
            for d in 0..dims {
                let diff = xi[d] - xj[d];
                grad[d] += 0.5 * w * kij * (-2.0 * l2[d] * diff * diff);
            }
        }
    }
    grad[dims + 1] = 0.5 * trace_w * 2.0 * hyper.noise_sd * hyper.noise_sd;
    Ok((value, grad))
}

/// Controls for [`fit_hyperparams`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Random restarts in addition to the run started from `init`.
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Per-dimension lower bounds on the inverse lengthscales; missing
    /// entries fall back to `HYPER_MIN`.
    pub min_inv_lengthscales: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 2,
            max_iters: 100,
            seed: 0,
            min_inv_lengthscales: Vec::new(),
        }
    }
}

/// Maximizes the log marginal likelihood over `(l, signal_variance, noise_sd)`
/// in log space, box-constrained to `[HYPER_MIN, HYPER_MAX]`.
///
/// The first run starts from `init` (clamped), so the result never scores
/// below it. Further runs start from random perturbations of `init`.
pub fn fit_hyperparams(dataset: &Dataset, init: &GpHyper, opts: &FitOptions) -> Result<GpHyper> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "hyperparameter fitting needs at least 2 observations".into(),
        ));
    }
    check_dim(dataset.input_dim(), init.dim())?;
    let inputs = dataset.inputs();
    let y = dataset.outputs();
    let lower: Vec<f64> = (0..init.dim() + 2)
        .map(|d| {
            let floor = match opts.min_inv_lengthscales.get(d) {
                Some(v) if d < init.dim() => *v,
                _ => HYPER_MIN,
            };
            floor.clamp(HYPER_MIN, HYPER_MAX).ln()
        })
        .collect();
    let mut start = init.clamped().to_log();
    project(&mut start, &lower);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..=opts.restarts {
        let x0 = if r == 0 {
            start.clone()
        } else {
            start.iter().map(|v| v + rng.random_range(-1.5..1.5)).collect()
        };
        if let Some((f, x)) = projected_ascent(inputs, y, x0, &lower, opts.max_iters) {
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| GpHyper::from_log(&x))
        .ok_or(Error::NotPositiveDefinite {
            jitter: crate::linalg::JITTER_MAX,
        })
}

fn project(x: &mut [f64], lower: &[f64]) {
    let hi = HYPER_MAX.ln();
    x.iter_mut().zip(lower).for_each(|(v, lo)| *v = v.clamp(*lo, hi));
}

/// Projected gradient ascent with Barzilai–Borwein steps and Armijo
/// backtracking. Returns `None` if the starting point cannot be factorized.
fn projected_ascent(inputs: &[Vec<f64>], y: &[f64], mut x: Vec<f64>, lower: &[f64], max_iters: usize) -> Option<(f64, Vec<f64>)> {
    project(&mut x, lower);
    let (mut f, mut g) = lml_with_gradient(inputs, y, &GpHyper::from_log(&x)).ok()?;
    let mut step = 0.1 / (1.0 + g.iter().map(|v| v * v).sum::<f64>().sqrt());
    for _ in 0..max_iters {
        let mut accepted = None;
        let mut t = step;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lower);
            let gain: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if gain <= 0.0 {
                break;
            }
            if let Ok(fnew) = lml(inputs, y, &GpHyper::from_log(&xn)) {
                if fnew >= f + 1e-4 * gain {
                    accepted = Some((xn, fnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let Ok((_, gn)) = lml_with_gradient(inputs, y, &GpHyper::from_log(&xn)) else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(gn.iter().zip(&g)).map(|(si, (a, b))| si * (a - b)).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        step = if sy.abs() > 1e-300 { (ss / sy.abs()).clamp(1e-6, 1e3) } else { t * 2.0 };
        let improvement = fnew - f;
        x = xn;
        f = fnew;
        g = gn;
        if improvement < 1e-9 * (1.0 + f.abs()) {
            break;
        }
    }
    Some((f, x))
}

//! Core domain types shared by the model and the samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Axis-aligned hyper-rectangle the action parameters live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBounds("dimension must be at least 1".into()));
        }
        check_dim(lower.len(), upper.len())?;
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBounds(format!(
                    "dimension {d}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        assert!(dim >= 1, "unit box needs at least one dimension");
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Projects `x` onto the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Maps `x` from this box onto the unit cube.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(d, v)| (v - self.lower[d]) / self.width(d))
            .collect()
    }

    /// Maps `u` from the unit cube into this box.
    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(d, v)| self.lower[d] + v * self.width(d))
            .collect()
    }
}

/// Anisotropic squared-exponential kernel parameters.
///
/// `inv_lengthscales[d] == 0` removes dimension `d` from the distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    #[serde(rename = "l")]
    pub inv_lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl KernelParams {
    pub fn new(inv_lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        if inv_lengthscales.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument(
                "inverse lengthscales must be finite and non-negative".into(),
            ));
        }
        if !(signal_variance.is_finite() && signal_variance > 0.0) {
            return Err(Error::InvalidArgument(
                "signal variance must be positive".into(),
            ));
        }
        Ok(Self {
            inv_lengthscales,
            signal_variance,
        })
    }

    /// Unit signal variance with every inverse lengthscale set to one.
    pub fn unit(dim: usize) -> Self {
        Self {
            inv_lengthscales: vec![1.0; dim],
            signal_variance: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.inv_lengthscales.len()
    }
}

/// Observed `((theta, context), y)` triples with a shared noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim_theta: usize,
    dim_context: usize,
    /// Row-major `[theta, context]` concatenations.
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    noise_sd: f64,
}

impl Dataset {
    pub fn new(dim_theta: usize, dim_context: usize, noise_sd: f64) -> Result<Self> {
        if dim_theta == 0 {
            return Err(Error::InvalidArgument("theta dimension must be >= 1".into()));
        }
        if !(noise_sd.is_finite() && noise_sd > 0.0) {
            return Err(Error::InvalidArgument("noise_sd must be positive".into()));
        }
        Ok(Self {
            dim_theta,
            dim_context,
            inputs: Vec::new(),
            outputs: Vec::new(),
            noise_sd,
        })
    }

    pub fn push(&mut self, theta: &[f64], context: &[f64], y: f64) -> Result<()> {
        check_dim(self.dim_theta, theta.len())?;
        check_dim(self.dim_context, context.len())?;
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite observation {y}")));
        }
        let mut row = Vec::with_capacity(self.input_dim());
        row.extend_from_slice(theta);
        row.extend_from_slice(context);
        self.inputs.push(row);
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim_theta(&self) -> usize {
        self.dim_theta
    }

    pub fn dim_context(&self) -> usize {
        self.dim_context
    }

    pub fn input_dim(&self) -> usize {
        self.dim_theta + self.dim_context
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn set_noise_sd(&mut self, noise_sd: f64) {
        self.noise_sd = noise_sd;
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        &self.inputs[i][..self.dim_theta]
    }

    pub fn context(&self, i: usize) -> &[f64] {
        &self.inputs[i][self.dim_theta..]
    }

    /// Checks every theta lies inside `bounds`.
    pub fn check_within(&self, bounds: &Bounds) -> Result<()> {
        check_dim(self.dim_theta, bounds.dim())?;
        if (0..self.len()).all(|i| bounds.contains(self.theta(i))) {
            Ok(())
        } else {
            Err(Error::OutsideBounds)
        }
    }
}

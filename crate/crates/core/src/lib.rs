//! Learning and sampling feasibility constraints of parameterized actions.
//!
//! A Gaussian process models a score function `g(theta, context)` whose
//! positive super-level-set is the set of feasible action parameters. The
//! crate provides:
//!
//! * [`gp`]: the GP engine (posterior, marginal likelihood, fitting);
//! * [`active`]: straddle-driven active learning of the level set;
//! * [`levelset`], [`tgmm`], [`adaptive`]: high-probability super-level-set
//!   membership and the adaptive importance sampler over it;
//! * [`diverse`]: diversity-aware selection and kernel learning from planner
//!   rejections;
//! * [`oracles`], [`planner`], [`bench`]: analytic ground-truth score
//!   functions, a backtracking-planner harness and the benchmark tables;
//! * [`verify`]: the acceptance checks, shared by the test suite and the CLI.

// Negated comparisons deliberately reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod adaptive;
pub mod bench;
pub mod config;
pub mod diverse;
pub mod error;
pub mod gp;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod normal;
pub mod optimize;
pub mod oracles;
pub mod par;
pub mod planner;
pub mod stats;
pub mod tgmm;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use gp::{GpHyper, PosteriorModel};
pub use types::{Bounds, Dataset, KernelParams};

/// Anything that serves a posterior mean and standard deviation for
/// `(theta, context)`. Implemented by [`PosteriorModel`] and by analytic
/// stand-ins used in tests.
pub trait Predictor: Sync {
    fn dim_theta(&self) -> usize;
    fn dim_context(&self) -> usize;
    fn predict(&self, theta: &[f64], context: &[f64]) -> (f64, f64);
}

impl Predictor for PosteriorModel {
    fn dim_theta(&self) -> usize {
        PosteriorModel::dim_theta(self)
    }

    fn dim_context(&self) -> usize {
        PosteriorModel::dim_context(self)
    }

    fn predict(&self, theta: &[f64], context: &[f64]) -> (f64, f64) {
        self.predict_split(theta, context)
    }
}

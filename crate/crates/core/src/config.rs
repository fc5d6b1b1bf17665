//! Resolved experiment configuration shared by every CLI command.

use serde::{Deserialize, Serialize};

use crate::active::AcquisitionConfig;
use crate::adaptive::SamplerConfig;
use crate::bench::{BenchConfig, SamplerKind};
use crate::diverse::KernelState;
use crate::error::{Error, Result};
use crate::levelset::LevelSetConfig;
use crate::optimize::MultiStart;
use crate::oracles::by_name;
use crate::planner::{CurveConfig, CurveSampler};

/// Every tunable of a run. Unknown keys are rejected when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub oracle: String,
    pub oracles: Vec<String>,
    pub samplers: Vec<String>,
    /// Samplers compared by `bench --mode curve`.
    pub curve_samplers: Vec<String>,
    pub context: Option<Vec<f64>>,
    pub budget: usize,
    pub init_points: usize,
    pub noise_sd: f64,
    pub straddle_coeff: f64,
    pub delta: f64,
    pub rho: f64,
    pub horizon: usize,
    pub batch: usize,
    pub buffer: usize,
    pub max_iterations: usize,
    pub zeta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub seed: u64,
    pub workers: usize,
    pub count: usize,
    pub mode: Option<String>,
    pub trials: usize,
    pub time_cap_s: f64,
    pub episodes: usize,
    pub test_tasks: usize,
    pub repetitions: usize,
    pub max_samples: usize,
    pub restarts: usize,
    pub local_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            oracle: "rectangles".into(),
            oracles: vec!["rectangles".into(), "pour".into(), "push".into()],
            samplers: vec!["rejection".into(), "adaptive".into(), "diverse".into()],
            curve_samplers: vec!["adaptive".into(), "diverse-lk".into()],
            context: None,
            budget: 50,
            init_points: 0,
            noise_sd: 0.01,
            straddle_coeff: 1.96,
            delta: 0.05,
            rho: 0.95,
            horizon: 50,
            batch: 100,
            buffer: 50,
            max_iterations: 1000,
            zeta: 0.1,
            epsilon: 0.3,
            gamma: 0.6,
            seed: 0,
            workers: 0,
            count: 50,
            mode: None,
            trials: 10,
            time_cap_s: 10.0,
            episodes: 20,
            test_tasks: 50,
            repetitions: 5,
            max_samples: 10,
            restarts: 64,
            local_steps: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        for name in std::iter::once(&self.oracle).chain(&self.oracles) {
            by_name(name)?;
        }
        for s in &self.samplers {
            SamplerKind::parse(s)?;
        }
        for s in &self.curve_samplers {
            CurveSampler::parse(s)?;
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if !(self.zeta > 0.0 && self.noise_sd > 0.0 && self.straddle_coeff > 0.0) {
            return bad("zeta, noise_sd and straddle_coeff must be positive");
        }
        if !(self.time_cap_s > 0.0) {
            return bad("time_cap_s must be positive");
        }
        if self.batch == 0 || self.buffer == 0 || self.restarts == 0 || self.horizon == 0 {
            return bad("batch, buffer, restarts and horizon must be >= 1");
        }
        Ok(())
    }

    pub fn maximizer(&self) -> MultiStart {
        MultiStart {
            restarts: self.restarts,
            local_steps: self.local_steps,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            batch: self.batch,
            buffer: self.buffer,
            max_iterations: self.max_iterations,
            rho: self.rho,
            maximizer: self.maximizer(),
            ..Default::default()
        }
    }

    pub fn acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            straddle_coeff: self.straddle_coeff,
            budget: self.budget,
            maximizer: self.maximizer(),
            ..Default::default()
        }
    }

    pub fn level_set(&self) -> LevelSetConfig {
        LevelSetConfig {
            delta: self.delta,
            rho: self.rho,
            horizon: self.horizon,
            ..Default::default()
        }
    }

    pub fn kernel(&self, dim: usize) -> KernelState {
        KernelState {
            l: vec![1.0; dim],
            zeta: self.zeta,
            epsilon: self.epsilon,
        }
    }

    pub fn bench(&self) -> Result<BenchConfig> {
        Ok(BenchConfig {
            oracles: self.oracles.clone(),
            samplers: self.samplers.iter().map(|s| SamplerKind::parse(s)).collect::<Result<_>>()?,
            trials: self.trials,
            time_cap_s: self.time_cap_s,
            zeta: self.zeta,
            seed: self.seed,
            sampler: self.sampler(),
            ..Default::default()
        })
    }

    pub fn curve(&self) -> CurveConfig {
        CurveConfig {
            episodes: self.episodes,
            test_tasks: self.test_tasks,
            repetitions: self.repetitions,
            max_samples: self.max_samples,
            gamma: self.gamma,
            seed: self.seed,
            sampler: self.sampler(),
            ..Default::default()
        }
    }

    pub fn curve_kinds(&self) -> Result<Vec<CurveSampler>> {
        self.curve_samplers.iter().map(|s| CurveSampler::parse(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_constants() {
        let c = ExperimentConfig::default();
        assert_eq!(c.straddle_coeff, 1.96);
        assert_eq!(c.rho, 0.95);
        assert_eq!(c.zeta, 0.1);
        assert_eq!(c.epsilon, 0.3);
        assert_eq!(c.gamma, 0.6);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"budget": 3, "bugdet": 4}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"budget": 3}"#).unwrap();
        assert_eq!(c.budget, 3);
        assert_eq!(c.delta, 0.05);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"rho": 1.5}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"oracle": "kitchen"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"samplers": ["gibbs"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"samplers": ["diverse-lk"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"curve_samplers": ["diverse-lk"]}"#).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
}

//! Versioned JSON experiment configuration.

use serde::{Deserialize, Serialize};

use ppredict_core::kernels::{MatrixKernel, ScalarKernel};
use ppredict_core::simulate::{HawkesKernel, HawkesParams, NeymanScottParams};
use ppredict_core::{Error as CoreError, Result as CoreResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub solver: SolverChoice,
    pub replicates: usize,
    pub horizon: f64,
    pub seed: u64,
    /// optional ridge on the lag-zero block of the discretised system
    #[serde(default)]
    pub ridge: bool,
    /// evaluation bin width for predictor scoring
    #[serde(default = "default_eval_delta")]
    pub eval_delta: f64,
    /// rows for the innovations recursion (defaults to the grid length)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation_steps: Option<usize>,
}

fn default_eval_delta() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Poisson { rates: Vec<f64> },
    Hawkes { baseline: Vec<f64>, kernel: KernelConfig },
    NeymanScott { latent_rates: Vec<f64>, shot: KernelConfig },
}

/// Row-major matrix of scalar kernel specs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub d: usize,
    pub entries: Vec<ScalarKernel>,
}

impl KernelConfig {
    pub fn build(&self) -> CoreResult<MatrixKernel> {
        MatrixKernel::new(self.d, self.entries.clone())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Direct,
    DirectToeplitz,
    Whittle,
    BellmanKrein,
    Innovations,
}

impl std::str::FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" | "dense" => Ok(Self::Direct),
            "direct_toeplitz" | "levinson" | "toeplitz" => Ok(Self::DirectToeplitz),
            "whittle" => Ok(Self::Whittle),
            "bellman_krein" | "bellman-krein" | "bk" => Ok(Self::BellmanKrein),
            "innovations" => Ok(Self::Innovations),
            other => Err(format!(
                "unknown solver '{other}' (expected direct | direct_toeplitz | whittle | bellman_krein | innovations)"
            )),
        }
    }
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Direct => "direct",
            Self::DirectToeplitz => "direct_toeplitz",
            Self::Whittle => "whittle",
            Self::BellmanKrein => "bellman_krein",
            Self::Innovations => "innovations",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub delta: f64,
    pub p: usize,
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> CoreResult<Self> {
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CoreError::InvalidParameter(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replicates == 0 {
            return Err(CoreError::InvalidParameter("replicates must be >= 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(CoreError::InvalidParameter("horizon must be > 0".into()));
        }
        if !(self.grid.delta > 0.0) || self.grid.p == 0 {
            return Err(CoreError::InvalidParameter("grid needs delta > 0 and p >= 1".into()));
        }
        if !(self.eval_delta > 0.0) {
            return Err(CoreError::InvalidParameter("eval_delta must be > 0".into()));
        }
        // model parameters must satisfy the target module's preconditions
        match &self.model {
            ModelConfig::Poisson { rates } => {
                for (i, &r) in rates.iter().enumerate() {
                    if !(r >= 0.0) {
                        return Err(CoreError::NegativeRate { index: i, value: r });
                    }
                }
            }
            ModelConfig::Hawkes { baseline, kernel } => {
                let mk = kernel.build()?;
                let params = HawkesParams::new(baseline.clone(), HawkesKernel::Spec(mk))?;
                params.stationary_rates()?; // rejects unstable kernels
            }
            ModelConfig::NeymanScott { latent_rates, shot } => {
                NeymanScottParams::new(latent_rates.clone(), shot.build()?)?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            ModelConfig::Poisson { rates } => rates.len(),
            ModelConfig::Hawkes { baseline, .. } => baseline.len(),
            ModelConfig::NeymanScott { latent_rates, .. } => latent_rates.len(),
        }
    }

    /// Canonical serialized form (used for hashing and reproducibility).
    pub fn to_canonical_json(&self) -> CoreResult<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: 1,
            model: ModelConfig::Hawkes {
                baseline: vec![0.5],
                kernel: KernelConfig {
                    d: 1,
                    entries: vec![ScalarKernel::Exponential {
                        amplitude: 0.8,
                        decay: 1.0,
                        support: 8.0,
                    }],
                },
            },
            grid: GridConfig { delta: 0.02, p: 400 },
            solver: SolverChoice::Whittle,
            replicates: 4,
            horizon: 100.0,
            seed: 7,
            ridge: false,
            eval_delta: 0.5,
            innovation_steps: None,
        }
    }

    #[test]
    fn config_roundtrips_losslessly() {
        let cfg = sample();
        let blob = cfg.to_canonical_json().unwrap();
        let back: ExperimentConfig = serde_json::from_slice(&blob).unwrap();
        assert_eq!(back, cfg);
        // and the canonical form is stable
        assert_eq!(back.to_canonical_json().unwrap(), blob);
    }

    #[test]
    fn unstable_kernel_is_rejected_at_validation() {
        let mut cfg = sample();
        if let ModelConfig::Hawkes { kernel, .. } = &mut cfg.model {
            kernel.entries[0] =
                ScalarKernel::Exponential { amplitude: 1.1, decay: 1.0, support: 60.0 };
        }
        assert!(matches!(
            cfg.validate(),
            Err(ppredict_core::Error::UnstableKernel { .. })
        ));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut cfg = sample();
        cfg.schema_version = 2;
        assert!(cfg.validate().is_err());
    }
}

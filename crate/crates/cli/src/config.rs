use std::fmt;
use std::path::{Path, PathBuf};

use ctpg::airframe::AeroParams;
use ctpg::ode::Method;
use ctpg::trainer::{EnsembleGrid, TrainConfig};
use ctpg::MlpSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Step of the fixed-step Euler backend selected by the `euler` case.
pub const EULER_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Scaled network, adaptive solver.
    #[default]
    Base,
    /// Scaling layer removed.
    Unscaled,
    /// Fixed-step Euler in place of the adaptive solver.
    Euler,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Base => "base",
            Case::Unscaled => "unscaled",
            Case::Euler => "euler",
        })
    }
}

/// Everything a run needs. Every section is optional in the file and
/// defaults to the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub case: Case,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub grid: EnsembleGrid,
    pub policy: MlpSpec,
    pub aero: AeroParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            case: Case::Base,
            output_dir: PathBuf::from("out"),
            train: TrainConfig::default(),
            grid: EnsembleGrid::default(),
            policy: MlpSpec::default(),
            aero: AeroParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Policy and training settings after applying the case preset.
    pub fn resolved(&self) -> (MlpSpec, TrainConfig) {
        let mut spec = self.policy.clone();
        let mut train = self.train.clone();
        match self.case {
            Case::Base => {}
            Case::Unscaled => spec.scaling = None,
            Case::Euler => train.solver.method = Method::Euler { dt: EULER_DT },
        }
        (spec, train)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let (spec, train) = self.resolved();
        spec.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if spec.n_inputs() != 3 || spec.n_outputs() != 3 {
            return Err(CliError::Config(
                "policy must map 3 inputs to 3 gains".into(),
            ));
        }
        train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid.is_empty() {
            return Err(CliError::Config("ensemble grid is empty".into()));
        }
        Ok(())
    }
}

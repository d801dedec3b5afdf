//! Policy snapshot: flat parameters plus the network metadata needed to
//! rebuild the gain map, as JSON.

use std::path::Path;

use ctpg::policy::{GainBounds, InputNormalisers};
use ctpg::MlpSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

const FORMAT: &str = "ctpg-policy-snapshot/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub format: String,
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    /// One entry per affine layer.
    pub activations: Vec<String>,
    /// `null` when the scaling layer is disabled.
    pub scaling: Option<GainBounds>,
    pub normalisers: InputNormalisers,
    pub params: Vec<f64>,
}

fn activations(layers: usize) -> Vec<String> {
    (0..layers)
        .map(|i| if i + 1 == layers { "linear" } else { "tanh" }.to_string())
        .collect()
}

impl Snapshot {
    pub fn new(spec: &MlpSpec, seed: u64, params: Vec<f64>) -> Self {
        Self {
            format: FORMAT.to_string(),
            seed,
            layer_sizes: spec.layer_sizes.clone(),
            activations: activations(spec.layer_sizes.len() - 1),
            scaling: spec.scaling.clone(),
            normalisers: spec.normalisers,
            params,
        }
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            layer_sizes: self.layer_sizes.clone(),
            scaling: self.scaling.clone(),
            normalisers: self.normalisers,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| CliError::Snapshot(e.to_string()))?;
        if snap.format != FORMAT {
            return Err(CliError::Snapshot(format!(
                "unsupported format {:?}",
                snap.format
            )));
        }
        let spec = snap.spec();
        spec.validate()
            .map_err(|e| CliError::Snapshot(e.to_string()))?;
        if snap.activations != activations(spec.layer_sizes.len() - 1) {
            return Err(CliError::Snapshot(
                "activations must be tanh on hidden layers and linear on the last".into(),
            ));
        }
        if snap.params.len() != spec.param_count() {
            return Err(CliError::Snapshot(format!(
                "{} parameters for layer sizes {:?}, expected {}",
                snap.params.len(),
                spec.layer_sizes,
                spec.param_count()
            )));
        }
        Ok(snap)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Snapshot(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

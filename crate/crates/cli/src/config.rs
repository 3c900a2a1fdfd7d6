//! Optional JSON defaults merged under command-line flags.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use tubetopo::flowgen::TrainConfig;
use tubetopo::synth::VesselParams;
use tubetopo::taskgen::DatasetConfig;

use crate::commands::CliError;
use crate::VesselArgs;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub synth: Option<VesselParams>,
    pub dataset: Option<DatasetConfig>,
    pub train: Option<TrainConfig>,
    pub refine: RefineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub steps: usize,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { steps: 10, seed: 0 }
    }
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

impl VesselArgs {
    pub fn apply(&self, mut p: VesselParams) -> VesselParams {
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.width, self.width);
        set(&mut p.height, self.height);
        set(&mut p.n_trees, self.trees);
        set(&mut p.n_loops, self.loops);
        set(&mut p.branch_depth, self.depth);
        let setf = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        setf(&mut p.branch_prob, self.branch_prob);
        setf(&mut p.radius_root, self.radius);
        setf(&mut p.radius_min, self.radius_min);
        setf(&mut p.background_noise_sigma, self.sigma);
        p
    }
}

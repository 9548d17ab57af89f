use std::path::{Path, PathBuf};

use bimorph_core::data::{GeneratorSettings, PreprocessSettings};
use bimorph_core::design::{AnnealSettings, DEFAULT_CENTER_DISTANCE};
use bimorph_core::motion::TransitionSettings;
use bimorph_core::DesignVector;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run needs, in one TOML document. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for parallel candidate evaluation; 0 uses every core.
    pub jobs: usize,
    /// Parent directory of the timestamped run directories.
    pub out_dir: PathBuf,
    pub generator: GeneratorSettings,
    pub preprocess: PreprocessSettings,
    pub anneal: AnnealSettings,
    pub design: DesignConfig,
    pub transition: TransitionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 0,
            out_dir: PathBuf::from("runs"),
            generator: GeneratorSettings::default(),
            preprocess: PreprocessSettings::default(),
            anneal: AnnealSettings::default(),
            design: DesignConfig::default(),
            transition: TransitionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Start the optimizer from this design file instead of the
    /// anthropomorphic layout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<PathBuf>,
    pub base_offset: [f64; 3],
    pub center_distance: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            initial: None,
            base_offset: DesignVector::anthropomorphic().base_offset.into(),
            center_distance: DEFAULT_CENTER_DISTANCE,
        }
    }
}

/// The workspace transition: the task frame starts at the positioner flange
/// and moves by `displacement` while rotating by the rotation vector `rotation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionConfig {
    pub displacement: [f64; 3],
    pub rotation: [f64; 3],
    pub simulation: TransitionSettings,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            displacement: [0.15, 0.1, -0.1],
            rotation: [0.0; 3],
            simulation: TransitionSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: bimorph_core::Error| CliError::Config(e.to_string());
        self.anneal.validate().map_err(cfg)?;
        self.transition.simulation.validate().map_err(cfg)?;
        if !(self.preprocess.window > 0.0 && self.preprocess.grid_cell > 0.0) {
            return Err(CliError::Config("preprocess window and grid_cell must be positive".into()));
        }
        if !(self.generator.rate > 0.0 && self.generator.duration > 0.0) {
            return Err(CliError::Config("generator rate and duration must be positive".into()));
        }
        if !(self.design.center_distance >= 0.0) {
            return Err(CliError::Config("center_distance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

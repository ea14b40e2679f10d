use std::fs;
use std::path::{Path, PathBuf};

use modesift::dmd::DEFAULT_RANK_TOL;
use modesift::eval::{KernelRidge, Protocol};
use modesift::features::LbptopConfig;
use modesift::sampling::SamplingConfig;
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// Amplitudes of the sparse (DMDSP) record at `percent`.
    Sparse,
    /// Amplitudes of a TIM resampling to `percent` of the frames.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Reference,
    Import,
}

/// Everything a run depends on. Written next to the outputs of every run and
/// accepted back through `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub log_level: String,
    pub rank_tol: f64,
    pub sampling: SamplingConfig,
    pub lbp: LbptopConfig,
    pub resize: Option<(usize, usize)>,
    /// TIM output length; the input length when absent.
    pub tim_frames: Option<usize>,
    pub bin_width: f64,
    pub profile: ProfileKind,
    pub manifest: Option<PathBuf>,
    pub protocol: Protocol,
    pub classifier: ClassifierKind,
    pub kernel: KernelRidge,
    pub predictions: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: String::new(),
            inputs: Vec::new(),
            output: None,
            seed: 0,
            threads: None,
            log_level: "warn".into(),
            rank_tol: DEFAULT_RANK_TOL,
            sampling: SamplingConfig::default(),
            lbp: LbptopConfig::default(),
            resize: None,
            tim_frames: None,
            bin_width: 1.0,
            profile: ProfileKind::Sparse,
            manifest: None,
            protocol: Protocol::Loso,
            classifier: ClassifierKind::Reference,
            kernel: KernelRidge::default(),
            predictions: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use dowseg::labels::WeightMode;
use dowseg::metrics::{EvalMode, Interpolation};
use dowseg::probe::PoolingMode;
use serde::Deserialize;

use crate::common::{io_failure, CliResult, Failure};

/// Run configuration read from a JSON or TOML file. Every field is
/// optional; command-line flags take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub georef: Option<PathBuf>,

    pub n_lev: Option<u32>,
    pub n_pix: Option<u32>,
    pub n_gap: Option<u32>,
    pub w0: Option<f64>,
    pub sigma: Option<f64>,
    pub weight_mode: Option<WeightMode>,
    pub connectivity: Option<u32>,
    pub threshold: Option<f32>,

    pub mode: Option<EvalMode>,
    pub major_classes: Option<Vec<u32>>,
    pub all_classes: Option<Vec<u32>>,
    pub interpolation: Option<Interpolation>,

    pub cell_size: Option<f64>,
    pub fractions: Option<[f64; 3]>,
    pub priority: Option<Vec<u32>>,

    pub folds: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub ks: Option<Vec<usize>>,
    pub pooling: Option<PoolingMode>,

    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl PipelineConfig {
    /// `.toml` files are read as TOML, anything else as JSON.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| {
            let mut f = Failure::invalid(format!("config: {e}")).at(path);
            f.kind = "config".into();
            f
        })
    }
}

/// Flag value if given, else the config value, else the default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> CliResult<T> {
    flag.or(config).ok_or_else(|| {
        Failure::invalid(format!(
            "missing required setting '{name}' (flag or config)"
        ))
    })
}

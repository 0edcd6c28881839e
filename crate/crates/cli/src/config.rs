use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Values read from `--config`; any flag given on the command line wins.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub n: Option<usize>,
    pub a: Option<f64>,
    pub d: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub profile: Option<Profile>,
    pub out: Option<PathBuf>,
    pub p: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub num_phi: Option<usize>,
    pub r: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub grid: Option<usize>,
    pub snapshots: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
    pub twist: Option<f64>,
    pub stride: Option<usize>,
    pub method: Option<String>,
    pub amplitude: Option<f64>,
    pub num_exponents: Option<usize>,
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Ci,
    Production,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("bad config {}: {e}", path.display())))
    }
}

/// Command-line value, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Fails early when an output file cannot be created.
pub fn check_output(path: &Path) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(CliError::config(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    if path.is_dir() {
        return Err(CliError::config(format!("{} is a directory", path.display())));
    }
    Ok(())
}

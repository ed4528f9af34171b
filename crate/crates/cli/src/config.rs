//! Effective test configuration: defaults, then the JSON config file, then
//! command-line flags. `CMI_SEED` supplies the seed when neither the file
//! nor the flags do.

use std::path::{Path, PathBuf};

use clap::Args;
use cmi_core::{Kernel, Method, TestConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "CMI_SEED";

/// Config file contents. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "B")]
    pub bootstrap_draws: Option<usize>,
    pub seed: Option<u64>,
    pub a: Option<f64>,
    pub h_max: Option<f64>,
    pub h_min: Option<f64>,
    pub k_min: Option<usize>,
    pub separation_factor: Option<f64>,
    pub kernel: Option<Kernel>,
    pub c_b: Option<f64>,
    pub method: Option<Method>,
    /// CSV input, used when no path is given on the command line.
    pub input: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn parse_separation(s: &str) -> Result<f64, String> {
    match s {
        "1" => Ok(1.0),
        "2" => Ok(2.0),
        _ => Err(format!("separation must be 1 or 2, got '{s}'")),
    }
}

/// Test tuning flags shared by `test` and `diag`.
#[derive(Debug, Clone, Default, Args)]
pub struct TestFlags {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// RMS pretest level [default: 0.1/ln n].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Randomization width; 0 gives the deterministic test.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bootstrap draws.
    #[arg(long = "B", value_name = "B")]
    pub bootstrap_draws: Option<usize>,
    /// Seed [env: CMI_SEED, used when neither flag nor config file sets it].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bandwidth grid ratio.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub h_min: Option<f64>,
    /// Average number of points inside the kernel support at h_min.
    #[arg(long)]
    pub k_min: Option<usize>,
    /// Test-point separation in units of h.
    #[arg(long, value_parser = parse_separation)]
    pub separation: Option<f64>,
    /// biweight, rectangular, triangular or parabolic.
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// pia (plug-in) or rms.
    #[arg(long)]
    pub method: Option<Method>,
}

impl TestFlags {
    fn as_overrides(&self) -> RunConfigFile {
        RunConfigFile {
            alpha: self.alpha,
            gamma: self.gamma,
            beta: self.beta,
            bootstrap_draws: self.bootstrap_draws,
            seed: self.seed,
            a: self.a,
            h_max: self.h_max,
            h_min: self.h_min,
            k_min: self.k_min,
            separation_factor: self.separation,
            kernel: self.kernel,
            c_b: None,
            method: self.method,
            input: None,
            out: None,
        }
    }
}

fn apply(cfg: &mut TestConfig, o: &RunConfigFile) {
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = o.$field { cfg.$field = v; })* };
    }
    set!(alpha, beta, bootstrap_draws, seed, a, separation_factor, kernel, c_b, method);
    macro_rules! set_opt {
        ($($field:ident),*) => { $(if o.$field.is_some() { cfg.$field = o.$field; })* };
    }
    set_opt!(gamma, h_max, h_min, k_min);
}

/// The layered configuration plus the input and output paths it names.
#[derive(Debug, Clone)]
pub struct Effective {
    pub config: TestConfig,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn resolve(flags: &TestFlags, env_seed: Option<&str>) -> CliResult<Effective> {
    let file = match &flags.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let mut config = TestConfig::default();
    if let Some(s) = env_seed {
        config.seed = s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got '{s}'")))?;
    }
    apply(&mut config, &file);
    apply(&mut config, &flags.as_overrides());
    config.validate()?;
    Ok(Effective { config, input: file.input, out: file.out })
}

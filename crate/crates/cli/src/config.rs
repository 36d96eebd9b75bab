use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use purify_core::channels::BellKind;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Keys accepted in a `--config` file. Every key is optional; flags given
/// on the command line take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub exact_states: Option<bool>,
    pub alpha_forward: Option<f64>,
    pub alpha_backward: Option<f64>,
    pub source_bell: Option<BellKind>,
    pub pre_rotate_45: Option<bool>,
    pub flux_n: Option<f64>,
    pub resamples: Option<usize>,
    pub frontier_grid: Option<usize>,
    pub frontier_random_states: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Global settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub exact_states: bool,
    pub file: FileConfig,
}

impl Globals {
    pub fn resolve(seed: Option<u64>, output_dir: Option<PathBuf>, exact_states: bool, config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self {
            seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            output_dir: output_dir
                .or_else(|| file.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            exact_states: exact_states || file.exact_states.unwrap_or(false),
            file,
        })
    }
}

/// Fully resolved pipeline settings; echoed to `config.toml` in the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub alpha_forward: f64,
    pub alpha_backward: f64,
    pub source_bell: BellKind,
    pub pre_rotate_45: bool,
    pub flux_n: f64,
    pub resamples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub exact_states: bool,
    pub frontier_grid: usize,
    pub frontier_random_states: usize,
}

/// Pipeline values given as flags; `None` falls back to the file, then to
/// the defaults.
#[derive(Debug, Clone, Default)]
pub struct PipelineOverrides {
    pub alpha_forward: Option<f64>,
    pub alpha_backward: Option<f64>,
    pub source_bell: Option<BellKind>,
    pub pre_rotate_45: Option<bool>,
    pub flux_n: Option<f64>,
    pub resamples: Option<usize>,
    pub frontier_grid: Option<usize>,
    pub frontier_random_states: Option<usize>,
}

impl PipelineConfig {
    pub fn resolve(globals: &Globals, flags: &PipelineOverrides) -> Result<Self> {
        let f = &globals.file;
        let cfg = Self {
            alpha_forward: flags.alpha_forward.or(f.alpha_forward).unwrap_or(50.0),
            alpha_backward: flags.alpha_backward.or(f.alpha_backward).unwrap_or(62.0),
            source_bell: flags.source_bell.or(f.source_bell).unwrap_or(BellKind::PhiMinus),
            pre_rotate_45: flags.pre_rotate_45.or(f.pre_rotate_45).unwrap_or(true),
            flux_n: flags.flux_n.or(f.flux_n).unwrap_or(1e6),
            resamples: flags.resamples.or(f.resamples).unwrap_or(100),
            seed: globals.seed,
            output_dir: globals.output_dir.clone(),
            exact_states: globals.exact_states,
            frontier_grid: flags.frontier_grid.or(f.frontier_grid).unwrap_or(100),
            frontier_random_states: flags
                .frontier_random_states
                .or(f.frontier_random_states)
                .unwrap_or(100_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha_forward", self.alpha_forward), ("alpha_backward", self.alpha_backward)] {
            if !(0.0..=90.0).contains(&a) {
                bail!("{name} = {a} must lie in [0, 90] degrees");
            }
        }
        if !(self.flux_n.is_finite() && self.flux_n > 0.0) {
            bail!("flux_n = {} must be positive", self.flux_n);
        }
        if self.resamples < 2 {
            bail!("resamples = {} must be at least 2", self.resamples);
        }
        if self.frontier_grid < 10 {
            bail!("frontier_grid = {} must be at least 10", self.frontier_grid);
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }
}

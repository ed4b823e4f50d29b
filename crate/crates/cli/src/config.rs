//! Run configuration: one TOML file plus command-line overrides.
//!
//! Every random choice derives from the top-level `seed`:
//! `derive_seed(seed, 0)` drives shot sampling, `derive_seed(seed, 1)` the
//! model initialization and `derive_seed(seed, 2)` the training shuffles.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qpt_core::sim::{derive_seed, SpamNoise};
use qpt_core::train::{AdamConfig, TrainConfig};
use serde::Deserialize;

pub const SAMPLE_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = 1;
pub const TRAIN_STREAM: u64 = 2;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Option<String>,
    pub spec: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub bond_dim: Option<usize>,
    pub kraus_dim: Option<usize>,
    pub init_noise: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub spam_override: Option<PathBuf>,
    pub reference_spec: Option<PathBuf>,
    pub shots: Option<usize>,
    pub seed: Option<u64>,
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub train: TrainSection,
    pub spam_noise: Option<SpamNoise>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub kappa: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub prob_floor: Option<f64>,
    pub adam: Option<AdamConfig>,
}

impl RunConfig {
    /// Reads `path`, resolving relative file references against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.spec,
            &mut cfg.dataset,
            &mut cfg.out_dir,
            &mut cfg.spam_override,
            &mut cfg.reference_spec,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(t) = &mut cfg.topology {
            let candidate = base.join(&*t);
            if candidate.is_file() {
                *t = candidate.to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn sub_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed(), stream)
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        let t = &self.train;
        TrainConfig {
            kappa: t.kappa.unwrap_or(d.kappa),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            epochs: t.epochs.unwrap_or(d.epochs),
            adam: t.adam.unwrap_or(d.adam),
            validation_fraction: t.validation_fraction.unwrap_or(d.validation_fraction),
            seed: self.sub_seed(TRAIN_STREAM),
            prob_floor: t.prob_floor.unwrap_or(d.prob_floor),
        }
    }
}

/// Replaces `slot` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "topology = \"line3\"\nspec = \"spec.json\"\nseed = 4\n[train]\nepochs = 7\n[train.adam]\nalpha = 0.01\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(
            cfg.spec.as_deref(),
            Some(dir.path().join("spec.json").as_path())
        );
        assert_eq!(cfg.topology.as_deref(), Some("line3"));
        let t = cfg.train_config();
        assert_eq!(t.epochs, 7);
        assert_eq!(t.adam.alpha, 0.01);
        assert_eq!(t.adam.beta2, 0.999);
        assert_eq!(t.seed, derive_seed(4, TRAIN_STREAM));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bond = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nseed = 3").is_err());
    }
}

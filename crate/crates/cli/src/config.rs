//! Run configuration: built-in defaults, optionally overridden by a JSON
//! config file, optionally overridden again by CLI flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cub_core::fcm::FcmMode;
use cub_core::survey::DEFAULT_RULE_COUNT;
use serde::Deserialize;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Vocabulary JSON; the built-in 7/7/9 vocabulary when absent.
    pub vocabulary: Option<PathBuf>,
    /// Rule base JSON override; the generated default table when absent.
    pub rule_base: Option<PathBuf>,
    pub expected_rules: usize,
    pub output_terms: usize,
    pub fcm_mode: FcmMode,
    pub fuzzifier: f64,
    pub fcm_tolerance: f64,
    pub fcm_max_iterations: usize,
    pub group_sizes: Option<Vec<usize>>,
    pub perturbation_swaps: usize,
    pub no_repeat_pairs: bool,
    pub use_raw_coefficients: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Whether `out_dir` was set explicitly (flag or config) rather than
    /// defaulted; `rotate` falls back to the state file's directory otherwise.
    pub out_dir_explicit: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vocabulary: None,
            rule_base: None,
            expected_rules: DEFAULT_RULE_COUNT,
            output_terms: 5,
            fcm_mode: FcmMode::SeededIteration,
            fuzzifier: 2.0,
            fcm_tolerance: 1e-6,
            fcm_max_iterations: 300,
            group_sizes: None,
            perturbation_swaps: 3,
            no_repeat_pairs: false,
            use_raw_coefficients: false,
            seed: 0,
            out_dir: PathBuf::from("cub-out"),
            out_dir_explicit: false,
        }
    }
}

/// On-disk shape: everything optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    vocabulary: Option<PathBuf>,
    rule_base: Option<PathBuf>,
    expected_rules: Option<usize>,
    output_terms: Option<usize>,
    fcm_mode: Option<FcmMode>,
    fuzzifier: Option<f64>,
    fcm_tolerance: Option<f64>,
    fcm_max_iterations: Option<usize>,
    group_sizes: Option<Vec<usize>>,
    perturbation_swaps: Option<usize>,
    no_repeat_pairs: Option<bool>,
    use_raw_coefficients: Option<bool>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(
        config_path: Option<&Path>,
        seed_flag: Option<u64>,
        out_flag: Option<PathBuf>,
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let file: ConfigFile = serde_json::from_str(&text)
                .with_context(|| format!("invalid config file {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.vocabulary = file.vocabulary.map(|p| resolve(base, p));
            cfg.rule_base = file.rule_base.map(|p| resolve(base, p));
            if let Some(v) = file.expected_rules {
                cfg.expected_rules = v;
            }
            if let Some(v) = file.output_terms {
                cfg.output_terms = v;
            }
            if let Some(v) = file.fcm_mode {
                cfg.fcm_mode = v;
            }
            if let Some(v) = file.fuzzifier {
                cfg.fuzzifier = v;
            }
            if let Some(v) = file.fcm_tolerance {
                cfg.fcm_tolerance = v;
            }
            if let Some(v) = file.fcm_max_iterations {
                cfg.fcm_max_iterations = v;
            }
            if let Some(v) = file.group_sizes {
                cfg.group_sizes = Some(v);
            }
            if let Some(v) = file.perturbation_swaps {
                cfg.perturbation_swaps = v;
            }
            if let Some(v) = file.no_repeat_pairs {
                cfg.no_repeat_pairs = v;
            }
            if let Some(v) = file.use_raw_coefficients {
                cfg.use_raw_coefficients = v;
            }
            if let Some(v) = file.seed {
                cfg.seed = v;
            }
            if let Some(v) = file.out_dir {
                cfg.out_dir = resolve(base, v);
                cfg.out_dir_explicit = true;
            }
        }
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        if let Some(out) = out_flag {
            cfg.out_dir = out;
            cfg.out_dir_explicit = true;
        }
        Ok(cfg)
    }
}

/// Paths in a config file are taken relative to the config file itself.
fn resolve(base: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

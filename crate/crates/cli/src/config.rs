//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 0
//! target_train = 24
//! target_eval = [24, 42]
//! operand_range = [1, 13]
//! output_dir = "runs/default"   # relative to the config file
//!
//! [dataset]
//! train_easy = 10
//! train_hard = 10
//! test = 50
//!
//! [train]
//! steps = 10000
//!
//! [[grid]]
//! temperature = 0.7
//! strategy = "top_k"
//! k = 10
//! ```
//!
//! The top-level `seed` drives dataset sampling (unless `dataset.seed` is
//! set), training and evaluation; `train.seed` is overwritten by it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gameofn_core::dataset::DatasetSizes;
use gameofn_core::decoding::{DecodeConfig, Strategy};
use gameofn_core::trainer::TrainConfig;
use serde::{de, Deserialize, Deserializer, Serialize};

use crate::hashing::json_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub train_easy: usize,
    pub train_hard: usize,
    pub test: usize,
    pub seed: Option<u64>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let sizes = DatasetSizes::default();
        DatasetSection {
            train_easy: sizes.train_easy,
            train_hard: sizes.train_hard,
            test: sizes.test,
            seed: None,
        }
    }
}

impl DatasetSection {
    pub fn sizes(&self) -> DatasetSizes {
        DatasetSizes {
            train_easy: self.train_easy,
            train_hard: self.train_hard,
            test: self.test,
        }
    }
}

/// One `[[grid]]` table as written. Parsed separately because the flattened
/// core type would silently drop misspelled keys.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridEntry {
    temperature: f64,
    strategy: String,
    k: Option<usize>,
    p: Option<f64>,
    absolute: Option<bool>,
}

impl GridEntry {
    fn into_config(self) -> Result<DecodeConfig, String> {
        let strategy = match (self.strategy.as_str(), self.k, self.p, self.absolute) {
            ("none", None, None, None) => Strategy::None,
            ("top_k", Some(k), None, None) => Strategy::TopK { k },
            ("top_p", None, Some(p), None) => Strategy::TopP { p },
            ("min_p", None, Some(p), absolute) => Strategy::MinP {
                p,
                absolute: absolute.unwrap_or(false),
            },
            (name @ ("none" | "top_k" | "top_p" | "min_p"), ..) => {
                return Err(format!(
                    "grid entry `{name}` takes {}",
                    match name {
                        "none" => "no parameters",
                        "top_k" => "exactly `k`",
                        "top_p" => "exactly `p`",
                        _ => "`p` and optionally `absolute`",
                    }
                ))
            }
            (other, ..) => return Err(format!("unknown strategy `{other}`")),
        };
        Ok(DecodeConfig {
            temperature: self.temperature,
            strategy,
        })
    }
}

fn strict_grid<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DecodeConfig>, D::Error> {
    Vec::<GridEntry>::deserialize(d)?
        .into_iter()
        .map(|e| e.into_config().map_err(de::Error::custom))
        .collect()
}

fn default_range() -> [i64; 2] {
    [1, gameofn_core::game::DEFAULT_MAX_OPERAND]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub target_train: i64,
    pub target_eval: Vec<i64>,
    #[serde(default = "default_range")]
    pub operand_range: [i64; 2],
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(deserialize_with = "strict_grid")]
    pub grid: Vec<DecodeConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses and validates a config file; a relative `output_dir` is
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if config.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.output_dir = base.join(&config.output_dir);
        }
        if config.output_dir.is_file() {
            bail!("output_dir {} is an existing file", config.output_dir.display());
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let [lo, hi] = self.operand_range;
        if lo < 1 || lo > hi {
            bail!("operand_range [{lo}, {hi}] must satisfy 1 <= lo <= hi");
        }
        if self.target_train < 1 || self.target_eval.iter().any(|&t| t < 1) {
            bail!("targets must be positive");
        }
        if self.target_eval.is_empty() {
            bail!("target_eval is empty");
        }
        if self.grid.is_empty() {
            bail!("grid is empty");
        }
        for g in &self.grid {
            g.validate()?;
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dataset_seed(&self) -> u64 {
        self.dataset.seed.unwrap_or(self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Training target first, then the evaluation targets, without repeats.
    pub fn targets(&self) -> Vec<i64> {
        let mut out = vec![self.target_train];
        for &t in &self.target_eval {
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    /// Hash of everything that influences outputs (the output directory
    /// does not).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.train.seed = self.seed;
        json_hash(&c)
    }
}

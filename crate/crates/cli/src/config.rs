//! Flat `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default except the data paths; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use causalrec::data::{FilterMode, SyntheticSpec};
use causalrec::{Error, ModelKind, Result, TrainConfig};
use serde::Serialize;

pub const DEFAULT_K: usize = 50;
pub const DEFAULT_LAMBDA2_GRID: [f64; 7] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Whether `visual_dim` was given explicitly; otherwise it follows the
    /// feature file.
    pub visual_dim_set: bool,
    pub interactions: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Dimension of a TSV feature file (binary files carry their own).
    pub feature_dim: Option<usize>,
    pub min_count: usize,
    pub filter_mode: FilterMode,
    pub validation: bool,
    pub model: ModelKind,
    pub ci: bool,
    pub k: usize,
    pub lambda2_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub synth: SyntheticSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            visual_dim_set: false,
            interactions: None,
            features: None,
            categories: None,
            out: None,
            checkpoint: None,
            feature_dim: None,
            min_count: 5,
            filter_mode: FilterMode::Fixpoint,
            validation: false,
            model: ModelKind::CausalRec,
            ci: false,
            k: DEFAULT_K,
            lambda2_grid: DEFAULT_LAMBDA2_GRID.to_vec(),
            seeds: Vec::new(),
            models: vec![ModelKind::Vbpr, ModelKind::Amr, ModelKind::CausalRec],
            synth: SyntheticSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected key = value, got '{line}'"),
                });
            };
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(config)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "embedding_dim" => t.embedding_dim = parse(key, value)?,
            "visual_dim" => {
                t.visual_dim = parse(key, value)?;
                self.visual_dim_set = true;
            }
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "lambda1" => t.lambda1 = parse(key, value)?,
            "lambda2" => t.lambda2 = parse(key, value)?,
            "adam_beta1" => t.adam_beta1 = parse(key, value)?,
            "adam_beta2" => t.adam_beta2 = parse(key, value)?,
            "adam_eps" => t.adam_eps = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "synth_seed" => s.seed = parse(key, value)?,
            "reference_mode" => t.reference_mode = parse(key, value)?,
            "fusion" => t.fusion = parse(key, value)?,
            "multitask" => t.multitask = parse(key, value)?,
            "multitask_l2_per_term" => t.multitask_l2_per_term = parse(key, value)?,
            "amr_epsilon" => t.amr_epsilon = parse(key, value)?,
            "exclude_train_positives" => t.exclude_train_positives = parse(key, value)?,
            "init_std" => t.init_std = parse(key, value)?,
            "early_stop_patience" => {
                t.early_stop_patience = match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "interactions" => self.interactions = Some(value.into()),
            "features" => self.features = Some(value.into()),
            "categories" => self.categories = Some(value.into()),
            "out" | "output" => self.out = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "feature_dim" => self.feature_dim = Some(parse(key, value)?),
            "min_count" => self.min_count = parse(key, value)?,
            "filter_mode" => {
                self.filter_mode = match value {
                    "fixpoint" => FilterMode::Fixpoint,
                    "single_pass" | "single-pass" => FilterMode::SinglePass,
                    _ => return Err(Error::Config(format!("filter_mode: unknown mode '{value}'"))),
                }
            }
            "validation" => self.validation = parse(key, value)?,
            "model" => self.model = parse(key, value)?,
            "ci" => self.ci = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "lambda2_grid" => self.lambda2_grid = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "models" => self.models = parse_list(key, value)?,
            "n_users" => s.n_users = parse(key, value)?,
            "n_items" => s.n_items = parse(key, value)?,
            "true_dim" => s.true_dim = parse(key, value)?,
            "visual_share" => s.visual_share = parse(key, value)?,
            "clicks_per_user" => s.clicks_per_user = parse(key, value)?,
            "feature_noise" => s.feature_noise = parse(key, value)?,
            "click_share" => s.click_share = parse(key, value)?,
            "affinity_scale" => s.affinity_scale = parse(key, value)?,
            "attraction_overlap" => s.attraction_overlap = parse(key, value)?,
            "attraction_scale" => s.attraction_scale = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Seeds of a multi-seed command: the `seeds` list, or just `seed`.
    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be >= 1".into()));
        }
        if self.lambda2_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("lambda2_grid values must be non-negative".into()));
        }
        Ok(())
    }

    /// Every setting as JSON, for provenance in reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use causalrec::Fusion;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.train.embedding_dim, 32);
        assert_eq!(c.train.batch_size, 100);
        assert_eq!(c.k, 50);
        assert_eq!(c.lambda2_grid.len(), 7);
        assert_eq!(c.seed_list(), vec![42]);
    }

    #[test]
    fn parses_file_text() {
        let text = "# comment\n\nembedding_dim = 8\nfusion=sum\nmodels = VBPR, mf\nlambda2_grid = 0, 0.5\nseed = 9\nsynth_seed = 3\n";
        let c = ExperimentConfig::parse_str(text, Path::new("x.cfg")).unwrap();
        assert_eq!(c.train.embedding_dim, 8);
        assert_eq!(c.train.fusion, Fusion::Sum);
        assert_eq!(c.models, vec![ModelKind::Vbpr, ModelKind::Mf]);
        assert_eq!(c.lambda2_grid, vec![0.0, 0.5]);
        assert_eq!((c.train.seed, c.synth.seed), (9, 3));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = ExperimentConfig::parse_str("colour = red\n", Path::new("x")).unwrap_err();
        assert_eq!(e.category(), "config");
        assert!(e.to_string().contains("x:1"));
        let e = ExperimentConfig::parse_str("epochs\n", Path::new("x")).unwrap_err();
        assert_eq!(e.category(), "parse");
        let e = ExperimentConfig::parse_str("epochs = many\n", Path::new("x")).unwrap_err();
        assert_eq!(e.category(), "config");
    }
}

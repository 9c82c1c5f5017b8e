//! Load (or synthesize), filter, split and align: everything a command needs
//! before training or scoring.

use std::path::Path;

use causalrec::data::{
    generate_synthetic, kcore_filter, load_categories, load_interactions, load_visual_features,
    split_leave_one_out,
};
use causalrec::{Dataset, Error, FeatureStore, ItemFeatures, Result, SplitDataset, TrainConfig};
use log::info;

use crate::config::ExperimentConfig;

/// A filtered corpus with its feature store.
pub struct Corpus {
    pub dataset: Dataset,
    pub store: FeatureStore,
}

/// Reads the configured interaction and feature files, or generates the
/// synthetic corpus when no interaction file is set, then applies the
/// k-core filter and attaches categories.
pub fn load_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    let (raw, store) = match (&config.interactions, &config.features) {
        (Some(inter), Some(feat)) => (
            load_interactions(inter)?,
            load_visual_features(feat, config.feature_dim)?,
        ),
        (None, None) => {
            info!("no data paths given; generating the synthetic corpus");
            let corpus = generate_synthetic(&config.synth)?;
            (corpus.raw, corpus.store)
        }
        _ => {
            return Err(Error::Config(
                "interactions and features must be given together".into(),
            ))
        }
    };
    let mut dataset = kcore_filter(&raw, &store, config.min_count, config.filter_mode)?;
    if let Some(path) = &config.categories {
        dataset = dataset.with_categories(&load_categories(path)?);
    }
    info!(
        "{} users, {} items, {} interactions after filtering",
        dataset.n_users,
        dataset.n_items,
        dataset.n_interactions()
    );
    Ok(Corpus { dataset, store })
}

/// A split corpus with aligned features and the training settings resolved
/// against it.
pub struct Prepared {
    pub split: SplitDataset,
    pub features: ItemFeatures,
    pub train: TrainConfig,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let corpus = load_corpus(config)?;
    let split = split_leave_one_out(&corpus.dataset, config.train.seed, config.validation)?;
    let features = ItemFeatures::aligned(&corpus.store, &split.train)?;
    let mut train = config.train.clone();
    if !config.visual_dim_set {
        train.visual_dim = features.dim();
    }
    Ok(Prepared {
        split,
        features,
        train,
    })
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

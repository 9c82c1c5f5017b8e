//! Visually-aware recommenders (BPR-MF, VBPR, DeepStyle, AMR, DVBPR and
//! CausalRec) trained with pairwise ranking losses, plus counterfactual
//! scoring that removes the direct effect of an item's visual feature at
//! inference time.

pub mod causal;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod models;
pub mod params;
pub mod training;

pub use causal::{debiased_score, reference_values, ReferenceSet, Treatment};
pub use config::{Fusion, ItemIndex, ModelKind, ReferenceMode, TrainConfig, UserIndex};
pub use data::{Dataset, FeatureStore, ItemFeatures, ItemSide, RawInteractions, SplitDataset};
pub use error::{Error, Result};
pub use eval::{evaluate, evaluate_pairs, Debias, EvalReport, Metrics, ModelScorer, Scorer};
pub use models::{score, CausalFactors};
pub use params::{init_params, ParamSet, Shape, Table};
pub use training::{train, TrainHistory, TrainTriple};

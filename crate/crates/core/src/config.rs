use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense user index, `0..n_users`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserIndex(pub usize);

/// Dense item index, `0..n_items`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemIndex(pub usize);

/// The six recommender models. Scoring, gradients and the debiased scorers
/// all dispatch on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "VBPR")]
    Vbpr,
    DeepStyle,
    #[serde(rename = "AMR")]
    Amr,
    #[serde(rename = "DVBPR")]
    Dvbpr,
    CausalRec,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mf,
        ModelKind::Vbpr,
        ModelKind::DeepStyle,
        ModelKind::Amr,
        ModelKind::Dvbpr,
        ModelKind::CausalRec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mf => "MF",
            ModelKind::Vbpr => "VBPR",
            ModelKind::DeepStyle => "DeepStyle",
            ModelKind::Amr => "AMR",
            ModelKind::Dvbpr => "DVBPR",
            ModelKind::CausalRec => "CausalRec",
        }
    }

    /// Whether the score depends on the item's visual feature.
    pub fn uses_visual(self) -> bool {
        !matches!(self, ModelKind::Mf)
    }

    /// Whether a counterfactual (debiased) scorer exists for this model.
    pub fn has_debiased_scorer(self) -> bool {
        matches!(
            self,
            ModelKind::Vbpr | ModelKind::DeepStyle | ModelKind::Amr | ModelKind::CausalRec
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" | "bpr" | "bpr-mf" | "bprmf" => Ok(ModelKind::Mf),
            "vbpr" => Ok(ModelKind::Vbpr),
            "deepstyle" => Ok(ModelKind::DeepStyle),
            "amr" => Ok(ModelKind::Amr),
            "dvbpr" => Ok(ModelKind::Dvbpr),
            "causalrec" => Ok(ModelKind::CausalRec),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

/// How CausalRec combines its match and notice factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Product,
    Sum,
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" | "mul" => Ok(Fusion::Product),
            "sum" | "add" => Ok(Fusion::Sum),
            _ => Err(Error::Config(format!("unknown fusion '{s}'"))),
        }
    }
}

/// Which no-treatment value stands in for the reference item and feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    Mean,
    Zero,
}

impl FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ReferenceMode::Mean),
            "zero" => Ok(ReferenceMode::Zero),
            _ => Err(Error::Config(format!("unknown reference mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub visual_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the l2 penalty.
    pub lambda1: f64,
    /// Scale of the visual effect removed at inference (CausalRec).
    pub lambda2: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub reference_mode: ReferenceMode,
    pub fusion: Fusion,
    pub multitask: bool,
    /// Count the l2 penalty once per multitask term instead of once overall.
    pub multitask_l2_per_term: bool,
    pub amr_epsilon: f64,
    pub exclude_train_positives: bool,
    /// Standard deviation of the Gaussian used for factor initialization.
    pub init_std: f64,
    /// Stop after this many epochs without validation MRR improvement.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 32,
            visual_dim: 64,
            learning_rate: 0.001,
            batch_size: 100,
            epochs: 100,
            lambda1: 0.01,
            lambda2: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
            reference_mode: ReferenceMode::Mean,
            fusion: Fusion::Product,
            multitask: true,
            multitask_l2_per_term: false,
            amr_epsilon: 0.1,
            exclude_train_positives: true,
            init_std: 0.01,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be >= 1");
        }
        if self.visual_dim == 0 {
            return fail("visual_dim must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if !(self.lambda1 >= 0.0) {
            return fail("lambda1 must be non-negative");
        }
        if !(self.lambda2 >= 0.0) {
            return fail("lambda2 must be non-negative");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return fail("adam_beta1 must lie in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return fail("adam_beta2 must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be positive");
        }
        if !(self.amr_epsilon >= 0.0) {
            return fail("amr_epsilon must be non-negative");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return fail("init_std must be non-negative");
        }
        Ok(())
    }
}

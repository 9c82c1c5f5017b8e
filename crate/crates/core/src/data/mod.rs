//! Interaction and visual-feature ingestion, filtering, splitting and the
//! synthetic planted-bias corpus generator.

mod filter;
mod io;
mod split;
mod stats;
mod synth;

pub use filter::{kcore_filter, FilterMode};
pub use io::{
    load_categories, load_interactions, load_visual_features, parse_interactions,
    read_features_binary, read_features_tsv, write_features_binary, write_features_tsv,
    write_ground_truth, write_interactions, FEATURE_MAGIC,
};
pub use split::{split_leave_one_out, SplitDataset};
pub use stats::{dataset_stats, sparsity, DatasetStats};
pub use synth::{generate_synthetic, SyntheticCorpus, SyntheticSpec};

use std::collections::HashMap;

use crate::config::{ItemIndex, UserIndex};
use crate::error::{Error, Result};

/// One raw interaction record as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawInteractions {
    pub records: Vec<Interaction>,
}

impl RawInteractions {
    pub fn push(&mut self, user: impl Into<String>, item: impl Into<String>, ts: Option<i64>) {
        self.records.push(Interaction {
            user: user.into(),
            item: item.into(),
            timestamp: ts,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Precomputed visual features keyed by item token. Values are kept as 32-bit
/// floats, as on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    tokens: Vec<String>,
    values: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Data("feature dimension must be >= 1".into()));
        }
        Ok(FeatureStore {
            dim,
            tokens: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f32]) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite feature for item '{token}'")));
        }
        if self.index.contains_key(&token) {
            return Err(Error::Data(format!("duplicate feature for item '{token}'")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.values.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&r| &self.values[r * self.dim..(r + 1) * self.dim])
    }

    /// `(token, vector)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens
            .iter()
            .zip(self.values.chunks(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }
}

/// Features aligned to a dataset's dense item indices, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemFeatures {
    dim: usize,
    values: Vec<f64>,
}

impl ItemFeatures {
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Shape {
                expected: dim,
                got: values.len(),
            });
        }
        Ok(ItemFeatures { dim, values })
    }

    /// Looks up every dataset item in `store`.
    pub fn aligned(store: &FeatureStore, dataset: &Dataset) -> Result<Self> {
        let mut values = Vec::with_capacity(dataset.n_items * store.dim());
        for token in &dataset.item_tokens {
            let v = store
                .get(token)
                .ok_or_else(|| Error::Data(format!("item '{token}' has no visual feature")))?;
            values.extend(v.iter().map(|&x| x as f64));
        }
        Ok(ItemFeatures {
            dim: store.dim(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_items(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn get(&self, item: usize) -> &[f64] {
        &self.values[item * self.dim..(item + 1) * self.dim]
    }

    /// Component-wise mean over all items.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.values.chunks(self.dim) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = self.n_items().max(1) as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// Per-item inputs the scorers need besides parameters: aligned features
/// and optional categories.
#[derive(Debug, Clone, Copy)]
pub struct ItemSide<'a> {
    pub features: &'a ItemFeatures,
    pub categories: Option<&'a [usize]>,
}

impl<'a> ItemSide<'a> {
    pub fn new(features: &'a ItemFeatures, dataset: &'a Dataset) -> Self {
        ItemSide {
            features,
            categories: dataset.categories.as_deref(),
        }
    }

    pub fn feature(&self, item: usize) -> &'a [f64] {
        self.features.get(item)
    }

    pub fn category(&self, item: usize) -> usize {
        self.categories.map_or(0, |c| c[item])
    }
}

/// A filtered, densely indexed implicit-feedback corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_users: usize,
    pub n_items: usize,
    /// Per-user positives in ingestion order.
    pub positives: Vec<Vec<(ItemIndex, Option<i64>)>>,
    pub user_tokens: Vec<String>,
    pub item_tokens: Vec<String>,
    /// Optional per-item category index.
    pub categories: Option<Vec<usize>>,
    sorted: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        positives: Vec<Vec<(ItemIndex, Option<i64>)>>,
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
    ) -> Result<Self> {
        if positives.len() != user_tokens.len() {
            return Err(Error::Shape {
                expected: user_tokens.len(),
                got: positives.len(),
            });
        }
        let n_items = item_tokens.len();
        let mut sorted = Vec::with_capacity(positives.len());
        for (u, items) in positives.iter().enumerate() {
            let mut s: Vec<usize> = items.iter().map(|(i, _)| i.0).collect();
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Data(format!("duplicate positive for user {u}")));
            }
            if s.last().is_some_and(|&i| i >= n_items) {
                return Err(Error::Data(format!("item index out of range for user {u}")));
            }
            sorted.push(s);
        }
        Ok(Dataset {
            n_users: user_tokens.len(),
            n_items,
            positives,
            user_tokens,
            item_tokens,
            categories: None,
            sorted,
        })
    }

    /// Attaches item categories from a token map. Items without an entry
    /// share one extra category.
    pub fn with_categories(mut self, map: &HashMap<String, String>) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut cats = Vec::with_capacity(self.n_items);
        let mut missing = false;
        for token in &self.item_tokens {
            match map.get(token) {
                Some(c) => {
                    let next = ids.len();
                    cats.push(*ids.entry(c.as_str()).or_insert(next));
                }
                None => {
                    missing = true;
                    cats.push(usize::MAX);
                }
            }
        }
        if missing {
            let extra = ids.len();
            cats.iter_mut()
                .filter(|c| **c == usize::MAX)
                .for_each(|c| *c = extra);
        }
        self.categories = Some(cats);
        self
    }

    pub fn n_categories(&self) -> usize {
        self.categories
            .as_ref()
            .and_then(|c| c.iter().max())
            .map_or(1, |m| m + 1)
    }

    pub fn category(&self, item: usize) -> usize {
        self.categories.as_ref().map_or(0, |c| c[item])
    }

    pub fn n_interactions(&self) -> usize {
        self.positives.iter().map(Vec::len).sum()
    }

    pub fn is_positive(&self, user: UserIndex, item: ItemIndex) -> bool {
        self.sorted[user.0].binary_search(&item.0).is_ok()
    }

    /// Positive item indices of `user`, ascending.
    pub fn sorted_items(&self, user: UserIndex) -> &[usize] {
        &self.sorted[user.0]
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_items];
        for items in &self.sorted {
            for &i in items {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Copy of this dataset with the given per-user items removed.
    pub(crate) fn without(&self, removed: &[Vec<usize>]) -> Result<Self> {
        let positives = self
            .positives
            .iter()
            .zip(removed)
            .map(|(items, drop)| {
                items
                    .iter()
                    .filter(|(i, _)| !drop.contains(&i.0))
                    .copied()
                    .collect()
            })
            .collect();
        let mut d = Dataset::new(
            positives,
            self.user_tokens.clone(),
            self.item_tokens.clone(),
        )?;
        d.categories = self.categories.clone();
        Ok(d)
    }
}

use serde::Serialize;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    /// `1 - interactions / (users * items)`.
    pub sparsity: f64,
}

pub fn sparsity(n_users: usize, n_items: usize, n_interactions: usize) -> f64 {
    1.0 - n_interactions as f64 / (n_users as f64 * n_items as f64)
}

pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let n_interactions = dataset.n_interactions();
    DatasetStats {
        n_users: dataset.n_users,
        n_items: dataset.n_items,
        n_interactions,
        sparsity: sparsity(dataset.n_users, dataset.n_items, n_interactions),
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ItemIndex, UserIndex};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// A user, one of their positives, and a sampled non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainTriple {
    pub user: UserIndex,
    pub pos: ItemIndex,
    pub neg: ItemIndex,
}

/// Uniform pairwise sampler over a training corpus.
#[derive(Debug, Clone)]
pub struct TripleSampler<'a> {
    dataset: &'a Dataset,
    users: Vec<usize>,
}

impl<'a> TripleSampler<'a> {
    /// Users without positives, or whose positives cover every item, cannot
    /// form a triple and are skipped with a warning.
    pub fn new(dataset: &'a Dataset) -> Result<Self> {
        let mut users = Vec::with_capacity(dataset.n_users);
        for u in 0..dataset.n_users {
            let n = dataset.positives[u].len();
            if n == 0 {
                continue;
            }
            if n >= dataset.n_items {
                log::warn!(
                    "user '{}' interacted with every item; no negatives, skipped",
                    dataset.user_tokens[u]
                );
                continue;
            }
            users.push(u);
        }
        if users.is_empty() {
            return Err(Error::Data("no user can form a training triple".into()));
        }
        Ok(TripleSampler { dataset, users })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// One triple: user uniform, positive uniform over the user's items,
    /// negative uniform over items by rejection.
    pub fn sample_one(&self, rng: &mut impl Rng) -> TrainTriple {
        let u = self.users[rng.random_range(0..self.users.len())];
        let items = &self.dataset.positives[u];
        let pos = items[rng.random_range(0..items.len())].0;
        let neg = loop {
            let j = ItemIndex(rng.random_range(0..self.dataset.n_items));
            if !self.dataset.is_positive(UserIndex(u), j) {
                break j;
            }
        };
        TrainTriple {
            user: UserIndex(u),
            pos,
            neg,
        }
    }

    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Vec<TrainTriple> {
        (0..batch_size).map(|_| self.sample_one(rng)).collect()
    }
}

pub fn sample_triples(dataset: &Dataset, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<TrainTriple>> {
    Ok(TripleSampler::new(dataset)?.sample(batch_size, rng))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn dataset(rows: Vec<Vec<usize>>, n_items: usize) -> Dataset {
        let users = (0..rows.len()).map(|u| format!("u{u}")).collect();
        let items = (0..n_items).map(|i| format!("i{i}")).collect();
        let pos = rows
            .into_iter()
            .map(|r| r.into_iter().map(|i| (ItemIndex(i), None)).collect())
            .collect();
        Dataset::new(pos, users, items).unwrap()
    }

    #[test]
    fn forced_negative() {
        let d = dataset(vec![vec![0]], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in sample_triples(&d, 50, &mut rng).unwrap() {
            assert_eq!((t.user.0, t.pos.0, t.neg.0), (0, 0, 1));
        }
    }

    #[test]
    fn users_are_uniform() {
        let d = dataset(vec![vec![0, 1, 2], vec![3]], 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let triples = sample_triples(&d, 10_000, &mut rng).unwrap();
        let first = triples.iter().filter(|t| t.user.0 == 0).count() as f64;
        // binomial(10000, 0.5): sd = 50
        assert!((first - 5_000.0).abs() < 150.0, "{first}");
        for t in &triples {
            assert!(d.is_positive(t.user, t.pos));
            assert!(!d.is_positive(t.user, t.neg));
        }
    }

    #[test]
    fn saturated_users_are_skipped() {
        let d = dataset(vec![vec![0, 1], vec![0]], 2);
        let s = TripleSampler::new(&d).unwrap();
        assert_eq!(s.n_users(), 1);
        let full = dataset(vec![vec![0, 1]], 2);
        assert!(TripleSampler::new(&full).is_err());
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::config::{ItemIndex, UserIndex};
use crate::error::Result;

/// Leave-one-out split: the training corpus plus at most one held-out item per
/// user for testing (and optionally one more for validation).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Vec<Option<ItemIndex>>,
    pub validation: Option<Vec<Option<ItemIndex>>>,
}

impl SplitDataset {
    /// `(user, held-out item)` pairs of the test split.
    pub fn test_pairs(&self) -> impl Iterator<Item = (UserIndex, ItemIndex)> + '_ {
        held_out_pairs(&self.test)
    }

    pub fn validation_pairs(&self) -> Option<impl Iterator<Item = (UserIndex, ItemIndex)> + '_> {
        self.validation.as_deref().map(held_out_pairs)
    }
}

fn held_out_pairs(items: &[Option<ItemIndex>]) -> impl Iterator<Item = (UserIndex, ItemIndex)> + '_ {
    items
        .iter()
        .enumerate()
        .filter_map(|(u, i)| i.map(|i| (UserIndex(u), i)))
}

/// Holds out each user's latest interaction. Ties on the latest timestamp,
/// and users without any timestamps, are resolved uniformly at random from a
/// generator seeded with `seed`. Users are always left with at least one
/// training positive; a user with a single interaction gets no test item.
pub fn split_leave_one_out(dataset: &Dataset, seed: u64, with_validation: bool) -> Result<SplitDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = if with_validation { 2 } else { 1 };
    let mut held: Vec<Vec<Option<ItemIndex>>> = vec![vec![None; dataset.n_users]; rounds];
    let mut removed: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_users];

    for (u, positives) in dataset.positives.iter().enumerate() {
        let mut remaining: Vec<(ItemIndex, Option<i64>)> = positives.clone();
        for slot in held.iter_mut() {
            if remaining.len() < 2 {
                break;
            }
            let pick = pick_latest(&remaining, &mut rng);
            let (item, _) = remaining.remove(pick);
            slot[u] = Some(item);
            removed[u].push(item.0);
        }
    }

    let train = dataset.without(&removed)?;
    let mut held = held.into_iter();
    let test = held.next().unwrap_or_default();
    let validation = held.next();
    Ok(SplitDataset {
        train,
        test,
        validation,
    })
}

fn pick_latest(items: &[(ItemIndex, Option<i64>)], rng: &mut ChaCha8Rng) -> usize {
    let latest = items.iter().filter_map(|(_, t)| *t).max();
    let candidates: Vec<usize> = match latest {
        Some(t) => (0..items.len()).filter(|&k| items[k].1 == Some(t)).collect(),
        None => (0..items.len()).collect(),
    };
    if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.random_range(0..candidates.len())]
    }
}

//! Synthetic corpora with a planted visual bias.
//!
//! Every user and item gets two latent blocks, a visual one and a non-visual
//! one. The real preference of a user for an item mixes the two block
//! affinities by `visual_share`; an item's observable feature is its visual
//! block plus noise. A user's logged history mixes two channels:
//!
//! * clicks, drawn without replacement with probability proportional to the
//!   softmax of a visual attraction score alone (the bias), and
//! * purchases, drawn the same way from the softmax of the real preference.
//!
//! One further purchase is appended with the latest timestamp. It is the
//! item a leave-latest-out split holds out, so test targets follow the real
//! preference while most of the training signal is visually biased.
//!
//! The attraction score is the item's visual block dotted with an attraction
//! vector. With `attraction_overlap = 1` that vector is the user's own visual
//! taste, so clicks follow the visual part of the real preference; with
//! `attraction_overlap = 0` it is one direction shared by all users, an
//! item's eye-catchingness independent of who looks at it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FeatureStore, RawInteractions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Dimension of each latent block; also the feature dimension.
    pub true_dim: usize,
    /// Weight of the visual affinity in the real preference, in `[0, 1]`.
    pub visual_share: f64,
    /// Logged training interactions per user (clicks plus purchases).
    pub clicks_per_user: usize,
    pub feature_noise: f64,
    /// Fraction of the logged interactions that come from the visual click
    /// channel, in `[0, 1]`.
    pub click_share: f64,
    /// Standard deviation of a block affinity (softmax temperature is 1).
    pub affinity_scale: f64,
    /// Weight in `[0, 1]` of the user's own visual taste in the attraction
    /// vector; the rest is shared by all users.
    pub attraction_overlap: f64,
    /// Multiplier on the attraction score before the click softmax.
    pub attraction_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 500,
            n_items: 800,
            true_dim: 4,
            visual_share: 0.5,
            clicks_per_user: 20,
            feature_noise: 0.1,
            click_share: 0.5,
            affinity_scale: 4.0,
            attraction_overlap: 0.0,
            attraction_scale: 2.0,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_users == 0 || self.n_items == 0 || self.true_dim == 0 {
            return fail("n_users, n_items and true_dim must be positive");
        }
        if self.clicks_per_user == 0 {
            return fail("clicks_per_user must be positive");
        }
        if self.clicks_per_user + 1 > self.n_items {
            return fail("clicks_per_user + 1 must not exceed n_items");
        }
        if !(0.0..=1.0).contains(&self.visual_share) {
            return fail("visual_share must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.click_share) {
            return fail("click_share must lie in [0, 1]");
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return fail("feature_noise must be non-negative");
        }
        if !(self.affinity_scale > 0.0 && self.affinity_scale.is_finite()) {
            return fail("affinity_scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.attraction_overlap) {
            return fail("attraction_overlap must lie in [0, 1]");
        }
        if !(self.attraction_scale > 0.0 && self.attraction_scale.is_finite()) {
            return fail("attraction_scale must be positive");
        }
        Ok(())
    }

    pub fn n_clicks(&self) -> usize {
        (self.click_share * self.clicks_per_user as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub raw: RawInteractions,
    pub store: FeatureStore,
    pub user_tokens: Vec<String>,
    pub item_tokens: Vec<String>,
    /// Real preference, `n_users x n_items` row-major.
    pub ground_truth: Vec<f64>,
    /// Attraction score driving the click channel, `n_users x n_items`.
    pub click_logits: Vec<f64>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let (nu, ni, d) = (spec.n_users, spec.n_items, spec.true_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // entries ~ N(0, s/sqrt(d)) give block affinities with std s
    let std = (spec.affinity_scale / (d as f64).sqrt()).sqrt();
    let latent = Normal::new(0.0, std).expect("finite std");
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n * d).map(|_| latent.sample(rng)).collect()
    };
    let user_vis = draw(nu, &mut rng);
    let user_non = draw(nu, &mut rng);
    let item_vis = draw(ni, &mut rng);
    let item_non = draw(ni, &mut rng);

    let user_tokens: Vec<String> = (0..nu).map(|u| format!("u{u}")).collect();
    let item_tokens: Vec<String> = (0..ni).map(|i| format!("i{i}")).collect();

    let mut store = FeatureStore::new(d)?;
    let noise = Normal::new(0.0, spec.feature_noise).expect("finite noise");
    for (i, token) in item_tokens.iter().enumerate() {
        let f: Vec<f32> = item_vis[i * d..(i + 1) * d]
            .iter()
            .map(|&x| {
                let e = if spec.feature_noise > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (x + e) as f32
            })
            .collect();
        store.insert(token.clone(), &f)?;
    }

    // attraction: sqrt(o) * own visual taste + sqrt(1 - o) * shared direction
    let shared = draw(1, &mut rng);
    let (wa, wb) = (spec.attraction_overlap.sqrt(), (1.0 - spec.attraction_overlap).sqrt());
    let attraction: Vec<f64> = user_vis
        .chunks(d)
        .flat_map(|taste| taste.iter().zip(&shared).map(|(a, b)| wa * a + wb * b))
        .collect();

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut ground_truth = vec![0.0; nu * ni];
    let mut click_logits = vec![0.0; nu * ni];
    for u in 0..nu {
        let row = u * d..(u + 1) * d;
        let (pv, pn, pa) = (&user_vis[row.clone()], &user_non[row.clone()], &attraction[row]);
        for i in 0..ni {
            let iv = &item_vis[i * d..(i + 1) * d];
            let vis = dot(pv, iv);
            let non = dot(pn, &item_non[i * d..(i + 1) * d]);
            click_logits[u * ni + i] = spec.attraction_scale * dot(pa, iv);
            ground_truth[u * ni + i] = spec.visual_share * vis + (1.0 - spec.visual_share) * non;
        }
    }

    let n_clicks = spec.n_clicks();
    let n_purchases = spec.clicks_per_user - n_clicks;
    let mut raw = RawInteractions::default();
    let mut taken = vec![false; ni];
    for u in 0..nu {
        taken.iter_mut().for_each(|t| *t = false);
        let clicks = gumbel_top_k(&click_logits[u * ni..(u + 1) * ni], &taken, n_clicks, &mut rng);
        clicks.iter().for_each(|&i| taken[i] = true);
        let real = &ground_truth[u * ni..(u + 1) * ni];
        let buys = gumbel_top_k(real, &taken, n_purchases + 1, &mut rng);
        let (history, target) = buys.split_at(n_purchases);

        let mut logged: Vec<usize> = clicks.iter().chain(history).copied().collect();
        // interleave the two channels in time
        for k in (1..logged.len()).rev() {
            logged.swap(k, rng.random_range(0..=k));
        }
        for (t, &i) in logged.iter().enumerate() {
            raw.push(user_tokens[u].clone(), item_tokens[i].clone(), Some(t as i64 + 1));
        }
        raw.push(
            user_tokens[u].clone(),
            item_tokens[target[0]].clone(),
            Some(logged.len() as i64 + 1),
        );
    }

    Ok(SyntheticCorpus {
        raw,
        store,
        user_tokens,
        item_tokens,
        ground_truth,
        click_logits,
    })
}

/// Samples `k` distinct indices with probability proportional to
/// `softmax(logits)`, sequentially without replacement, skipping `excluded`.
fn gumbel_top_k(logits: &[f64], excluded: &[bool], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (l - (-u.ln()).ln(), i)
        })
        .filter(|&(_, i)| !excluded[i])
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, i)| i).collect()
}

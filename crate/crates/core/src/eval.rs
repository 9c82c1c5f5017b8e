//! Full-ranking leave-one-out evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{causalrec_debiased_from_factors, debiased_score_amr, debiased_score_vbpr, unsupported, ReferenceSet};
use crate::config::{ItemIndex, ModelKind, UserIndex};
use crate::data::{Dataset, ItemSide, SplitDataset};
use crate::error::{Error, Result};
use crate::models::{dot, factors_from_projection, project_visual, project_visual_into};
use crate::params::ParamSet;

/// Anything that can score every item for a user.
pub trait Scorer: Sync {
    fn n_items(&self) -> usize;
    /// Writes the score of every item into `out` (length `n_items`).
    fn score_all(&self, user: usize, out: &mut [f64]);
}

/// A dense user x item score matrix.
#[derive(Debug, Clone)]
pub struct MatrixScorer {
    pub n_items: usize,
    pub scores: Vec<f64>,
}

impl Scorer for MatrixScorer {
    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score_all(&self, user: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.scores[user * self.n_items..(user + 1) * self.n_items]);
    }
}

/// Counterfactual scoring settings.
#[derive(Debug, Clone)]
pub struct Debias {
    pub refs: ReferenceSet,
    pub lambda2: f64,
}

/// Scores a trained model, either as trained or through its debiased
/// scorer. Item projections are computed once up front.
pub struct ModelScorer<'a> {
    params: &'a ParamSet,
    categories: Vec<usize>,
    proj: Vec<f64>,
    debias: Option<(Debias, Vec<f64>)>,
}

impl<'a> ModelScorer<'a> {
    pub fn biased(params: &'a ParamSet, items: &ItemSide<'_>) -> Result<Self> {
        Self::build(params, items, None)
    }

    /// Errors for MF and DVBPR, which have no debiased scorer.
    pub fn debiased(params: &'a ParamSet, items: &ItemSide<'_>, debias: Debias) -> Result<Self> {
        if !params.kind.has_debiased_scorer() {
            return Err(unsupported(params.kind));
        }
        Self::build(params, items, Some(debias))
    }

    fn build(params: &'a ParamSet, items: &ItemSide<'_>, debias: Option<Debias>) -> Result<Self> {
        let n = params.shape.n_items;
        let k = params.shape.dim;
        if items.features.n_items() != n {
            return Err(Error::Shape {
                expected: n,
                got: items.features.n_items(),
            });
        }
        let mut proj = Vec::new();
        if params.kind.uses_visual() {
            proj = vec![0.0; n * k];
            let mut f = vec![0.0; params.shape.visual_dim];
            for (i, out) in proj.chunks_mut(k).enumerate() {
                f.copy_from_slice(items.feature(i));
                if params.kind == ModelKind::Amr {
                    f.iter_mut().zip(params.delta(i)).for_each(|(a, b)| *a += b);
                }
                project_visual_into(params, &f, out)?;
            }
        }
        let debias = match debias {
            Some(d) if params.kind == ModelKind::CausalRec => {
                let pref = project_visual(params, &d.refs.feature_ref)?;
                Some((d, pref))
            }
            Some(d) => Some((d, Vec::new())),
            None => None,
        };
        Ok(ModelScorer {
            params,
            categories: (0..n).map(|i| items.category(i)).collect(),
            proj,
            debias,
        })
    }

    fn proj(&self, i: usize) -> &[f64] {
        let k = self.params.shape.dim;
        &self.proj[i * k..(i + 1) * k]
    }

    fn biased_score(&self, u: usize, i: usize) -> f64 {
        let p = self.params;
        let gu = p.gamma_u(u);
        match p.kind {
            ModelKind::Mf => p.alpha() + p.beta_u(u) + p.beta_i(i) + dot(gu, p.gamma_i(i)),
            ModelKind::Vbpr => {
                p.alpha() + p.beta_u(u) + p.beta_i(i) + dot(gu, p.gamma_i(i)) + dot(p.theta_u(u), self.proj(i))
            }
            ModelKind::DeepStyle => {
                let (x, gi, c) = (self.proj(i), p.gamma_i(i), p.category(self.categories[i]));
                (0..gu.len()).map(|k| gu[k] * (x[k] - c[k] + gi[k])).sum()
            }
            ModelKind::Amr => {
                let (x, gi) = (self.proj(i), p.gamma_i(i));
                (0..gu.len()).map(|k| gu[k] * (x[k] + gi[k])).sum()
            }
            ModelKind::Dvbpr => p.alpha() + p.beta_u(u) + dot(p.theta_u(u), self.proj(i)),
            ModelKind::CausalRec => {
                let x = self.proj(i);
                factors_from_projection(gu, p.gamma_i(i), p.theta_u(u), x, x).fuse(p.fusion)
            }
        }
    }
}

impl Scorer for ModelScorer<'_> {
    fn n_items(&self) -> usize {
        self.params.shape.n_items
    }

    fn score_all(&self, u: usize, out: &mut [f64]) {
        let p = self.params;
        let Some((d, pref)) = &self.debias else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.biased_score(u, i);
            }
            return;
        };
        match p.kind {
            ModelKind::Vbpr => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = debiased_score_vbpr(p, u, i, &d.refs);
                }
            }
            ModelKind::Amr | ModelKind::DeepStyle => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = debiased_score_amr(p, u, i, &d.refs);
                }
            }
            ModelKind::CausalRec => {
                let (gu, tu) = (p.gamma_u(u), p.theta_u(u));
                for (i, o) in out.iter_mut().enumerate() {
                    let x = self.proj(i);
                    let item = factors_from_projection(gu, p.gamma_i(i), tu, x, x);
                    let reference = factors_from_projection(gu, &d.refs.gamma_ref, tu, pref, x);
                    *o = causalrec_debiased_from_factors(&item, &reference, p.fusion, d.lambda2);
                }
            }
            // rejected in the constructor
            ModelKind::Mf | ModelKind::Dvbpr => unreachable!(),
        }
    }
}

/// 1-based rank of `target` among the candidate items. Items scoring
/// strictly higher rank ahead, and so do equal-scoring items with a lower
/// index.
pub fn rank_of_target(scores: &[f64], target: usize, excluded: &[usize]) -> usize {
    let st = scores[target];
    let mut rank = 1;
    for (c, &s) in scores.iter().enumerate() {
        if s > st || (s == st && c < target) {
            rank += 1;
        }
    }
    for &c in excluded.iter().filter(|&&c| c != target) {
        let s = scores[c];
        if s > st || (s == st && c < target) {
            rank -= 1;
        }
    }
    rank
}

/// `(rr, ndcg@k, hr@k)` for a single relevant item at `rank`.
pub fn metrics_from_rank(rank: usize, k: usize) -> (f64, f64, f64) {
    let rr = 1.0 / rank as f64;
    if rank <= k {
        (rr, 1.0 / ((rank + 1) as f64).log2(), 1.0)
    } else {
        (rr, 0.0, 0.0)
    }
}

/// Averaged ranking metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub ndcg_at_k: f64,
    pub hr_at_k: f64,
    pub k: usize,
    pub n_users_evaluated: usize,
}

/// Ranks each target against the whole item set, minus the user's
/// `train` positives when `exclude_train_positives`.
pub fn evaluate_pairs(
    scorer: &dyn Scorer,
    train: &Dataset,
    pairs: &[(UserIndex, ItemIndex)],
    k: usize,
    exclude_train_positives: bool,
) -> Result<Metrics> {
    if pairs.is_empty() {
        return Err(Error::Data("no test interactions to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let n = scorer.n_items();
    let per_user: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, &(u, t)| {
                scorer.score_all(u.0, buf);
                let excluded = if exclude_train_positives {
                    train.sorted_items(u)
                } else {
                    &[]
                };
                metrics_from_rank(rank_of_target(buf, t.0, excluded), k)
            },
        )
        .collect();
    // summed in user order so the result does not depend on thread timing
    let (mut rr, mut ndcg, mut hr) = (0.0, 0.0, 0.0);
    for (a, b, c) in &per_user {
        rr += a;
        ndcg += b;
        hr += c;
    }
    let m = per_user.len() as f64;
    Ok(Metrics {
        mrr: rr / m,
        ndcg_at_k: ndcg / m,
        hr_at_k: hr / m,
        k,
        n_users_evaluated: per_user.len(),
    })
}

/// Evaluates on the split's test targets.
pub fn evaluate(scorer: &dyn Scorer, split: &SplitDataset, k: usize, exclude_train_positives: bool) -> Result<Metrics> {
    let pairs: Vec<_> = split.test_pairs().collect();
    evaluate_pairs(scorer, &split.train, &pairs, k, exclude_train_positives)
}

/// One evaluation result with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub ci: bool,
    /// Debias scale; only read by the CausalRec debiased scorer.
    pub lambda2: f64,
    pub mrr: f64,
    pub ndcg_at_k: f64,
    pub hr_at_k: f64,
    pub k: usize,
    pub n_users_evaluated: usize,
    pub exclude_train_positives: bool,
    pub seed: u64,
    pub elapsed_seconds: f64,
    /// Every setting in force, for provenance.
    pub config: serde_json::Value,
}

impl EvalReport {
    /// The report as a single JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report is always serializable")
    }
}

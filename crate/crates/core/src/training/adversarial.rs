use super::sampling::TrainTriple;
use crate::data::ItemSide;
use crate::models::{dot, project_visual, sigmoid};
use crate::params::ParamSet;

/// Worst-case perturbation of the positive item's raw feature within an
/// l2 ball of radius `epsilon`: `epsilon * g / |g|` with `g` the gradient of
/// the triple's ranking loss with respect to that feature. Zero when `g` is.
///
/// Only the AMR score depends on the perturbation; for other kinds the
/// gradient is taken as if the score were AMR's.
pub fn adversarial_delta(params: &ParamSet, triple: &TrainTriple, items: &ItemSide<'_>, epsilon: f64) -> Vec<f64> {
    let d = params.shape.visual_dim;
    if epsilon == 0.0 || params.e.is_empty() {
        return vec![0.0; d];
    }
    let (u, i, j) = (triple.user.0, triple.pos.0, triple.neg.0);
    let gu = params.gamma_u(u);
    let score = |item: usize| -> f64 {
        let f: Vec<f64> = items
            .feature(item)
            .iter()
            .zip(params.delta(item))
            .map(|(a, b)| a + b)
            .collect();
        let p = project_visual(params, &f).expect("feature shape checked by caller");
        (0..gu.len()).map(|k| gu[k] * (p[k] + params.gamma_i(item)[k])).sum()
    };
    let margin = score(i) - score(j);
    // d(loss)/d(f_i) = -sigmoid(-margin) * E^T g_u
    let coef = -sigmoid(-margin);
    let mut g = vec![0.0; d];
    for (row, &w) in params.e.chunks(d).zip(gu) {
        for (gk, &r) in g.iter_mut().zip(row) {
            *gk += coef * w * r;
        }
    }
    let norm = dot(&g, &g).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return vec![0.0; d];
    }
    g.iter().map(|x| epsilon * x / norm).collect()
}

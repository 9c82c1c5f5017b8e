//! Per-triple loss and its exact gradient for every model.
//!
//! The l2 penalty of a triple covers the parameters the triple touches: the
//! offset and user rows, both item rows, the visual projection, and the style
//! vectors of both item categories. Untouched rows get a zero gradient, so a
//! batch gradient only writes a handful of rows plus `E`.

use super::loss::multitask_loss;
use super::sampling::TrainTriple;
use crate::config::{Fusion, ModelKind, TrainConfig};
use crate::data::ItemSide;
use crate::error::Result;
use crate::models::{dot, factors_from_projection, project_visual_into, sigmoid, softplus, CausalFactors};
use crate::params::{ParamSet, Table};

/// Rows a triple reads from each table.
struct Touched {
    user: usize,
    items: [usize; 2],
    cats: [usize; 2],
}

impl Touched {
    fn new(t: &TrainTriple, items: &ItemSide<'_>) -> Self {
        Touched {
            user: t.user.0,
            items: [t.pos.0, t.neg.0],
            cats: [items.category(t.pos.0), items.category(t.neg.0)],
        }
    }

    /// `(table, row)` pairs, each row listed once. `E` is shared and always
    /// touched in full, so it is handled separately.
    fn rows(&self) -> Vec<(Table, usize)> {
        let mut rows = vec![
            (Table::Alpha, 0),
            (Table::BetaU, self.user),
            (Table::GammaU, self.user),
            (Table::ThetaU, self.user),
        ];
        for &i in &self.items {
            rows.push((Table::BetaI, i));
            rows.push((Table::GammaI, i));
        }
        rows.push((Table::C, self.cats[0]));
        if self.cats[1] != self.cats[0] {
            rows.push((Table::C, self.cats[1]));
        }
        rows
    }
}

fn row_width(params: &ParamSet, t: Table) -> usize {
    let (_, cols) = params.shape.table_shape(t);
    cols
}

/// Sum of squares over the trainable entries a triple touches.
pub fn triple_l2(params: &ParamSet, triple: &TrainTriple, items: &ItemSide<'_>) -> f64 {
    let touched = Touched::new(triple, items);
    let mut total: f64 = params.e.iter().map(|x| x * x).sum();
    for (t, r) in touched.rows() {
        let table = params.table(t);
        if table.is_empty() {
            continue;
        }
        let w = row_width(params, t);
        total += table[r * w..(r + 1) * w].iter().map(|x| x * x).sum::<f64>();
    }
    total
}

fn add_l2_gradient(params: &ParamSet, touched: &Touched, coef: f64, grads: &mut ParamSet) {
    for (g, x) in grads.e.iter_mut().zip(&params.e) {
        *g += coef * x;
    }
    for (t, r) in touched.rows() {
        let table = params.table(t);
        if table.is_empty() {
            continue;
        }
        let w = row_width(params, t);
        let g = grads.table_mut(t);
        for k in r * w..(r + 1) * w {
            g[k] += coef * table[k];
        }
    }
}

/// Raw feature the model scores for `item` (AMR adds its perturbation).
fn scored_feature(params: &ParamSet, items: &ItemSide<'_>, item: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(items.feature(item));
    if params.kind == ModelKind::Amr {
        buf.iter_mut()
            .zip(params.delta(item))
            .for_each(|(f, d)| *f += d);
    }
}

/// Loss of a single triple.
pub fn triple_loss(
    params: &ParamSet,
    triple: &TrainTriple,
    items: &ItemSide<'_>,
    config: &TrainConfig,
) -> Result<f64> {
    let mut scratch = ParamSet::zeros(params.kind, params.fusion, params.shape);
    accumulate_gradients(params, triple, items, config, 0.0, &mut scratch)
}

/// Loss and gradient of a single triple; the gradient has the parameter
/// layout, with zeros everywhere the triple does not reach.
pub fn gradients(
    params: &ParamSet,
    triple: &TrainTriple,
    items: &ItemSide<'_>,
    config: &TrainConfig,
) -> Result<(f64, ParamSet)> {
    let mut grads = params.zeros_like();
    let loss = accumulate_gradients(params, triple, items, config, 1.0, &mut grads)?;
    Ok((loss, grads))
}

/// Adds `scale * d(loss)/d(params)` into `grads` and returns the loss.
pub fn accumulate_gradients(
    params: &ParamSet,
    triple: &TrainTriple,
    items: &ItemSide<'_>,
    config: &TrainConfig,
    scale: f64,
    grads: &mut ParamSet,
) -> Result<f64> {
    let touched = Touched::new(triple, items);
    let l2 = triple_l2(params, triple, items);
    let u = touched.user;
    let k = params.shape.dim;
    let d = params.shape.visual_dim;

    let mut feats = [Vec::with_capacity(d), Vec::with_capacity(d)];
    let mut proj = [vec![0.0; k], vec![0.0; k]];
    if params.kind.uses_visual() {
        for x in 0..2 {
            scored_feature(params, items, touched.items[x], &mut feats[x]);
            project_visual_into(params, &feats[x], &mut proj[x])?;
        }
    }

    let mut l2_terms = 1.0;
    let loss = if params.kind == ModelKind::CausalRec {
        let gu = params.gamma_u(u);
        let tu = params.theta_u(u);
        let f: [CausalFactors; 2] = [0, 1].map(|x| {
            let gi = params.gamma_i(touched.items[x]);
            factors_from_projection(gu, gi, tu, &proj[x], &proj[x])
        });
        let loss = multitask_loss(&f[0], &f[1], l2, config);
        if config.multitask && config.multitask_l2_per_term {
            l2_terms = 3.0;
        }
        if scale != 0.0 {
            causalrec_backward(params, &touched, &f, &proj, &feats, config, scale, grads);
        }
        loss
    } else {
        let y = [0, 1].map(|x| linear_score(params, &touched, x, &proj[x]));
        let margin = y[0] - y[1];
        let loss = softplus(-margin) + config.lambda1 * l2;
        if scale != 0.0 {
            let g = -sigmoid(-margin) * scale;
            for x in 0..2 {
                let coef = if x == 0 { g } else { -g };
                linear_backward(params, &touched, x, &proj[x], &feats[x], coef, grads);
            }
        }
        loss
    };
    if scale != 0.0 && config.lambda1 != 0.0 {
        add_l2_gradient(params, &touched, 2.0 * config.lambda1 * l2_terms * scale, grads);
    }
    Ok(loss)
}

/// Score of item slot `x` for the five non-sigmoid models, given the
/// projection of the feature it sees.
fn linear_score(params: &ParamSet, t: &Touched, x: usize, proj: &[f64]) -> f64 {
    let (u, i) = (t.user, t.items[x]);
    let gu = params.gamma_u(u);
    match params.kind {
        ModelKind::Mf => params.alpha() + params.beta_u(u) + params.beta_i(i) + dot(gu, params.gamma_i(i)),
        ModelKind::Vbpr => {
            params.alpha()
                + params.beta_u(u)
                + params.beta_i(i)
                + dot(gu, params.gamma_i(i))
                + dot(params.theta_u(u), proj)
        }
        ModelKind::DeepStyle => {
            let (gi, c) = (params.gamma_i(i), params.category(t.cats[x]));
            (0..gu.len()).map(|k| gu[k] * (proj[k] - c[k] + gi[k])).sum()
        }
        ModelKind::Amr => {
            let gi = params.gamma_i(i);
            (0..gu.len()).map(|k| gu[k] * (proj[k] + gi[k])).sum()
        }
        ModelKind::Dvbpr => params.alpha() + params.beta_u(u) + dot(params.theta_u(u), proj),
        ModelKind::CausalRec => unreachable!("CausalRec is not linear"),
    }
}

/// Adds `coef * d(score_x)/d(params)`.
fn linear_backward(
    params: &ParamSet,
    t: &Touched,
    x: usize,
    proj: &[f64],
    feature: &[f64],
    coef: f64,
    grads: &mut ParamSet,
) {
    let (u, i) = (t.user, t.items[x]);
    let k = params.shape.dim;
    let kind = params.kind;
    if matches!(kind, ModelKind::Mf | ModelKind::Vbpr) {
        grads.beta_i[i] += coef;
    }
    // latent match <gamma_u, gamma_i> appears in all but DVBPR
    if kind != ModelKind::Dvbpr {
        let (gu, gi) = (params.gamma_u(u), params.gamma_i(i));
        for c in 0..k {
            grads.gamma_u[u * k + c] += coef * gi[c];
            grads.gamma_i[i * k + c] += coef * gu[c];
        }
    }
    match kind {
        ModelKind::Vbpr | ModelKind::Dvbpr => {
            let tu = params.theta_u(u);
            for c in 0..k {
                grads.theta_u[u * k + c] += coef * proj[c];
            }
            add_outer(&mut grads.e, tu, feature, coef);
        }
        ModelKind::DeepStyle => {
            let gu = params.gamma_u(u);
            let cat = t.cats[x];
            let style = params.category(cat);
            for c in 0..k {
                grads.gamma_u[u * k + c] += coef * (proj[c] - style[c]);
                grads.c[cat * k + c] -= coef * gu[c];
            }
            add_outer(&mut grads.e, gu, feature, coef);
        }
        ModelKind::Amr => {
            let gu = params.gamma_u(u);
            for c in 0..k {
                grads.gamma_u[u * k + c] += coef * proj[c];
            }
            add_outer(&mut grads.e, gu, feature, coef);
        }
        _ => {}
    }
}

/// `E += coef * left (x) right`.
fn add_outer(e: &mut [f64], left: &[f64], right: &[f64], coef: f64) {
    let d = right.len();
    for (row, &l) in e.chunks_mut(d).zip(left) {
        let s = coef * l;
        if s == 0.0 {
            continue;
        }
        for (g, &r) in row.iter_mut().zip(right) {
            *g += s * r;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn causalrec_backward(
    params: &ParamSet,
    t: &Touched,
    f: &[CausalFactors; 2],
    proj: &[Vec<f64>; 2],
    feats: &[Vec<f64>; 2],
    config: &TrainConfig,
    scale: f64,
    grads: &mut ParamSet,
) {
    let u = t.user;
    let k = params.shape.dim;
    let fusion = config.fusion;
    let dy = f[0].fuse(fusion) - f[1].fuse(fusion);
    let g_fused = -sigmoid(-dy) * scale;
    let (g_notice, g_match) = if config.multitask {
        (
            -sigmoid(-(f[0].n_vu - f[1].n_vu)) * scale,
            -sigmoid(-(f[0].matched() - f[1].matched())) * scale,
        )
    } else {
        (0.0, 0.0)
    };
    let gu = params.gamma_u(u);
    let tu = params.theta_u(u);
    let mut dproj = vec![0.0; k];
    for x in 0..2 {
        let sign = if x == 0 { 1.0 } else { -1.0 };
        let fx = &f[x];
        let (dy_da, dy_db, dy_dn) = match fusion {
            Fusion::Product => (fx.m_ivu * fx.n_vu, fx.m_iu * fx.n_vu, fx.m_iu * fx.m_ivu),
            Fusion::Sum => (1.0, 1.0, 1.0),
        };
        let la = sign * (g_fused * dy_da + g_match * fx.m_ivu);
        let lb = sign * (g_fused * dy_db + g_match * fx.m_iu);
        let ln = sign * (g_fused * dy_dn + g_notice);
        // through the sigmoids to the logits
        let za = la * fx.m_iu * (1.0 - fx.m_iu);
        let zb = lb * fx.m_ivu * (1.0 - fx.m_ivu);
        let zn = ln * fx.n_vu * (1.0 - fx.n_vu);

        let i = t.items[x];
        let gi = params.gamma_i(i);
        let p = &proj[x];
        for c in 0..k {
            grads.gamma_u[u * k + c] += za * gi[c] + zb * gi[c] * p[c];
            grads.gamma_i[i * k + c] += za * gu[c] + zb * gu[c] * p[c];
            grads.theta_u[u * k + c] += zn * p[c];
            dproj[c] = zb * gu[c] * gi[c] + zn * tu[c];
        }
        for (row, &dp) in grads.e.chunks_mut(feats[x].len()).zip(&dproj) {
            if dp == 0.0 {
                continue;
            }
            for (g, &v) in row.iter_mut().zip(&feats[x]) {
                *g += dp * v;
            }
        }
    }
}

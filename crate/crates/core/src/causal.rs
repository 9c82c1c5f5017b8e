//! Counterfactual scoring.
//!
//! A model's score is read as an outcome `Y(item, visual, user)`. Holding the
//! item at a no-treatment reference `i*` cuts the match path; holding the
//! visual feature at `v*` cuts the visual notice path. From the three
//! outcomes `Y(i, v)`, `Y(i*, v)` and `Y(i*, v*)` we get the total effect,
//! the natural direct effect of the visual feature, and the total indirect
//! effect used as a debiased score.

use serde::{Deserialize, Serialize};

use crate::config::{Fusion, ModelKind, ReferenceMode};
use crate::data::ItemFeatures;
use crate::error::{Error, Result};
use crate::models::{
    amr_from_projection, deepstyle_from_projection, dot, factors_from_projection, project_visual,
    CausalFactors,
};
use crate::params::ParamSet;

/// No-treatment values substituted for the item and its visual feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub beta_ref: f64,
    pub gamma_ref: Vec<f64>,
    pub feature_ref: Vec<f64>,
    pub c_ref: Vec<f64>,
    pub mode: ReferenceMode,
}

/// Population means of the item-side parameters and features (`Mean`) or
/// all zeros (`Zero`). Tables the model does not allocate contribute zeros.
pub fn reference_values(params: &ParamSet, features: &ItemFeatures, mode: ReferenceMode) -> Result<ReferenceSet> {
    let n_items = params.shape.n_items;
    if n_items == 0 || features.n_items() == 0 {
        return Err(Error::Data("cannot build references from an empty item set".into()));
    }
    let k = params.shape.dim;
    let zero = ReferenceSet {
        beta_ref: 0.0,
        gamma_ref: vec![0.0; k],
        feature_ref: vec![0.0; features.dim()],
        c_ref: vec![0.0; k],
        mode,
    };
    if mode == ReferenceMode::Zero {
        return Ok(zero);
    }
    let mean_rows = |table: &[f64], width: usize| -> Vec<f64> {
        let mut m = vec![0.0; width];
        if table.is_empty() {
            return m;
        }
        let rows = table.len() / width;
        for row in table.chunks(width) {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|x| *x /= rows as f64);
        m
    };
    Ok(ReferenceSet {
        beta_ref: mean_rows(&params.beta_i, 1)[0],
        gamma_ref: mean_rows(&params.gamma_i, k),
        feature_ref: features.mean(),
        c_ref: mean_rows(&params.c, k),
        mode,
    })
}

/// Which of the item and visual inputs carry the treatment value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Treatment {
    pub item: bool,
    pub visual: bool,
}

impl Treatment {
    pub const FACTUAL: Treatment = Treatment {
        item: true,
        visual: true,
    };
    pub const ITEM_REF: Treatment = Treatment {
        item: false,
        visual: true,
    };
    pub const NONE: Treatment = Treatment {
        item: false,
        visual: false,
    };
}

/// `Y(i or i*, v or v*, u)` under the model's own score function.
///
/// The item-side inputs (biases, item factor, and for CausalRec the feature
/// entering the visual match) follow `t.item`; the visual notice input (and
/// DeepStyle's style offset, AMR's perturbation) follows `t.visual`.
pub fn outcome(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    category: usize,
    refs: &ReferenceSet,
    t: Treatment,
) -> Result<f64> {
    let gu = params.gamma_u(u);
    let (beta, gamma): (f64, &[f64]) = if t.item {
        (params.beta_i(i), params.gamma_i(i))
    } else {
        (refs.beta_ref, &refs.gamma_ref)
    };
    let visual: &[f64] = if t.visual { feature } else { &refs.feature_ref };
    match params.kind {
        ModelKind::Mf => Ok(params.alpha() + params.beta_u(u) + beta + dot(gu, gamma)),
        ModelKind::Vbpr => {
            let p = project_visual(params, visual)?;
            Ok(params.alpha() + params.beta_u(u) + beta + dot(gu, gamma) + dot(params.theta_u(u), &p))
        }
        ModelKind::DeepStyle => {
            let p = project_visual(params, visual)?;
            let c = if t.visual { params.category(category) } else { &refs.c_ref };
            Ok(deepstyle_from_projection(gu, &p, c, gamma))
        }
        ModelKind::Amr => {
            let raw: Vec<f64> = if t.visual {
                feature.iter().zip(params.delta(i)).map(|(f, d)| f + d).collect()
            } else {
                refs.feature_ref.clone()
            };
            let p = project_visual(params, &raw)?;
            Ok(amr_from_projection(gu, &p, gamma))
        }
        ModelKind::Dvbpr => {
            let p = project_visual(params, visual)?;
            Ok(params.alpha() + params.beta_u(u) + dot(params.theta_u(u), &p))
        }
        ModelKind::CausalRec => {
            let match_feature = if t.item { feature } else { &refs.feature_ref };
            let pm = project_visual(params, match_feature)?;
            let pn = project_visual(params, visual)?;
            Ok(factors_from_projection(gu, gamma, params.theta_u(u), &pm, &pn).fuse(params.fusion))
        }
    }
}

/// `Y(i, v) - Y(i*, v*)`.
pub fn total_effect(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    category: usize,
    refs: &ReferenceSet,
) -> Result<f64> {
    Ok(outcome(params, u, i, feature, category, refs, Treatment::FACTUAL)?
        - outcome(params, u, i, feature, category, refs, Treatment::NONE)?)
}

/// `Y(i*, v) - Y(i*, v*)`: the effect carried by the visual path alone.
pub fn natural_direct_effect(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    category: usize,
    refs: &ReferenceSet,
) -> Result<f64> {
    Ok(outcome(params, u, i, feature, category, refs, Treatment::ITEM_REF)?
        - outcome(params, u, i, feature, category, refs, Treatment::NONE)?)
}

/// `Y(i, v) - Y(i*, v)`, evaluated directly rather than as `TE - NDE`.
pub fn total_indirect_effect(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    category: usize,
    refs: &ReferenceSet,
) -> Result<f64> {
    Ok(outcome(params, u, i, feature, category, refs, Treatment::FACTUAL)?
        - outcome(params, u, i, feature, category, refs, Treatment::ITEM_REF)?)
}

/// Closed-form indirect effect of VBPR: `b_i - b* + <g_u, g_i - g*>`.
pub fn debiased_score_vbpr(params: &ParamSet, u: usize, i: usize, refs: &ReferenceSet) -> f64 {
    params.beta_i(i) - refs.beta_ref + diff_dot(params.gamma_u(u), params.gamma_i(i), &refs.gamma_ref)
}

/// Closed-form indirect effect of AMR and DeepStyle: `<g_u, g_i - g*>`.
pub fn debiased_score_amr(params: &ParamSet, u: usize, i: usize, refs: &ReferenceSet) -> f64 {
    diff_dot(params.gamma_u(u), params.gamma_i(i), &refs.gamma_ref)
}

fn diff_dot(gu: &[f64], gi: &[f64], gref: &[f64]) -> f64 {
    (0..gu.len()).map(|k| gu[k] * (gi[k] - gref[k])).sum()
}

/// Factors of the item-reference outcome: both matches at `(g*, v*)`, the
/// notice at the item's own feature.
pub fn reference_factors(params: &ParamSet, u: usize, feature: &[f64], refs: &ReferenceSet) -> Result<CausalFactors> {
    let pm = project_visual(params, &refs.feature_ref)?;
    let pn = project_visual(params, feature)?;
    Ok(factors_from_projection(
        params.gamma_u(u),
        &refs.gamma_ref,
        params.theta_u(u),
        &pm,
        &pn,
    ))
}

/// `F(i, v) - lambda2 * F(i*, v)`. At `lambda2 = 1` this is the total
/// indirect effect, at `lambda2 = 0` the biased score.
pub fn debiased_score_causalrec(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    refs: &ReferenceSet,
    lambda2: f64,
) -> Result<f64> {
    let pf = project_visual(params, feature)?;
    let f = factors_from_projection(params.gamma_u(u), params.gamma_i(i), params.theta_u(u), &pf, &pf);
    let pm = project_visual(params, &refs.feature_ref)?;
    let r = factors_from_projection(params.gamma_u(u), &refs.gamma_ref, params.theta_u(u), &pm, &pf);
    Ok(causalrec_debiased_from_factors(&f, &r, params.fusion, lambda2))
}

pub(crate) fn causalrec_debiased_from_factors(
    item: &CausalFactors,
    reference: &CausalFactors,
    fusion: Fusion,
    lambda2: f64,
) -> f64 {
    if lambda2 == 0.0 {
        return item.fuse(fusion);
    }
    item.fuse(fusion) - lambda2 * reference.fuse(fusion)
}

/// The model's counterfactual scorer; MF and DVBPR have none.
pub fn debiased_score(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    refs: &ReferenceSet,
    lambda2: f64,
) -> Result<f64> {
    match params.kind {
        ModelKind::Vbpr => Ok(debiased_score_vbpr(params, u, i, refs)),
        ModelKind::Amr | ModelKind::DeepStyle => Ok(debiased_score_amr(params, u, i, refs)),
        ModelKind::CausalRec => debiased_score_causalrec(params, u, i, feature, refs, lambda2),
        kind => Err(unsupported(kind)),
    }
}

pub(crate) fn unsupported(kind: ModelKind) -> Error {
    Error::Protocol(format!("{kind} has no counterfactual (CI) scorer"))
}

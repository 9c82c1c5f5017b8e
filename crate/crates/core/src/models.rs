//! Score functions of the six models.
//!
//! All scorers read from a [`ParamSet`] and take the item's raw visual
//! feature explicitly, so the counterfactual code can evaluate them at
//! reference values.

use crate::config::{Fusion, ModelKind};
use crate::error::{Error, Result};
use crate::params::ParamSet;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function, branching on sign so `exp` never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `E * feature` into `out`.
pub fn project_visual_into(params: &ParamSet, feature: &[f64], out: &mut [f64]) -> Result<()> {
    let d = params.shape.visual_dim;
    if feature.len() != d {
        return Err(Error::Shape {
            expected: d,
            got: feature.len(),
        });
    }
    if params.e.is_empty() {
        return Err(Error::Protocol(format!(
            "{} has no visual projection",
            params.kind
        )));
    }
    for (o, row) in out.iter_mut().zip(params.e.chunks(d)) {
        *o = dot(row, feature);
    }
    Ok(())
}

pub fn project_visual(params: &ParamSet, feature: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.shape.dim];
    project_visual_into(params, feature, &mut out)?;
    Ok(out)
}

pub fn score_mf(params: &ParamSet, u: usize, i: usize) -> f64 {
    params.alpha() + params.beta_u(u) + params.beta_i(i) + dot(params.gamma_u(u), params.gamma_i(i))
}

pub fn score_vbpr(params: &ParamSet, u: usize, i: usize, feature: &[f64]) -> Result<f64> {
    let p = project_visual(params, feature)?;
    Ok(score_mf(params, u, i) + dot(params.theta_u(u), &p))
}

pub fn score_deepstyle(
    params: &ParamSet,
    u: usize,
    i: usize,
    feature: &[f64],
    category: usize,
) -> Result<f64> {
    let p = project_visual(params, feature)?;
    Ok(deepstyle_from_projection(params.gamma_u(u), &p, params.category(category), params.gamma_i(i)))
}

pub(crate) fn deepstyle_from_projection(gu: &[f64], proj: &[f64], c: &[f64], gi: &[f64]) -> f64 {
    (0..gu.len()).map(|k| gu[k] * (proj[k] - c[k] + gi[k])).sum()
}

/// AMR score with the item's stored perturbation added to the raw feature
/// before projection.
pub fn score_amr(params: &ParamSet, u: usize, i: usize, feature: &[f64]) -> Result<f64> {
    let perturbed: Vec<f64> = feature
        .iter()
        .zip(params.delta(i))
        .map(|(f, d)| f + d)
        .collect();
    let p = project_visual(params, &perturbed)?;
    Ok(amr_from_projection(params.gamma_u(u), &p, params.gamma_i(i)))
}

pub(crate) fn amr_from_projection(gu: &[f64], proj: &[f64], gi: &[f64]) -> f64 {
    (0..gu.len()).map(|k| gu[k] * (proj[k] + gi[k])).sum()
}

pub fn score_dvbpr(params: &ParamSet, u: usize, feature: &[f64]) -> Result<f64> {
    let p = project_visual(params, feature)?;
    Ok(params.alpha() + params.beta_u(u) + dot(params.theta_u(u), &p))
}

/// The three sigmoid factors of CausalRec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalFactors {
    /// Match from latent factors alone.
    pub m_iu: f64,
    /// Match through the item factor modulated by the projected feature.
    pub m_ivu: f64,
    /// The user's notice of the visual feature.
    pub n_vu: f64,
}

impl CausalFactors {
    pub fn fuse(&self, fusion: Fusion) -> f64 {
        match fusion {
            Fusion::Product => self.m_iu * self.m_ivu * self.n_vu,
            Fusion::Sum => self.m_iu + self.m_ivu + self.n_vu,
        }
    }

    /// Product of the two match factors.
    pub fn matched(&self) -> f64 {
        self.m_iu * self.m_ivu
    }
}

pub fn causalrec_factors(params: &ParamSet, u: usize, i: usize, feature: &[f64]) -> Result<CausalFactors> {
    let p = project_visual(params, feature)?;
    Ok(factors_from_projection(
        params.gamma_u(u),
        params.gamma_i(i),
        params.theta_u(u),
        &p,
        &p,
    ))
}

/// Factors with the item vector and the two projections supplied directly:
/// `match_proj` enters the visual match, `notice_proj` the visual notice.
pub(crate) fn factors_from_projection(
    gu: &[f64],
    gi: &[f64],
    tu: &[f64],
    match_proj: &[f64],
    notice_proj: &[f64],
) -> CausalFactors {
    let hadamard: f64 = (0..gu.len()).map(|k| gu[k] * gi[k] * match_proj[k]).sum();
    CausalFactors {
        m_iu: sigmoid(dot(gu, gi)),
        m_ivu: sigmoid(hadamard),
        n_vu: sigmoid(dot(tu, notice_proj)),
    }
}

pub fn score_causalrec(factors: &CausalFactors, fusion: Fusion) -> f64 {
    factors.fuse(fusion)
}

/// The biased score of any model. `category` is only read by DeepStyle.
pub fn score(params: &ParamSet, u: usize, i: usize, feature: &[f64], category: usize) -> Result<f64> {
    match params.kind {
        ModelKind::Mf => Ok(score_mf(params, u, i)),
        ModelKind::Vbpr => score_vbpr(params, u, i, feature),
        ModelKind::DeepStyle => score_deepstyle(params, u, i, feature, category),
        ModelKind::Amr => score_amr(params, u, i, feature),
        ModelKind::Dvbpr => score_dvbpr(params, u, feature),
        ModelKind::CausalRec => Ok(causalrec_factors(params, u, i, feature)?.fuse(params.fusion)),
    }
}

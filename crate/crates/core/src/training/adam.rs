use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::params::{ParamSet, Table};

/// First and second moment accumulators shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ParamSet,
    pub v: ParamSet,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every trainable table. A non-finite
/// gradient aborts before anything is modified.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    for t in Table::ALL.into_iter().filter(|t| t.trainable()) {
        let (p, g) = (params.table(t), grads.table(t));
        if p.len() != g.len() {
            return Err(Error::Shape {
                expected: p.len(),
                got: g.len(),
            });
        }
        if let Some(k) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient {} in {}[{k}] at step {}",
                g[k],
                t.name(),
                state.t + 1
            )));
        }
    }
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let lr = config.learning_rate;
    let eps = config.adam_eps;
    for t in Table::ALL.into_iter().filter(|t| t.trainable()) {
        let g = grads.table(t);
        let m = state.m.table_mut(t);
        let v = state.v.table_mut(t);
        let p = params.table_mut(t);
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Fusion, ModelKind};
    use crate::params::Shape;

    fn params() -> ParamSet {
        let shape = Shape {
            n_users: 2,
            n_items: 3,
            n_categories: 1,
            dim: 2,
            visual_dim: 2,
        };
        let mut p = ParamSet::zeros(ModelKind::Vbpr, Fusion::Product, shape);
        for (k, x) in p.gamma_i.iter_mut().enumerate() {
            *x = k as f64 * 0.1;
        }
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = params();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        let g = p.zeros_like();
        adam_step(&mut p, &g, &mut s, &TrainConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.alpha[0] = 1.0;
        let config = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &config).unwrap();
        // m_hat = 1, v_hat = 1: step = 0.1 / (1 + 1e-8)
        assert!((p.alpha[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.alpha[0] = 1.0;
        g.e[3] = f64::NAN;
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut s, &TrainConfig::default()).unwrap_err();
        assert_eq!(err.category(), "numerical");
        assert_eq!(p, before);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn delta_is_never_updated() {
        let mut p = ParamSet::zeros(ModelKind::Amr, Fusion::Product, params().shape);
        let mut g = p.zeros_like();
        g.delta.iter_mut().for_each(|x| *x = 1.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &TrainConfig::default()).unwrap();
        assert!(p.delta.iter().all(|&x| x == 0.0));
    }
}

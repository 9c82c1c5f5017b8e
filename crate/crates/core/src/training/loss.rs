use crate::config::TrainConfig;
use crate::models::{softplus, CausalFactors};

/// Pairwise ranking loss `-ln sigmoid(pos - neg) + lambda1 * l2`.
pub fn bpr_loss(score_pos: f64, score_neg: f64, l2: f64, lambda1: f64) -> f64 {
    softplus(-(score_pos - score_neg)) + lambda1 * l2
}

/// CausalRec objective: ranking loss on the fused score, plus (when
/// `config.multitask`) ranking losses on the notice factor and on the match
/// product. The l2 penalty is added once unless
/// `config.multitask_l2_per_term` asks for one per term.
pub fn multitask_loss(pos: &CausalFactors, neg: &CausalFactors, l2: f64, config: &TrainConfig) -> f64 {
    let fused = softplus(-(pos.fuse(config.fusion) - neg.fuse(config.fusion)));
    let penalty = config.lambda1 * l2;
    if !config.multitask {
        return fused + penalty;
    }
    let notice = softplus(-(pos.n_vu - neg.n_vu));
    let matched = softplus(-(pos.matched() - neg.matched()));
    let terms = if config.multitask_l2_per_term { 3.0 } else { 1.0 };
    fused + notice + matched + terms * penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fusion;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bpr_examples() {
        assert!((bpr_loss(0.3, 0.3, 5.0, 0.0) - LN2).abs() < 1e-15);
        assert!(bpr_loss(800.0, -800.0, 0.0, 0.0) < 1e-300);
        assert!(bpr_loss(800.0, -800.0, 0.0, 0.0) >= 0.0);
        // diff = -2 -> softplus(2) = ln(1 + e^2)
        let expect = (1.0 + 2f64.exp()).ln();
        assert!((bpr_loss(0.0, 2.0, 0.0, 0.0) - expect).abs() < 1e-14);
        assert!((expect - 2.1269).abs() < 1e-4);
        assert!((bpr_loss(1.0, 1.0, 2.0, 0.5) - (LN2 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn bpr_is_decreasing_in_margin() {
        let mut prev = f64::INFINITY;
        for k in -50..50 {
            let l = bpr_loss(k as f64 * 0.5, 0.0, 0.0, 0.0);
            assert!(l < prev && l >= 0.0);
            prev = l;
        }
    }

    fn f(a: f64, b: f64, n: f64) -> CausalFactors {
        CausalFactors {
            m_iu: a,
            m_ivu: b,
            n_vu: n,
        }
    }

    #[test]
    fn multitask_examples() {
        let config = TrainConfig {
            lambda1: 0.0,
            ..TrainConfig::default()
        };
        let same = f(0.3, 0.6, 0.9);
        assert!((multitask_loss(&same, &same, 1.0, &config) - 3.0 * LN2).abs() < 1e-14);

        let single = TrainConfig {
            multitask: false,
            ..config.clone()
        };
        assert!((multitask_loss(&same, &same, 1.0, &single) - LN2).abs() < 1e-15);

        // (0.8, 0.8, 0.8) vs (0.5, 0.5, 0.5), each term evaluated by hand:
        // fused 0.512 - 0.125, notice 0.8 - 0.5, match 0.64 - 0.25
        let (p, n) = (f(0.8, 0.8, 0.8), f(0.5, 0.5, 0.5));
        let sp = |x: f64| (1.0 + (-x).exp()).ln();
        let expect = sp(0.387) + sp(0.3) + sp(0.39);
        assert!((multitask_loss(&p, &n, 0.0, &config) - expect).abs() < 1e-14);
        let sum = TrainConfig {
            fusion: Fusion::Sum,
            ..config.clone()
        };
        let expect = sp(0.9) + sp(0.3) + sp(0.39);
        assert!((multitask_loss(&p, &n, 0.0, &sum) - expect).abs() < 1e-14);
    }

    #[test]
    fn penalty_counting() {
        let same = f(0.5, 0.5, 0.5);
        let once = TrainConfig {
            lambda1: 0.1,
            ..TrainConfig::default()
        };
        let thrice = TrainConfig {
            multitask_l2_per_term: true,
            ..once.clone()
        };
        let base = 3.0 * LN2;
        assert!((multitask_loss(&same, &same, 2.0, &once) - (base + 0.2)).abs() < 1e-14);
        assert!((multitask_loss(&same, &same, 2.0, &thrice) - (base + 0.6)).abs() < 1e-14);
    }

    #[test]
    fn multitask_dominates_single_term() {
        let config = TrainConfig {
            lambda1: 0.0,
            ..TrainConfig::default()
        };
        let single = TrainConfig {
            multitask: false,
            ..config.clone()
        };
        for k in 0..100 {
            let x = (k as f64 * 0.37).sin().abs() * 0.98 + 0.01;
            let y = (k as f64 * 0.91).cos().abs() * 0.98 + 0.01;
            let (p, n) = (f(x, y, 1.0 - x), f(y, x, x));
            assert!(multitask_loss(&p, &n, 0.0, &config) >= multitask_loss(&p, &n, 0.0, &single));
        }
    }
}

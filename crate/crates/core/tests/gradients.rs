//! Analytic gradients against central finite differences.

use causalrec::config::{Fusion, ItemIndex, ModelKind, TrainConfig, UserIndex};
use causalrec::data::{ItemFeatures, ItemSide};
use causalrec::params::{ParamSet, Shape, Table};
use causalrec::training::{gradients, triple_loss, TrainTriple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
/// Below this magnitude both derivatives count as zero.
const FLOOR: f64 = 1e-6;

struct Instance {
    params: ParamSet,
    features: ItemFeatures,
    categories: Vec<usize>,
    triple: TrainTriple,
}

fn instance(kind: ModelKind, fusion: Fusion, rng: &mut ChaCha8Rng) -> Instance {
    let shape = Shape {
        n_users: 3,
        n_items: 5,
        n_categories: 2,
        dim: 4,
        visual_dim: 3,
    };
    let mut params = ParamSet::zeros(kind, fusion, shape);
    for t in Table::ALL {
        for x in params.table_mut(t).iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
    }
    let features = ItemFeatures::from_rows(3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let categories = (0..5).map(|_| rng.random_range(0..2)).collect();
    let pos = rng.random_range(0..5);
    let neg = (pos + rng.random_range(1..5)) % 5;
    Instance {
        params,
        features,
        categories,
        triple: TrainTriple {
            user: UserIndex(rng.random_range(0..3)),
            pos: ItemIndex(pos),
            neg: ItemIndex(neg),
        },
    }
}

/// Largest relative error over every trainable entry.
fn max_relative_error(inst: &Instance, config: &TrainConfig) -> f64 {
    let items = ItemSide {
        features: &inst.features,
        categories: Some(&inst.categories),
    };
    let (_, analytic) = gradients(&inst.params, &inst.triple, &items, config).unwrap();
    let mut p = inst.params.clone();
    let mut worst: f64 = 0.0;
    for t in Table::ALL.into_iter().filter(|t| t.trainable()) {
        for k in 0..p.table(t).len() {
            let x = p.table(t)[k];
            p.table_mut(t)[k] = x + H;
            let up = triple_loss(&p, &inst.triple, &items, config).unwrap();
            p.table_mut(t)[k] = x - H;
            let down = triple_loss(&p, &inst.triple, &items, config).unwrap();
            p.table_mut(t)[k] = x;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.table(t)[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn all_kinds_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for kind in ModelKind::ALL {
        let fusions: &[Fusion] = if kind == ModelKind::CausalRec {
            &[Fusion::Product, Fusion::Sum]
        } else {
            &[Fusion::Product]
        };
        for &fusion in fusions {
            for multitask in [true, false] {
                let config = TrainConfig {
                    lambda1: 0.05,
                    fusion,
                    multitask,
                    ..TrainConfig::default()
                };
                let mut worst: f64 = 0.0;
                for _ in 0..50 {
                    worst = worst.max(max_relative_error(&instance(kind, fusion, &mut rng), &config));
                }
                assert!(worst < 1e-4, "{kind} {fusion:?} multitask={multitask}: {worst:e}");
            }
        }
    }
}

#[test]
fn per_term_penalty_is_differentiated_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = TrainConfig {
        lambda1: 0.2,
        multitask_l2_per_term: true,
        ..TrainConfig::default()
    };
    for _ in 0..20 {
        let inst = instance(ModelKind::CausalRec, Fusion::Product, &mut rng);
        assert!(max_relative_error(&inst, &config) < 1e-4);
    }
}

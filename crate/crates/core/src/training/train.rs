use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::adversarial::adversarial_delta;
use super::grad::accumulate_gradients;
use super::sampling::TripleSampler;
use crate::config::{ModelKind, TrainConfig};
use crate::data::{ItemFeatures, ItemSide, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_pairs, ModelScorer};
use crate::params::{init_params, ParamSet, Table};

/// Cutoff used for the validation metric that drives early stopping.
const VALIDATION_K: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean per-triple loss of each completed epoch.
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// Validation MRR per epoch, when early stopping is on.
    pub validation_mrr: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.epoch_loss.len()
    }
}

/// Trains `kind` on the split's training corpus with Adam on mini-batches
/// of sampled triples. Each epoch runs `ceil(interactions / batch_size)`
/// batches. For AMR every triple also contributes its loss under the
/// adversarial perturbation of the positive item; the perturbation lives
/// only for that triple, so the returned parameters carry a zero `delta`.
///
/// With `early_stop_patience` set and a validation split present, training
/// stops once validation MRR has not improved for that many epochs and the
/// best parameters seen are returned.
pub fn train(
    kind: ModelKind,
    split: &SplitDataset,
    features: &ItemFeatures,
    config: &TrainConfig,
) -> Result<(ParamSet, TrainHistory)> {
    config.validate()?;
    let data = &split.train;
    if features.n_items() != data.n_items {
        return Err(Error::Shape {
            expected: data.n_items,
            got: features.n_items(),
        });
    }
    if kind.uses_visual() && features.dim() != config.visual_dim {
        return Err(Error::Config(format!(
            "visual_dim is {} but the features have dimension {}",
            config.visual_dim,
            features.dim()
        )));
    }
    let items = ItemSide::new(features, data);
    let mut params = init_params(kind, config, data.n_users, data.n_items, data.n_categories())?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((params, history));
    }

    let sampler = TripleSampler::new(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // keep the sampling stream apart from the one used for initialization
    rng.set_stream(1);
    let batches = data.n_interactions().div_ceil(config.batch_size);
    let adversary = TrainConfig {
        lambda1: 0.0,
        ..config.clone()
    };
    let validation: Option<Vec<_>> = match config.early_stop_patience {
        Some(_) => split.validation_pairs().map(|p| p.collect()),
        None => None,
    };

    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut total = 0.0;
        for _ in 0..batches {
            for t in Table::ALL {
                grads.table_mut(t).iter_mut().for_each(|x| *x = 0.0);
            }
            let triples = sampler.sample(config.batch_size, &mut rng);
            let scale = 1.0 / triples.len() as f64;
            for triple in &triples {
                total += accumulate_gradients(&params, triple, &items, config, scale, &mut grads)?;
                if kind == ModelKind::Amr && config.amr_epsilon > 0.0 {
                    let delta = adversarial_delta(&params, triple, &items, config.amr_epsilon);
                    params.delta_mut(triple.pos.0).copy_from_slice(&delta);
                    total += accumulate_gradients(&params, triple, &items, &adversary, scale, &mut grads)?;
                    params.delta_mut(triple.pos.0).iter_mut().for_each(|x| *x = 0.0);
                }
            }
            adam_step(&mut params, &grads, &mut adam, config)?;
        }
        let loss = total / (batches * config.batch_size) as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("epoch {epoch} loss is {loss}")));
        }
        history.epoch_loss.push(loss);
        history.epoch_seconds.push(start.elapsed().as_secs_f64());
        log::debug!("{kind} epoch {epoch}: loss {loss:.6}");

        if let (Some(pairs), Some(patience)) = (&validation, config.early_stop_patience) {
            let scorer = ModelScorer::biased(&params, &items)?;
            let mrr = evaluate_pairs(&scorer, data, pairs, VALIDATION_K, config.exclude_train_positives)?.mrr;
            history.validation_mrr.push(mrr);
            if best.as_ref().is_none_or(|(b, _)| mrr > *b) {
                best = Some((mrr, params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    log::info!("{kind}: early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    Ok((best.map_or(params, |(_, p)| p), history))
}

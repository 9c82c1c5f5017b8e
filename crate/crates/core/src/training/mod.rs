//! Pairwise sampling, losses, analytic gradients, Adam, the AMR adversary,
//! the training loop and checkpoints.

mod adam;
mod adversarial;
mod checkpoint;
mod grad;
mod loss;
mod sampling;
mod train;

pub use adam::{adam_step, AdamState};
pub use adversarial::adversarial_delta;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use grad::{accumulate_gradients, gradients, triple_l2, triple_loss};
pub use loss::{bpr_loss, multitask_loss};
pub use sampling::{sample_triples, TrainTriple, TripleSampler};
pub use train::{train, TrainHistory};

//! A small feedforward network whose head emits a valid CDF.
//!
//! Hidden layers are `affine -> batch norm -> ReLU -> dropout`; the head is
//! an affine map followed by softmax and a prefix sum. Training minimizes
//! the cumulative log loss with AdamW, decoupled weight decay and early
//! stopping on a validation carve-out.

mod checkpoint;
mod config;
mod cv;
mod gradcheck;
mod network;
mod optim;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::MlpConfig;
pub use cv::{fold_partition, kfold_cv, kfold_fit, CrossValidated};
pub use gradcheck::{check_gradients, GradientCheck};
pub use network::{Gradients, LossAndGrad, Mode, Network};
pub use optim::AdamW;
pub use tensor::Matrix;
pub use train::{train, Dataset, TrainReport};

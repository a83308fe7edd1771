//! The dueling Q-network policy: model, eviction masks, trajectories,
//! offline training, and the `CRLM` model file.

mod file;
mod mask;
mod model;
mod policy;
mod scalar;
mod train;
mod trajectory;

pub use file::{load_model, model_from_bytes, model_to_bytes, save_model, MAGIC as MODEL_MAGIC, VERSION as MODEL_VERSION};
pub use mask::{full_mask, mask_indices, select_mask, MAX_K};
pub use model::{DuelingModel, Layout, Workspace, HIDDEN1, HIDDEN2};
pub use policy::{candidate_rows, masked_keys, LearnedPolicy, DEFAULT_K};
pub use scalar::Scalar;
pub use train::{
    grad_check, huber, train, train_policy, Dataset, GradCheck, GradSample, RoundStats, TrainConfig, TrainStats,
    Trainer, GRAD_CHECK_FLOOR,
};
pub use trajectory::{generate_trajectories, label_decisions, DecisionSample, GenConfig, Trajectory};

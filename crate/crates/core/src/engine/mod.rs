//! Models, per-sample gradient privatization, and the private training loop.

mod baseline;
mod checkpoint;
mod model;
mod privatize;
mod train;

pub use baseline::{
    constant_schedule, linear_decay_schedule, linear_epoch_sigmas, step_decay_schedule, ClipPolicy, ScheduleSource,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use model::{
    l2_norm, per_sample_gradients, per_sample_losses_and_gradients, Architecture, ModelParams, PerSampleGrads,
};
pub use privatize::{clip_per_sample, noisy_aggregate, poisson_sample, NoiseKey};
pub use train::{train, train_dpsgd, train_traced, train_with_eval, TrainConfig, TrainOutcome};

//! Conditional Wasserstein GAN modelling back-scattered codes as a function
//! of the camera parameters.

mod adam;
mod losses;
mod nets;
mod train;

pub use adam::Adam;
pub use losses::{
    curriculum_alpha, d_loss, g_loss, gradient_penalty, group_moments, CriticLoss, GeneratorLoss, LossWeights,
    PenaltyPoint,
};
pub use nets::{condition_rows, noise, Architecture, BoundNet, DiscriminatorNet, GeneratorNet};
pub use train::{
    comparison_raster, generated_batch, instability, rank_by_stability, stability_rank, train, Checkpoint,
    LossRecord, TrainConfig, TrainObserver, Trainer,
};

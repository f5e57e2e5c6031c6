//! Adversarial training of the forecaster and the baseline GAN regimes.

mod losses;
mod penalty;
mod trainer;

pub use losses::{loss_discriminator, loss_generator_edgan, loss_wgan, mse};
pub use penalty::{
    gradient_penalty, input_gradients, penalty_at, penalty_points, Critic, DiscriminatorCritic, LinearCritic,
    PenaltyMode, PenaltyOutput, PENALTY_FD_STEP,
};
pub use trainer::{train, validate, EpochRecord, StepLosses, TrainConfig, TrainOutcome, Trainer, Variant};

#[cfg(test)]
mod tests;

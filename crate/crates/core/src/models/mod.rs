//! Forecasting generator, sequence discriminator and their checkpoint format.

mod block;
mod checkpoint;
mod config;
mod discriminator;
mod generator;

pub use block::{BlockShape, ResidualBlock, LAYER_NORM_EPS};
pub use checkpoint::{config_digest, decode_checkpoint, encode_checkpoint, Checkpoint};
pub use config::{DataShape, ModelConfig};
pub use discriminator::{
    assemble_disc_input, context_channels, disc_channels, disc_input_matrix, Discriminator, DiscriminatorConfig,
    PROBABILITY_EPS,
};
pub use generator::{decoded_matrix, Batch, Generator, GeneratorConfig};

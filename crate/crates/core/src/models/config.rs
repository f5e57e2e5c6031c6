use serde::{Deserialize, Serialize};

use super::discriminator::{disc_channels, DiscriminatorConfig};
use super::generator::GeneratorConfig;
use crate::dataset::Dataset;

/// Architecture hyperparameters; data-dependent widths come from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub projection: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub decoder_output: usize,
    pub temporal_hidden: usize,
    pub dropout: f64,
    pub gated: bool,
    /// Encoder noise inputs for generators that take a noise vector.
    pub noise_dim: usize,
    pub conv_channels: Vec<usize>,
    pub kernel_width: usize,
    pub conv_stride: usize,
    pub mlp_hidden: Vec<usize>,
    pub include_context: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            projection: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            encoder_hidden: 64,
            decoder_hidden: 64,
            decoder_output: 8,
            temporal_hidden: 32,
            dropout: 0.1,
            gated: false,
            noise_dim: 4,
            conv_channels: vec![16, 32],
            kernel_width: 2,
            conv_stride: 1,
            mlp_hidden: vec![64, 32],
            include_context: true,
        }
    }
}

/// Shape of the data a model is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataShape {
    pub lookback: usize,
    pub horizon: usize,
    pub features: usize,
    pub future_width: usize,
    pub static_width: usize,
}

impl DataShape {
    pub fn of(dataset: &Dataset) -> Self {
        DataShape {
            lookback: dataset.config.lookback,
            horizon: dataset.config.horizon,
            features: dataset.feature_width(),
            future_width: dataset.future_width(),
            static_width: dataset.static_width(),
        }
    }
}

impl ModelConfig {
    pub fn generator(&self, shape: DataShape, with_noise: bool) -> GeneratorConfig {
        GeneratorConfig {
            lookback: shape.lookback,
            horizon: shape.horizon,
            features: shape.features,
            future_width: shape.future_width,
            projection: self.projection,
            static_width: shape.static_width,
            noise_dim: if with_noise { self.noise_dim } else { 0 },
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            encoder_hidden: self.encoder_hidden,
            decoder_hidden: self.decoder_hidden,
            decoder_output: self.decoder_output,
            temporal_hidden: self.temporal_hidden,
            dropout: self.dropout,
            gated: self.gated,
        }
    }

    pub fn discriminator(&self, shape: DataShape) -> DiscriminatorConfig {
        DiscriminatorConfig {
            sequence: shape.lookback + shape.horizon,
            channels: disc_channels(shape.features, shape.static_width, self.include_context),
            conv_channels: self.conv_channels.clone(),
            kernel_width: self.kernel_width,
            stride: self.conv_stride,
            mlp_hidden: self.mlp_hidden.clone(),
            include_context: self.include_context,
        }
    }
}

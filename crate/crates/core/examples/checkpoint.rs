//! Trains briefly, saves a checkpoint, restores it and shows that the
//! restored generator forecasts identically. Loading under a different
//! architecture is refused.
//!
//! ```text
//! cargo run --release --example checkpoint
//! ```

use edgan::dataset::{synthesize, Dataset, DatasetConfig, Split, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::{decode_checkpoint, DataShape, ModelConfig};
use edgan::training::{train, TrainConfig};

fn main() -> edgan::Result<()> {
    let series = synthesize(SynthKind::Ar1, &SynthParams::default(), 300, 4)?;
    let ds = Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default())?;
    let model = ModelConfig {
        encoder_hidden: 16,
        decoder_hidden: 16,
        ..ModelConfig::default()
    };
    let config = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let out = train(&ds, &model, &config)?;
    let (epoch, bytes) = out.checkpoints.last().expect("final checkpoint");
    println!("checkpoint after epoch {}: {} bytes", epoch, bytes.len());

    let shape = DataShape::of(&ds);
    let gen_cfg = model.generator(shape, config.variant.uses_noise());
    let disc_cfg = model.discriminator(shape);
    let restored = decode_checkpoint(bytes, &gen_cfg, &disc_cfg)?;
    let test = ds.samples(Split::Test);
    let a = out.generator.predict(&test, ds.config.target_column)?;
    let b = restored.generator.predict(&test, ds.config.target_column)?;
    println!("restored forecasts identical: {}", a == b);
    println!("optimizer state saved: {}", restored.optimizers.is_some());

    let wider = ModelConfig {
        encoder_hidden: 32,
        ..model
    };
    match decode_checkpoint(bytes, &wider.generator(shape, false), &wider.discriminator(shape)) {
        Err(e) => println!("different architecture: {}", e),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}

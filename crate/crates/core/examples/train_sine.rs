//! Trains the forecaster on a noiseless sine wave and reports the
//! validation RMSE in normalised units.
//!
//! ```text
//! cargo run --release --example train_sine -- [epochs] [learning-rate]
//! ```

use std::time::Instant;

use edgan::dataset::{synthesize, Dataset, DatasetConfig, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::ModelConfig;
use edgan::training::{train, TrainConfig, Variant};

fn main() -> edgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(500, |a| a.parse().expect("epochs"));
    let lr = args.next().map_or(TrainConfig::default().lr_generator, |a| a.parse().expect("learning rate"));

    let series = synthesize(SynthKind::Sine, &SynthParams::default(), 400, 0)?;
    let dataset = Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default())?;
    let config = TrainConfig {
        epochs,
        lr_generator: lr,
        lr_discriminator: lr,
        seed: 7,
        ..TrainConfig::for_variant(Variant::Edgan)
    };
    let start = Instant::now();
    let out = train(&dataset, &ModelConfig::default(), &config)?;
    for r in out.records.iter().filter(|r| r.epoch % 50 == 0 || r.epoch == 1) {
        println!("{}", r.log_line());
    }
    let last = out.records.last().unwrap();
    println!(
        "final validation RMSE {:.5} after {} epochs in {:.1}s",
        last.val_mse.sqrt(),
        last.epoch,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

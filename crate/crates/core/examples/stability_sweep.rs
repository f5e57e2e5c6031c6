//! Trains every variant on every synthetic series and checks that all
//! recorded losses stay finite.
//!
//! ```text
//! cargo run --release --example stability_sweep -- [epochs] [series-length] [variant]
//! ```

use std::time::Instant;

use edgan::dataset::{synthesize, Dataset, DatasetConfig, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::ModelConfig;
use edgan::training::{train, TrainConfig, Variant};

fn main() -> edgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(100, |a| a.parse().expect("epochs"));
    let length = args.next().map_or(260, |a| a.parse().expect("length"));
    let only: Option<Variant> = args.next().map(|a| a.parse().expect("variant"));
    let model = ModelConfig {
        encoder_hidden: 16,
        decoder_hidden: 16,
        temporal_hidden: 8,
        conv_channels: vec![8, 8],
        mlp_hidden: vec![16, 8],
        ..ModelConfig::default()
    };
    for kind in [SynthKind::Sine, SynthKind::Ar1, SynthKind::Gbm] {
        let series = synthesize(kind, &SynthParams::default(), length, 3)?;
        let dataset = Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default())?;
        for variant in Variant::ALL.into_iter().filter(|v| only.is_none_or(|o| o == *v)) {
            let start = Instant::now();
            let config = TrainConfig {
                epochs,
                seed: 1,
                ..TrainConfig::for_variant(variant)
            };
            let out = train(&dataset, &model, &config)?;
            let finite = out
                .records
                .iter()
                .all(|r| r.jg.is_finite() && r.jd.is_finite() && r.val_mse.is_finite());
            let first = &out.records[epochs.min(10) - 1];
            let last = out.records.last().unwrap();
            println!(
                "{:5} {:10} finite={} val_mse@{}={:.3e} val_mse@{}={:.3e} {:.1}s",
                kind.name(),
                variant.name(),
                finite,
                first.epoch,
                first.val_mse,
                last.epoch,
                last.val_mse,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}

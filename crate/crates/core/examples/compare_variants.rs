//! Trains all four variants on the same synthetic dataset, scores each on
//! both splits and scales, and prints the comparison table with the best
//! test value per metric flagged.
//!
//! ```text
//! cargo run --release --example compare_variants -- [epochs]
//! ```

use edgan::dataset::{synthesize, Dataset, DatasetConfig, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::ModelConfig;
use edgan::report::{comparison_table, evaluate_run, Phase, Scale};
use edgan::training::{train, TrainConfig, Variant};

fn main() -> edgan::Result<()> {
    let epochs = std::env::args().nth(1).map_or(40, |a| a.parse().expect("epochs"));
    let params = SynthParams::default();
    let mut series = Vec::new();
    for (i, kind) in [SynthKind::Sine, SynthKind::Gbm].into_iter().enumerate() {
        let mut s = synthesize(kind, &params, 320, i as u64)?;
        s.ticker = kind.name().to_uppercase();
        series.push(s);
    }
    let ds = Dataset::build(&series, &IndicatorConfig::default(), &DatasetConfig::default())?;
    let model = ModelConfig {
        encoder_hidden: 16,
        decoder_hidden: 16,
        temporal_hidden: 8,
        conv_channels: vec![8, 8],
        mlp_hidden: vec![16, 8],
        ..ModelConfig::default()
    };

    let mut rows = Vec::new();
    for variant in Variant::ALL {
        let config = TrainConfig {
            epochs,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            ..TrainConfig::for_variant(variant)
        };
        let out = train(&ds, &model, &config)?;
        println!("{:10} {}", variant.name(), out.records.last().unwrap().log_line());
        rows.extend(evaluate_run(&out.generator, &ds, variant)?);
    }
    let keep: Vec<_> = rows
        .into_iter()
        .filter(|r| r.scale == Scale::Price || r.phase == Phase::Test)
        .collect();
    print!("\n{}", comparison_table(&keep)?.to_text());
    Ok(())
}

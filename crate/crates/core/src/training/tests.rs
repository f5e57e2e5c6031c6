use super::*;
use crate::autodiff::Module;
use crate::dataset::{synthesize, Dataset, DatasetConfig, Split, SynthKind, SynthParams};
use crate::indicators::IndicatorConfig;
use crate::models::{Batch, ModelConfig};

fn sine_dataset(len: usize) -> Dataset {
    let s = synthesize(SynthKind::Sine, &SynthParams::default(), len, 0).unwrap();
    Dataset::build(&[s], &IndicatorConfig::default(), &DatasetConfig::default()).unwrap()
}

fn small_model() -> ModelConfig {
    ModelConfig {
        encoder_hidden: 8,
        decoder_hidden: 8,
        decoder_output: 4,
        temporal_hidden: 4,
        conv_channels: vec![4, 4],
        mlp_hidden: vec![8],
        ..ModelConfig::default()
    }
}

fn cfg(variant: Variant, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        seed: 11,
        ..TrainConfig::for_variant(variant)
    }
}

#[test]
fn one_epoch_one_batch_gives_one_record() {
    let ds = sine_dataset(200);
    let n = ds.samples(Split::Train).len();
    let c = TrainConfig {
        batch_size: n,
        ..cfg(Variant::Edgan, 1)
    };
    let out = train(&ds, &small_model(), &c).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.checkpoints.len(), 1);
}

#[test]
fn every_variant_runs_and_is_deterministic() {
    let ds = sine_dataset(200);
    for v in Variant::ALL {
        let a = train(&ds, &small_model(), &cfg(v, 2)).unwrap();
        let b = train(&ds, &small_model(), &cfg(v, 2)).unwrap();
        let strip = |r: &[EpochRecord]| r.iter().map(|e| e.log_line()).collect::<Vec<_>>();
        assert_eq!(strip(&a.records), strip(&b.records), "{}", v);
        assert_eq!(a.checkpoints, b.checkpoints);
        assert_eq!(a.records[0].penalty.is_some(), v.has_penalty());
    }
}

#[test]
fn zero_generator_lr_freezes_generator() {
    let ds = sine_dataset(200);
    for v in [Variant::Edgan, Variant::WganGp] {
        let c = TrainConfig {
            lr_generator: 0.0,
            ..cfg(v, 1)
        };
        let mut t = Trainer::for_dataset(&ds, &small_model(), c).unwrap();
        let before = t.generator.clone();
        let train_set = ds.samples(Split::Train);
        let val = ds.samples(Split::Validation);
        t.fit(&train_set, &val, |_, _| Ok(())).unwrap();
        for (a, b) in before.parameters().iter().zip(t.generator.parameters()) {
            let same = a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
        }
    }
}

/// Adam on a ReLU network oscillates around kinks, so single steps may tick
/// up; the trend over blocks of steps must still fall.
#[test]
fn generator_descends_against_frozen_discriminator() {
    let ds = sine_dataset(200);
    let model = ModelConfig {
        dropout: 0.0,
        ..small_model()
    };
    for seed in 1..=8 {
        let c = TrainConfig {
            lr_generator: 1e-3,
            lr_discriminator: 0.0,
            supervised_weight: 0.0,
            seed,
            ..cfg(Variant::Edgan, 1)
        };
        let mut t = Trainer::for_dataset(&ds, &model, c).unwrap();
        // confident discriminator: D(x) is near 0 everywhere
        t.discriminator.head.1.value.data_mut()[0] = -6.0;
        let samples = ds.samples(Split::Train);
        let batch = Batch::from_samples(&samples[..16], t.price_column).unwrap();
        let losses: Vec<f64> = (0..50).map(|_| t.train_step(&batch, 1, 0).unwrap().jg).collect();
        let blocks: Vec<f64> = losses.chunks(10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
        for w in blocks.windows(2) {
            assert!(w[1] < w[0], "seed {}: {:?}", seed, blocks);
        }
        assert!(losses[49] < losses[0]);
    }
}

#[test]
fn undersized_dataset_is_config_error() {
    let ds = sine_dataset(200);
    let c = TrainConfig {
        batch_size: 100_000,
        ..cfg(Variant::Edgan, 1)
    };
    assert!(matches!(train(&ds, &small_model(), &c), Err(crate::Error::Config(_))));
}

#[test]
fn validate_arithmetic() {
    let ds = sine_dataset(200);
    let t = Trainer::for_dataset(&ds, &small_model(), cfg(Variant::Edgan, 1)).unwrap();
    let val = ds.samples(Split::Validation);
    let mse = validate(&t.generator, &val, t.price_column).unwrap();
    let preds = t.generator.predict(&val, t.price_column).unwrap();
    let mut brute = 0.0;
    for (s, p) in val.iter().zip(&preds) {
        brute += (s.target[0] - p[0]).powi(2);
    }
    assert!((mse - brute / val.len() as f64).abs() < 1e-12);
    assert!(validate(&t.generator, &[], 3).is_err());
}

#[test]
fn log_lines_round_trip() {
    let r = EpochRecord {
        epoch: 3,
        jg: 0.1 + 0.2,
        jd: 1.0 / 3.0,
        val_mse: 2.5e-7,
        penalty: Some(0.0),
        secs: 0.0,
    };
    assert_eq!(EpochRecord::parse_log_line(&r.log_line()).unwrap(), r);
    let r2 = EpochRecord { penalty: None, ..r };
    assert_eq!(EpochRecord::parse_log_line(&r2.log_line()).unwrap(), r2);
}

mod common;

use edgan::dataset::SynthKind;
use edgan::training::{train, EpochRecord, TrainConfig, Variant};

fn log_of(records: &[EpochRecord]) -> String {
    records.iter().map(|r| r.log_line() + "\n").collect()
}

fn config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 16,
        seed,
        checkpoint_every: 1,
        ..TrainConfig::for_variant(variant)
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let ds = common::synthetic_dataset(SynthKind::Ar1, 160, 2);
    let model = common::compact_model();
    for variant in Variant::ALL {
        let a = train(&ds, &model, &config(variant, 11)).unwrap();
        let b = train(&ds, &model, &config(variant, 11)).unwrap();
        assert_eq!(log_of(&a.records), log_of(&b.records), "{}", variant);
        assert_eq!(a.checkpoints, b.checkpoints, "{}", variant);
        assert_eq!(a.checkpoints.len(), 3);

        let c = train(&ds, &model, &config(variant, 12)).unwrap();
        assert_ne!(a.checkpoints.last(), c.checkpoints.last(), "{}", variant);
    }
}

#[test]
fn log_lines_parse_back_exactly() {
    let ds = common::synthetic_dataset(SynthKind::Sine, 160, 0);
    let out = train(&ds, &common::compact_model(), &config(Variant::WganGp, 1)).unwrap();
    for line in log_of(&out.records).lines() {
        assert!(line.contains("penalty="), "{}", line);
        let rec = EpochRecord::parse_log_line(line).unwrap();
        assert_eq!(rec.log_line(), line);
    }
}

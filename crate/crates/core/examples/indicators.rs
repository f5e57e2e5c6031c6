//! Computes the technical indicators for a synthetic price path and prints
//! the last rows of the 12-column feature matrix.
//!
//! ```text
//! cargo run --example indicators -- [gbm|ar1|sine] [length]
//! ```

use edgan::dataset::{synthesize, SynthKind, SynthParams};
use edgan::indicators::{build_feature_matrix, rsi, stoch_rsi, IndicatorConfig, FEATURE_COLUMNS};

fn main() -> edgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SynthKind = args.next().map_or(Ok(SynthKind::Gbm), |a| a.parse())?;
    let length = args.next().map_or(120, |a| a.parse().expect("length"));

    let series = synthesize(kind, &SynthParams::default(), length, 1)?;
    let cfg = IndicatorConfig::default();
    let (binding, warmup) = cfg.binding_warmup();
    println!("{} days of {}; warm-up {} days set by {}", length, kind.name(), warmup, binding);

    let close = series.closes();
    let r = rsi(&close, cfg.rsi_period)?;
    let s = stoch_rsi(&r, cfg.stoch_rsi_period)?;
    println!("RSI defined from day {}, StochRSI from day {}", r.warmup, s.warmup);

    let fm = build_feature_matrix(&series, &cfg)?;
    println!("date      {}", FEATURE_COLUMNS.map(|c| format!("{:>15}", c)).join(""));
    for row in fm.values.rows().saturating_sub(5)..fm.values.rows() {
        let cells: String = fm.values.row(row).iter().map(|v| format!("{:>15.4}", v)).collect();
        println!("{} {}", fm.dates[row], cells);
    }
    Ok(())
}

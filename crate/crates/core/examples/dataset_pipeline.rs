//! CSV text to a windowed, normalised, split dataset and its binary cache.
//!
//! ```text
//! cargo run --example dataset_pipeline -- [path/to/ohlcv.csv]
//! ```
//!
//! Without an argument two synthetic stocks are written to CSV text and
//! parsed back, so the run exercises the same parser as real files.

use edgan::dataset::{parse_csv, synthesize, Dataset, DatasetConfig, Split, StockSeries, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;

fn load(text: &str, ticker: &str, sector: &str, exchange: &str) -> edgan::Result<StockSeries> {
    let parsed = parse_csv(text.as_bytes(), false)?;
    println!(
        "{}: {} bars, {} skipped, {} rejected",
        ticker,
        parsed.bars.len(),
        parsed.skipped,
        parsed.rejected
    );
    Ok(parsed.into_series(ticker, sector, exchange))
}

fn main() -> edgan::Result<()> {
    let params = SynthParams::default();
    let mut series = Vec::new();
    match std::env::args().nth(1) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| edgan::Error::io(&path, e))?;
            series.push(load(&text, "FILE", "tech", "NASDAQ")?);
        }
        None => {
            let a = synthesize(SynthKind::Gbm, &params, 500, 1)?.to_csv();
            let b = synthesize(SynthKind::Ar1, &params, 500, 2)?.to_csv();
            series.push(load(&a, "GBM", "tech", "NASDAQ")?);
            series.push(load(&b, "AR1", "auto", "NYSE")?);
        }
    }

    let cfg = DatasetConfig::default();
    let ds = Dataset::build(&series, &IndicatorConfig::default(), &cfg)?;
    println!(
        "window {}x{} -> {} step(s); sectors {:?}, exchanges {:?}",
        cfg.lookback,
        ds.feature_width(),
        cfg.horizon,
        ds.vocabulary.sectors,
        ds.vocabulary.exchanges
    );
    for s in &ds.stocks {
        println!(
            "{}: train {} / validation {} / test {} windows; close range [{:.2}, {:.2}]",
            s.ticker,
            s.train.len(),
            s.validation.len(),
            s.test.len(),
            s.normalizer.min[cfg.target_column],
            s.normalizer.max[cfg.target_column]
        );
    }
    let first = ds.samples(Split::Train)[0];
    println!("first window anchored {}, target {:?}", first.anchor_date, first.target);

    let bytes = ds.encode();
    assert_eq!(Dataset::decode(&bytes)?, ds);
    println!("cache {} bytes, sha256 {}", bytes.len(), ds.digest());
    Ok(())
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NormalizationSpec, StockData, WindowSample};
use crate::error::{Error, Result};
use crate::models::Generator;
use crate::training::Variant;

fn check_pair(y: &[f64], yhat: &[f64], op: &str) -> Result<()> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::Contract(format!(
            "{}: need equal non-empty lengths, got {} and {}",
            op,
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, "rmse")?;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, "mae")?;
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / y.len() as f64)
}

/// Coefficient of determination; undefined for a constant `y`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, "r2")?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain {
            op: "r2",
            detail: format!("constant target series (value {}) has no variance", mean),
        });
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Normalized,
    Price,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rmse,
    Mae,
    R2,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rmse, Metric::Mae, Metric::R2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::Mae => "MAE",
            Metric::R2 => "R2",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::R2
    }
}

macro_rules! named_enum {
    ($t:ty, $($v:path => $s:literal),+) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $($v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    other => Err(Error::Format(format!("unknown {} '{}'", stringify!($t).to_lowercase(), other))),
                }
            }
        }
    };
}

named_enum!(Phase, Phase::Train => "train", Phase::Test => "test");
named_enum!(Scale, Scale::Normalized => "normalized", Scale::Price => "price");

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown metric '{}'", s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub stock: String,
    pub phase: Phase,
    pub variant: Variant,
    pub scale: Scale,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

impl MetricsRow {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Rmse => self.rmse,
            Metric::Mae => self.mae,
            Metric::R2 => self.r2,
        }
    }
}

pub const METRICS_HEADER: &str = "stock,phase,variant,scale,rmse,mae,r2";

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.stock, r.phase, r.variant, r.scale, r.rmse, r.mae, r.r2
        ));
    }
    s
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Format(format!("metrics file must start with '{}'", METRICS_HEADER)));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Format(format!("metrics line {}: {} fields", i + 2, f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("metrics line {}: bad number '{}'", i + 2, s)))
            };
            Ok(MetricsRow {
                stock: f[0].to_string(),
                phase: f[1].parse()?,
                variant: f[2].parse().map_err(|e: Error| Error::Format(e.to_string()))?,
                scale: f[3].parse()?,
                rmse: num(f[4])?,
                mae: num(f[5])?,
                r2: num(f[6])?,
            })
        })
        .collect()
}

/// Metrics on both scales for aligned targets and predictions given in
/// normalised units; the price scale undoes the target column's scaling.
pub fn score_pairs(
    stock: &str,
    phase: Phase,
    variant: Variant,
    y: &[f64],
    yhat: &[f64],
    normalizer: &NormalizationSpec,
) -> Result<[MetricsRow; 2]> {
    let col = normalizer.target_column;
    let py: Vec<f64> = y.iter().map(|&v| normalizer.denormalize_value(col, v)).collect();
    let pyhat: Vec<f64> = yhat.iter().map(|&v| normalizer.denormalize_value(col, v)).collect();
    let row = |scale, y: &[f64], yhat: &[f64]| -> Result<MetricsRow> {
        Ok(MetricsRow {
            stock: stock.to_string(),
            phase,
            variant,
            scale,
            rmse: rmse(y, yhat)?,
            mae: mae(y, yhat)?,
            r2: r2(y, yhat)?,
        })
    };
    Ok([row(Scale::Normalized, y, yhat)?, row(Scale::Price, &py, &pyhat)?])
}

fn flatten_targets(samples: &[&WindowSample]) -> Vec<f64> {
    samples.iter().flat_map(|s| s.target.iter().copied()).collect()
}

/// Four rows (train/test × normalised/price) for one stock. The train phase
/// covers the fitting and validation windows, i.e. the whole training range.
pub fn evaluate_stock(
    generator: &Generator,
    stock: &StockData,
    variant: Variant,
    price_column: usize,
) -> Result<Vec<MetricsRow>> {
    let mut out = Vec::with_capacity(4);
    let train: Vec<&WindowSample> = stock.train.iter().chain(&stock.validation).collect();
    let test: Vec<&WindowSample> = stock.test.iter().collect();
    for (phase, samples) in [(Phase::Train, train), (Phase::Test, test)] {
        if samples.is_empty() {
            return Err(Error::Contract(format!("{}: {} split is empty", stock.ticker, phase)));
        }
        let preds: Vec<f64> = generator.predict(&samples, price_column)?.into_iter().flatten().collect();
        let rows = score_pairs(&stock.ticker, phase, variant, &flatten_targets(&samples), &preds, &stock.normalizer)?;
        out.extend(rows);
    }
    Ok(out)
}

/// [`evaluate_stock`] for every stock of the dataset.
pub fn evaluate_run(generator: &Generator, dataset: &Dataset, variant: Variant) -> Result<Vec<MetricsRow>> {
    let mut out = Vec::new();
    for s in &dataset.stocks {
        out.extend(evaluate_stock(generator, s, variant, dataset.config.target_column)?);
    }
    Ok(out)
}

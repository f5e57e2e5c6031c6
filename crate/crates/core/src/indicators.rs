//! Technical indicators computed from daily closes.
//!
//! Every indicator is causal: the value at index `t` only reads prices at
//! indices `<= t`. Indicators with a warm-up return an [`Indicator`] whose
//! first value belongs to index `warmup`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::dataset::StockSeries;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub rsi_period: usize,
    pub stoch_rsi_period: usize,
    pub ema_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub bollinger_period: usize,
    pub bollinger_width: f64,
    pub momentum_lag: usize,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            rsi_period: 14,
            stoch_rsi_period: 14,
            ema_period: 20,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            bollinger_period: 20,
            bollinger_width: 2.0,
            momentum_lag: 1,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let periods = [
            ("rsi_period", self.rsi_period),
            ("stoch_rsi_period", self.stoch_rsi_period),
            ("ema_period", self.ema_period),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
            ("bollinger_period", self.bollinger_period),
            ("momentum_lag", self.momentum_lag),
        ];
        for (name, p) in periods {
            if p == 0 {
                return Err(Error::Config(format!("{} must be at least 1", name)));
            }
        }
        if self.macd_fast >= self.macd_slow {
            return Err(Error::Config(format!(
                "macd_fast ({}) must be below macd_slow ({})",
                self.macd_fast, self.macd_slow
            )));
        }
        if !(self.bollinger_width >= 0.0) {
            return Err(Error::Config("bollinger_width must be non-negative".into()));
        }
        Ok(())
    }

    /// Warm-up of each feature column derived from an indicator, by name.
    pub fn warmups(&self) -> [(&'static str, usize); 6] {
        [
            ("rsi", self.rsi_period),
            ("stoch_rsi", self.rsi_period + self.stoch_rsi_period - 1),
            ("ema", self.ema_period - 1),
            ("macd", self.macd_slow - 1),
            ("bollinger", self.bollinger_period - 1),
            ("log_momentum", self.momentum_lag),
        ]
    }

    /// The longest warm-up and the indicator responsible for it.
    pub fn binding_warmup(&self) -> (&'static str, usize) {
        self.warmups()
            .into_iter()
            .fold(("none", 0), |best, w| if w.1 > best.1 { w } else { best })
    }
}

/// Values of an indicator from index `warmup` onwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Indicator {
    pub warmup: usize,
    pub values: Vec<f64>,
}

impl Indicator {
    /// Value at series index `t`, `None` during warm-up.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.warmup).and_then(|i| self.values.get(i).copied())
    }

    /// Length of the underlying series.
    pub fn series_len(&self) -> usize {
        self.warmup + self.values.len()
    }
}

fn too_short(what: &str, need: usize, got: usize) -> Error {
    Error::Input(format!("{} needs at least {} prices, got {}", what, need, got))
}

/// Exponential moving average with `alpha = 2 / (period + 1)`, seeded by
/// the first price.
pub fn ema(prices: &[f64], period: usize) -> Result<Vec<f64>> {
    if prices.is_empty() {
        return Err(too_short("ema", 1, 0));
    }
    if period == 0 {
        return Err(Error::Config("ema period must be at least 1".into()));
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(prices.len());
    let mut prev = prices[0];
    out.push(prev);
    for &p in &prices[1..] {
        prev = alpha * p + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

/// Wilder's relative strength index in `[0, 100]`.
///
/// The first average gain/loss is the simple mean of the first `period`
/// changes; later averages use Wilder smoothing. A zero average loss gives
/// 100 (or 50 when the average gain is zero as well).
pub fn rsi(prices: &[f64], period: usize) -> Result<Indicator> {
    if period == 0 {
        return Err(Error::Config("rsi period must be at least 1".into()));
    }
    if prices.len() < period + 1 {
        return Err(too_short("rsi", period + 1, prices.len()));
    }
    let change = |t: usize| prices[t] - prices[t - 1];
    let n = period as f64;
    let mut gain = 0.0;
    let mut loss = 0.0;
    for t in 1..=period {
        let d = change(t);
        gain += d.max(0.0);
        loss += (-d).max(0.0);
    }
    gain /= n;
    loss /= n;
    let value = |gain: f64, loss: f64| {
        if loss == 0.0 {
            if gain == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + gain / loss)
        }
    };
    let mut values = vec![value(gain, loss)];
    for t in period + 1..prices.len() {
        let d = change(t);
        gain = (gain * (n - 1.0) + d.max(0.0)) / n;
        loss = (loss * (n - 1.0) + (-d).max(0.0)) / n;
        values.push(value(gain, loss));
    }
    Ok(Indicator {
        warmup: period,
        values,
    })
}

/// Position of the current RSI within its trailing `period`-value range,
/// in `[0, 1]`; a flat window maps to 0.5.
pub fn stoch_rsi(rsi: &Indicator, period: usize) -> Result<Indicator> {
    if period == 0 {
        return Err(Error::Config("stoch_rsi period must be at least 1".into()));
    }
    if rsi.values.len() < period {
        return Err(Error::Input(format!(
            "stoch_rsi needs {} rsi values after warm-up, got {}",
            period,
            rsi.values.len()
        )));
    }
    let values = rsi
        .values
        .windows(period)
        .map(|w| {
            let cur = w[period - 1];
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi == lo {
                0.5
            } else {
                (cur - lo) / (hi - lo)
            }
        })
        .collect();
    Ok(Indicator {
        warmup: rsi.warmup + period - 1,
        values,
    })
}

/// MACD line (fast EMA minus slow EMA) and its signal line.
pub fn macd(prices: &[f64], cfg: &IndicatorConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.macd_fast >= cfg.macd_slow {
        return Err(Error::Config(format!(
            "macd_fast ({}) must be below macd_slow ({})",
            cfg.macd_fast, cfg.macd_slow
        )));
    }
    if prices.len() < cfg.macd_slow {
        return Err(too_short("macd", cfg.macd_slow, prices.len()));
    }
    let fast = ema(prices, cfg.macd_fast)?;
    let slow = ema(prices, cfg.macd_slow)?;
    let line: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let signal = ema(&line, cfg.macd_signal)?;
    Ok((line, signal))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bands {
    pub middle: Indicator,
    pub upper: Indicator,
    pub lower: Indicator,
}

impl Bands {
    pub fn width(&self) -> Indicator {
        Indicator {
            warmup: self.upper.warmup,
            values: self
                .upper
                .values
                .iter()
                .zip(&self.lower.values)
                .map(|(u, l)| u - l)
                .collect(),
        }
    }
}

/// Simple moving average with bands at `± width` population standard
/// deviations.
pub fn bollinger(prices: &[f64], period: usize, width: f64) -> Result<Bands> {
    if period == 0 {
        return Err(Error::Config("bollinger period must be at least 1".into()));
    }
    if prices.len() < period {
        return Err(too_short("bollinger", period, prices.len()));
    }
    let n = period as f64;
    let mut middle = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for w in prices.windows(period) {
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        middle.push(mean);
        upper.push(mean + width * sd);
        lower.push(mean - width * sd);
    }
    let warmup = period - 1;
    Ok(Bands {
        middle: Indicator { warmup, values: middle },
        upper: Indicator { warmup, values: upper },
        lower: Indicator { warmup, values: lower },
    })
}

/// `ln(p[t] / p[t - lag])`.
pub fn log_momentum(prices: &[f64], lag: usize) -> Result<Indicator> {
    if lag == 0 {
        return Err(Error::Config("momentum lag must be at least 1".into()));
    }
    if let Some(bad) = prices.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::Domain {
            op: "log_momentum",
            detail: format!("non-positive price {}", bad),
        });
    }
    if prices.len() <= lag {
        return Err(too_short("log_momentum", lag + 1, prices.len()));
    }
    let values = (lag..prices.len())
        .map(|t| (prices[t] / prices[t - lag]).ln())
        .collect();
    Ok(Indicator { warmup: lag, values })
}

/// Column names of the dynamic feature matrix, in order.
pub const FEATURE_COLUMNS: [&str; 12] = [
    "open",
    "high",
    "low",
    "close",
    "adj_close",
    "volume",
    "rsi",
    "stoch_rsi",
    "ema",
    "macd",
    "bollinger_width",
    "log_momentum",
];

/// Index of the close price in [`FEATURE_COLUMNS`].
pub const CLOSE_COLUMN: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    /// `[rows, 12]`, one row per day after the warm-up.
    pub values: Tensor,
    /// Calendar date of each row.
    pub dates: Vec<NaiveDate>,
    /// Number of leading series days dropped.
    pub warmup: usize,
}

/// Raw OHLCV columns followed by the six indicator columns, computed on
/// the close price. Rows inside the longest indicator warm-up are dropped.
pub fn build_feature_matrix(series: &StockSeries, cfg: &IndicatorConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let (binding, warmup) = cfg.binding_warmup();
    let n = series.bars.len();
    if n <= warmup {
        return Err(Error::Input(format!(
            "{}: {} days do not clear the {}-day warm-up of {}",
            series.ticker, n, warmup, binding
        )));
    }
    let close: Vec<f64> = series.bars.iter().map(|b| b.close).collect();
    let rsi_s = rsi(&close, cfg.rsi_period)?;
    let stoch = stoch_rsi(&rsi_s, cfg.stoch_rsi_period)?;
    let ema_s = ema(&close, cfg.ema_period)?;
    let (macd_line, _) = macd(&close, cfg)?;
    let bands = bollinger(&close, cfg.bollinger_period, cfg.bollinger_width)?.width();
    let mom = log_momentum(&close, cfg.momentum_lag)?;

    let rows = n - warmup;
    let mut data = Vec::with_capacity(rows * FEATURE_COLUMNS.len());
    for t in warmup..n {
        let b = &series.bars[t];
        data.extend_from_slice(&[
            b.open,
            b.high,
            b.low,
            b.close,
            b.adj_close,
            b.volume,
            rsi_s.at(t).unwrap(),
            stoch.at(t).unwrap(),
            ema_s[t],
            macd_line[t],
            bands.at(t).unwrap(),
            mom.at(t).unwrap(),
        ]);
    }
    Ok(FeatureMatrix {
        values: Tensor::new(vec![rows, FEATURE_COLUMNS.len()], data)?,
        dates: series.bars[warmup..].iter().map(|b| b.date).collect(),
        warmup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_anchors() {
        assert_eq!(ema(&[4.0; 5], 7).unwrap(), vec![4.0; 5]);
        let p = [1.0, 5.0, -2.0, 3.0];
        assert_eq!(ema(&p, 1).unwrap(), p.to_vec());
        assert_eq!(ema(&[1.0, 2.0, 3.0], 3).unwrap(), vec![1.0, 1.5, 2.25]);
        assert!(matches!(ema(&[], 3), Err(Error::Input(_))));
    }

    #[test]
    fn rsi_monotone_limits() {
        let up: Vec<f64> = (0..30).map(|i| 10.0 + i as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let r = rsi(&up, 14).unwrap();
        assert_eq!(r.warmup, 14);
        assert!(r.values.iter().all(|&v| v == 100.0));
        assert!(rsi(&down, 14).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(rsi(&up[..14], 14), Err(Error::Input(_))));
    }

    #[test]
    fn stoch_rsi_conventions() {
        let flat = Indicator { warmup: 3, values: vec![40.0; 5] };
        let s = stoch_rsi(&flat, 3).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.5));
        assert_eq!(s.warmup, 5);

        let rising = Indicator { warmup: 0, values: vec![10.0, 20.0, 30.0] };
        assert_eq!(stoch_rsi(&rising, 3).unwrap().values, vec![1.0]);
        assert!(stoch_rsi(&rising, 4).is_err());
    }

    #[test]
    fn macd_constant_and_config() {
        let (line, signal) = macd(&[7.0; 40], &IndicatorConfig::default()).unwrap();
        assert!(line.iter().all(|&v| v == 0.0));
        assert!(signal.iter().all(|&v| v == 0.0));
        let cfg = IndicatorConfig {
            macd_fast: 26,
            ..Default::default()
        };
        assert!(matches!(macd(&[7.0; 40], &cfg), Err(Error::Config(_))));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn bollinger_degenerate_cases() {
        let b = bollinger(&[3.0; 25], 20, 2.0).unwrap();
        for ind in [&b.middle, &b.upper, &b.lower] {
            assert!(ind.values.iter().all(|&v| v == 3.0));
        }
        let p: Vec<f64> = (0..25).map(|i| (i as f64).sin() + 5.0).collect();
        let b = bollinger(&p, 5, 0.0).unwrap();
        assert_eq!(b.upper, b.middle);
        assert_eq!(b.lower, b.middle);
        assert!(bollinger(&p[..4], 5, 2.0).is_err());
    }

    #[test]
    fn log_momentum_anchors() {
        assert!(log_momentum(&[2.0; 6], 2).unwrap().values.iter().all(|&v| v == 0.0));
        let m = log_momentum(&[1.0, 3.0, 2.0], 2).unwrap();
        assert!((m.values[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            log_momentum(&[1.0, 0.0, 2.0], 1),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn binding_warmup_is_stoch_rsi_by_default() {
        assert_eq!(IndicatorConfig::default().binding_warmup(), ("stoch_rsi", 27));
    }
}

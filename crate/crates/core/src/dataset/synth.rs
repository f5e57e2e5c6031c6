//! Deterministic synthetic price series for tests and demos.

use std::f64::consts::TAU;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::series::{OhlcvBar, StockSeries};
use crate::autodiff::{RngState, Stream};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// `offset + amplitude * sin(2πt / period)`, noiseless.
    Sine,
    /// `offset * exp(x_t)` with `x_t = phi * x_{t-1} + sigma * eps`.
    Ar1,
    /// Geometric Brownian motion on a 252-day year.
    Gbm,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "ar1" => Ok(SynthKind::Ar1),
            "gbm" => Ok(SynthKind::Gbm),
            other => Err(Error::Config(format!("unknown series kind '{}'", other))),
        }
    }
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Sine => "sine",
            SynthKind::Ar1 => "ar1",
            SynthKind::Gbm => "gbm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub amplitude: f64,
    pub period: f64,
    pub offset: f64,
    pub phi: f64,
    pub sigma: f64,
    pub drift: f64,
    pub volatility: f64,
    pub start_price: f64,
    pub base_volume: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            amplitude: 10.0,
            period: 25.0,
            offset: 100.0,
            phi: 0.95,
            sigma: 0.02,
            drift: 0.05,
            volatility: 0.2,
            start_price: 100.0,
            base_volume: 1.0e6,
        }
    }
}

fn business_days(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    out
}

/// Generates `length` business days of OHLCV data starting 2010-01-04.
pub fn synthesize(kind: SynthKind, params: &SynthParams, length: usize, seed: u64) -> Result<StockSeries> {
    if length == 0 {
        return Err(Error::Config("synthetic length must be positive".into()));
    }
    let mut rng = RngState::new(seed, Stream::Synth);
    let dates = business_days(length);
    let mut bars = Vec::with_capacity(length);
    match kind {
        SynthKind::Sine => {
            if params.period <= 0.0 {
                return Err(Error::Config("sine period must be positive".into()));
            }
            if params.offset - params.amplitude.abs() <= 0.0 {
                return Err(Error::Config(format!(
                    "offset {} with amplitude {} produces non-positive prices",
                    params.offset, params.amplitude
                )));
            }
            for (t, date) in dates.into_iter().enumerate() {
                let phase = TAU * t as f64 / params.period;
                let close = params.amplitude * phase.sin() + params.offset;
                let spread = 0.005 * close;
                bars.push(OhlcvBar {
                    date,
                    open: close - 0.5 * spread,
                    high: close + spread,
                    low: close - spread,
                    close,
                    adj_close: close,
                    volume: params.base_volume * (1.0 + 0.5 * (phase + 1.0).cos()),
                });
            }
        }
        SynthKind::Ar1 | SynthKind::Gbm => {
            let (start, step_sd) = match kind {
                SynthKind::Ar1 => (params.offset, params.sigma),
                _ => (params.start_price, params.volatility / 252f64.sqrt()),
            };
            if start <= 0.0 {
                return Err(Error::Config(format!(
                    "starting level {} must be positive",
                    start
                )));
            }
            let mut x = 0.0;
            let mut prev_close = start;
            for (t, date) in dates.into_iter().enumerate() {
                let eps = rng.normal();
                let close = match kind {
                    SynthKind::Ar1 => {
                        x = params.phi * x + params.sigma * eps;
                        params.offset * x.exp()
                    }
                    _ => {
                        if t > 0 {
                            let dt = 1.0 / 252.0;
                            let v = params.volatility;
                            x += (params.drift - 0.5 * v * v) * dt + v * dt.sqrt() * eps;
                        }
                        params.start_price * x.exp()
                    }
                };
                let open = if t == 0 { close } else { prev_close };
                let wick = 0.5 * step_sd * rng.normal().abs();
                bars.push(OhlcvBar {
                    date,
                    open,
                    high: open.max(close) * (1.0 + wick),
                    low: open.min(close) * (1.0 - wick).max(0.5),
                    close,
                    adj_close: close,
                    volume: params.base_volume * (0.3 * rng.normal()).exp(),
                });
                prev_close = close;
            }
        }
    }
    Ok(StockSeries {
        ticker: kind.name().to_uppercase(),
        sector: "synthetic".into(),
        exchange: "SYN".into(),
        bars,
    })
}

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::normalize::{fit_normalizer_named, NormalizationSpec};
use super::series::StockSeries;
use super::statics::{encode_static, Vocabulary};
use super::window::{
    build_windows, calendar_features, chronological_split, WindowSample, WindowSource, WindowSpec,
    CALENDAR_WIDTH,
};
use crate::autodiff::Tensor;
use crate::codec::{sha256_hex, Reader, Writer};
use crate::error::{Error, Result};
use crate::indicators::{build_feature_matrix, IndicatorConfig, CLOSE_COLUMN, FEATURE_COLUMNS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Share of usable rows (after indicator warm-up) used for training.
    pub train_fraction: f64,
    /// Trailing share of the training rows held out for validation.
    pub validation_fraction: f64,
    /// Append day-of-week encodings and expose them as future covariates.
    pub calendar_covariates: bool,
    /// Replace volume with `ln(1 + volume)` before scaling.
    pub log_volume: bool,
    pub target_column: usize,
    pub strict: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            lookback: 3,
            horizon: 1,
            stride: 1,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            calendar_covariates: true,
            log_volume: false,
            target_column: CLOSE_COLUMN,
            strict: false,
        }
    }
}

impl DatasetConfig {
    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            lookback: self.lookback,
            horizon: self.horizon,
            stride: self.stride,
        }
    }

    pub fn future_width(&self) -> usize {
        if self.calendar_covariates {
            CALENDAR_WIDTH
        } else {
            0
        }
    }

    /// Width `k` of one dynamic covariate row.
    pub fn feature_width(&self) -> usize {
        FEATURE_COLUMNS.len() + self.future_width()
    }
}

/// Windows and scaling for one stock.
#[derive(Clone, Debug, PartialEq)]
pub struct StockData {
    pub ticker: String,
    pub sector: String,
    pub exchange: String,
    pub normalizer: NormalizationSpec,
    pub train: Vec<WindowSample>,
    pub validation: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

/// A fully prepared, windowed dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub indicators: IndicatorConfig,
    pub vocabulary: Vocabulary,
    pub stocks: Vec<StockData>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

fn prepare_stock(
    series: &StockSeries,
    vocab: &Vocabulary,
    indicators: &IndicatorConfig,
    cfg: &DatasetConfig,
) -> Result<StockData> {
    let spec = cfg.window_spec();
    let static_vector = encode_static(vocab, &series.sector, &series.exchange)?;
    let mut fm = build_feature_matrix(series, indicators)?;
    if cfg.log_volume {
        let cols = fm.values.cols();
        for r in 0..fm.values.rows() {
            let v = &mut fm.values.data_mut()[r * cols + 5];
            *v = v.ln_1p();
        }
    }
    let rows = fm.values.rows();
    let (train_rows, test_rows) = chronological_split(rows, cfg.train_fraction, spec.span())?;

    let train_matrix = Tensor::new(
        vec![train_rows.len(), fm.values.cols()],
        fm.values.data()[..train_rows.len() * fm.values.cols()].to_vec(),
    )?;
    let normalizer = fit_normalizer_named(&train_matrix, cfg.target_column, &FEATURE_COLUMNS)
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {}", series.ticker, m)),
            other => other,
        })?;
    let scaled = normalizer.normalize(&fm.values)?;
    let targets: Vec<f64> = (0..rows).map(|r| scaled.at2(r, cfg.target_column)).collect();

    let kf = cfg.future_width();
    let calendar: Vec<[f64; CALENDAR_WIDTH]> = fm.dates.iter().map(|&d| calendar_features(d)).collect();
    let future = Tensor::new(
        vec![rows, kf],
        calendar.iter().flat_map(|c| c[..kf].to_vec()).collect(),
    )?;
    let features = if kf == 0 {
        scaled
    } else {
        let k = cfg.feature_width();
        let mut data = Vec::with_capacity(rows * k);
        for r in 0..rows {
            data.extend_from_slice(scaled.row(r));
            data.extend_from_slice(future.row(r));
        }
        Tensor::new(vec![rows, k], data)?
    };

    let src = WindowSource {
        features: &features,
        targets: &targets,
        future: &future,
        dates: &fm.dates,
        static_vector: &static_vector,
    };
    let n_train = train_rows.len();
    let (fit_rows, val_rows) = if cfg.validation_fraction > 0.0 {
        let val = ((cfg.validation_fraction * n_train as f64) - 1e-9).ceil() as usize;
        if val < spec.span() || n_train - val < spec.span() {
            return Err(Error::Input(format!(
                "{}: {} training rows cannot hold a {}-row validation tail of {}-day windows",
                series.ticker,
                n_train,
                val,
                spec.span()
            )));
        }
        (0..n_train - val, n_train - val..n_train)
    } else {
        (0..n_train, n_train..n_train)
    };
    let validation = if val_rows.is_empty() {
        Vec::new()
    } else {
        build_windows(&src, val_rows, spec)?
    };
    Ok(StockData {
        ticker: series.ticker.clone(),
        sector: series.sector.clone(),
        exchange: series.exchange.clone(),
        normalizer,
        train: build_windows(&src, fit_rows, spec)?,
        validation,
        test: build_windows(&src, test_rows, spec)?,
    })
}

const CACHE_MAGIC: &[u8; 8] = b"EDGANDS\0";
const CACHE_VERSION: u32 = 1;

fn write_samples(w: &mut Writer, samples: &[WindowSample]) {
    w.u64(samples.len() as u64);
    for s in samples {
        w.tensor(&s.lookback);
        w.tensor(&s.future_covariates);
        w.f64s(&s.static_vector);
        w.f64s(&s.target);
        w.i64(s.anchor_date.num_days_from_ce() as i64);
    }
}

fn read_samples(r: &mut Reader<'_>) -> Result<Vec<WindowSample>> {
    let n = r.u64()? as usize;
    (0..n)
        .map(|_| {
            let lookback = r.tensor()?;
            let future_covariates = r.tensor()?;
            let static_vector = r.f64s()?;
            let target = r.f64s()?;
            let days = r.i64()?;
            let anchor_date = i32::try_from(days)
                .ok()
                .and_then(NaiveDate::from_num_days_from_ce_opt)
                .ok_or_else(|| Error::Format(format!("bad date ordinal {}", days)))?;
            Ok(WindowSample {
                lookback,
                future_covariates,
                static_vector,
                target,
                anchor_date,
            })
        })
        .collect()
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
}

fn write_strs(w: &mut Writer, v: &[String]) {
    w.u32(v.len() as u32);
    for s in v {
        w.str(s);
    }
}

fn read_strs(r: &mut Reader<'_>) -> Result<Vec<String>> {
    let n = r.u32()?;
    (0..n).map(|_| r.str()).collect()
}

impl Dataset {
    /// Prepares every series, registering sectors and exchanges as seen.
    pub fn build(series: &[StockSeries], indicators: &IndicatorConfig, cfg: &DatasetConfig) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for s in series {
            vocab.register(&s.sector, &s.exchange);
        }
        Dataset::build_with_vocabulary(series, vocab, indicators, cfg)
    }

    /// Prepares every series against a fixed vocabulary; unknown categories fail.
    pub fn build_with_vocabulary(
        series: &[StockSeries],
        vocabulary: Vocabulary,
        indicators: &IndicatorConfig,
        cfg: &DatasetConfig,
    ) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Input("no series to prepare".into()));
        }
        if cfg.target_column >= FEATURE_COLUMNS.len() {
            return Err(Error::Config(format!(
                "target column {} outside the {} feature columns",
                cfg.target_column,
                FEATURE_COLUMNS.len()
            )));
        }
        indicators.validate()?;
        let stocks = series
            .iter()
            .map(|s| prepare_stock(s, &vocabulary, indicators, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            config: cfg.clone(),
            indicators: indicators.clone(),
            vocabulary,
            stocks,
        })
    }

    pub fn feature_width(&self) -> usize {
        self.config.feature_width()
    }

    pub fn future_width(&self) -> usize {
        self.config.future_width()
    }

    pub fn static_width(&self) -> usize {
        self.vocabulary.width()
    }

    /// Samples of one split, pooled over stocks in stock order.
    pub fn samples(&self, split: Split) -> Vec<&WindowSample> {
        self.stocks
            .iter()
            .flat_map(|s| match split {
                Split::Train => s.train.iter(),
                Split::Validation => s.validation.iter(),
                Split::Test => s.test.iter(),
            })
            .collect()
    }

    pub fn stock(&self, ticker: &str) -> Option<&StockData> {
        self.stocks.iter().find(|s| s.ticker == ticker)
    }

    /// Versioned binary cache; see the crate README for the layout.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(CACHE_MAGIC);
        w.u32(CACHE_VERSION);
        w.str(&serde_json::to_string(&self.config).expect("config serialises"));
        w.str(&serde_json::to_string(&self.indicators).expect("config serialises"));
        write_strs(&mut w, &self.vocabulary.sectors);
        write_strs(&mut w, &self.vocabulary.exchanges);
        w.u32(self.stocks.len() as u32);
        for s in &self.stocks {
            w.str(&s.ticker);
            w.str(&s.sector);
            w.str(&s.exchange);
            w.f64s(&s.normalizer.min);
            w.f64s(&s.normalizer.max);
            w.u32(s.normalizer.target_column as u32);
            write_samples(&mut w, &s.train);
            write_samples(&mut w, &s.validation);
            write_samples(&mut w, &s.test);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect(CACHE_MAGIC)?;
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported dataset cache version {}", version)));
        }
        let config: DatasetConfig = parse_json(&r.str()?)?;
        let indicators: IndicatorConfig = parse_json(&r.str()?)?;
        let vocabulary = Vocabulary {
            sectors: read_strs(&mut r)?,
            exchanges: read_strs(&mut r)?,
        };
        let n = r.u32()?;
        let mut stocks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let ticker = r.str()?;
            let sector = r.str()?;
            let exchange = r.str()?;
            let normalizer = NormalizationSpec {
                min: r.f64s()?,
                max: r.f64s()?,
                target_column: r.u32()? as usize,
            };
            stocks.push(StockData {
                ticker,
                sector,
                exchange,
                normalizer,
                train: read_samples(&mut r)?,
                validation: read_samples(&mut r)?,
                test: read_samples(&mut r)?,
            });
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Dataset {
            config,
            indicators,
            vocabulary,
            stocks,
        })
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.encode())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synthesize, SynthKind, SynthParams};

    fn sine(len: usize) -> StockSeries {
        synthesize(SynthKind::Sine, &SynthParams::default(), len, 1).unwrap()
    }

    #[test]
    fn builds_and_round_trips() {
        let cfg = DatasetConfig::default();
        let ds = Dataset::build(&[sine(200)], &IndicatorConfig::default(), &cfg).unwrap();
        let s = &ds.stocks[0];
        let usable = 200 - 27;
        let train_rows = (0.7 * usable as f64).ceil() as usize;
        let val_rows = (0.1 * train_rows as f64).ceil() as usize;
        assert_eq!(s.train.len(), train_rows - val_rows - 3);
        assert_eq!(s.validation.len(), val_rows - 3);
        assert_eq!(s.test.len(), usable - train_rows - 3);
        assert_eq!(s.train[0].lookback.shape(), &[3, 14]);
        assert_eq!(s.train[0].future_covariates.shape(), &[1, 2]);
        assert_eq!(s.train[0].static_vector, vec![1.0, 1.0]);

        let back = Dataset::decode(&ds.encode()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.digest(), ds.digest());
    }

    #[test]
    fn training_features_within_unit_range() {
        let ds = Dataset::build(&[sine(200)], &IndicatorConfig::default(), &DatasetConfig::default()).unwrap();
        for w in ds.samples(Split::Train).into_iter().chain(ds.samples(Split::Validation)) {
            assert!(w.lookback.data().iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(w.target.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn no_calendar_means_no_future_columns() {
        let cfg = DatasetConfig {
            calendar_covariates: false,
            ..Default::default()
        };
        let ds = Dataset::build(&[sine(200)], &IndicatorConfig::default(), &cfg).unwrap();
        assert_eq!(ds.stocks[0].train[0].lookback.shape(), &[3, 12]);
        assert_eq!(ds.stocks[0].train[0].future_covariates.shape(), &[1, 0]);
    }

    #[test]
    fn unknown_category_fails() {
        let vocab = Vocabulary::new(&["tech"], &["NYSE"]);
        let err = Dataset::build_with_vocabulary(
            &[sine(200)],
            vocab,
            &IndicatorConfig::default(),
            &DatasetConfig::default(),
        );
        assert!(matches!(err, Err(Error::Vocabulary { .. })));
    }

    #[test]
    fn truncated_cache_rejected() {
        let ds = Dataset::build(&[sine(200)], &IndicatorConfig::default(), &DatasetConfig::default()).unwrap();
        let bytes = ds.encode();
        assert!(Dataset::decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(Dataset::decode(b"NOTACACHE").is_err());
    }
}

use std::f64::consts::TAU;
use std::ops::Range;

use chrono::{Datelike, NaiveDate};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// One supervised example anchored at day `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    /// `[H, k]` normalised dynamic features for days `t-H+1 ..= t`.
    pub lookback: Tensor,
    /// `[F, k_fut]` covariates known in advance for days `t+1 ..= t+F`.
    pub future_covariates: Tensor,
    pub static_vector: Vec<f64>,
    /// Normalised target prices for days `t+1 ..= t+F`.
    pub target: Vec<f64>,
    pub anchor_date: NaiveDate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            lookback: 3,
            horizon: 1,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub fn span(&self) -> usize {
        self.lookback + self.horizon
    }

    /// Number of windows over `rows` rows.
    pub fn count(&self, rows: usize) -> usize {
        if rows < self.span() || self.stride == 0 {
            0
        } else {
            (rows - self.span()) / self.stride + 1
        }
    }
}

/// Row-aligned inputs for [`build_windows`].
pub struct WindowSource<'a> {
    /// `[T, k]`
    pub features: &'a Tensor,
    /// length `T`
    pub targets: &'a [f64],
    /// `[T, k_fut]`; `k_fut` may be zero.
    pub future: &'a Tensor,
    pub dates: &'a [NaiveDate],
    pub static_vector: &'a [f64],
}

/// Slides a window over `rows` of the source: anchors run from `H-1` to
/// `T-F-1` in steps of `stride`, giving `T-H-F+1` samples at stride 1.
pub fn build_windows(src: &WindowSource<'_>, rows: Range<usize>, spec: WindowSpec) -> Result<Vec<WindowSample>> {
    let (h, f) = (spec.lookback, spec.horizon);
    if h == 0 || f == 0 || spec.stride == 0 {
        return Err(Error::Config(
            "lookback, horizon and stride must all be at least 1".into(),
        ));
    }
    let total = src.features.rows();
    if src.targets.len() != total || src.future.rows() != total || src.dates.len() != total {
        return Err(Error::dim(
            "build_windows",
            format!(
                "features {} rows, targets {}, future {}, dates {}",
                total,
                src.targets.len(),
                src.future.rows(),
                src.dates.len()
            ),
        ));
    }
    if rows.end > total || rows.start > rows.end {
        return Err(Error::dim("build_windows", format!("rows {:?} of {}", rows, total)));
    }
    let n = rows.len();
    if n < spec.span() {
        return Err(Error::Input(format!(
            "{} rows cannot hold a window of {} + {} days",
            n, h, f
        )));
    }
    let k = src.features.cols();
    let kf = src.future.cols();
    let mut out = Vec::with_capacity(spec.count(n));
    let mut anchor = rows.start + h - 1;
    while anchor + f < rows.end {
        let first = anchor + 1 - h;
        let lookback: Vec<f64> = (first..=anchor).flat_map(|r| src.features.row(r).to_vec()).collect();
        let future: Vec<f64> = (anchor + 1..=anchor + f)
            .flat_map(|r| src.future.row(r).to_vec())
            .collect();
        out.push(WindowSample {
            lookback: Tensor::new(vec![h, k], lookback)?,
            future_covariates: Tensor::new(vec![f, kf], future)?,
            static_vector: src.static_vector.to_vec(),
            target: src.targets[anchor + 1..=anchor + f].to_vec(),
            anchor_date: src.dates[anchor],
        });
        anchor += spec.stride;
    }
    Ok(out)
}

/// Chronological prefix/suffix split: the first `ceil(fraction * T)` rows
/// train, the rest test. Both sides must hold at least `min_rows`.
pub fn chronological_split(rows: usize, fraction: f64, min_rows: usize) -> Result<(Range<usize>, Range<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} not in (0, 1)",
            fraction
        )));
    }
    let train = ((fraction * rows as f64) - 1e-9).ceil().max(0.0) as usize;
    let train = train.min(rows);
    if train < min_rows || rows - train < min_rows {
        return Err(Error::Input(format!(
            "split of {} rows at {} leaves {} train / {} test rows, need {} each",
            rows,
            fraction,
            train,
            rows - train,
            min_rows
        )));
    }
    Ok((0..train, train..rows))
}

/// Number of calendar covariate columns produced by [`calendar_features`].
pub const CALENDAR_WIDTH: usize = 2;

/// Day-of-week position on the unit circle.
pub fn calendar_features(date: NaiveDate) -> [f64; CALENDAR_WIDTH] {
    let d = date.weekday().num_days_from_monday() as f64;
    let angle = TAU * d / 7.0;
    [angle.sin(), angle.cos()]
}

//! Ingest, scaling, windowing and splitting of daily OHLCV series.

mod manifest;
mod normalize;
mod pipeline;
mod series;
mod statics;
mod synth;
mod window;

pub use manifest::{parse_manifest, render_manifest, ManifestEntry};
pub use normalize::{fit_normalizer, fit_normalizer_named, NormalizationSpec};
pub use pipeline::{Dataset, DatasetConfig, Split, StockData};
pub use series::{parse_csv, OhlcvBar, ParsedCsv, StockSeries, CSV_HEADER};
pub use statics::{encode_static, Vocabulary};
pub use synth::{synthesize, SynthKind, SynthParams};
pub use window::{
    build_windows, calendar_features, chronological_split, WindowSample, WindowSource, WindowSpec,
    CALENDAR_WIDTH,
};

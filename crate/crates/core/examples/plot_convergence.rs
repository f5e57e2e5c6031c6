//! Writes the convergence curves and a real-versus-predicted overlay as
//! CSV and SVG files.
//!
//! ```text
//! cargo run --release --example plot_convergence -- [out-dir] [epochs]
//! ```

use std::fs;
use std::path::PathBuf;

use edgan::dataset::{synthesize, Dataset, DatasetConfig, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::ModelConfig;
use edgan::report::{emit_plot_data, forecast_points, svg_series, PlotSource};
use edgan::training::{train, TrainConfig};
use edgan::Error;

fn main() -> edgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "plots".into()));
    let epochs = args.next().map_or(100, |a| a.parse().expect("epochs"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let series = synthesize(SynthKind::Sine, &SynthParams::default(), 400, 0)?;
    let ds = Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default())?;
    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let out = train(&ds, &ModelConfig::default(), &config)?;

    let points = forecast_points(&out.generator, &ds.stocks[0], ds.config.target_column)?;
    let plots = [
        ("convergence", emit_plot_data(PlotSource::Convergence(&out.records))?),
        ("forecast", emit_plot_data(PlotSource::ForecastOverlay(&points))?),
    ];
    for (name, plot) in plots {
        for (ext, body) in [("csv", &plot.csv), ("svg", &plot.svg)] {
            let path = dir.join(format!("{}.{}", name, ext));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        let series: Vec<String> = svg_series(&plot.svg)?
            .iter()
            .map(|(n, v)| format!("{} ({} points)", n, v.len()))
            .collect();
        println!("{}: {}", dir.join(format!("{}.svg", name)).display(), series.join(", "));
    }
    Ok(())
}

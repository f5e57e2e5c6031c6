use chrono::NaiveDate;

use crate::dataset::StockData;
use crate::error::{Error, Result};
use crate::models::Generator;
use crate::training::EpochRecord;

/// Forecast made at `date` for the next step, in price units.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastPoint {
    pub date: NaiveDate,
    pub real: f64,
    pub predicted: f64,
}

pub const FORECAST_HEADER: &str = "anchor_date,real,predicted";
pub const CONVERGENCE_HEADER: &str = "epoch,jg,jd,val_mse";

#[derive(Clone, Copy, Debug)]
pub enum PlotSource<'a> {
    ForecastOverlay(&'a [ForecastPoint]),
    Convergence(&'a [EpochRecord]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub csv: String,
    pub svg: String,
}

/// First-step forecasts over the stock's test windows, de-normalised.
pub fn forecast_points(generator: &Generator, stock: &StockData, price_column: usize) -> Result<Vec<ForecastPoint>> {
    let samples: Vec<_> = stock.test.iter().collect();
    if samples.is_empty() {
        return Err(Error::Contract(format!("{}: no test windows", stock.ticker)));
    }
    let preds = generator.predict(&samples, price_column)?;
    let col = stock.normalizer.target_column;
    Ok(samples
        .iter()
        .zip(preds)
        .map(|(s, p)| ForecastPoint {
            date: s.anchor_date,
            real: stock.normalizer.denormalize_value(col, s.target[0]),
            predicted: stock.normalizer.denormalize_value(col, p[0]),
        })
        .collect())
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    values: Vec<f64>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn svg_chart(title: &str, x_label: &str, x_ticks: (&str, &str), series: &[Series<'_>]) -> String {
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in series.iter().flat_map(|s| &s.values) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let x = |i: usize| MARGIN + if n > 1 { pw * i as f64 / (n - 1) as f64 } else { pw / 2.0 };
    let y = |v: f64| MARGIN + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    s.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        WIDTH, HEIGHT, WIDTH, HEIGHT
    ));
    s.push_str(&format!("<title>{}</title>\n", title));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<g stroke=\"black\" stroke-width=\"1\">\n<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/>\n<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\"/>\n</g>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    s.push_str(&format!(
        "<g font-family=\"sans-serif\" font-size=\"12\">\n<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n<text x=\"{}\" y=\"{}\">{}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>\n</g>\n",
        WIDTH / 2.0,
        HEIGHT - 15.0,
        x_label,
        MARGIN,
        HEIGHT - MARGIN + 18.0,
        x_ticks.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 18.0,
        x_ticks.1,
        MARGIN - 6.0,
        HEIGHT - MARGIN,
        lo,
        MARGIN - 6.0,
        MARGIN + 4.0,
        hi
    ));
    for (k, ser) in series.iter().enumerate() {
        let points: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let values: Vec<String> = ser.values.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" data-series=\"{}\" data-values=\"{}\" points=\"{}\"/>\n",
            ser.color,
            ser.name,
            values.join(" "),
            points.join(" ")
        ));
        let ly = MARGIN + 16.0 * k as f64;
        s.push_str(&format!(
            "<g font-family=\"sans-serif\" font-size=\"12\"><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text></g>\n",
            WIDTH - MARGIN - 110.0,
            ly,
            WIDTH - MARGIN - 90.0,
            ly,
            ser.color,
            WIDTH - MARGIN - 85.0,
            ly + 4.0,
            ser.name
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Headered CSV plus an SVG line chart of the same numbers. Every polyline
/// carries its exact values in a `data-values` attribute.
pub fn emit_plot_data(source: PlotSource<'_>) -> Result<PlotData> {
    match source {
        PlotSource::ForecastOverlay(points) => {
            if points.is_empty() {
                return Err(Error::Contract("forecast overlay needs at least one point".into()));
            }
            let mut csv = format!("{}\n", FORECAST_HEADER);
            for p in points {
                csv.push_str(&format!("{},{},{}\n", p.date, p.real, p.predicted));
            }
            let first = points[0].date.to_string();
            let last = points[points.len() - 1].date.to_string();
            let svg = svg_chart(
                "Real and predicted prices",
                "date",
                (&first, &last),
                &[
                    Series {
                        name: "real",
                        color: "#1f77b4",
                        values: points.iter().map(|p| p.real).collect(),
                    },
                    Series {
                        name: "predicted",
                        color: "#ff7f0e",
                        values: points.iter().map(|p| p.predicted).collect(),
                    },
                ],
            );
            Ok(PlotData { csv, svg })
        }
        PlotSource::Convergence(records) => {
            if records.is_empty() {
                return Err(Error::Contract("convergence plot needs at least one epoch".into()));
            }
            let mut csv = format!("{}\n", CONVERGENCE_HEADER);
            for r in records {
                csv.push_str(&format!("{},{},{},{}\n", r.epoch, r.jg, r.jd, r.val_mse));
            }
            let first = records[0].epoch.to_string();
            let last = records[records.len() - 1].epoch.to_string();
            let svg = svg_chart(
                "Training convergence",
                "epoch",
                (&first, &last),
                &[
                    Series {
                        name: "val_mse",
                        color: "#2ca02c",
                        values: records.iter().map(|r| r.val_mse).collect(),
                    },
                    Series {
                        name: "jd",
                        color: "#1f77b4",
                        values: records.iter().map(|r| r.jd).collect(),
                    },
                    Series {
                        name: "jg",
                        color: "#d62728",
                        values: records.iter().map(|r| r.jg).collect(),
                    },
                ],
            );
            Ok(PlotData { csv, svg })
        }
    }
}

/// Extracts `(series name, values)` from the `data-values` attributes of an
/// SVG produced by [`emit_plot_data`].
pub fn svg_series(svg: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let attr = |line: &str, key: &str| -> Option<String> {
        let start = line.find(&format!("{}=\"", key))? + key.len() + 2;
        let end = line[start..].find('"')? + start;
        Some(line[start..end].to_string())
    };
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| {
            let name = attr(l, "data-series").ok_or_else(|| Error::Format("polyline without data-series".into()))?;
            let values = attr(l, "data-values")
                .ok_or_else(|| Error::Format("polyline without data-values".into()))?
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| Error::Format(format!("bad data value '{}'", v))))
                .collect::<Result<Vec<f64>>>()?;
            Ok((name, values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> Vec<EpochRecord> {
        (1..=4)
            .map(|e| EpochRecord {
                epoch: e,
                jg: 1.0 / e as f64,
                jd: 0.1 * e as f64,
                val_mse: (e as f64).sqrt(),
                penalty: None,
                secs: 0.0,
            })
            .collect()
    }

    #[test]
    fn convergence_csv_matches_memory() {
        let r = records();
        let p = emit_plot_data(PlotSource::Convergence(&r)).unwrap();
        let mut lines = p.csv.lines();
        assert_eq!(lines.next(), Some(CONVERGENCE_HEADER));
        for (line, rec) in lines.zip(&r) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(f, vec![rec.epoch as f64, rec.jg, rec.jd, rec.val_mse]);
        }
        let series = svg_series(&p.svg).unwrap();
        assert_eq!(series[0].0, "val_mse");
        assert_eq!(series[0].1, r.iter().map(|x| x.val_mse).collect::<Vec<_>>());
    }

    #[test]
    fn overlay_rows_match_points() {
        let d = NaiveDate::from_ymd_opt(2020, 3, 2).unwrap();
        let pts: Vec<_> = (0..3)
            .map(|i| ForecastPoint {
                date: d + chrono::Days::new(i),
                real: 100.0 + i as f64,
                predicted: 100.5 + i as f64 / 3.0,
            })
            .collect();
        let p = emit_plot_data(PlotSource::ForecastOverlay(&pts)).unwrap();
        assert_eq!(p.csv.lines().count(), 4);
        assert!(p.svg.contains("<polyline") && p.svg.ends_with("</svg>\n"));
        let series = svg_series(&p.svg).unwrap();
        assert_eq!(series[1].1, pts.iter().map(|x| x.predicted).collect::<Vec<_>>());
    }

    #[test]
    fn empty_sources_are_rejected() {
        assert!(emit_plot_data(PlotSource::Convergence(&[])).is_err());
        assert!(emit_plot_data(PlotSource::ForecastOverlay(&[])).is_err());
    }
}

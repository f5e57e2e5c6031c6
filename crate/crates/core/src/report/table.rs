use std::collections::{BTreeMap, BTreeSet};

use super::metrics::{Metric, MetricsRow, Phase, Scale};
use crate::error::{Error, Result};
use crate::training::Variant;

/// One value of the comparison grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub stock: String,
    pub scale: Scale,
    pub phase: Phase,
    pub metric: Metric,
    pub variant: Variant,
    pub value: f64,
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    /// Column order.
    pub variants: Vec<Variant>,
    pub cells: Vec<Cell>,
}

pub const COMPARISON_HEADER: &str = "stock,scale,phase,metric,variant,value,best";

type RowKey = (String, Scale, Phase, Metric);

/// Groups rows by stock, scale, phase and metric with variants as columns,
/// flagging the best test value of each metric (lowest RMSE/MAE, highest
/// R²; ties share the flag). A single variant is never flagged.
pub fn comparison_table(rows: &[MetricsRow]) -> Result<ComparisonTable> {
    if rows.is_empty() {
        return Err(Error::Contract("comparison needs at least one metrics row".into()));
    }
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert((r.stock.clone(), r.phase, r.variant, r.scale)) {
            return Err(Error::Contract(format!(
                "duplicate metrics for stock {} phase {} variant {} scale {}",
                r.stock, r.phase, r.variant, r.scale
            )));
        }
    }
    let present: BTreeSet<Variant> = rows.iter().map(|r| r.variant).collect();
    let variants: Vec<Variant> = Variant::ALL.into_iter().filter(|v| present.contains(v)).collect();

    let mut grid: BTreeMap<RowKey, Vec<(Variant, f64)>> = BTreeMap::new();
    for r in rows {
        for m in Metric::ALL {
            grid.entry((r.stock.clone(), r.scale, r.phase, m))
                .or_default()
                .push((r.variant, r.metric(m)));
        }
    }
    let mut cells = Vec::new();
    for ((stock, scale, phase, metric), mut vals) in grid {
        vals.sort_by_key(|(v, _)| variants.iter().position(|x| x == v));
        let best = if phase == Phase::Test && vals.len() > 1 {
            let pick = if metric.higher_is_better() { f64::max } else { f64::min };
            Some(vals.iter().map(|&(_, x)| x).fold(vals[0].1, pick))
        } else {
            None
        };
        for (variant, value) in vals {
            cells.push(Cell {
                stock: stock.clone(),
                scale,
                phase,
                metric,
                variant,
                value,
                best: best == Some(value),
            });
        }
    }
    Ok(ComparisonTable { variants, cells })
}

impl ComparisonTable {
    pub fn get(&self, stock: &str, scale: Scale, phase: Phase, metric: Metric, variant: Variant) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.stock == stock && c.scale == scale && c.phase == phase && c.metric == metric && c.variant == variant
        })
    }

    /// Long-format CSV, one line per cell, values at full precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(COMPARISON_HEADER);
        s.push('\n');
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.stock, c.scale, c.phase, c.metric, c.variant, c.value, c.best
            ));
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Vec<Cell>> {
        let mut lines = text.lines();
        if lines.next() != Some(COMPARISON_HEADER) {
            return Err(Error::Format(format!("comparison file must start with '{}'", COMPARISON_HEADER)));
        }
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 7 {
                    return Err(Error::Format(format!("comparison line '{}' has {} fields", l, f.len())));
                }
                Ok(Cell {
                    stock: f[0].to_string(),
                    scale: f[1].parse()?,
                    phase: f[2].parse()?,
                    metric: f[3].parse()?,
                    variant: f[4].parse().map_err(|e: Error| Error::Format(e.to_string()))?,
                    value: f[5]
                        .parse()
                        .map_err(|_| Error::Format(format!("bad value '{}'", f[5])))?,
                    best: f[6]
                        .parse()
                        .map_err(|_| Error::Format(format!("bad flag '{}'", f[6])))?,
                })
            })
            .collect()
    }

    /// Aligned fixed-width text; best values carry a trailing `*`.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["stock".to_string(), "scale".into(), "phase".into(), "metric".into()];
        header.extend(self.variants.iter().map(|v| v.name().to_string()));
        rows.push(header);
        let mut keyed: BTreeMap<RowKey, Vec<&Cell>> = BTreeMap::new();
        for c in &self.cells {
            keyed
                .entry((c.stock.clone(), c.scale, c.phase, c.metric))
                .or_default()
                .push(c);
        }
        for ((stock, scale, phase, metric), cells) in keyed {
            let mut row = vec![stock, scale.to_string(), phase.to_string(), metric.to_string()];
            for v in &self.variants {
                row.push(match cells.iter().find(|c| c.variant == *v) {
                    Some(c) if c.best => format!("{}*", c.value),
                    Some(c) => c.value.to_string(),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{:<w$}", s, w = w)).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Static SVG bar chart: one group per (stock, scale, phase, metric)
    /// row, one bar per variant. Each bar carries its exact value in
    /// `data-value`; best bars are outlined.
    pub fn to_svg(&self) -> String {
        const BAR: f64 = 18.0;
        const ROW: f64 = 26.0;
        const LABEL: f64 = 280.0;
        const SPAN: f64 = 200.0;
        let colors = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e"];
        let mut keyed: BTreeMap<RowKey, Vec<&Cell>> = BTreeMap::new();
        for c in &self.cells {
            keyed
                .entry((c.stock.clone(), c.scale, c.phase, c.metric))
                .or_default()
                .push(c);
        }
        let nv = self.variants.len().max(1) as f64;
        let width = LABEL + nv * (SPAN + 20.0) + 20.0;
        let height = ROW * (keyed.len() as f64 + 2.0);
        let mut s = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            w = width,
            h = height
        );
        for (j, v) in self.variants.iter().enumerate() {
            let x = LABEL + j as f64 * (SPAN + 20.0);
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"6\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{}\" y=\"16\">{}</text>\n",
                x,
                colors[j % colors.len()],
                x + 16.0,
                v
            ));
        }
        for (i, ((stock, scale, phase, metric), cells)) in keyed.iter().enumerate() {
            let y = ROW * (i as f64 + 1.5);
            let key = format!("{}/{}/{}/{}", stock, scale, phase, metric);
            s.push_str(&format!("<text x=\"6\" y=\"{}\">{}</text>\n", y + 13.0, key));
            let top = cells.iter().map(|c| c.value.abs()).fold(0.0, f64::max);
            for c in cells {
                let j = self.variants.iter().position(|v| *v == c.variant).unwrap_or(0);
                let len = if top > 0.0 { SPAN * c.value.abs() / top } else { 0.0 };
                s.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{}\" fill=\"{}\"{} data-key=\"{}\" data-variant=\"{}\" data-value=\"{}\" data-best=\"{}\"/>\n",
                    LABEL + j as f64 * (SPAN + 20.0),
                    y,
                    len,
                    BAR,
                    colors[j % colors.len()],
                    if c.best { " stroke=\"black\" stroke-width=\"2\"" } else { "" },
                    key,
                    c.variant,
                    c.value,
                    c.best
                ));
            }
        }
        s.push_str("</svg>\n");
        s
    }

    /// Reads `(stock, scale, phase, metric, variant) -> (value, best)` back
    /// out of [`ComparisonTable::to_svg`].
    pub fn parse_svg(svg: &str) -> Result<BTreeMap<(String, String, String, String, String), (f64, bool)>> {
        let attr = |line: &str, key: &str| -> Result<String> {
            let pat = format!(" {}=\"", key);
            let start = line
                .find(&pat)
                .ok_or_else(|| Error::Format(format!("bar without {}", key)))?
                + pat.len();
            let end = line[start..]
                .find('"')
                .ok_or_else(|| Error::Format("unterminated attribute".into()))?;
            Ok(line[start..start + end].to_string())
        };
        let mut out = BTreeMap::new();
        for l in svg.lines().filter(|l| l.contains("data-value=")) {
            let key = attr(l, "data-key")?;
            let parts: Vec<&str> = key.split('/').collect();
            if parts.len() != 4 {
                return Err(Error::Format(format!("bad bar key '{}'", key)));
            }
            let value = attr(l, "data-value")?;
            let value = value
                .parse()
                .map_err(|_| Error::Format(format!("bad bar value '{}'", value)))?;
            let best = attr(l, "data-best")? == "true";
            out.insert(
                (parts[0].into(), parts[1].into(), parts[2].into(), parts[3].into(), attr(l, "data-variant")?),
                (value, best),
            );
        }
        Ok(out)
    }

    /// Reads the numbers back out of [`ComparisonTable::to_text`]:
    /// `(stock, scale, phase, metric, variant) -> (value, best)`.
    pub fn parse_text(text: &str) -> Result<BTreeMap<(String, String, String, String, String), (f64, bool)>> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Format("empty table".into()))?
            .split_whitespace()
            .collect();
        let mut out = BTreeMap::new();
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != header.len() {
                return Err(Error::Format(format!("table row '{}' has {} fields", l, f.len())));
            }
            for (i, v) in f.iter().enumerate().skip(4) {
                if *v == "-" {
                    continue;
                }
                let (num, best) = match v.strip_suffix('*') {
                    Some(n) => (n, true),
                    None => (*v, false),
                };
                let value = num
                    .parse()
                    .map_err(|_| Error::Format(format!("bad table value '{}'", v)))?;
                out.insert(
                    (f[0].into(), f[1].into(), f[2].into(), f[3].into(), header[i].into()),
                    (value, best),
                );
            }
        }
        Ok(out)
    }
}

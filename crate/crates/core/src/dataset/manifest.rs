//! Stock manifest: one record per line, whitespace-separated `key=value`
//! pairs with keys `ticker`, `sector`, `exchange` and `csv`. Blank lines
//! and lines starting with `#` are ignored; relative `csv` paths resolve
//! against the manifest's directory.
//!
//! ```text
//! # ticker   sector       exchange     file
//! ticker=GOOG sector=technology exchange=NASDAQ csv=data/GOOG.csv
//! ticker=F    sector=automotive exchange=NYSE   csv=data/F.csv
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub ticker: String,
    pub sector: String,
    pub exchange: String,
    pub csv: PathBuf,
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (mut ticker, mut sector, mut exchange, mut csv) = (None, None, None, None);
        for pair in line.split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                Error::Format(format!("manifest line {}: '{}' is not key=value", i + 1, pair))
            })?;
            let slot = match k {
                "ticker" => &mut ticker,
                "sector" => &mut sector,
                "exchange" => &mut exchange,
                "csv" => &mut csv,
                other => {
                    return Err(Error::Format(format!(
                        "manifest line {}: unknown key '{}'",
                        i + 1,
                        other
                    )))
                }
            };
            *slot = Some(v.to_string());
        }
        let need = |v: Option<String>, k: &str| {
            v.ok_or_else(|| Error::Format(format!("manifest line {}: missing '{}'", i + 1, k)))
        };
        let ticker = need(ticker, "ticker")?;
        if out.iter().any(|e| e.ticker == ticker) {
            return Err(Error::Format(format!(
                "manifest line {}: duplicate ticker '{}'",
                i + 1,
                ticker
            )));
        }
        let csv = PathBuf::from(need(csv, "csv")?);
        out.push(ManifestEntry {
            ticker,
            sector: need(sector, "sector")?,
            exchange: need(exchange, "exchange")?,
            csv: if csv.is_relative() { base_dir.join(csv) } else { csv },
        });
    }
    if out.is_empty() {
        return Err(Error::Input("manifest lists no stocks".into()));
    }
    Ok(out)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "ticker={} sector={} exchange={} csv={}\n",
                e.ticker,
                e.sector,
                e.exchange,
                e.csv.display()
            )
        })
        .collect()
}

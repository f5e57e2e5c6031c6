use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];
const DATE_FORMAT: &str = "%Y-%m-%d";

/// One trading day.
#[derive(Clone, Debug, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// `low <= min(open, close) <= max(open, close) <= high`.
    pub fn is_consistent(&self) -> bool {
        self.low <= self.open.min(self.close) && self.open.max(self.close) <= self.high
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StockSeries {
    pub ticker: String,
    pub sector: String,
    pub exchange: String,
    /// Strictly increasing dates.
    pub bars: Vec<OhlcvBar>,
}

impl StockSeries {
    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Serialises to the ingest CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for b in &self.bars {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.date.format(DATE_FORMAT),
                b.open,
                b.high,
                b.low,
                b.close,
                b.adj_close,
                b.volume
            ));
        }
        out
    }
}

/// Result of reading one CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCsv {
    pub bars: Vec<OhlcvBar>,
    /// Malformed rows dropped in lenient mode.
    pub skipped: usize,
    /// Rows dropped in strict mode for inconsistent OHLC values.
    pub rejected: usize,
}

impl ParsedCsv {
    pub fn into_series(self, ticker: &str, sector: &str, exchange: &str) -> StockSeries {
        StockSeries {
            ticker: ticker.to_string(),
            sector: sector.to_string(),
            exchange: exchange.to_string(),
            bars: self.bars,
        }
    }
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<OhlcvBar, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()));
    }
    let date = NaiveDate::parse_from_str(rec[0].trim(), DATE_FORMAT)
        .map_err(|e| format!("bad date '{}': {}", &rec[0], e))?;
    let mut nums = [0.0; 6];
    for (i, slot) in nums.iter_mut().enumerate() {
        let field = rec[i + 1].trim();
        let v: f64 = field
            .parse()
            .map_err(|_| format!("bad {} value '{}'", CSV_HEADER[i + 1], field))?;
        if !v.is_finite() {
            return Err(format!("non-finite {} value", CSV_HEADER[i + 1]));
        }
        *slot = v;
    }
    if nums[5] < 0.0 {
        return Err(format!("negative volume {}", nums[5]));
    }
    Ok(OhlcvBar {
        date,
        open: nums[0],
        high: nums[1],
        low: nums[2],
        close: nums[3],
        adj_close: nums[4],
        volume: nums[5],
    })
}

/// Parses `Date,Open,High,Low,Close,Adj Close,Volume` rows.
///
/// Strict mode fails on the first malformed row and drops rows whose OHLC
/// values are inconsistent. Lenient mode skips malformed rows (e.g. the
/// `null` rows some data vendors emit) and keeps everything else.
pub fn parse_csv(bytes: &[u8], strict: bool) -> Result<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {}", e)))?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != CSV_HEADER {
        return Err(Error::Format(format!(
            "header must be '{}', found '{}'",
            CSV_HEADER.join(","),
            names.join(",")
        )));
    }

    let mut bars = Vec::new();
    let mut skipped = 0;
    let mut rejected = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let parsed = rec
            .map_err(|e| e.to_string())
            .and_then(|r| parse_row(&r));
        match parsed {
            Ok(bar) => {
                if strict && !bar.is_consistent() {
                    log::warn!("line {}: inconsistent OHLC values, row rejected", line);
                    rejected += 1;
                } else {
                    bars.push(bar);
                }
            }
            Err(msg) if strict => {
                return Err(Error::Format(format!("line {}: {}", line, msg)));
            }
            Err(msg) => {
                log::debug!("line {}: skipped ({})", line, msg);
                skipped += 1;
            }
        }
    }
    if bars.is_empty() {
        return Err(Error::Input("no valid rows".into()));
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::Input(format!("duplicate date {}", w[0].date)));
    }
    Ok(ParsedCsv {
        bars,
        skipped,
        rejected,
    })
}

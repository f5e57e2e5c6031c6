use crate::error::{Error, Result};

/// Registered categories for the static covariates of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub sectors: Vec<String>,
    pub exchanges: Vec<String>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(sectors: &[S], exchanges: &[S]) -> Self {
        Vocabulary {
            sectors: sectors.iter().map(|s| s.as_ref().to_string()).collect(),
            exchanges: exchanges.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Registers a category pair, keeping first-seen order.
    pub fn register(&mut self, sector: &str, exchange: &str) {
        if !self.sectors.iter().any(|s| s == sector) {
            self.sectors.push(sector.to_string());
        }
        if !self.exchanges.iter().any(|s| s == exchange) {
            self.exchanges.push(exchange.to_string());
        }
    }

    pub fn width(&self) -> usize {
        self.sectors.len() + self.exchanges.len()
    }
}

fn one_hot(kind: &'static str, vocab: &[String], value: &str) -> Result<Vec<f64>> {
    let idx = vocab
        .iter()
        .position(|v| v == value)
        .ok_or_else(|| Error::Vocabulary {
            kind,
            value: value.to_string(),
            registered: vocab.join(", "),
        })?;
    let mut v = vec![0.0; vocab.len()];
    v[idx] = 1.0;
    Ok(v)
}

/// Sector one-hot followed by exchange one-hot.
pub fn encode_static(vocab: &Vocabulary, sector: &str, exchange: &str) -> Result<Vec<f64>> {
    let mut v = one_hot("sector", &vocab.sectors, sector)?;
    v.extend(one_hot("exchange", &vocab.exchanges, exchange)?);
    Ok(v)
}

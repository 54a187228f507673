use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One caplet implied volatility quote. `maturity` is the payment year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapletQuote {
    pub tenor: String,
    pub maturity: usize,
    pub strike: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapletSurface {
    pub quotes: Vec<CapletQuote>,
}

impl CapletSurface {
    pub fn new(quotes: Vec<CapletQuote>) -> Result<Self> {
        let s = Self { quotes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quotes.is_empty() {
            return Err(Error::Config("empty caplet surface".into()));
        }
        for (i, q) in self.quotes.iter().enumerate() {
            if !(q.vol > 0.0 && q.vol.is_finite()) {
                return Err(Error::Config(format!("quote {i}: volatility {} is not positive", q.vol)));
            }
            if q.maturity == 0 || !q.strike.is_finite() {
                return Err(Error::Config(format!("quote {i}: bad maturity or strike")));
            }
        }
        Ok(())
    }

    /// Sorted distinct maturities.
    pub fn maturities(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.quotes.iter().map(|q| q.maturity).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Reads `tenor,maturity,strike,vol` rows.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let quotes = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| Error::Parse {
                    source_name: source_name.to_string(),
                    message: format!("record {}: {e}", i + 1),
                })
            })
            .collect::<Result<Vec<CapletQuote>>>()?;
        Self::new(quotes)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for q in &self.quotes {
            w.serialize(q).expect("quote serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

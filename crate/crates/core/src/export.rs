//! Versioned CSV, JSONL and JSON writers. Every file starts with the schema
//! version, the producing command and the effective configuration.
//!
//! CSV: two `#` comment lines (`# schema_version=1 command=<name>` and
//! `# config=<json>`), then a column header and data rows. JSONL: a header
//! object `{"schema_version", "command", "config"}` on the first line, one
//! record per following line. JSON: a single object with the same three
//! fields plus `data`.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
struct Header<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a Value,
}

/// `prefix1, ..., prefixN`.
pub fn indexed_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub struct CsvWriter<W: Write> {
    inner: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut inner: W, command: &str, config: &Value, columns: &[String]) -> Result<Self> {
        writeln!(inner, "# schema_version={SCHEMA_VERSION} command={command}")?;
        writeln!(inner, "# config={}", serde_json::to_string(config)?)?;
        writeln!(inner, "{}", columns.join(","))?;
        Ok(Self {
            inner,
            columns: columns.len(),
        })
    }

    /// Writes `lead` followed by `values`; `lead` fills the first columns.
    pub fn row<L: std::fmt::Display>(&mut self, lead: &[L], values: &[f64]) -> Result<()> {
        debug_assert_eq!(lead.len() + values.len(), self.columns);
        let mut first = true;
        for l in lead {
            if !first {
                write!(self.inner, ",")?;
            }
            write!(self.inner, "{l}")?;
            first = false;
        }
        for v in values {
            if !first {
                write!(self.inner, ",")?;
            }
            write!(self.inner, "{v}")?;
            first = false;
        }
        writeln!(self.inner)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct JsonlWriter<W: Write> {
    inner: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(mut inner: W, command: &str, config: &Value) -> Result<Self> {
        let header = Header {
            schema_version: SCHEMA_VERSION,
            command,
            config,
        };
        writeln!(inner, "{}", serde_json::to_string(&header)?)?;
        Ok(Self { inner })
    }

    pub fn record<T: Serialize>(&mut self, record: &T) -> Result<()> {
        writeln!(self.inner, "{}", serde_json::to_string(record)?)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Writes `{"schema_version", "command", "config", "data"}` pretty-printed.
pub fn write_json<W: Write, T: Serialize>(mut w: W, command: &str, config: &Value, data: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Document<'a, T> {
        #[serde(flatten)]
        header: Header<'a>,
        data: &'a T,
    }
    let doc = Document {
        header: Header {
            schema_version: SCHEMA_VERSION,
            command,
            config,
        },
        data,
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

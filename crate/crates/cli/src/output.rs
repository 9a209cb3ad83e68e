//! Row serialization.
//!
//! Rows are written by hand rather than through serde so that every float
//! goes out in the same 17-significant-digit scientific form in both CSV and
//! JSON lines. That makes outputs byte-comparable across runs.

use std::io::Write;

use crate::error::CliResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    /// Pre-rendered JSON, written verbatim in JSON lines and as a quoted
    /// string in CSV.
    Json(String),
    Null,
}

impl Field {
    pub fn opt_float(x: Option<f64>) -> Self {
        x.map_or(Field::Null, Field::Float)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Field::Text(s.into())
    }

    fn to_csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::UInt(v) => v.to_string(),
            Field::Float(v) => format_float(*v),
            Field::Bool(v) => v.to_string(),
            Field::Text(s) | Field::Json(s) => s.clone(),
            Field::Null => String::new(),
        }
    }

    fn write_json(&self, out: &mut String) {
        match self {
            Field::Float(v) if !v.is_finite() => out.push_str("null"),
            Field::Text(s) => out.push_str(&serde_json::Value::from(s.as_str()).to_string()),
            Field::Json(s) => out.push_str(s),
            Field::Null => out.push_str("null"),
            other => out.push_str(&other.to_csv()),
        }
    }
}

/// `{:.16e}` for finite values, which keeps 17 significant digits and
/// round-trips every f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A JSON array of floats in the row float format.
pub fn json_float_array(xs: &[f64]) -> String {
    let parts: Vec<String> = xs
        .iter()
        .map(|&x| {
            if x.is_finite() {
                format_float(x)
            } else {
                "null".into()
            }
        })
        .collect();
    format!("[{}]", parts.join(","))
}

pub trait RowSink {
    fn push(&mut self, row: Vec<Field>) -> CliResult<()>;

    /// Called after each completed trial.
    fn flush(&mut self) -> CliResult<()> {
        Ok(())
    }
}

/// Writes rows as CSV (with a header) or JSON lines.
pub struct RowWriter<W: Write> {
    columns: &'static [&'static str],
    inner: Inner<W>,
}

enum Inner<W: Write> {
    Csv(csv::Writer<W>),
    Jsonl(W),
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W, format: Format, columns: &'static [&'static str]) -> CliResult<Self> {
        let inner = match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(columns)?;
                Inner::Csv(w)
            }
            Format::Jsonl => Inner::Jsonl(out),
        };
        Ok(Self { columns, inner })
    }
}

impl<W: Write> RowSink for RowWriter<W> {
    fn push(&mut self, row: Vec<Field>) -> CliResult<()> {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row does not match the header"
        );
        match &mut self.inner {
            Inner::Csv(w) => w.write_record(row.iter().map(Field::to_csv))?,
            Inner::Jsonl(w) => {
                let mut line = String::from("{");
                for (k, (name, field)) in self.columns.iter().zip(&row).enumerate() {
                    if k > 0 {
                        line.push(',');
                    }
                    line.push('"');
                    line.push_str(name);
                    line.push_str("\":");
                    field.write_json(&mut line);
                }
                line.push_str("}\n");
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    fn flush(&mut self) -> CliResult<()> {
        match &mut self.inner {
            Inner::Csv(w) => w.flush()?,
            Inner::Jsonl(w) => w.flush()?,
        }
        Ok(())
    }
}

/// Keeps rows in memory.
#[derive(Debug, Default)]
pub struct Collect {
    pub rows: Vec<Vec<Field>>,
}

impl RowSink for Collect {
    fn push(&mut self, row: Vec<Field>) -> CliResult<()> {
        self.rows.push(row);
        Ok(())
    }
}

/// Drops rows, for callers that only want the summary.
#[derive(Debug, Default)]
pub struct Discard;

impl RowSink for Discard {
    fn push(&mut self, _row: Vec<Field>) -> CliResult<()> {
        Ok(())
    }
}

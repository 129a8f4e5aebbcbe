//! Flat record serialization: CSV with a fixed column order, JSON objects
//! one level deep, numbers at 17 significant digits, atomic file writes.

use std::io::Write;
use std::path::Path;

use crate::densela::fmt_g17;
use crate::error::{Error, Result};

/// One serialized cell. `None` variants become an empty CSV cell and JSON `null`.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(u64),
    Float(f64),
    OptFloat(Option<f64>),
    Bool(bool),
    OptBool(Option<bool>),
    Text(String),
    OptText(Option<String>),
}

impl Field {
    fn csv_cell(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) | Field::OptFloat(Some(v)) => fmt_g17(*v),
            Field::Bool(b) | Field::OptBool(Some(b)) => b.to_string(),
            Field::Text(s) | Field::OptText(Some(s)) => s.clone(),
            Field::OptFloat(None) | Field::OptBool(None) | Field::OptText(None) => String::new(),
        }
    }

    fn json_value(&self) -> String {
        match self {
            Field::Float(v) | Field::OptFloat(Some(v)) => json_number(*v),
            Field::Text(s) | Field::OptText(Some(s)) => json_string(s),
            Field::OptFloat(None) | Field::OptBool(None) | Field::OptText(None) => "null".into(),
            other => other.csv_cell(),
        }
    }
}

/// JSON has no NaN or infinity; those become strings.
fn json_number(v: f64) -> String {
    if v.is_finite() {
        fmt_g17(v)
    } else {
        json_string(&fmt_g17(v))
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A row type with a fixed column order.
pub trait Record {
    fn columns() -> &'static [&'static str];
    /// Cells in [`columns`](Record::columns) order.
    fn fields(&self) -> Vec<Field>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

pub fn to_csv<R: Record>(records: &[R]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(R::columns()).map_err(std::io::Error::from)?;
    for r in records {
        let cells: Vec<String> = r.fields().iter().map(Field::csv_cell).collect();
        debug_assert_eq!(cells.len(), R::columns().len());
        w.write_record(&cells).map_err(std::io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One flat JSON object.
pub fn to_json_object<R: Record>(record: &R) -> String {
    let parts: Vec<String> = R::columns()
        .iter()
        .zip(record.fields())
        .map(|(name, f)| format!("{}:{}", json_string(name), f.json_value()))
        .collect();
    format!("{{{}}}", parts.join(","))
}

/// A JSON array of flat objects, one per line.
pub fn to_json<R: Record>(records: &[R]) -> String {
    if records.is_empty() {
        return "[]\n".into();
    }
    let rows: Vec<String> = records.iter().map(to_json_object).collect();
    format!("[\n{}\n]\n", rows.join(",\n"))
}

pub fn render<R: Record>(records: &[R], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => Ok(to_json(records)),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

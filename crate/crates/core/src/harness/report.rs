//! Result serialization: CSV and JSON with floats rounded to nine significant
//! digits, written atomically (temporary file in the target directory, then
//! rename).

use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use std::io::Write;
use std::path::Path;

/// Significant digits kept in every emitted float.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Format a float with nine significant digits in scientific notation.
pub fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    } else {
        format!("{x}")
    }
}

/// Round to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    round_value(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))
}

/// Rows that can be written as CSV with a fixed column order.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Render rows as CSV text with a header line.
pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = R::header().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}

/// Write `bytes` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::Io(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| Error::Io(e.to_string()))?;
    tmp.flush().map_err(|e| Error::Io(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Optional float as a CSV field; missing values are empty.
pub fn opt_field(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

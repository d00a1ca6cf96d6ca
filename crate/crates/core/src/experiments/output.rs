use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Renders rows as CSV. With `timestamp`, a `# generated_at_unix=...`
/// comment line precedes the header.
pub fn to_csv<T: Serialize>(rows: &[T], timestamp: bool) -> Result<String> {
    let mut buf = Vec::new();
    if timestamp {
        writeln!(buf, "# generated_at_unix={}", unix_now()).expect("write to vec");
    }
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().expect("flush to vec");
    drop(w);
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    rows: &'a T,
}

/// Renders any serializable value as pretty JSON, wrapped as
/// `{"generated_at_unix": ..., "rows": ...}`.
pub fn to_json<T: Serialize>(value: &T, timestamp: bool) -> Result<String> {
    let stamped = Stamped {
        generated_at_unix: timestamp.then(unix_now),
        rows: value,
    };
    let mut s = serde_json::to_string_pretty(&stamped)?;
    s.push('\n');
    Ok(s)
}

pub fn render<T: Serialize>(rows: &[T], format: Format, timestamp: bool) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows, timestamp),
        Format::Json => to_json(&rows, timestamp),
    }
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

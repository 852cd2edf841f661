use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use dowseg::raster::{ArrayData, DType};
use dowseg::{Error, NdArray, Raster};
use serde_json::json;

/// Exit code for invalid input or configuration.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for filesystem failures.
pub const EXIT_IO: i32 = 3;

/// A failure, reported on stderr as one JSON object.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub path: Option<PathBuf>,
    pub code: i32,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            kind: "invalid_input".into(),
            message: message.into(),
            path: None,
            code: EXIT_VALIDATION,
        }
    }

    pub fn at(mut self, path: impl Into<PathBuf>) -> Self {
        self.path.get_or_insert(path.into());
        self
    }

    pub fn to_json(&self, command: &str) -> String {
        json!({
            "command": command,
            "error": self.kind,
            "message": self.message,
            "path": self.path.as_ref().map(|p| p.display().to_string()),
        })
        .to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, path) = match &e {
            Error::Io { path, .. } => (EXIT_IO, Some(path.clone())),
            _ => (EXIT_VALIDATION, None),
        };
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
            path,
            code,
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        let code = if e.is_io_error() {
            EXIT_IO
        } else {
            EXIT_VALIDATION
        };
        Self {
            kind: if code == EXIT_IO { "io" } else { "format" }.into(),
            message: format!("csv: {e}"),
            path: None,
            code,
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        kind: "io".into(),
        message: format!("i/o error on {}: {e}", path.display()),
        path: Some(path.to_path_buf()),
        code: EXIT_IO,
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

/// Files of a directory grouped by stem (name up to the first '.'), keyed
/// by the remaining suffix. Only the listed suffixes are collected.
pub fn group_by_stem(
    dir: &Path,
    suffixes: &[&str],
) -> CliResult<BTreeMap<String, BTreeMap<String, PathBuf>>> {
    let entries = fs::read_dir(dir).map_err(|e| io_failure(dir, e))?;
    let mut groups: BTreeMap<String, BTreeMap<String, PathBuf>> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| io_failure(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((stem, suffix)) = name.split_once('.') else {
            continue;
        };
        if stem.is_empty() || !suffixes.contains(&suffix) {
            continue;
        }
        groups
            .entry(stem.to_string())
            .or_default()
            .insert(suffix.to_string(), path);
    }
    Ok(groups)
}

/// Integer NPY array as an id raster.
pub fn id_raster(array: NdArray) -> CliResult<Raster<u32>> {
    let (shape, data) = array.into_parts();
    if shape.len() != 2 {
        return Err(Failure::invalid(format!(
            "expected a 2D label array, found shape {shape:?}"
        )));
    }
    let values: Vec<u32> = match data {
        ArrayData::U8(v) => v.into_iter().map(u32::from).collect(),
        ArrayData::U16(v) => v.into_iter().map(u32::from).collect(),
        ArrayData::U32(v) => v,
        ArrayData::F32(_) => {
            return Err(Error::Unsupported(format!(
                "label arrays must be unsigned integers, not {}",
                DType::F32.descr()
            ))
            .into())
        }
    };
    Ok(Raster::from_vec(shape[0], shape[1], values)?)
}

/// Reads a headed CSV into rows of named fields.
pub fn read_csv(path: &Path) -> CliResult<Vec<BTreeMap<String, String>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::from(e).at(path))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::from(e).at(path))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Failure::from(e).at(path))?;
        rows.push(
            headers
                .iter()
                .cloned()
                .zip(record.iter().map(|v| v.trim().to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

/// Field `name` of a CSV row; `None` if empty.
pub fn field<T: std::str::FromStr>(
    row: &BTreeMap<String, String>,
    name: &str,
    path: &Path,
) -> CliResult<Option<T>> {
    let raw = row
        .get(name)
        .ok_or_else(|| Failure::invalid(format!("missing column '{name}'")).at(path))?;
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| Failure::invalid(format!("bad value '{raw}' in column '{name}'")).at(path))
}

pub fn required<T: std::str::FromStr>(
    row: &BTreeMap<String, String>,
    name: &str,
    path: &Path,
) -> CliResult<T> {
    field(row, name, path)?
        .ok_or_else(|| Failure::invalid(format!("empty value in column '{name}'")).at(path))
}

/// Formats an optional float with the shortest round-trip representation.
pub fn opt_num(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

/// Parses a kebab-case enum value the same way the config file does.
pub fn parse_choice<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Log lines for stdout and failures for stderr, both in a fixed order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub logs: Vec<String>,
    pub failures: Vec<Failure>,
}

impl Outcome {
    pub fn fail(failure: Failure) -> Self {
        Self {
            logs: Vec::new(),
            failures: vec![failure],
        }
    }

    pub fn absorb(&mut self, result: CliResult<Vec<String>>) {
        match result {
            Ok(lines) => self.logs.extend(lines),
            Err(f) => self.failures.push(f),
        }
    }
}

/// Runs one job per item on the current rayon pool; results keep item order.
pub fn run_jobs<T: Sync>(
    items: &[T],
    job: impl Fn(&T) -> CliResult<Vec<String>> + Sync,
) -> Outcome {
    use rayon::prelude::*;
    let results: Vec<_> = items.par_iter().map(&job).collect();
    let mut out = Outcome::default();
    for r in results {
        out.absorb(r);
    }
    out
}

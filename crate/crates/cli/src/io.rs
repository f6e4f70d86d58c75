//! Process-level plumbing: the CLI error type with machine-readable codes,
//! atomic file writes, and the plain `key=value` config-file reader.

use frag_core::FragError;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Errors surfaced by the CLI. Usage errors exit 2, data errors exit 1 with
/// an error JSON on standard error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { code: String, message: String },
}

impl CliError {
    pub fn data(code: &str, message: impl Into<String>) -> Self {
        CliError::Data {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<FragError> for CliError {
    fn from(e: FragError) -> Self {
        CliError::Data {
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data("io", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes a file atomically: temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a value as pretty JSON with a trailing newline; field order is
/// the struct order, so repeated runs are byte-identical.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::data("json", e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses a plain-text config file of `key=value` lines; `#` starts a
/// comment. Flags given on the command line override these values.
pub fn read_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                number + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// JSON rendering of a dB value; infinities become the "inf" sentinel.
pub fn db_json(value: f64) -> serde_json::Value {
    if value.is_infinite() {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::json!(value)
    }
}

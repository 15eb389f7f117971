//! JSON file loading with precise error locations.

use std::path::Path;

use crate::error::{Error, Result};

/// Parse raw JSON text into a `Value`, reporting syntax errors with the
/// byte offset into `raw`.
pub(crate) fn parse_value(file: &Path, raw: &str) -> Result<serde_json::Value> {
    serde_json::from_str(raw).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        Error::Parse {
            file: file.to_path_buf(),
            offset: byte_offset(raw, line, column),
            line,
            column,
            message: e.to_string(),
        }
    })
}

/// Deserialize a parsed value into `T`, reporting mismatches with the JSON
/// path of the offending element.
pub(crate) fn from_value<T: serde::de::DeserializeOwned>(
    file: &Path,
    path_prefix: &str,
    value: serde_json::Value,
) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (path_prefix.is_empty(), inner == ".") {
            (true, true) => String::from("."),
            (true, false) => inner,
            (false, true) => path_prefix.to_string(),
            (false, false) => format!("{path_prefix}.{inner}"),
        };
        Error::Schema {
            file: file.to_path_buf(),
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// serde_json reports 1-based line/column; convert back to a byte offset.
fn byte_offset(raw: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut remaining_newlines = line - 1;
    let mut offset = 0;
    for (i, b) in raw.bytes().enumerate() {
        if remaining_newlines == 0 {
            break;
        }
        if b == b'\n' {
            remaining_newlines -= 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}

//! Shared helpers for deterministic text output.

use crate::error::Result;
use std::fs;
use std::path::Path;

/// Format a float with 17 significant digits, enough to round-trip f64
/// exactly and to make repeated runs byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Write a file atomically (write to a sibling temp file, then rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

//! Small shared helpers for the command implementations.

use std::path::{Path, PathBuf};

use scsr::{Error, Result};

/// Sorted list of png/ppm files directly inside `dir`. Errors when the
/// directory cannot be read; an empty directory yields an empty list
/// for the caller to complain about with context.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("png") | Some("ppm")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

/// File stem as UTF-8, or a named error.
pub fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Image(format!("unreadable file name {}", path.display())))
}

/// Flag parser for the upscaling factor; rejecting other values here
/// makes a bad --scale a usage error rather than a late domain error.
pub fn parse_scale(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if [2, 4, 8].contains(&v) {
        Ok(v)
    } else {
        Err(format!("scale {v} not in {{2, 4, 8}}"))
    }
}

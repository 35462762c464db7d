//! Run manifests: every command records what it resolved and did as a
//! flat key=value file, written on success and on failure alike, so a
//! run can be audited or repeated from the file alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use scsr::Result;

/// Collects entries over a command's lifetime, then renders and writes
/// them. Keys keep insertion order so manifests diff cleanly.
pub struct RunManifest {
    entries: Vec<(String, String)>,
    start: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest { entries: Vec::new(), start: Instant::now() };
        m.set("command", command);
        m.set("tool_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn set_path(&mut self, key: &str, value: &Path) {
        self.set(key, value.display());
    }

    /// Adds every line of a flat key=value block under a prefix, so a
    /// resolved config embeds without clashing with manifest keys.
    pub fn set_block(&mut self, prefix: &str, flat_text: &str) {
        for line in flat_text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.set(&format!("{prefix}.{}", k.trim()), v.trim());
            }
        }
    }

    /// Writes the manifest including the run status. Returns the path
    /// it wrote so callers can mention it.
    pub fn write(mut self, out_dir: &Path, outcome: &Result<()>) -> Result<PathBuf> {
        match outcome {
            Ok(()) => self.set("status", "ok"),
            Err(e) => {
                self.set("status", "error");
                self.set("error", e);
            }
        }
        self.set("wall_ms", self.start.elapsed().as_millis());
        let mut text = String::new();
        for (k, v) in &self.entries {
            // Values with newlines (multi-line errors) fold to one line.
            let v = v.replace('\n', " / ");
            text.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("run_manifest.txt");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Runs a command body, writes the manifest regardless of the body's
/// outcome, then propagates the body's result (or the write failure if
/// the body succeeded but persisting the manifest did not).
pub fn with_manifest(
    out_dir: &Path,
    manifest: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    let mut manifest = manifest;
    let outcome = body(&mut manifest);
    let wrote = manifest.write(out_dir, &outcome);
    match (outcome, wrote) {
        (Ok(()), Ok(_)) => Ok(()),
        (Ok(()), Err(e)) => Err(e),
        (Err(e), _) => Err(e),
    }
}

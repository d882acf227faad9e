//! Run manifest written next to every primary output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rankweave_core::{Error, Result};

/// Collects the resolved configuration of one run and writes it as
/// key-value text to `<primary output>.manifest`.
pub struct RunManifest {
    entries: Vec<(String, String)>,
    started: Instant,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> RunManifest {
        let mut manifest = RunManifest {
            entries: Vec::new(),
            started: Instant::now(),
        };
        manifest.push("tool", "rankweave");
        manifest.push("version", env!("CARGO_PKG_VERSION"));
        manifest.push("subcommand", subcommand);
        manifest
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_path(&mut self, key: &str, path: &Path) {
        self.push(key, path.display());
    }

    /// Writes the manifest next to `primary_output`.
    pub fn write(mut self, primary_output: &Path) -> Result<()> {
        self.push("duration_ms", self.started.elapsed().as_millis());
        let mut text = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(text, "{k}\t{v}");
        }
        let path = manifest_path(primary_output);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".manifest");
    primary_output.with_file_name(name)
}

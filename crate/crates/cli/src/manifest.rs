//! `manifest.txt`: one line per artifact in an output directory.

use std::path::Path;

use audiolrp::blob::write_atomic;
use audiolrp::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub artifact: String,
    pub command: String,
    pub config_hash: String,
    pub model_hash: String,
    pub seed: u64,
}

impl Entry {
    pub fn line(&self) -> String {
        format!(
            "artifact={} command={} config_hash={} model_hash={} seed={}",
            self.artifact, self.command, self.config_hash, self.model_hash, self.seed
        )
    }
}

pub const FILE: &str = "manifest.txt";

/// Adds or replaces the lines for `entries` and rewrites the manifest.
pub fn record(dir: &Path, entries: &[Entry]) -> Result<()> {
    let path = dir.join(FILE);
    let existing = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::Data(format!("{}: {e}", path.display()))),
    };
    let mut lines: Vec<String> = existing.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
    for e in entries {
        let key = format!("artifact={} ", e.artifact);
        match lines.iter_mut().find(|l| l.starts_with(&key)) {
            Some(l) => *l = e.line(),
            None => lines.push(e.line()),
        }
    }
    let mut text = lines.join("\n");
    text.push('\n');
    write_atomic(&path, text.as_bytes())
}

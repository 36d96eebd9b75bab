use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Output files staged in memory and written together, so a failing run
/// leaves nothing half-written behind.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<String>) {
        self.files.push((path.into(), contents.into()));
    }

    /// Writes every staged file. On the first failure the files already
    /// written by this call are removed again.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written: Vec<PathBuf> = Vec::with_capacity(self.files.len());
        for (path, contents) in &self.files {
            if let Err(e) = write_one(path, contents) {
                for done in &written {
                    let _ = fs::remove_file(done);
                }
                return Err(e);
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

fn write_one(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

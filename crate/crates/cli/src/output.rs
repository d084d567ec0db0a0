use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Files produced by a command, written only once the command has
/// succeeded as a whole.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, content: String) {
        self.files.push((path.into(), content));
    }

    /// Write every file through a temporary sibling and a rename.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, content) in &self.files {
            let tmp = tmp_path(path);
            if let Err(e) = fs::write(&tmp, content) {
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(CliError::io(path, e));
            }
            staged.push(tmp);
        }
        for ((path, _), tmp) in self.files.iter().zip(&staged) {
            fs::rename(tmp, path).map_err(|e| CliError::io(path, e))?;
        }
        Ok(self.files.into_iter().map(|(p, _)| p).collect())
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Directory holding `path`, for resolving sibling references.
pub fn dir_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

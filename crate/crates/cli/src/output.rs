use std::fs;
use std::path::{Component, Path, PathBuf};

use crate::CliError;

/// Every artifact goes through here, so nothing is written outside `root`.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `name` must be a plain relative path without `..`.
    pub fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        let rel = Path::new(name);
        if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(CliError::Usage(format!("output name '{name}' leaves the output directory")));
        }
        Ok(self.root.join(rel))
    }

    fn ensure(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", self.root.display())))
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        self.ensure()?;
        let path = self.path(name)?;
        fs::write(&path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    /// A path under the root for writers that need one (checkpoints).
    pub fn prepare(&self, name: &str) -> Result<PathBuf, CliError> {
        self.ensure()?;
        self.path(name)
    }
}

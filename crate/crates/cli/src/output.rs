use std::fs;
use std::path::{Path, PathBuf};

use crate::experiment::FORMAT_VERSION;
use crate::CliError;

/// Writes result files, each opened by `# config_hash=... format_version=...`.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    header: String,
}

impl OutputDir {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            header: format!("# config_hash={config_hash} format_version={FORMAT_VERSION}\n"),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut text = String::with_capacity(self.header.len() + body.len());
        text.push_str(&self.header);
        text.push_str(body);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

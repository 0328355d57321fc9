use std::io::Write;
use std::path::{Path, PathBuf};

use nvmdse::Error;

/// Collects files for one output directory. Each file is written to a
/// temporary sibling and renamed into place.
pub struct OutputDir {
    root: PathBuf,
    dry_run: bool,
}

impl OutputDir {
    pub fn new(root: &Path, dry_run: bool) -> Self {
        OutputDir {
            root: root.to_path_buf(),
            dry_run,
        }
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        if self.dry_run {
            return Ok(());
        }
        let path = self.root.join(name);
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(|e| Error::io(&self.root, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    /// Renders into memory first so a failing writer leaves no partial file.
    pub fn write_with<F>(&self, name: &str, render: F) -> Result<(), Error>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), Error>,
    {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(name, &buf)
    }
}

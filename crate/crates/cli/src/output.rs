use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Output directory whose files are written through a temporary file in the
/// same directory and renamed into place.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Data(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn write<F, E>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> Result<(), E>,
        CliError: From<E>,
    {
        let target = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        {
            let mut w = BufWriter::new(&mut tmp);
            body(&mut w)?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(target)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        self.write(name, |w| -> Result<(), CliError> {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Data(e.to_string()))?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }
}

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use fdrl_core::grid::{Lattice, Mask};
use fdrl_core::{io, Error, Result};

/// Collects the files a run writes; every write goes through a temporary
/// file in the target directory and is renamed into place.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: impl AsRef<Path>, data: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        let parent = path.parent().unwrap_or(&self.dir).to_path_buf();
        std::fs::create_dir_all(&parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&parent)?;
        tmp.write_all(data)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn text(&mut self, name: impl AsRef<Path>, data: &str) -> Result<PathBuf> {
        self.bytes(name, data.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.bytes(name, &data)
    }

    pub fn lattice(&mut self, name: impl AsRef<Path>, lattice: &Lattice) -> Result<PathBuf> {
        let path = self.path(&name);
        let data = io::lattice_bytes_for(&path, lattice)?;
        self.bytes(name, &data)
    }

    pub fn mask(&mut self, name: impl AsRef<Path>, mask: &Mask) -> Result<PathBuf> {
        let path = self.path(&name);
        let data = io::mask_bytes_for(&path, mask)?;
        self.bytes(name, &data)
    }

    /// Binary mask plus PGM and CSV images for 2D lattices.
    pub fn mask_with_images(&mut self, stem: &str, mask: &Mask) -> Result<()> {
        self.mask(format!("{stem}.bin"), mask)?;
        if mask.dims().len() == 2 {
            self.mask(format!("{stem}.pgm"), mask)?;
            self.mask(format!("{stem}.csv"), mask)?;
        }
        Ok(())
    }

    /// Writes `<name>.manifest.json` listing the configuration and every
    /// file written so far.
    pub fn manifest<C: Serialize>(mut self, name: &str, config: &C) -> Result<()> {
        let outputs: Vec<String> = self.written.iter().map(|p| p.display().to_string()).collect();
        let manifest = serde_json::json!({
            "tool": "fdrl",
            "version": fdrl_core::VERSION,
            "config": config,
            "outputs": outputs,
        });
        self.json(format!("{name}.manifest.json"), &manifest)?;
        Ok(())
    }
}

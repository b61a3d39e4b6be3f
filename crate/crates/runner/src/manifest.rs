use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qxe::io::{write_atomic, CsvTable};

use crate::config::hex;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub fingerprint: String,
    pub vertices: usize,
    pub arcs: usize,
    pub max_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub graph: GraphInfo,
    pub wall_time_s: f64,
    /// Parameters chosen here where the reference setup leaves them open or
    /// is out of reach at desk scale.
    pub substitutions: Vec<String>,
    pub notes: Vec<String>,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    /// Content identity of a run: everything except the wall time.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config_hash.as_bytes());
        for (name, digest) in &self.files {
            h.update(name.as_bytes());
            h.update(digest.as_bytes());
        }
        hex(&h.finalize())
    }
}

/// Writes files atomically into one directory and remembers their hashes.
pub struct OutputDir {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)?;
        self.files.insert(name.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        self.bytes(name, &table.to_bytes())
    }

    /// Records a file that something else already wrote.
    pub fn adopt(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.path(name))?;
        self.files.insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn into_files(self) -> BTreeMap<String, String> {
        self.files
    }
}

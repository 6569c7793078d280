//! Atomic result files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub master_seed: u64,
    pub point_seed: u64,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files into one directory via temp file and rename. If any write
/// fails, everything written so far is removed again.
pub struct AtomicDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl AtomicDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(AtomicDir { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `name` must be a bare file name; nothing is written outside the directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<OutputDigest> {
        if name.is_empty() || Path::new(name).file_name().map(|n| n != name).unwrap_or(true) {
            return Err(CliError::Runtime(format!("refusing to write {name:?} outside the output directory")));
        }
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::Runtime(format!("cannot write {}: {e}", target.display())));
        }
        self.written.push(target);
        Ok(OutputDigest { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 })
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for AtomicDir {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::CliError;

/// Record of one run, written next to its outputs. Passing it back through
/// `--config` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub artifact_version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub inputs: BTreeMap<String, PathBuf>,
    /// Relative to `out_dir`.
    pub outputs: BTreeMap<String, PathBuf>,
    /// Fully resolved configuration of this subcommand.
    pub config: ConfigFile,
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
}

pub struct Clock {
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Clock {
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }

    pub fn started_unix_seconds(&self) -> f64 {
        self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.timer.elapsed().as_secs_f64()
    }
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}-manifest.json")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(Self::file_name(&self.subcommand));
        let file = File::create(&path).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }
}

//! Append-only JSONL log of run outcomes, used to skip finished runs on resume.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub run_id: String,
    /// Hash of everything that determines the run's results.
    pub key: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub unix_time: u64,
}

pub struct Registry {
    path: PathBuf,
}

impl Registry {
    pub fn open(path: &Path) -> Self {
        Registry { path: path.to_path_buf() }
    }

    /// All entries in file order. A truncated last line (from a kill during
    /// a write) is ignored.
    pub fn entries(&self) -> Result<Vec<RegistryEntry>> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        let f = std::fs::File::open(&self.path).with_context(|| format!("opening {}", self.path.display()))?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.with_context(|| format!("reading {}", self.path.display()))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(e) => out.push(e),
                Err(e) => log::warn!("skipping unreadable registry line in {}: {e}", self.path.display()),
            }
        }
        Ok(out)
    }

    /// Latest status per run id, for entries whose key matches.
    pub fn latest(&self) -> Result<BTreeMap<String, RegistryEntry>> {
        let mut out = BTreeMap::new();
        for e in self.entries()? {
            out.insert(e.run_id.clone(), e);
        }
        Ok(out)
    }

    pub fn is_completed(&self, latest: &BTreeMap<String, RegistryEntry>, run_id: &str, key: &str) -> bool {
        latest
            .get(run_id)
            .is_some_and(|e| e.status == RunStatus::Completed && e.key == key)
    }

    pub fn append(&self, run_id: &str, key: &str, status: RunStatus, error: Option<String>) -> Result<()> {
        let entry = RegistryEntry {
            run_id: run_id.to_string(),
            key: key.to_string(),
            status,
            error,
            unix_time: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let torn = std::fs::read(&self.path).is_ok_and(|b| b.last().is_some_and(|&c| c != b'\n'));
        if torn {
            line.insert(0, '\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .with_context(|| format!("opening {}", self.path.display()))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .with_context(|| format!("appending to {}", self.path.display()))
    }
}

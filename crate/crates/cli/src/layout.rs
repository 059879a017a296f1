//! Where each command reads and writes under the output root.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn dataset_bin(&self) -> PathBuf {
        self.dataset_dir().join("glyphs.bin")
    }

    pub fn dataset_manifest(&self) -> PathBuf {
        self.dataset_dir().join("glyphs.json")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.runs_dir().join(run_id)
    }

    pub fn registry(&self) -> PathBuf {
        self.root.join("registry.jsonl")
    }

    pub fn metrics_csv(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn summary_json(&self) -> PathBuf {
        self.root.join("summary.json")
    }

    pub fn probe_dir(&self) -> PathBuf {
        self.root.join("probe")
    }

    pub fn probe_csv(&self) -> PathBuf {
        self.probe_dir().join("probe_results.csv")
    }

    pub fn probe_curves_csv(&self) -> PathBuf {
        self.probe_dir().join("probe_curves.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    if !dir.exists() {
        std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))?;
        log::info!("created {}", dir.display());
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    IidTest,
    OodTest,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::IidTest => "iid_test",
            Split::OodTest => "ood_test",
        }
    }
}

/// One evaluation of one run after one experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub run_id: String,
    #[serde(rename = "T")]
    pub num_tasks: usize,
    #[serde(rename = "M")]
    pub memory_size: usize,
    pub seed: u64,
    pub experience: usize,
    pub split: Split,
    pub accuracy: f64,
    pub loss: f64,
    /// Seconds since the run started; kept out of the CSV so reruns compare equal.
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub fn write_metrics_csv<W: std::io::Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::format("metrics csv", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::format("metrics csv", e.to_string()))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format("metrics csv", format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<MetricRecord>, _>>()
        .map_err(|e| Error::format("metrics csv", format!("{}: {e}", path.display())))
}

/// The records of each run's last evaluated experience.
pub fn final_records(records: &[MetricRecord]) -> Vec<&MetricRecord> {
    let mut last: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let e = last.entry(&r.run_id).or_insert(r.experience);
        *e = (*e).max(r.experience);
    }
    records.iter().filter(|r| last[r.run_id.as_str()] == r.experience).collect()
}

/// Final-experience statistics of one (T, M) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(rename = "T")]
    pub num_tasks: usize,
    #[serde(rename = "M")]
    pub memory_size: usize,
    pub runs: usize,
    pub iid_mean: f64,
    pub iid_std: f64,
    pub ood_mean: f64,
    pub ood_std: f64,
    /// Mean over seeds of `iid - ood`.
    pub gap_mean: f64,
    pub gap_std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-(T, M) summaries of final accuracies, sorted by T then M. Runs
/// missing either split are left out of the gap but kept in their split's mean.
pub fn aggregate(records: &[MetricRecord]) -> Vec<CellSummary> {
    type Key = (usize, usize);
    let mut cells: BTreeMap<Key, BTreeMap<&str, (Option<f64>, Option<f64>)>> = BTreeMap::new();
    for r in final_records(records) {
        let run = cells
            .entry((r.num_tasks, r.memory_size))
            .or_default()
            .entry(&r.run_id)
            .or_default();
        match r.split {
            Split::IidTest => run.0 = Some(r.accuracy),
            Split::OodTest => run.1 = Some(r.accuracy),
        }
    }
    cells
        .into_iter()
        .map(|((t, m), runs)| {
            let iid: Vec<f64> = runs.values().filter_map(|r| r.0).collect();
            let ood: Vec<f64> = runs.values().filter_map(|r| r.1).collect();
            let gap: Vec<f64> = runs.values().filter_map(|r| Some(r.0? - r.1?)).collect();
            let (iid_mean, iid_std) = mean_std(&iid);
            let (ood_mean, ood_std) = mean_std(&ood);
            let (gap_mean, gap_std) = mean_std(&gap);
            CellSummary {
                num_tasks: t,
                memory_size: m,
                runs: runs.len(),
                iid_mean,
                iid_std,
                ood_mean,
                ood_std,
                gap_mean,
                gap_std,
            }
        })
        .collect()
}

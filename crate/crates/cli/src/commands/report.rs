use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use clood_core::continual::{aggregate, mean_std, read_metrics_csv, CellSummary, MetricRecord};
use clood_core::hash::sha256_hex;
use clood_core::probe::ProbeRow;

use super::probe::CurveRow;
use super::write_json;
use crate::layout::ensure_dir;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperienceCurveRow {
    #[serde(rename = "T")]
    pub num_tasks: usize,
    #[serde(rename = "M")]
    pub memory_size: usize,
    pub experience: usize,
    pub split: String,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub loss_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummaryRow {
    #[serde(rename = "T")]
    pub num_tasks: Option<usize>,
    #[serde(rename = "M")]
    pub memory_size: Option<usize>,
    pub tap: String,
    pub task: String,
    pub regime: String,
    pub split: String,
    pub checkpoints: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeCurveSummaryRow {
    #[serde(rename = "T")]
    pub num_tasks: usize,
    #[serde(rename = "M")]
    pub memory_size: usize,
    pub tap: String,
    pub task: String,
    pub regime: String,
    pub experience: usize,
    pub split: String,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Serialize)]
struct Source {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    sources: Vec<Source>,
    gap_vs_memory: &'a [CellSummary],
    experience_curves: &'a [ExperienceCurveRow],
    probe_summary: &'a [ProbeSummaryRow],
    probe_curves: &'a [ProbeCurveSummaryRow],
}

/// `T` and `M` from a run id of the form `T{t}_M{m}_s{seed}`.
pub fn parse_run_id(id: &str) -> Option<(usize, usize, u64)> {
    let mut parts = id.split('_');
    let t = parts.next()?.strip_prefix('T')?.parse().ok()?;
    let m = parts.next()?.strip_prefix('M')?.parse().ok()?;
    let s = parts.next()?.strip_prefix('s')?.parse().ok()?;
    parts.next().is_none().then_some((t, m, s))
}

/// Run id of a checkpoint label: the name of its parent directory.
fn run_of_checkpoint(label: &str) -> Option<(usize, usize, u64)> {
    Path::new(label).parent()?.file_name()?.to_str().and_then(parse_run_id)
}

pub fn experience_curves(records: &[MetricRecord]) -> Vec<ExperienceCurveRow> {
    let mut groups: BTreeMap<(usize, usize, usize, &str), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.num_tasks, r.memory_size, r.experience, r.split.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((t, m, e, split), rs)| {
            let acc: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            ExperienceCurveRow {
                num_tasks: t,
                memory_size: m,
                experience: e,
                split: split.to_string(),
                runs: rs.len(),
                accuracy_mean,
                accuracy_std,
                loss_mean: rs.iter().map(|r| r.loss).sum::<f64>() / rs.len() as f64,
            }
        })
        .collect()
}

pub fn probe_summary(rows: &[ProbeRow]) -> Vec<ProbeSummaryRow> {
    type Key = (Option<usize>, Option<usize>, String, String, String, String);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let run = run_of_checkpoint(&r.checkpoint);
        groups
            .entry((
                run.map(|x| x.0),
                run.map(|x| x.1),
                r.tap.clone(),
                r.task.as_str().to_string(),
                r.regime.as_str().to_string(),
                r.split.clone(),
            ))
            .or_default()
            .push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((t, m, tap, task, regime, split), acc)| {
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            ProbeSummaryRow {
                num_tasks: t,
                memory_size: m,
                tap,
                task,
                regime,
                split,
                checkpoints: acc.len(),
                accuracy_mean,
                accuracy_std,
            }
        })
        .collect()
}

pub fn probe_curve_summary(rows: &[CurveRow]) -> Vec<ProbeCurveSummaryRow> {
    type Key = (usize, usize, String, String, String, usize, String);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.num_tasks,
                r.memory_size,
                r.tap.clone(),
                r.task.as_str().to_string(),
                r.regime.as_str().to_string(),
                r.experience,
                r.split.clone(),
            ))
            .or_default()
            .push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((t, m, tap, task, regime, experience, split), acc)| {
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            ProbeCurveSummaryRow {
                num_tasks: t,
                memory_size: m,
                tap,
                task,
                regime,
                experience,
                split,
                runs: acc.len(),
                accuracy_mean,
                accuracy_std,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

/// Metrics files: the combined grid CSV, else every per-run CSV in name order.
fn metrics_sources(dir: &Path) -> Result<Vec<PathBuf>> {
    let combined = dir.join("metrics.csv");
    if combined.is_file() {
        return Ok(vec![combined]);
    }
    let runs = dir.join("runs");
    let mut found = Vec::new();
    if runs.is_dir() {
        for entry in std::fs::read_dir(&runs).with_context(|| format!("listing {}", runs.display()))? {
            let p = entry?.path().join("metrics.csv");
            if p.is_file() {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

fn source(dir: &Path, path: &Path) -> Result<Source> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Source {
        file: path.strip_prefix(dir).unwrap_or(path).display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn run(dir: &Path, dry_run: bool) -> Result<()> {
    let metrics_files = metrics_sources(dir)?;
    let probe_csv = dir.join("probe").join("probe_results.csv");
    let curves_csv = dir.join("probe").join("probe_curves.csv");
    let has_probe = probe_csv.is_file();
    let has_curves = curves_csv.is_file();
    if metrics_files.is_empty() && !has_probe {
        bail!(
            "no results CSV under {}: expected metrics.csv, runs/*/metrics.csv or probe/probe_results.csv",
            dir.display()
        );
    }
    let out = dir.join("report");
    if dry_run {
        println!("would aggregate {} metrics file(s) into {}", metrics_files.len(), out.display());
        return Ok(());
    }
    let mut sources = Vec::new();
    let mut records = Vec::new();
    for f in &metrics_files {
        records.extend(read_metrics_csv(f)?);
        sources.push(source(dir, f)?);
    }
    let probe_rows: Vec<ProbeRow> = if has_probe {
        sources.push(source(dir, &probe_csv)?);
        read_csv(&probe_csv)?
    } else {
        Vec::new()
    };
    let curve_rows: Vec<CurveRow> = if has_curves {
        sources.push(source(dir, &curves_csv)?);
        read_csv(&curves_csv)?
    } else {
        Vec::new()
    };

    let cells = aggregate(&records);
    let curves = experience_curves(&records);
    let probes = probe_summary(&probe_rows);
    let probe_curves = probe_curve_summary(&curve_rows);
    ensure_dir(&out)?;
    write_csv(&out.join("gap_vs_memory.csv"), &cells)?;
    write_csv(&out.join("experience_curves.csv"), &curves)?;
    write_csv(&out.join("probe_summary.csv"), &probes)?;
    write_csv(&out.join("probe_curves.csv"), &probe_curves)?;
    write_json(
        &out.join("report.json"),
        &Report {
            sources,
            gap_vs_memory: &cells,
            experience_curves: &curves,
            probe_summary: &probes,
            probe_curves: &probe_curves,
        },
    )?;
    println!(
        "report: {} cells, {} curve points, {} probe groups written to {}",
        cells.len(),
        curves.len(),
        probes.len(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_ids_parse() {
        assert_eq!(parse_run_id("T10_M1000_s2"), Some((10, 1000, 2)));
        assert_eq!(parse_run_id("T10_M1000"), None);
        assert_eq!(parse_run_id("x"), None);
        assert_eq!(run_of_checkpoint("runs/T5_M50_s0/exp_04.ckpt"), Some((5, 50, 0)));
    }
}

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::{Deserialize, Serialize};

use clood_core::continual::{checkpoint_name, RunConfig};
use clood_core::glyphgen::GlyphDataset;
use clood_core::ndnet::checkpoint::{self, read_header};
use clood_core::ndnet::{DType, Network, Scalar};
use clood_core::probe::{probe_battery, ProbeResult, ProbeRow, ProbeSpec, ProbeTask, Regime};
use clood_core::scenario::Scenario;

use super::{load_dataset, read_json, write_json};
use crate::layout::ensure_dir;
use crate::registry::{Registry, RunStatus};
use crate::Context;

/// One row of the per-experience probe curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub run_id: String,
    #[serde(rename = "T")]
    pub num_tasks: usize,
    #[serde(rename = "M")]
    pub memory_size: usize,
    pub seed: u64,
    pub experience: usize,
    pub tap: String,
    pub task: ProbeTask,
    pub regime: Regime,
    pub h: usize,
    pub lr: f64,
    pub split: String,
    pub accuracy: f64,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

/// Append rows, writing the header only when the file is new or empty.
fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn battery<F: Scalar>(
    path: &Path,
    ds: &GlyphDataset,
    scenario: &Scenario,
    spec: &ProbeSpec,
    tasks: &[ProbeTask],
    regimes: &[Regime],
) -> Result<Vec<ProbeResult>> {
    let (net, _): (Network<F>, _) = checkpoint::load_as(path)?;
    Ok(probe_battery(&net, ds, scenario, spec, tasks, regimes)?)
}

/// Probe a checkpoint at the precision it was trained in.
fn battery_at_native_precision(
    path: &Path,
    ds: &GlyphDataset,
    scenario: &Scenario,
    spec: &ProbeSpec,
    tasks: &[ProbeTask],
    regimes: &[Regime],
) -> Result<Vec<ProbeResult>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match read_header(&bytes)?.0.dtype {
        DType::F32 => battery::<f32>(path, ds, scenario, spec, tasks, regimes),
        DType::F64 => battery::<f64>(path, ds, scenario, spec, tasks, regimes),
    }
}

/// Checkpoint label used in CSVs: the path relative to the output root.
fn label(ctx: &Context, path: &Path) -> String {
    path.strip_prefix(&ctx.layout.root).unwrap_or(path).display().to_string()
}

struct Target {
    run: RunConfig,
    dir: PathBuf,
    checkpoints: Vec<PathBuf>,
}

fn targets(ctx: &Context) -> Result<Vec<Target>> {
    let configs = ctx.config.run_configs();
    let latest = Registry::open(&ctx.layout.registry()).latest()?;
    let selected: Vec<RunConfig> = match &ctx.config.probe.runs {
        Some(ids) => {
            let unknown: Vec<&String> = ids.iter().filter(|id| !configs.iter().any(|c| &c.run_id() == *id)).collect();
            if !unknown.is_empty() {
                bail!("probe.runs names runs outside the configured grid: {unknown:?}");
            }
            configs.into_iter().filter(|c| ids.contains(&c.run_id())).collect()
        }
        None => configs
            .into_iter()
            .filter(|c| latest.get(&c.run_id()).is_some_and(|e| e.status == RunStatus::Completed))
            .collect(),
    };
    if selected.is_empty() {
        bail!("no completed runs to probe under {}; run `clood train` first", ctx.layout.root.display());
    }
    Ok(selected
        .into_iter()
        .map(|run| {
            let dir = ctx.layout.run_dir(&run.run_id());
            let checkpoints = (0..run.num_tasks).map(|t| dir.join(checkpoint_name(t))).collect();
            Target { run, dir, checkpoints }
        })
        .collect())
}

pub fn run(ctx: &Context) -> Result<()> {
    let p = &ctx.config.probe;
    let spec = p.spec();
    let targets = targets(ctx)?;

    let mut missing = Vec::new();
    for t in &targets {
        let needed: Vec<&PathBuf> = if p.curve_task.is_some() {
            t.checkpoints.iter().collect()
        } else {
            t.checkpoints.last().into_iter().collect()
        };
        missing.extend(needed.into_iter().filter(|c| !c.is_file()).map(|c| c.display().to_string()));
        let sc = t.dir.join("scenario.json");
        if !sc.is_file() {
            missing.push(sc.display().to_string());
        }
    }
    if !missing.is_empty() {
        bail!("missing checkpoints or scenario files:\n  {}", missing.join("\n  "));
    }

    let existing: BTreeSet<_> = read_rows::<ProbeRow>(&ctx.layout.probe_csv())?.iter().map(ProbeRow::key).collect();
    let curve_existing: BTreeSet<(String, usize, String, ProbeTask, Regime, String)> = read_rows::<CurveRow>(&ctx.layout.probe_curves_csv())?
        .into_iter()
        .map(|r| (r.run_id, r.experience, r.tap, r.task, r.regime, r.split))
        .collect();
    let has = |ckpt: &str, task: ProbeTask, regime: Regime| {
        ["iid_test", "ood_test"]
            .iter()
            .all(|s| existing.contains(&(ckpt.to_string(), spec.tap.clone(), task, regime, s.to_string())))
    };

    if ctx.dry_run {
        for t in &targets {
            let ckpt = label(ctx, t.checkpoints.last().expect("at least one experience"));
            for &task in &p.tasks {
                for &regime in &p.regimes {
                    let state = if has(&ckpt, task, regime) { "done   " } else { "pending" };
                    println!("{state}  {ckpt} {} {} {}", spec.tap, task.as_str(), regime.as_str());
                }
            }
            if let Some(task) = p.curve_task {
                println!("curve    {} {} over {} checkpoints", t.run.run_id(), task.as_str(), t.checkpoints.len());
            }
        }
        return Ok(());
    }

    let (ds, _) = load_dataset(ctx)?;
    ensure_dir(&ctx.layout.probe_dir())?;
    for t in &targets {
        let scenario = Scenario::from_json(
            &std::fs::read_to_string(t.dir.join("scenario.json")).with_context(|| format!("reading scenario of {}", t.run.run_id()))?,
        )?;
        if scenario.dataset_hash != ds.content_hash() {
            bail!("run {} was trained on a different dataset", t.run.run_id());
        }
        let final_ckpt = t.checkpoints.last().expect("at least one experience");
        let ckpt = label(ctx, final_ckpt);
        let mut results = Vec::new();
        for &task in &p.tasks {
            let regimes: Vec<Regime> = p.regimes.iter().copied().filter(|&r| !has(&ckpt, task, r)).collect();
            if regimes.is_empty() {
                log::info!("{ckpt}: {} already probed", task.as_str());
                continue;
            }
            log::info!("{ckpt}: probing {} ({} regime(s))", task.as_str(), regimes.len());
            results.extend(battery_at_native_precision(final_ckpt, &ds, &scenario, &spec, &[task], &regimes)?);
        }
        if !results.is_empty() {
            let rows: Vec<ProbeRow> = results.iter().flat_map(|r| ProbeRow::from_result(Path::new(&ckpt), r)).collect();
            append_rows(&ctx.layout.probe_csv(), &rows)?;
            let json = ctx.layout.probe_dir().join(format!("{}.json", t.run.run_id()));
            let mut all: Vec<ProbeResult> = if json.exists() { read_json(&json)? } else { Vec::new() };
            all.extend(results.iter().cloned());
            write_json(&json, &all)?;
            for r in &results {
                println!(
                    "{ckpt} {} {}: h={} lr={} iid={:.4} ood={:.4}",
                    r.task.as_str(),
                    r.regime.as_str(),
                    r.hidden,
                    r.lr,
                    r.iid_accuracy,
                    r.ood_accuracy
                );
            }
        }

        if let Some(task) = p.curve_task {
            for (experience, path) in t.checkpoints.iter().enumerate() {
                let regimes: Vec<Regime> = p
                    .regimes
                    .iter()
                    .copied()
                    .filter(|&r| {
                        ["iid_test", "ood_test"].iter().any(|s| {
                            !curve_existing.contains(&(t.run.run_id(), experience, spec.tap.clone(), task, r, s.to_string()))
                        })
                    })
                    .collect();
                if regimes.is_empty() {
                    continue;
                }
                log::info!("{}: curve point {experience} for {}", t.run.run_id(), task.as_str());
                let rs = battery_at_native_precision(path, &ds, &scenario, &spec, &[task], &regimes)?;
                let rows: Vec<CurveRow> = rs
                    .iter()
                    .flat_map(|r| {
                        ProbeRow::from_result(path, r).map(|row| CurveRow {
                            run_id: t.run.run_id(),
                            num_tasks: t.run.num_tasks,
                            memory_size: t.run.memory_size,
                            seed: t.run.seed,
                            experience,
                            tap: row.tap,
                            task: row.task,
                            regime: row.regime,
                            h: row.h,
                            lr: row.lr,
                            split: row.split,
                            accuracy: row.accuracy,
                        })
                    })
                    .collect();
                append_rows(&ctx.layout.probe_curves_csv(), &rows)?;
            }
        }
    }
    Ok(())
}

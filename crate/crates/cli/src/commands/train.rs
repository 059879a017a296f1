use std::collections::BTreeMap;
use std::fs::File;

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use clood_core::continual::{
    aggregate, read_metrics_csv, run_grid, write_metrics_csv, CellSummary, GridOptions, MetricRecord,
    RunConfig, RunOutcome,
};
use clood_core::glyphgen::GlyphDataset;
use clood_core::hash::sha256_hex;
use clood_core::scenario::{build_scenario, ScenarioConfig};

use super::{load_dataset, write_json};
use crate::config::DatasetSection;
use crate::layout::ensure_dir;
use crate::registry::{Registry, RunStatus};
use crate::Context;

/// Everything that determines a run's results; its hash keys the registry.
#[derive(Debug, Serialize)]
pub struct RunSnapshot<'a> {
    pub run: &'a RunConfig,
    pub scenario: &'a ScenarioConfig,
    pub dataset: &'a DatasetSection,
    pub dataset_hash: &'a str,
}

impl RunSnapshot<'_> {
    pub fn key(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("snapshot serializes").as_bytes())
    }
}

#[derive(Debug, Serialize)]
struct OutcomeFile<'a> {
    run_id: String,
    steps: u64,
    expected_steps: u64,
    wall_time_s: f64,
    final_checkpoint_hash: &'a str,
    experience_stats: &'a [clood_core::continual::ExperienceStats],
    per_experience_wall_time_s: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    dataset_hash: &'a str,
    completed: usize,
    failed: Vec<(String, String)>,
    cells: Vec<CellSummary>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let configs = ctx.config.run_configs();
    let scenario_cfg = ctx.config.scenario.scenario_config();
    let layout = &ctx.layout;
    let registry = Registry::open(&layout.registry());
    let latest = registry.latest()?;

    let (ds, manifest) = if ctx.dry_run && !layout.dataset_manifest().exists() {
        println!("(no dataset yet; every run is pending)");
        for c in &configs {
            println!("pending  {}", c.run_id());
        }
        return Ok(());
    } else {
        load_dataset(ctx)?
    };
    let key_of = |c: &RunConfig| {
        RunSnapshot {
            run: c,
            scenario: &scenario_cfg,
            dataset: &ctx.config.dataset,
            dataset_hash: &manifest.content_hash,
        }
        .key()
    };
    let done = |c: &RunConfig| {
        registry.is_completed(&latest, &c.run_id(), &key_of(c)) && layout.run_dir(&c.run_id()).join("metrics.csv").exists()
    };
    let pending: Vec<RunConfig> = configs.iter().filter(|c| !done(c)).cloned().collect();

    if ctx.dry_run {
        for c in &configs {
            println!("{}  {}", if done(c) { "done   " } else { "pending" }, c.run_id());
        }
        println!("{} of {} runs pending", pending.len(), configs.len());
        return Ok(());
    }
    for c in configs.iter().filter(|c| done(c)) {
        log::info!("skipping completed run {}", c.run_id());
    }
    ensure_dir(&layout.runs_dir())?;
    log::info!("{} runs to train with {} worker(s)", pending.len(), ctx.jobs);

    let options = GridOptions {
        jobs: ctx.jobs,
        checkpoint_root: Some(layout.runs_dir()),
    };
    let mut write_errors = Vec::new();
    let report = run_grid(&ds, &scenario_cfg, &pending, &options, |c, result| {
        let key = key_of(c);
        let outcome = match result {
            Ok(o) => save_run(ctx, &ds, c, &scenario_cfg, &manifest.content_hash, o).map_err(|e| format!("{e:#}")),
            Err(e) => Err(e.to_string()),
        };
        let logged = match &outcome {
            Ok(()) => {
                log::info!("completed {}", c.run_id());
                registry.append(&c.run_id(), &key, RunStatus::Completed, None)
            }
            Err(e) => {
                log::error!("run {} failed: {e}", c.run_id());
                registry.append(&c.run_id(), &key, RunStatus::Failed, Some(e.clone()))
            }
        };
        if let Err(e) = logged {
            write_errors.push(format!("{e:#}"));
        }
    });
    if !write_errors.is_empty() {
        bail!("registry writes failed: {}", write_errors.join("; "));
    }

    let latest = registry.latest()?;
    let mut records: Vec<MetricRecord> = Vec::new();
    let mut failed = Vec::new();
    for c in &configs {
        let id = c.run_id();
        match latest.get(&id) {
            Some(e) if e.status == RunStatus::Completed => {
                records.extend(read_metrics_csv(&layout.run_dir(&id).join("metrics.csv"))?);
            }
            Some(e) => failed.push((id, e.error.clone().unwrap_or_default())),
            None => failed.push((id, "not run".into())),
        }
    }
    let path = layout.metrics_csv();
    write_metrics_csv(File::create(&path).with_context(|| format!("creating {}", path.display()))?, &records)?;
    let cells = aggregate(&records);
    write_json(
        &layout.summary_json(),
        &Summary {
            dataset_hash: &manifest.content_hash,
            completed: configs.len() - failed.len(),
            failed: failed.clone(),
            cells: cells.clone(),
        },
    )?;
    for cell in &cells {
        println!(
            "T={:<2} M={:<4} runs={} iid={:.4}±{:.4} ood={:.4}±{:.4} gap={:.4}",
            cell.num_tasks, cell.memory_size, cell.runs, cell.iid_mean, cell.iid_std, cell.ood_mean, cell.ood_std, cell.gap_mean
        );
    }
    if !report.failures.is_empty() || !failed.is_empty() {
        let ids: Vec<&str> = failed.iter().map(|f| f.0.as_str()).collect();
        bail!("{} run(s) failed: {}", failed.len(), ids.join(", "));
    }
    Ok(())
}

fn save_run(
    ctx: &Context,
    ds: &GlyphDataset,
    c: &RunConfig, scenario_cfg: &ScenarioConfig, dataset_hash: &str, o: &RunOutcome) -> Result<()> {
    let dir = ctx.layout.run_dir(&c.run_id());
    ensure_dir(&dir)?;
    let snapshot = RunSnapshot {
        run: c,
        scenario: scenario_cfg,
        dataset: &ctx.config.dataset,
        dataset_hash,
    };
    write_json(&dir.join("config.json"), &snapshot)?;
    let scenario = build_scenario(ds, scenario_cfg, c.num_tasks, c.seed)?;
    std::fs::write(dir.join("scenario.json"), scenario.to_json()?)
        .with_context(|| format!("writing scenario for {}", c.run_id()))?;
    let path = dir.join("metrics.csv");
    write_metrics_csv(File::create(&path).with_context(|| format!("creating {}", path.display()))?, &o.records)?;
    let mut per_exp: BTreeMap<usize, f64> = BTreeMap::new();
    for r in &o.records {
        per_exp.insert(r.experience, r.wall_time_s);
    }
    write_json(
        &dir.join("outcome.json"),
        &OutcomeFile {
            run_id: c.run_id(),
            steps: o.steps,
            expected_steps: o.expected_steps,
            wall_time_s: o.wall_time_s,
            final_checkpoint_hash: &o.final_checkpoint_hash,
            experience_stats: &o.experience_stats,
            per_experience_wall_time_s: per_exp.into_values().collect(),
        },
    )
}

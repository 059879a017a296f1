use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, CellSummary, MetricRecord};
use super::{run, RunConfig, RunOutcome};
use crate::glyphgen::GlyphDataset;
use crate::scenario::{build_scenario, ScenarioConfig};

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Worker threads; 0 or 1 runs sequentially.
    pub jobs: usize,
    /// When set, run `r` writes its checkpoints under `root/<run_id>/`.
    pub checkpoint_root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridReport {
    pub outcomes: Vec<RunOutcome>,
    pub failures: Vec<RunFailure>,
}

impl GridReport {
    /// All records, ordered as `configs` was.
    pub fn records(&self) -> Vec<MetricRecord> {
        self.outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect()
    }

    pub fn summary(&self) -> Vec<CellSummary> {
        aggregate(&self.records())
    }
}

fn run_one(
    ds: &GlyphDataset,
    scenario_config: &ScenarioConfig,
    config: &RunConfig,
    options: &GridOptions,
) -> Result<RunOutcome, String> {
    let dir = options.checkpoint_root.as_ref().map(|r| r.join(config.run_id()));
    let attempt = catch_unwind(AssertUnwindSafe(|| {
        let scenario = build_scenario(ds, scenario_config, config.num_tasks, config.seed)?;
        run(ds, &scenario, config, dir.as_deref())
    }));
    match attempt {
        Ok(Ok(o)) => Ok(o),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "run panicked".into())),
    }
}

/// Execute every config, each on its own seed-derived scenario. A failing run
/// is recorded and the rest continue. `on_done` is called on the calling
/// thread, once per finished run, in completion order.
pub fn run_grid(
    ds: &GlyphDataset,
    scenario_config: &ScenarioConfig,
    configs: &[RunConfig],
    options: &GridOptions,
    mut on_done: impl FnMut(&RunConfig, Result<&RunOutcome, &str>),
) -> GridReport {
    let mut slots: Vec<Option<Result<RunOutcome, String>>> = vec![None; configs.len()];
    let jobs = options.jobs.clamp(1, configs.len().max(1));
    if jobs == 1 {
        for (i, c) in configs.iter().enumerate() {
            let r = run_one(ds, scenario_config, c, options);
            on_done(c, r.as_ref().map_err(String::as_str));
            slots[i] = Some(r);
        }
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| {
            for _ in 0..jobs {
                let tx = tx.clone();
                let next = &next;
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= configs.len() {
                        break;
                    }
                    let r = run_one(ds, scenario_config, &configs[i], options);
                    if tx.send((i, r)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (i, r) in rx {
                on_done(&configs[i], r.as_ref().map_err(String::as_str));
                slots[i] = Some(r);
            }
        });
    }
    let mut report = GridReport::default();
    for (c, slot) in configs.iter().zip(slots) {
        match slot.expect("every config ran") {
            Ok(o) => report.outcomes.push(o),
            Err(error) => report.failures.push(RunFailure {
                run_id: c.run_id(),
                error,
            }),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphgen::{render_dataset, DatasetConfig};
    use crate::ndnet::DType;

    fn cfg(t: usize, m: usize, seed: u64) -> RunConfig {
        RunConfig {
            epochs: 1,
            batch_size: 32,
            dtype: DType::F64,
            ..RunConfig::new(t, m, seed)
        }
    }

    #[test]
    fn three_seeds_one_aggregate_row() {
        let ds = render_dataset(&DatasetConfig::uniform(3), 0).unwrap();
        let configs: Vec<RunConfig> = (0..3).map(|s| cfg(1, 0, s)).collect();
        let mut seen = 0;
        let rep = run_grid(&ds, &ScenarioConfig::default(), &configs, &GridOptions::default(), |_, r| {
            assert!(r.is_ok());
            seen += 1;
        });
        assert_eq!(seen, 3);
        assert_eq!(rep.outcomes.len(), 3);
        let summary = rep.summary();
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].runs, 3);
    }

    #[test]
    fn failures_are_isolated_and_parallel_matches_sequential() {
        let ds = render_dataset(&DatasetConfig::uniform(3), 0).unwrap();
        let mut bad = cfg(2, 0, 0);
        bad.memory_size = 7;
        let configs = vec![cfg(2, 0, 0), bad, cfg(2, 50, 1)];
        let seq = run_grid(&ds, &ScenarioConfig::default(), &configs, &GridOptions::default(), |_, _| {});
        assert_eq!(seq.outcomes.len(), 2);
        assert_eq!(seq.failures.len(), 1);
        assert_eq!(seq.failures[0].run_id, "T2_M7_s0");
        let par = run_grid(
            &ds,
            &ScenarioConfig::default(),
            &configs,
            &GridOptions { jobs: 3, checkpoint_root: None },
            |_, _| {},
        );
        let csv = |r: &GridReport| {
            let mut buf = Vec::new();
            crate::continual::write_metrics_csv(&mut buf, &r.records()).unwrap();
            buf
        };
        assert_eq!(csv(&par), csv(&seq));
    }
}

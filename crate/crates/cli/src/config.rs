//! Experiment configuration: one TOML (or JSON) file describing the dataset,
//! the scenario grid, training and the probe battery.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use clood_core::continual::RunConfig;
use clood_core::glyphgen::{CellCount, DatasetConfig, NuisanceRanges};
use clood_core::ndnet::{DType, NetworkSpec, DEFAULT_LR};
use clood_core::probe::{ProbeArch, ProbeSpec, ProbeTask, Regime, HIDDEN_GRID, LR_GRID};
use clood_core::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub scenario: ScenarioSection,
    pub training: TrainingSection,
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub seed: u64,
    pub per_cell: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellCount>>,
    pub nuisance: NuisanceRanges,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        DatasetSection {
            seed: 0,
            per_cell: d.per_cell,
            cells: d.cells,
            nuisance: d.nuisance,
        }
    }
}

impl DatasetSection {
    pub fn generator_config(&self) -> DatasetConfig {
        DatasetConfig {
            per_cell: self.per_cell,
            cells: self.cells.clone(),
            nuisance: self.nuisance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub tasks: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_shift: Option<usize>,
    pub train_fraction: f64,
    pub permute_chars: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        ScenarioSection {
            tasks: vec![1, 2, 4, 5, 10],
            holdout_shift: s.holdout_shift,
            train_fraction: s.train_fraction,
            permute_chars: s.permute_chars,
        }
    }
}

impl ScenarioSection {
    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            holdout_shift: self.holdout_shift,
            train_fraction: self.train_fraction,
            permute_chars: self.permute_chars,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub memory_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub dtype: DType,
    pub eval_each_experience: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            memory_sizes: vec![0, 50, 100, 250, 500, 1000],
            epochs: 20,
            batch_size: 64,
            lr: DEFAULT_LR,
            seeds: vec![0, 1, 2],
            dtype: DType::F32,
            eval_each_experience: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub tasks: Vec<ProbeTask>,
    pub regimes: Vec<Regime>,
    pub tap: String,
    pub arch: ProbeArch,
    pub hidden_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
    /// Run ids to probe; every completed run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<String>>,
    /// Also probe every per-experience checkpoint for this task.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_task: Option<ProbeTask>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let s = ProbeSpec::default();
        ProbeSection {
            tasks: ProbeTask::ALL.to_vec(),
            regimes: Regime::ALL.to_vec(),
            tap: s.tap,
            arch: s.arch,
            hidden_sizes: HIDDEN_GRID.to_vec(),
            learning_rates: LR_GRID.to_vec(),
            momentum: s.momentum,
            epochs: s.epochs,
            batch_size: s.batch_size,
            val_fraction: s.val_fraction,
            seed: s.seed,
            runs: None,
            curve_task: None,
        }
    }
}

impl ProbeSection {
    pub fn spec(&self) -> ProbeSpec {
        ProbeSpec {
            tap: self.tap.clone(),
            arch: self.arch,
            hidden_sizes: self.hidden_sizes.clone(),
            learning_rates: self.learning_rates.clone(),
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            val_fraction: self.val_fraction,
            seed: self.seed,
        }
    }
}

impl ExperimentConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        cfg.validate().with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    /// Every check that can be made without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.dataset.generator_config().resolve_cells()?;
        self.dataset.nuisance.validate()?;
        let s = &self.scenario;
        ensure!(!s.tasks.is_empty(), "scenario.tasks is empty");
        ensure!(
            s.train_fraction > 0.0 && s.train_fraction < 1.0,
            "scenario.train_fraction {} outside (0, 1)",
            s.train_fraction
        );
        if let Some(k) = s.holdout_shift {
            ensure!((1..10).contains(&k), "scenario.holdout_shift {k} outside [1, 10)");
        }
        let t = &self.training;
        ensure!(!t.memory_sizes.is_empty(), "training.memory_sizes is empty");
        ensure!(!t.seeds.is_empty(), "training.seeds is empty");
        for rc in self.run_configs() {
            rc.validate()?;
        }
        let p = &self.probe;
        ensure!(!p.tasks.is_empty() && !p.regimes.is_empty(), "probe.tasks and probe.regimes must be non-empty");
        p.spec().validate()?;
        let spec = NetworkSpec::reference();
        let taps = spec.tap_names();
        if !taps.contains(&p.tap.as_str()) {
            bail!("unknown tap {:?}; available taps: {}", p.tap, taps.join(", "));
        }
        Ok(())
    }

    /// The training grid: tasks x memory sizes x seeds, in that nesting order.
    pub fn run_configs(&self) -> Vec<RunConfig> {
        let t = &self.training;
        let mut out = Vec::new();
        for &tasks in &self.scenario.tasks {
            for &m in &t.memory_sizes {
                for &seed in &t.seeds {
                    out.push(RunConfig {
                        num_tasks: tasks,
                        memory_size: m,
                        epochs: t.epochs,
                        batch_size: t.batch_size,
                        lr: t.lr,
                        seed,
                        dtype: t.dtype,
                        eval_each_experience: t.eval_each_experience,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn empty_file_is_the_default_grid() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.run_configs().len(), 5 * 6 * 3);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = parse(
            "[dataset]\nper_cell = 4\n[scenario]\ntasks = [1, 5]\n[training]\nmemory_sizes = [0, 100]\nseeds = [7]\nepochs = 1\ndtype = \"f64\"\n[probe]\ntasks = [\"font_char\"]\n",
        )
        .unwrap();
        let runs = cfg.run_configs();
        assert_eq!(runs.len(), 4);
        assert_eq!(runs[3].run_id(), "T5_M100_s7");
        assert_eq!(runs[0].dtype, DType::F64);
        assert_eq!(cfg.probe.tasks, vec![ProbeTask::FontChar]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[training]\nepoch = 3\n").is_err());
        assert!(parse("bogus = 1\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("[scenario]\ntasks = [3]\n").is_err());
        assert!(parse("[training]\nmemory_sizes = [42]\n").is_err());
        assert!(parse("[dataset]\nper_cell = 0\n").is_err());
        assert!(parse("[scenario]\ntrain_fraction = 1.5\n").is_err());
        let err = parse("[probe]\ntap = \"nope\"\n").unwrap_err().to_string();
        assert!(err.contains("repr"), "{err}");
    }

    #[test]
    fn shipped_configs_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let full = ExperimentConfig::load(&dir.join("default.toml")).unwrap();
        full.validate().unwrap();
        assert_eq!(ExperimentConfig { out_dir: None, ..full }, ExperimentConfig::default());
        let smoke = ExperimentConfig::load(&dir.join("smoke.toml")).unwrap();
        smoke.validate().unwrap();
        assert_eq!(smoke.run_configs().len(), 4);
    }

    #[test]
    fn json_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"training": {"seeds": [3]}}"#).unwrap();
        assert_eq!(ExperimentConfig::load(&p).unwrap().training.seeds, vec![3]);
    }
}

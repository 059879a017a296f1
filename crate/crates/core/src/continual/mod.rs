//! Static and continual training runs with Experience Replay, per-experience
//! evaluation on the IID and OOD test splits, and multi-seed grids.

mod grid;
mod metrics;

pub use grid::{run_grid, GridOptions, GridReport, RunFailure};
pub use metrics::{
    aggregate, final_records, mean_std, read_metrics_csv, write_metrics_csv,
    CellSummary, MetricRecord, Split,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphgen::GlyphDataset;
use crate::ndnet::{
    argmax_rows, checkpoint, xent_per_example, AdamState, DType, Network, NetworkSpec, Scalar,
    Tensor, DEFAULT_LR,
};
use crate::replay::{er_step, ReservoirBuffer, MEMORY_SIZES};
use crate::rng;
use crate::scenario::{Scenario, VALID_TASK_COUNTS};

pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_BATCH_SIZE: usize = 64;
const EVAL_CHUNK: usize = 256;

/// One training run: scenario size, memory, optimisation budget and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub num_tasks: usize,
    /// Reservoir capacity; 0 is naive fine-tuning.
    pub memory_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Seeds the scenario split, network init, batch order and reservoir.
    pub seed: u64,
    pub dtype: DType,
    /// Evaluate after every experience, or only after the last one.
    pub eval_each_experience: bool,
}

impl RunConfig {
    pub fn new(num_tasks: usize, memory_size: usize, seed: u64) -> Self {
        RunConfig {
            num_tasks,
            memory_size,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: DEFAULT_LR,
            seed,
            dtype: DType::F32,
            eval_each_experience: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !VALID_TASK_COUNTS.contains(&self.num_tasks) {
            return Err(Error::domain(format!(
                "number of tasks {} not in {VALID_TASK_COUNTS:?}",
                self.num_tasks
            )));
        }
        if !MEMORY_SIZES.contains(&self.memory_size) {
            return Err(Error::domain(format!(
                "memory size {} not in {MEMORY_SIZES:?}",
                self.memory_size
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::domain("epochs and batch size must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::domain(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub fn run_id(&self) -> String {
        format!("T{}_M{}_s{}", self.num_tasks, self.memory_size, self.seed)
    }

    pub fn init_seed(&self) -> u64 {
        rng::derive(self.seed, "init")
    }

    pub fn stream_seed(&self) -> u64 {
        rng::derive(self.seed, "stream")
    }
}

/// Closed-form optimizer step count: `epochs * ceil(N_t / B)` summed over experiences.
pub fn expected_steps(scenario: &Scenario, config: &RunConfig) -> u64 {
    scenario
        .experiences
        .iter()
        .map(|e| (config.epochs * e.train.len().div_ceil(config.batch_size)) as u64)
        .sum()
}

/// Mutable state carried across experiences.
pub struct Learner<F> {
    pub net: Network<F>,
    pub opt: AdamState<F>,
    pub buffer: ReservoirBuffer,
    shuffle_rng: Pcg64,
    sample_rng: Pcg64,
    pub steps: u64,
}

impl<F: Scalar> Learner<F> {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let net = Network::init(NetworkSpec::reference(), config.init_seed())?;
        Ok(Self::with_network(net, config))
    }

    pub fn with_network(net: Network<F>, config: &RunConfig) -> Self {
        let s = config.stream_seed();
        Learner {
            opt: AdamState::new(net.params(), config.lr),
            net,
            buffer: ReservoirBuffer::new(config.memory_size, s),
            shuffle_rng: rng::stream(rng::derive(s, "shuffle")),
            sample_rng: rng::stream(rng::derive(s, "memory")),
            steps: 0,
        }
    }
}

/// Per-experience training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceStats {
    pub experience: usize,
    pub steps: u64,
    pub first_epoch_loss: f64,
    pub last_epoch_loss: f64,
}

/// `epochs * ceil(N / B)` replay steps over one experience's examples,
/// reshuffled every epoch.
pub fn train_experience<F: Scalar>(
    learner: &mut Learner<F>,
    ds: &GlyphDataset,
    train: &[usize],
    config: &RunConfig,
    experience: usize,
) -> Result<ExperienceStats> {
    if train.is_empty() {
        return Err(Error::domain(format!("experience {experience} has no training examples")));
    }
    let mut order = train.to_vec();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let start_steps = learner.steps;
    for epoch in 0..config.epochs {
        order.shuffle(&mut learner.shuffle_rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let loss = er_step(
                &mut learner.net,
                &mut learner.opt,
                ds,
                batch,
                &mut learner.buffer,
                epoch == 0,
                &mut learner.sample_rng,
            )?;
            if !loss.total.is_finite() {
                return Err(Error::domain(format!(
                    "non-finite loss at experience {experience}, epoch {epoch}"
                )));
            }
            sum += loss.current * batch.len() as f64;
            learner.steps += 1;
        }
        epoch_losses.push(sum / order.len() as f64);
    }
    Ok(ExperienceStats {
        experience,
        steps: learner.steps - start_steps,
        first_epoch_loss: epoch_losses[0],
        last_epoch_loss: *epoch_losses.last().expect("at least one epoch"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Accuracy (argmax against `labels`) and mean cross-entropy of given logits.
pub fn score_logits<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> Result<Evaluation> {
    let losses = xent_per_example(logits, labels)?;
    let correct = argmax_rows(logits).iter().zip(labels).filter(|(p, y)| p == y).count();
    let n = labels.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: losses.iter().map(|l| l.to_f64().unwrap_or(f64::NAN)).sum::<f64>() / n,
    })
}

/// Font accuracy and mean loss over `idx`, evaluated in fixed-size chunks.
pub fn evaluate<F: Scalar>(net: &Network<F>, ds: &GlyphDataset, idx: &[usize]) -> Result<Evaluation> {
    if idx.is_empty() {
        return Err(Error::domain("evaluation split is empty"));
    }
    let (mut correct, mut loss_sum) = (0.0, 0.0);
    for chunk in idx.chunks(EVAL_CHUNK) {
        let labels: Vec<usize> = chunk.iter().map(|&i| ds.font_id(i)).collect();
        let (logits, _) = net.forward(&ds.batch(chunk), &[])?;
        let e = score_logits(&logits, &labels)?;
        correct += e.accuracy * chunk.len() as f64;
        loss_sum += e.loss * chunk.len() as f64;
    }
    let n = idx.len() as f64;
    Ok(Evaluation {
        accuracy: (correct / n).clamp(0.0, 1.0),
        loss: loss_sum / n,
    })
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub records: Vec<MetricRecord>,
    pub experience_stats: Vec<ExperienceStats>,
    pub steps: u64,
    pub expected_steps: u64,
    pub wall_time_s: f64,
    /// SHA-256 of the final checkpoint bytes.
    pub final_checkpoint_hash: String,
    pub checkpoints: Vec<PathBuf>,
}

/// File name of the checkpoint written after `experience`.
pub fn checkpoint_name(experience: usize) -> String {
    format!("exp_{experience:02}.ckpt")
}

/// Train through every experience of `scenario`, evaluating after each (or
/// only the last) and optionally saving a checkpoint per experience.
pub fn run(
    ds: &GlyphDataset,
    scenario: &Scenario,
    config: &RunConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<RunOutcome> {
    config.validate()?;
    if scenario.num_tasks != config.num_tasks {
        return Err(Error::domain(format!(
            "scenario has {} tasks, run expects {}",
            scenario.num_tasks, config.num_tasks
        )));
    }
    match config.dtype {
        DType::F32 => run_typed::<f32>(ds, scenario, config, checkpoint_dir),
        DType::F64 => run_typed::<f64>(ds, scenario, config, checkpoint_dir),
    }
}

fn run_typed<F: Scalar>(
    ds: &GlyphDataset,
    scenario: &Scenario,
    config: &RunConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut learner = Learner::<F>::new(config)?;
    let mut records = Vec::new();
    let mut stats = Vec::new();
    let mut checkpoints = Vec::new();
    let mut last_bytes = Vec::new();
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let last = scenario.experiences.len() - 1;
    for (t, exp) in scenario.experiences.iter().enumerate() {
        stats.push(train_experience(&mut learner, ds, &exp.train, config, t)?);
        if config.eval_each_experience || t == last {
            for (split, idx) in [(Split::IidTest, &scenario.iid_test), (Split::OodTest, &scenario.ood_test)] {
                if idx.is_empty() {
                    continue;
                }
                let e = evaluate(&learner.net, ds, idx)?;
                records.push(MetricRecord {
                    run_id: config.run_id(),
                    num_tasks: config.num_tasks,
                    memory_size: config.memory_size,
                    seed: config.seed,
                    experience: t,
                    split,
                    accuracy: e.accuracy,
                    loss: e.loss,
                    wall_time_s: started.elapsed().as_secs_f64(),
                });
            }
        }
        if checkpoint_dir.is_some() || t == last {
            last_bytes = checkpoint::encode(&learner.net, learner.steps, config.seed);
        }
        if let Some(dir) = checkpoint_dir {
            let path = dir.join(checkpoint_name(t));
            std::fs::write(&path, &last_bytes).map_err(|e| Error::io(&path, e))?;
            checkpoints.push(path);
        }
    }
    let expected = expected_steps(scenario, config);
    if learner.steps != expected {
        return Err(Error::Construction(format!(
            "took {} optimizer steps, expected {expected}",
            learner.steps
        )));
    }
    Ok(RunOutcome {
        config: config.clone(),
        records,
        experience_stats: stats,
        steps: learner.steps,
        expected_steps: expected,
        wall_time_s: started.elapsed().as_secs_f64(),
        final_checkpoint_hash: crate::hash::sha256_hex(&last_bytes),
        checkpoints,
    })
}

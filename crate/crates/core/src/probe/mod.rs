//! Probes on frozen network activations: which factors (font, character,
//! their combination) a representation makes decodable, with and without
//! out-of-distribution examples among the probe's training rows.

mod mlp;

pub use mlp::{accuracy, Mlp, Sgd};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphgen::{GlyphDataset, NUM_CHARS, NUM_FONTS};
use crate::ndnet::{checkpoint, Network, Scalar, REPR_TAP};
use crate::rng;
use crate::scenario::Scenario;

pub const HIDDEN_GRID: [usize; 5] = [16, 32, 64, 128, 256];
pub const LR_GRID: [f64; 4] = [1e-1, 5e-2, 1e-2, 5e-3];
pub const DEFAULT_PROBE_BATCH: usize = 256;
const FEATURE_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTask {
    Font,
    Char,
    FontChar,
}

impl ProbeTask {
    pub const ALL: [ProbeTask; 3] = [ProbeTask::Font, ProbeTask::Char, ProbeTask::FontChar];

    pub fn num_classes(self) -> usize {
        match self {
            ProbeTask::Font => NUM_FONTS,
            ProbeTask::Char => NUM_CHARS,
            ProbeTask::FontChar => NUM_FONTS * NUM_CHARS,
        }
    }

    pub fn label(self, char_id: usize, font_id: usize) -> usize {
        match self {
            ProbeTask::Font => font_id,
            ProbeTask::Char => char_id,
            ProbeTask::FontChar => font_char_label(font_id, char_id),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeTask::Font => "font",
            ProbeTask::Char => "char",
            ProbeTask::FontChar => "font_char",
        }
    }
}

/// `10 * font + char`.
pub fn font_char_label(font_id: usize, char_id: usize) -> usize {
    font_id * NUM_CHARS + char_id
}

/// Inverse of [`font_char_label`]: `(font, char)`.
pub fn decode_font_char(label: usize) -> (usize, usize) {
    (label / NUM_CHARS, label % NUM_CHARS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Probe trained on in-distribution training features only.
    IidOnly,
    /// Additionally trained on one half of every held-out pair.
    IidPlusOod,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::IidOnly, Regime::IidPlusOod];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::IidOnly => "iid_only",
            Regime::IidPlusOod => "iid_plus_ood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeArch {
    TwoLayer,
    Linear,
}

/// Probe configuration shared by every task and regime of a battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub tap: String,
    pub arch: ProbeArch,
    pub hidden_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub momentum: f64,
    pub epochs: usize,
    /// Minibatch rows per step; at least the training-set size means full batch.
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            tap: REPR_TAP.to_string(),
            arch: ProbeArch::TwoLayer,
            hidden_sizes: HIDDEN_GRID.to_vec(),
            learning_rates: LR_GRID.to_vec(),
            momentum: 0.9,
            epochs: 100,
            batch_size: DEFAULT_PROBE_BATCH,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::domain("probe hidden sizes must be non-empty and positive"));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::domain("probe learning rates must be non-empty and positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::domain("probe momentum must be in [0, 1), epochs and batch size >= 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::domain("probe validation fraction must be in (0, 1)"));
        }
        Ok(())
    }

    /// Candidate (hidden, lr) points in tie-break order: smaller hidden first,
    /// then larger learning rate. A linear probe has one hidden "size", 0.
    pub fn grid(&self) -> Vec<(usize, f64)> {
        let mut hs = match self.arch {
            ProbeArch::TwoLayer => self.hidden_sizes.clone(),
            ProbeArch::Linear => vec![0],
        };
        hs.sort_unstable();
        hs.dedup();
        let mut lrs = self.learning_rates.clone();
        lrs.sort_by(|a, b| b.total_cmp(a));
        lrs.dedup();
        hs.iter().flat_map(|&h| lrs.iter().map(move |&lr| (h, lr))).collect()
    }
}

/// Row-major features with the labels of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub features: Vec<f64>,
    pub chars: Vec<usize>,
    pub fonts: Vec<usize>,
}

impl FeatureSet {
    pub fn rows(&self) -> usize {
        self.chars.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self, task: ProbeTask) -> Vec<usize> {
        self.chars.iter().zip(&self.fonts).map(|(&c, &f)| task.label(c, f)).collect()
    }

    pub fn select(&self, rows: &[usize]) -> FeatureSet {
        let mut features = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        FeatureSet {
            dim: self.dim,
            features,
            chars: rows.iter().map(|&r| self.chars[r]).collect(),
            fonts: rows.iter().map(|&r| self.fonts[r]).collect(),
        }
    }

    pub fn concat(&self, other: &FeatureSet) -> FeatureSet {
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.chars.extend_from_slice(&other.chars);
        out.fonts.extend_from_slice(&other.fonts);
        out
    }
}

/// Activations at `tap` for dataset rows `idx`, flattened per example.
pub fn extract_features<F: Scalar>(
    net: &Network<F>,
    ds: &GlyphDataset,
    idx: &[usize],
    tap: &str,
) -> Result<FeatureSet> {
    let dim: usize = net.tap_shape(tap)?.iter().product();
    let mut features = Vec::with_capacity(idx.len() * dim);
    for chunk in idx.chunks(FEATURE_CHUNK) {
        let (_, taps) = net.forward(&ds.batch(chunk), &[tap])?;
        features.extend(taps[tap].data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(FeatureSet {
        dim,
        features,
        chars: idx.iter().map(|&i| ds.char_id(i)).collect(),
        fonts: idx.iter().map(|&i| ds.font_id(i)).collect(),
    })
}

/// Per-column mean and standard deviation of the training rows; constant
/// columns get unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(fs: &FeatureSet) -> Self {
        let n = fs.rows().max(1) as f64;
        let mut mean = vec![0.0; fs.dim];
        for r in 0..fs.rows() {
            for (m, v) in mean.iter_mut().zip(fs.row(r)) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; fs.dim];
        for r in 0..fs.rows() {
            for ((s, v), m) in var.iter_mut().zip(fs.row(r)).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, fs: &FeatureSet) -> Vec<f64> {
        fs.features
            .chunks_exact(fs.dim)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s))
            .collect()
    }
}

/// Split row positions into (train, validation), taking
/// `round(n_class * fraction)` of every class with at least 2 rows.
pub fn stratified_holdout(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (y, mut rows) in by_class {
        rows.shuffle(&mut rng::stream(rng::derive_indexed(seed, "holdout_rows", y as u64)));
        let k = if rows.len() < 2 {
            0
        } else {
            ((rows.len() as f64 * fraction).round() as usize).clamp(1, rows.len() - 1)
        };
        val.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Halves of the OOD split, stratified per held-out pair: (probe-train, probe-test).
pub fn ood_halves(ds: &GlyphDataset, ood: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let labels: Vec<usize> = ood.iter().map(|&i| font_char_label(ds.font_id(i), ds.char_id(i))).collect();
    let (rest, half) = stratified_holdout(&labels, 0.5, rng::derive(seed, "ood_halves"));
    let pick = |rows: Vec<usize>| rows.into_iter().map(|r| ood[r]).collect::<Vec<_>>();
    (pick(half), pick(rest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hidden: usize,
    pub lr: f64,
    pub val_accuracy: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub tap: String,
    pub task: ProbeTask,
    pub regime: Regime,
    pub hidden: usize,
    pub lr: f64,
    pub val_accuracy: f64,
    pub iid_accuracy: f64,
    pub ood_accuracy: f64,
    /// Distinct labels among the probe's training rows.
    pub train_classes: usize,
    pub train_rows: usize,
    pub grid: Vec<GridPoint>,
}

/// Grid-search a probe on `train` rows, select on a stratified validation
/// holdout, and score the selected probe on both test sets.
pub fn train_probe(
    train: &FeatureSet,
    iid_test: &FeatureSet,
    ood_test: &FeatureSet,
    task: ProbeTask,
    spec: &ProbeSpec,
) -> Result<(Mlp, ProbeResult)> {
    spec.validate()?;
    if train.rows() == 0 {
        return Err(Error::domain("probe has no training rows"));
    }
    let labels = train.labels(task);
    let (fit_rows, val_rows) = stratified_holdout(&labels, spec.val_fraction, rng::derive(spec.seed, "validation"));
    let fit_set = train.select(&fit_rows);
    let val_set = train.select(&val_rows);
    let norm = Standardizer::fit(&fit_set);
    let x_fit = norm.apply(&fit_set);
    let y_fit = fit_set.labels(task);
    let x_val = norm.apply(&val_set);
    let y_val = val_set.labels(task);

    let mut best: Option<(Mlp, usize)> = None;
    let mut grid: Vec<GridPoint> = Vec::new();
    for (gi, (h, lr)) in spec.grid().into_iter().enumerate() {
        let hidden = (h > 0).then_some(h);
        let mut m = Mlp::new(train.dim, hidden, task.num_classes(), rng::derive_indexed(spec.seed, "probe_init", h as u64));
        let sgd = Sgd {
            lr,
            momentum: spec.momentum,
            epochs: spec.epochs,
            batch_size: spec.batch_size,
            seed: rng::derive(spec.seed, "probe_batches"),
        };
        let final_loss = m.fit(&x_fit, &y_fit, &sgd)?;
        let val_accuracy = if y_val.is_empty() {
            accuracy(&m.predict(&x_fit), &y_fit)
        } else {
            accuracy(&m.predict(&x_val), &y_val)
        };
        let val_accuracy = if val_accuracy.is_nan() { 0.0 } else { val_accuracy };
        let better = best.as_ref().is_none_or(|(_, b)| val_accuracy > grid[*b].val_accuracy);
        grid.push(GridPoint { hidden: h, lr, val_accuracy, final_loss });
        if better {
            best = Some((m, gi));
        }
    }
    let (model, bi) = best.expect("grid is non-empty");
    let score = |fs: &FeatureSet| {
        if fs.rows() == 0 {
            return f64::NAN;
        }
        accuracy(&model.predict(&norm.apply(fs)), &fs.labels(task))
    };
    let train_classes = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    let result = ProbeResult {
        tap: spec.tap.clone(),
        task,
        regime: Regime::IidOnly,
        hidden: grid[bi].hidden,
        lr: grid[bi].lr,
        val_accuracy: grid[bi].val_accuracy,
        iid_accuracy: score(iid_test),
        ood_accuracy: score(ood_test),
        train_classes,
        train_rows: train.rows(),
        grid,
    };
    Ok((model, result))
}

/// Features of one checkpoint on the scenario's splits, ready for probing.
pub struct ProbeInputs {
    pub pool_train: FeatureSet,
    pub iid_test: FeatureSet,
    pub ood_train_half: FeatureSet,
    pub ood_test_half: FeatureSet,
    pub ood_full: FeatureSet,
}

impl ProbeInputs {
    pub fn extract<F: Scalar>(net: &Network<F>, ds: &GlyphDataset, scenario: &Scenario, spec: &ProbeSpec) -> Result<Self> {
        let pool: Vec<usize> = {
            let mut p: Vec<usize> = scenario.pool_train().collect();
            p.sort_unstable();
            p
        };
        let (half_train, half_test) = ood_halves(ds, &scenario.ood_test, spec.seed);
        let ood_full = extract_features(net, ds, &scenario.ood_test, &spec.tap)?;
        let pos: BTreeMap<usize, usize> = scenario.ood_test.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let rows = |idx: &[usize]| idx.iter().map(|i| pos[i]).collect::<Vec<_>>();
        Ok(ProbeInputs {
            pool_train: extract_features(net, ds, &pool, &spec.tap)?,
            iid_test: extract_features(net, ds, &scenario.iid_test, &spec.tap)?,
            ood_train_half: ood_full.select(&rows(&half_train)),
            ood_test_half: ood_full.select(&rows(&half_test)),
            ood_full,
        })
    }

    /// Probe-training rows and OOD test rows for `regime`. Without OOD
    /// training rows the whole OOD split is the test set.
    pub fn for_regime(&self, regime: Regime) -> (FeatureSet, &FeatureSet) {
        match regime {
            Regime::IidOnly => (self.pool_train.clone(), &self.ood_full),
            Regime::IidPlusOod => (self.pool_train.concat(&self.ood_train_half), &self.ood_test_half),
        }
    }
}

/// One probe per (task, regime) pair on a single network.
pub fn probe_battery<F: Scalar>(
    net: &Network<F>,
    ds: &GlyphDataset,
    scenario: &Scenario,
    spec: &ProbeSpec,
    tasks: &[ProbeTask],
    regimes: &[Regime],
) -> Result<Vec<ProbeResult>> {
    spec.validate()?;
    let inputs = ProbeInputs::extract(net, ds, scenario, spec)?;
    let mut out = Vec::with_capacity(tasks.len() * regimes.len());
    for &task in tasks {
        for &regime in regimes {
            let (train, ood) = inputs.for_regime(regime);
            let (_, mut r) = train_probe(&train, &inputs.iid_test, ood, task, spec)?;
            r.regime = regime;
            out.push(r);
        }
    }
    Ok(out)
}

/// Probe accuracy after each experience of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub experience: usize,
    pub checkpoint: PathBuf,
    pub result: ProbeResult,
}

/// A fresh probe per checkpoint, in order. All checkpoints are checked for
/// existence before any training.
pub fn probe_over_experiences(
    checkpoints: &[PathBuf],
    ds: &GlyphDataset,
    scenario: &Scenario,
    spec: &ProbeSpec,
    task: ProbeTask,
    regime: Regime,
) -> Result<Vec<CurvePoint>> {
    let missing: Vec<String> = checkpoints.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::domain(format!("missing checkpoints: {}", missing.join(", "))));
    }
    if checkpoints.is_empty() {
        return Err(Error::domain("no checkpoints to probe"));
    }
    checkpoints
        .iter()
        .enumerate()
        .map(|(experience, path)| {
            let (net, _) = checkpoint::load_as::<f64>(path)?;
            let mut r = probe_battery(&net, ds, scenario, spec, &[task], &[regime])?;
            Ok(CurvePoint {
                experience,
                checkpoint: path.clone(),
                result: r.remove(0),
            })
        })
        .collect()
}

/// One CSV row per (result, split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub checkpoint: String,
    pub tap: String,
    pub task: ProbeTask,
    pub regime: Regime,
    pub h: usize,
    pub lr: f64,
    pub split: String,
    pub accuracy: f64,
}

impl ProbeRow {
    pub fn from_result(checkpoint: &Path, r: &ProbeResult) -> [ProbeRow; 2] {
        let row = |split: &str, accuracy: f64| ProbeRow {
            checkpoint: checkpoint.display().to_string(),
            tap: r.tap.clone(),
            task: r.task,
            regime: r.regime,
            h: r.hidden,
            lr: r.lr,
            split: split.to_string(),
            accuracy,
        };
        [row("iid_test", r.iid_accuracy), row("ood_test", r.ood_accuracy)]
    }

    /// Identity of a row for de-duplication across invocations.
    pub fn key(&self) -> (String, String, ProbeTask, Regime, String) {
        (self.checkpoint.clone(), self.tap.clone(), self.task, self.regime, self.split.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphgen::{render_dataset, DatasetConfig};
    use crate::ndnet::NetworkSpec;
    use crate::scenario::{build_scenario, ScenarioConfig};

    #[test]
    fn label_algebra() {
        let mut seen = std::collections::BTreeSet::new();
        for f in 0..10 {
            for c in 0..10 {
                let l = font_char_label(f, c);
                assert!(l < 100);
                assert_eq!(decode_font_char(l), (f, c));
                seen.insert(l);
            }
        }
        assert_eq!(seen.len(), 100);
        assert_eq!(ProbeTask::FontChar.label(3, 7), 73);
    }

    #[test]
    fn grid_order_and_size() {
        let g = ProbeSpec::default().grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], (16, 0.1));
        assert_eq!(g[3], (16, 0.005));
        assert_eq!(g[19], (256, 0.005));
        let lin = ProbeSpec { arch: ProbeArch::Linear, ..Default::default() };
        assert_eq!(lin.grid().len(), 4);
    }

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).chain([9]).collect();
        let (tr, va) = stratified_holdout(&labels, 0.1, 0);
        assert_eq!(va.len(), 20);
        assert_eq!(tr.len() + va.len(), labels.len());
        for c in 0..4 {
            assert_eq!(va.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
        assert!(tr.contains(&200));
    }

    fn setup() -> (GlyphDataset, Scenario, Network<f64>) {
        let ds = render_dataset(&DatasetConfig::uniform(4), 0).unwrap();
        let sc = build_scenario(&ds, &ScenarioConfig::default(), 1, 0).unwrap();
        let net = Network::init(NetworkSpec::reference(), 1).unwrap();
        (ds, sc, net)
    }

    #[test]
    fn feature_contract() {
        let (ds, _, net) = setup();
        let idx: Vec<usize> = (0..100).collect();
        let a = extract_features(&net, &ds, &idx, "repr").unwrap();
        assert_eq!((a.rows(), a.dim), (100, 128));
        assert_eq!(a, extract_features(&net, &ds, &idx, "repr").unwrap());
        let zero = Network::<f64>::zeros(NetworkSpec::reference()).unwrap();
        assert!(extract_features(&zero, &ds, &idx, "repr").unwrap().features.iter().all(|&v| v == 0.0));
        match extract_features(&net, &ds, &idx, "nope") {
            Err(Error::Domain(m)) => assert!(m.contains("repr")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn ood_halves_split_each_pair() {
        let (ds, sc, _) = setup();
        let (a, b) = ood_halves(&ds, &sc.ood_test, 0);
        assert_eq!(a.len(), 20);
        assert_eq!(b.len(), 20);
        let pairs = |v: &[usize]| v.iter().map(|&i| (ds.char_id(i), ds.font_id(i))).collect::<std::collections::BTreeSet<_>>();
        assert_eq!(pairs(&a), pairs(&b));
        assert!(a.iter().all(|i| !b.contains(i)));
    }

    #[test]
    fn battery_shape_and_structural_zero() {
        let (ds, sc, net) = setup();
        let spec = ProbeSpec {
            hidden_sizes: vec![16],
            learning_rates: vec![0.1, 0.01],
            epochs: 20,
            ..Default::default()
        };
        let rs = probe_battery(&net, &ds, &sc, &spec, &ProbeTask::ALL, &Regime::ALL).unwrap();
        assert_eq!(rs.len(), 6);
        let fc = rs.iter().find(|r| r.task == ProbeTask::FontChar && r.regime == Regime::IidOnly).unwrap();
        assert_eq!(fc.train_classes, 90);
        assert!(fc.ood_accuracy <= 0.01);
        let again = probe_battery(&net, &ds, &sc, &spec, &ProbeTask::ALL, &Regime::ALL).unwrap();
        assert_eq!(rs, again);
        for r in &rs {
            assert!((0.0..=1.0).contains(&r.iid_accuracy) && (0.0..=1.0).contains(&r.ood_accuracy));
        }
    }

    #[test]
    fn curve_requires_every_checkpoint() {
        let (ds, sc, net) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp_00.ckpt");
        checkpoint::save(&p, &net, 0, 0).unwrap();
        let spec = ProbeSpec { hidden_sizes: vec![16], learning_rates: vec![0.1], epochs: 5, ..Default::default() };
        let curve = probe_over_experiences(std::slice::from_ref(&p), &ds, &sc, &spec, ProbeTask::Char, Regime::IidOnly).unwrap();
        assert_eq!(curve.len(), 1);
        let again = probe_over_experiences(std::slice::from_ref(&p), &ds, &sc, &spec, ProbeTask::Char, Regime::IidOnly).unwrap();
        assert_eq!(curve, again);
        let missing = [p.clone(), dir.path().join("exp_01.ckpt")];
        assert!(matches!(
            probe_over_experiences(&missing, &ds, &sc, &spec, ProbeTask::Char, Regime::IidOnly),
            Err(Error::Domain(_))
        ));
    }
}

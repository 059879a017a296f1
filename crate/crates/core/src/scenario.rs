//! Domain-incremental scenarios: per-experience training splits partitioned
//! by character, a shared IID test split and an OOD split made of held-out
//! (character, font) combinations.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphgen::{GlyphDataset, NUM_CHARS, NUM_FONTS};
use crate::rng;

pub const VALID_TASK_COUNTS: [usize; 5] = [1, 2, 4, 5, 10];

/// One held-out font per character; a cyclic shift, hence a bijection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutMap {
    pub shift: usize,
    pub held_font_of_char: [usize; NUM_CHARS],
}

impl HoldoutMap {
    /// `held_font_of_char(c) = (c + shift) mod 10`, `shift` in `[1, 10)`.
    pub fn with_shift(shift: usize) -> Result<Self> {
        if !(1..NUM_FONTS).contains(&shift) {
            return Err(Error::domain(format!("holdout shift {shift} outside [1, 10)")));
        }
        let mut held = [0; NUM_CHARS];
        for (c, h) in held.iter_mut().enumerate() {
            *h = (c + shift) % NUM_FONTS;
        }
        Ok(HoldoutMap {
            shift,
            held_font_of_char: held,
        })
    }

    pub fn is_held(&self, char_id: usize, font_id: usize) -> bool {
        self.held_font_of_char[char_id] == font_id
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.held_font_of_char.iter().copied().enumerate().collect()
    }
}

/// Holdout with a shift drawn from `seed`.
pub fn make_holdout(seed: u64) -> HoldoutMap {
    let shift = rng::stream(rng::derive(seed, "holdout")).random_range(1..NUM_FONTS);
    HoldoutMap::with_shift(shift).expect("shift drawn in range")
}

/// Dataset indices of the three top-level splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub pool_train: Vec<usize>,
    pub iid_test: Vec<usize>,
    pub ood_test: Vec<usize>,
}

/// Send held-out pairs to the OOD split and split every other (char, font)
/// cell `train_fraction` / `1 - train_fraction` into training pool and IID test.
pub fn split_dataset(
    ds: &GlyphDataset,
    holdout: &HoldoutMap,
    train_fraction: f64,
    seed: u64,
) -> Result<Splits> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!("train_fraction {train_fraction} outside (0, 1)")));
    }
    let mut cells = vec![Vec::new(); NUM_CHARS * NUM_FONTS];
    for i in 0..ds.len() {
        cells[ds.char_id(i) * NUM_FONTS + ds.font_id(i)].push(i);
    }
    let mut splits = Splits {
        pool_train: Vec::new(),
        iid_test: Vec::new(),
        ood_test: Vec::new(),
    };
    for (cell, members) in cells.iter_mut().enumerate() {
        let (c, f) = (cell / NUM_FONTS, cell % NUM_FONTS);
        if members.is_empty() {
            continue;
        }
        if holdout.is_held(c, f) {
            splits.ood_test.extend_from_slice(members);
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Construction(format!(
                "cell ({c}, {f}) has {} example(s); need 2 to split",
                members.len()
            )));
        }
        let n = members.len();
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng::stream(rng::derive_indexed(seed, "split", cell as u64)));
        let (train, test) = members.split_at(n_train);
        splits.pool_train.extend_from_slice(train);
        splits.iid_test.extend_from_slice(test);
    }
    if splits.pool_train.is_empty() {
        return Err(Error::Construction("no training examples after holdout".into()));
    }
    splits.pool_train.sort_unstable();
    splits.iid_test.sort_unstable();
    splits.ood_test.sort_unstable();
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Experience {
    pub char_set: Vec<usize>,
    /// Dataset indices, ascending.
    pub train: Vec<usize>,
    /// Distinct font labels present in `train`.
    pub font_coverage: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_tasks: usize,
    pub seed: u64,
    pub holdout: HoldoutMap,
    pub char_order: Vec<usize>,
    pub experiences: Vec<Experience>,
    pub iid_test: Vec<usize>,
    pub ood_test: Vec<usize>,
    #[serde(default)]
    pub dataset_hash: String,
}

/// Character order used for blocking; identity unless `permute`.
pub fn char_order(seed: u64, permute: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..NUM_CHARS).collect();
    if permute {
        order.shuffle(&mut rng::stream(rng::derive(seed, "char_order")));
    }
    order
}

/// Block sizes for `num_tasks` experiences: as equal as possible, larger
/// blocks first (`4` gives `3, 3, 2, 2`).
pub fn block_sizes(num_tasks: usize) -> Vec<usize> {
    let (base, extra) = (NUM_CHARS / num_tasks, NUM_CHARS % num_tasks);
    (0..num_tasks).map(|e| base + usize::from(e < extra)).collect()
}

/// Partition the training pool into `num_tasks` experiences, each owning a
/// contiguous block of characters of `order`.
pub fn build_experiences(
    ds: &GlyphDataset,
    splits: &Splits,
    holdout: HoldoutMap,
    num_tasks: usize,
    order: &[usize],
    seed: u64,
) -> Result<Scenario> {
    if !VALID_TASK_COUNTS.contains(&num_tasks) {
        return Err(Error::domain(format!(
            "number of tasks {num_tasks} not in {VALID_TASK_COUNTS:?}"
        )));
    }
    let sorted: BTreeSet<usize> = order.iter().copied().collect();
    if order.len() != NUM_CHARS || sorted.len() != NUM_CHARS || sorted.iter().any(|&c| c >= NUM_CHARS) {
        return Err(Error::domain(format!("char order {order:?} is not a permutation of 0..10")));
    }
    let mut owner = [0usize; NUM_CHARS];
    let mut blocks = Vec::with_capacity(num_tasks);
    let mut start = 0;
    for (e, size) in block_sizes(num_tasks).into_iter().enumerate() {
        for &c in &order[start..start + size] {
            owner[c] = e;
        }
        blocks.push(&order[start..start + size]);
        start += size;
    }
    let mut experiences: Vec<Experience> = blocks
        .into_iter()
        .map(|block| {
            let mut char_set = block.to_vec();
            char_set.sort_unstable();
            Experience {
                char_set,
                train: Vec::new(),
                font_coverage: Vec::new(),
            }
        })
        .collect();
    for &i in &splits.pool_train {
        experiences[owner[ds.char_id(i)]].train.push(i);
    }
    for e in &mut experiences {
        let fonts: BTreeSet<usize> = e.train.iter().map(|&i| ds.font_id(i)).collect();
        e.font_coverage = fonts.into_iter().collect();
    }
    Ok(Scenario {
        num_tasks,
        seed,
        holdout,
        char_order: order.to_vec(),
        experiences,
        iid_test: splits.iid_test.clone(),
        ood_test: splits.ood_test.clone(),
        dataset_hash: ds.content_hash(),
    })
}

impl Scenario {
    pub fn pool_train(&self) -> impl Iterator<Item = usize> + '_ {
        self.experiences.iter().flat_map(|e| e.train.iter().copied())
    }

    /// Check every structural invariant against the dataset; returns the first violation.
    pub fn check_invariants(&self, ds: &GlyphDataset) -> Result<()> {
        let fail = |m: String| Err(Error::Construction(m));
        let mut union = BTreeSet::new();
        for e in &self.experiences {
            for &c in &e.char_set {
                if !union.insert(c) {
                    return fail(format!("char {c} in more than one experience"));
                }
            }
            for &i in &e.train {
                if !e.char_set.contains(&ds.char_id(i)) {
                    return fail(format!("example {i} routed to the wrong experience"));
                }
            }
        }
        if union != (0..NUM_CHARS).collect() {
            return fail("char sets do not cover 0..10".into());
        }
        for i in self.pool_train().chain(self.iid_test.iter().copied()) {
            if self.holdout.is_held(ds.char_id(i), ds.font_id(i)) {
                return fail(format!("held-out pair leaked into example {i}"));
            }
        }
        for &i in &self.ood_test {
            if !self.holdout.is_held(ds.char_id(i), ds.font_id(i)) {
                return fail(format!("OOD example {i} is not a held-out pair"));
            }
        }
        let train: BTreeSet<usize> = self.pool_train().collect();
        if self.iid_test.iter().any(|i| train.contains(i)) {
            return fail("IID test overlaps training".into());
        }
        Ok(())
    }

    /// JSON manifest: seed, task count, holdout, per-experience char sets,
    /// counts, font coverage and index lists.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Scenario construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Holdout shift; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_shift: Option<usize>,
    pub train_fraction: f64,
    pub permute_chars: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            holdout_shift: None,
            train_fraction: 0.8,
            permute_chars: false,
        }
    }
}

/// Holdout, split and experiences in one call.
pub fn build_scenario(
    ds: &GlyphDataset,
    config: &ScenarioConfig,
    num_tasks: usize,
    seed: u64,
) -> Result<Scenario> {
    let holdout = match config.holdout_shift {
        Some(k) => HoldoutMap::with_shift(k)?,
        None => make_holdout(seed),
    };
    let splits = split_dataset(ds, &holdout, config.train_fraction, seed)?;
    let order = char_order(seed, config.permute_chars);
    build_experiences(ds, &splits, holdout, num_tasks, &order, seed)
}

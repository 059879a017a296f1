//! Reservoir-sampled episodic memory and the Experience Replay update.

use rand::seq::index;
use rand::Rng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphgen::GlyphDataset;
use crate::ndnet::{softmax_xent, xent_per_example, AdamState, Network, Scalar, Tensor};
use crate::rng;

pub const MEMORY_SIZES: [usize; 6] = [0, 50, 100, 250, 500, 1000];

/// A stored example: its dataset index and both labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredExample {
    pub index: usize,
    pub char_id: u8,
    pub font_id: u8,
}

/// Fixed-capacity uniform sample of an example stream (Vitter's Algorithm R).
#[derive(Debug, Clone)]
pub struct ReservoirBuffer {
    capacity: usize,
    slots: Vec<StoredExample>,
    seen: u64,
    rng: Pcg64,
}

impl ReservoirBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ReservoirBuffer {
            capacity,
            slots: Vec::with_capacity(capacity),
            seen: 0,
            rng: rng::stream(rng::derive(seed, "reservoir")),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn seen_count(&self) -> u64 {
        self.seen
    }

    pub fn slots(&self) -> &[StoredExample] {
        &self.slots
    }

    /// Offer one example. The first `capacity` are kept; the `n`-th after
    /// that replaces a uniform slot with probability `capacity / n`.
    pub fn observe(&mut self, example: StoredExample) {
        self.seen += 1;
        if self.capacity == 0 {
            return;
        }
        if self.slots.len() < self.capacity {
            self.slots.push(example);
            return;
        }
        let j = self.rng.random_range(0..self.seen);
        if (j as usize) < self.capacity {
            self.slots[j as usize] = example;
        }
    }

    /// `k` uniform draws: without replacement when `k <= len`, with
    /// replacement otherwise. An empty buffer yields an empty batch.
    pub fn sample_memory<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<StoredExample> {
        let n = self.slots.len();
        if n == 0 || k == 0 {
            return Vec::new();
        }
        if k <= n {
            index::sample(rng, n, k).into_iter().map(|i| self.slots[i]).collect()
        } else {
            (0..k).map(|_| self.slots[rng.random_range(0..n)]).collect()
        }
    }

    pub fn dump(&self) -> BufferDump {
        BufferDump {
            capacity: self.capacity,
            seen_count: self.seen,
            slots: self.slots.clone(),
        }
    }
}

/// Debug snapshot of a buffer's contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferDump {
    pub capacity: usize,
    pub seen_count: u64,
    pub slots: Vec<StoredExample>,
}

impl BufferDump {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn stored(ds: &GlyphDataset, index: usize) -> StoredExample {
    StoredExample {
        index,
        char_id: ds.char_id(index) as u8,
        font_id: ds.font_id(index) as u8,
    }
}

/// Loss of one replay step, split by origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    /// Mean over the combined batch; the quantity that was differentiated.
    pub total: f64,
    pub current: f64,
    /// `None` when no memory batch was drawn.
    pub memory: Option<f64>,
    pub current_len: usize,
    pub memory_len: usize,
}

/// One Experience Replay update.
///
/// A memory batch of `min(current.len(), buffer.len())` examples is drawn
/// first; then, on the first epoch, each current example is offered to the
/// reservoir; finally a single Adam step is taken on the mean cross-entropy
/// of the concatenated batch.
#[allow(clippy::too_many_arguments)]
pub fn er_step<F: Scalar>(
    net: &mut Network<F>,
    opt: &mut AdamState<F>,
    ds: &GlyphDataset,
    current: &[usize],
    buffer: &mut ReservoirBuffer,
    first_epoch: bool,
    sample_rng: &mut Pcg64,
) -> Result<StepLoss> {
    if current.is_empty() {
        return Err(Error::domain("replay step on an empty batch"));
    }
    let memory = buffer.sample_memory(current.len().min(buffer.len()), sample_rng);
    if first_epoch {
        for &i in current {
            buffer.observe(stored(ds, i));
        }
    }
    let mut idx = current.to_vec();
    idx.extend(memory.iter().map(|m| m.index));
    let labels: Vec<usize> = idx.iter().map(|&i| ds.font_id(i)).collect();
    let x: Tensor<F> = ds.batch(&idx);

    let trace = net.forward_trace(&x)?;
    let per_example = xent_per_example(trace.logits(), &labels)?;
    let (total, dlogits) = softmax_xent(trace.logits(), &labels)?;
    let grads = net.backward(&trace, &dlogits)?;
    opt.step(net.params_mut(), &grads)?;

    let mean = |v: &[F]| v.iter().map(|l| l.to_f64().unwrap_or(f64::NAN)).sum::<f64>() / v.len() as f64;
    let (cur, mem) = per_example.split_at(current.len());
    Ok(StepLoss {
        total: total.to_f64().unwrap_or(f64::NAN),
        current: mean(cur),
        memory: (!mem.is_empty()).then(|| mean(mem)),
        current_len: current.len(),
        memory_len: mem.len(),
    })
}

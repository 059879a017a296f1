use std::collections::BTreeSet;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use clood_core::glyphgen::{render_dataset, DatasetConfig, GlyphDataset};
use clood_core::ndnet::{checkpoint, Network, NetworkSpec};
use clood_core::probe::{decode_font_char, font_char_label};
use clood_core::replay::{ReservoirBuffer, StoredExample};
use clood_core::rng;
use clood_core::scenario::{build_scenario, make_holdout, HoldoutMap, Scenario, ScenarioConfig, VALID_TASK_COUNTS};

fn dataset(per_cell: i64, seed: u64) -> GlyphDataset {
    render_dataset(&DatasetConfig::uniform(per_cell), seed).unwrap()
}

fn ex(i: usize) -> StoredExample {
    StoredExample { index: i, char_id: 0, font_id: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenarios_satisfy_every_invariant(
        per_cell in 2i64..5,
        t_idx in 0usize..5,
        seed in any::<u64>(),
        frac in 0.2f64..0.9,
        permute in any::<bool>(),
    ) {
        let ds = dataset(per_cell, seed % 7);
        let t = VALID_TASK_COUNTS[t_idx];
        let cfg = ScenarioConfig { holdout_shift: None, train_fraction: frac, permute_chars: permute };
        let sc = build_scenario(&ds, &cfg, t, seed).unwrap();
        sc.check_invariants(&ds).unwrap();

        let chars: Vec<usize> = sc.experiences.iter().flat_map(|e| e.char_set.iter().copied()).collect();
        prop_assert_eq!(chars.len(), 10);
        prop_assert_eq!(chars.iter().collect::<BTreeSet<_>>().len(), 10);
        for e in &sc.experiences {
            let fonts: BTreeSet<usize> = e.train.iter().map(|&i| ds.font_id(i)).collect();
            prop_assert_eq!(fonts.len(), if t == 10 { 9 } else { 10 });
        }
        let train: BTreeSet<usize> = sc.pool_train().collect();
        let iid: BTreeSet<usize> = sc.iid_test.iter().copied().collect();
        let ood: BTreeSet<usize> = sc.ood_test.iter().copied().collect();
        prop_assert!(train.is_disjoint(&iid) && train.is_disjoint(&ood) && iid.is_disjoint(&ood));
        prop_assert_eq!(train.len() + iid.len() + ood.len(), ds.len());

        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, sc);
    }

    #[test]
    fn holdouts_are_bijections(seed in any::<u64>()) {
        let h = make_holdout(seed);
        let fonts: BTreeSet<usize> = h.held_font_of_char.iter().copied().collect();
        prop_assert_eq!(fonts.len(), 10);
        prop_assert_eq!(h, HoldoutMap::with_shift(h.shift).unwrap());
    }

    #[test]
    fn reservoir_occupancy(cap in 0usize..40, n in 0usize..200, seed in any::<u64>()) {
        let mut b = ReservoirBuffer::new(cap, seed);
        for i in 0..n {
            b.observe(ex(i));
            prop_assert!(b.len() <= cap);
        }
        prop_assert_eq!(b.len(), cap.min(n));
        prop_assert_eq!(b.seen_count(), n as u64);
        let distinct: BTreeSet<usize> = b.slots().iter().map(|s| s.index).collect();
        prop_assert_eq!(distinct.len(), b.len());
    }

    #[test]
    fn memory_batches_have_the_requested_size(len in 1usize..30, k in 0usize..80, seed in any::<u64>()) {
        let mut b = ReservoirBuffer::new(len, 0);
        for i in 0..len {
            b.observe(ex(i));
        }
        let batch = b.sample_memory(k, &mut rng::stream(seed));
        prop_assert_eq!(batch.len(), k);
        if k <= len {
            let distinct: BTreeSet<usize> = batch.iter().map(|s| s.index).collect();
            prop_assert_eq!(distinct.len(), k);
        }
    }

    #[test]
    fn font_char_labels_round_trip(f in 0usize..10, c in 0usize..10) {
        prop_assert_eq!(decode_font_char(font_char_label(f, c)), (f, c));
    }
}

#[test]
fn reference_split_sizes() {
    let ds = render_dataset(&DatasetConfig::default(), 0).unwrap();
    assert_eq!(ds.len(), 10_000);
    let sc = build_scenario(&ds, &ScenarioConfig::default(), 1, 0).unwrap();
    assert_eq!(sc.ood_test.len(), 1_000);
    assert_eq!(sc.pool_train().count(), 7_200);
    assert_eq!(sc.iid_test.len(), 1_800);
    let five = build_scenario(&ds, &ScenarioConfig::default(), 5, 0).unwrap();
    assert!(five.experiences.iter().all(|e| e.char_set.len() == 2));
}

#[test]
fn inclusion_probability_law() {
    let (m, n, streams) = (5usize, 50usize, 20_000u64);
    let mut counts = vec![0u64; n];
    for s in 0..streams {
        let mut b = ReservoirBuffer::new(m, rng::derive_indexed(1, "law", s));
        for i in 0..n {
            b.observe(ex(i));
        }
        for slot in b.slots() {
            counts[slot.index] += 1;
        }
    }
    let expected = streams as f64 * m as f64 / n as f64;
    for &c in &counts {
        assert!((c as f64 / streams as f64 - 0.1).abs() <= 0.02);
    }
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat}, p {p}");
}

#[test]
fn checkpoint_file_round_trip_preserves_logits() {
    let ds = dataset(1, 0);
    let net = Network::<f32>::init(NetworkSpec::reference(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("n.ckpt");
    checkpoint::save(&p, &net, 12, 3).unwrap();
    let (back, hdr) = checkpoint::load::<f32>(&p).unwrap();
    assert_eq!(hdr.step, 12);
    let x = ds.batch::<f32>(&[0, 1, 2]);
    assert_eq!(net.forward(&x, &[]).unwrap().0, back.forward(&x, &[]).unwrap().0);
}

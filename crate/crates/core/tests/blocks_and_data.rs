mod common;

use proptest::prelude::*;
use saros_core::blocking::{block_counts, estimate_thresholds, extract_blocks, Block};
use saros_core::data::{binarize, build_index, temporal_split, Event, Feedback, RawInteraction, RawRecord};
use saros_core::rng;

#[derive(Clone, Copy, PartialEq)]
enum State {
    Idle,
    Negatives,
    Positives,
}

/// Explicit three-state machine over labels; emits (negative positions,
/// positive positions) per block.
fn oracle_blocks(labels: &[bool]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut state = State::Idle;
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for (t, &clicked) in labels.iter().enumerate() {
        state = match (state, clicked) {
            (State::Idle, true) => State::Idle,
            (State::Idle, false) => {
                neg.push(t);
                State::Negatives
            }
            (State::Negatives, false) => {
                neg.push(t);
                State::Negatives
            }
            (State::Negatives, true) | (State::Positives, true) => {
                pos.push(t);
                State::Positives
            }
            (State::Positives, false) => {
                out.push((std::mem::take(&mut neg), std::mem::take(&mut pos)));
                neg.push(t);
                State::Negatives
            }
        };
    }
    if state == State::Positives {
        out.push((neg, pos));
    }
    out
}

fn stream_of(labels: &[bool]) -> Vec<Event> {
    labels
        .iter()
        .enumerate()
        .map(|(t, &c)| Event { item: t as u32, clicked: c, timestamp: t as i64, row: t as u64 })
        .collect()
}

#[test]
fn extraction_matches_state_machine_on_random_strings() {
    let mut rng = rng::seeded(77);
    for trial in 0..10_000 {
        let p = [0.1, 0.5, 0.9][trial % 3];
        let len = rng::index(&mut rng, 51);
        let labels: Vec<bool> = (0..len).map(|_| rng::unit_f64(&mut rng) < p).collect();
        let got = extract_blocks(0, &stream_of(&labels)).unwrap();
        let want: Vec<Block> = oracle_blocks(&labels)
            .into_iter()
            .map(|(n, p)| Block {
                user: 0,
                negatives: n.into_iter().map(|t| t as u32).collect(),
                positives: p.into_iter().map(|t| t as u32).collect(),
            })
            .collect();
        assert_eq!(got, want, "labels {labels:?}");
    }
}

#[test]
fn counts_for_reference_and_uniform_patterns() {
    let d = common::dataset_from(6, &[vec![(0, false), (1, false), (2, true), (3, false), (4, true), (5, true)]]);
    assert_eq!(block_counts(&d).unwrap(), vec![2]);
    let streams: Vec<Vec<(u32, bool)>> = (0..7).map(|_| vec![(0, false), (1, true)]).collect();
    let d = common::dataset_from(2, &streams);
    assert_eq!(block_counts(&d).unwrap(), vec![1; 7]);
    let empty = build_index(&[]);
    assert!(block_counts(&empty).unwrap().is_empty());
}

#[test]
fn ratings_above_every_threshold_give_no_blocks() {
    let recs: Vec<RawRecord> = (0..20)
        .map(|t| RawRecord {
            user: format!("u{}", t % 4),
            item: format!("i{}", t % 7),
            feedback: Feedback::Rating(3.0),
            timestamp: t,
        })
        .collect();
    let d = build_index(&binarize(&recs, 4.0));
    assert_eq!(d.streams().map(|(_, s)| s.iter().filter(|e| e.clicked).count()).sum::<usize>(), 0);
    assert!(block_counts(&d).unwrap().iter().all(|&c| c == 0));
}

/// Nearest-rank order statistic computed by counting.
fn oracle_quantile(counts: &[usize], q: f64) -> usize {
    let mut v: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    v.sort();
    let n = v.len();
    // smallest value whose cumulative share reaches q
    for (idx, &x) in v.iter().enumerate() {
        if (idx + 1) as f64 >= q * n as f64 - 1e-9 {
            return x;
        }
    }
    v[n - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn blocks_flatten_to_an_ordered_subsequence(labels in prop::collection::vec(any::<bool>(), 0..60)) {
        let blocks = extract_blocks(0, &stream_of(&labels)).unwrap();
        let flat: Vec<u32> = blocks.iter().flat_map(|b| b.negatives.iter().chain(&b.positives).copied()).collect();
        prop_assert!(flat.windows(2).all(|w| w[0] < w[1]));
        for b in &blocks {
            prop_assert!(!b.negatives.is_empty() && !b.positives.is_empty());
            prop_assert!(b.negatives.iter().max() < b.positives.iter().min());
            prop_assert!(b.negatives.iter().all(|&t| !labels[t as usize]));
            prop_assert!(b.positives.iter().all(|&t| labels[t as usize]));
        }
    }

    #[test]
    fn thresholds_follow_nearest_rank(counts in prop::collection::vec(0usize..40, 1..80), lo in 0.0f64..0.5, hi in 0.5f64..=1.0) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        prop_assume!(lo < hi);
        let t = estimate_thresholds(&counts, lo, hi).unwrap();
        prop_assert_eq!(t.lower, oracle_quantile(&counts, lo).max(1));
        prop_assert_eq!(t.upper, oracle_quantile(&counts, hi));
        prop_assert!(t.lower <= t.upper);
    }

    #[test]
    fn widening_quantiles_never_shrinks_interval(counts in prop::collection::vec(0usize..40, 1..80),
                                                 lo in 0.1f64..0.4, hi in 0.6f64..0.9, widen in 0.0f64..0.1) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let narrow = estimate_thresholds(&counts, lo, hi).unwrap();
        let wide = estimate_thresholds(&counts, lo - widen, hi + widen).unwrap();
        prop_assert!(wide.lower <= narrow.lower && wide.upper >= narrow.upper);
    }

    #[test]
    fn split_is_a_chronological_partition(lens in prop::collection::vec(1usize..30, 1..20), frac in 0.05f64..0.95) {
        let mut rows = Vec::new();
        let mut rng = rng::seeded(lens.len() as u64);
        for (u, &n) in lens.iter().enumerate() {
            for _ in 0..n {
                rows.push(RawInteraction {
                    user: format!("u{u}"),
                    item: format!("i{}", rng::index(&mut rng, 9)),
                    clicked: rng::unit_f64(&mut rng) < 0.5,
                    timestamp: rng::index(&mut rng, 50) as i64,
                });
            }
        }
        let d = build_index(&rows);
        let (train, test) = temporal_split(&d, frac).unwrap();
        for (u, s) in d.streams() {
            let (tr, te) = (train.stream(u), test.stream(u));
            if tr.is_empty() || te.is_empty() {
                prop_assert!(tr.is_empty() && te.is_empty());
                continue;
            }
            let mut joined = tr.to_vec();
            joined.extend_from_slice(te);
            prop_assert_eq!(joined.as_slice(), s);
            prop_assert!(tr.last().unwrap().timestamp <= te[0].timestamp);
            prop_assert_eq!(te.len(), (frac * s.len() as f64).ceil() as usize);
        }
    }

    #[test]
    fn indexing_is_idempotent(n in 1usize..60, seed in any::<u64>()) {
        let mut rng = rng::seeded(seed);
        let rows: Vec<RawInteraction> = (0..n)
            .map(|_| RawInteraction {
                user: format!("u{}", rng::index(&mut rng, 5)),
                item: format!("i{}", rng::index(&mut rng, 8)),
                clicked: rng::unit_f64(&mut rng) < 0.5,
                timestamp: rng::index(&mut rng, 10) as i64,
            })
            .collect();
        let d = build_index(&rows);
        prop_assert_eq!(build_index(&d.flatten()), d);
    }
}

/// Raw-id view of a dataset: users sorted by raw id, each with the raw
/// item ids and flags of their stream.
fn canonical(d: &saros_core::data::Dataset) -> Vec<(String, Vec<(String, bool, i64)>)> {
    let mut out: Vec<_> = d
        .streams()
        .map(|(u, s)| {
            (
                d.users().raw(u).unwrap().to_string(),
                s.iter().map(|e| (d.items().raw(e.item).unwrap().to_string(), e.clicked, e.timestamp)).collect(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn permuted_input_yields_same_dataset_up_to_numbering() {
    let mut rng = rng::seeded(3);
    let rows: Vec<RawInteraction> = (0..300)
        .map(|t| RawInteraction {
            user: format!("u{}", rng::index(&mut rng, 12)),
            item: format!("i{}", rng::index(&mut rng, 20)),
            clicked: rng::unit_f64(&mut rng) < 0.4,
            timestamp: t,
        })
        .collect();
    let base = build_index(&rows);
    for seed in 0..20 {
        let mut shuffled = rows.clone();
        rng::shuffle(&mut rng::seeded(seed), &mut shuffled);
        let d = build_index(&shuffled);
        assert_eq!(canonical(&d), canonical(&base));
        // numbering follows first occurrence in the shuffled input
        assert_eq!(d.users().raw(0).unwrap(), shuffled[0].user);
        assert_eq!(d.items().raw(0).unwrap(), shuffled[0].item);
    }
}

#[test]
fn half_split_of_many_users_takes_ceiling() {
    let mut rng = rng::seeded(10);
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for u in 0..1000 {
        let n = 2 + rng::index(&mut rng, 20);
        sizes.push(n);
        for t in 0..n {
            rows.push(RawInteraction { user: format!("u{u}"), item: format!("i{t}"), clicked: t % 2 == 1, timestamp: t as i64 });
        }
    }
    let d = build_index(&rows);
    let (train, test) = temporal_split(&d, 0.5).unwrap();
    for (u, &n) in sizes.iter().enumerate() {
        assert_eq!(test.stream(u as u32).len(), n.div_ceil(2));
        assert_eq!(train.stream(u as u32).len(), n / 2);
    }
}

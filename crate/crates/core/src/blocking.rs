//! Block construction over a user's time-ordered stream and the `[b, B]`
//! thresholds estimated from the per-user block-count distribution.

use alloc::vec::Vec;

use crate::data::{ceil_fraction, Dataset, Event};
use crate::error::{Error, Result};
use crate::model::{ItemId, UserId};

/// A run of non-clicked items followed by the run of clicked items that
/// closes it. Both sides are non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub user: UserId,
    pub negatives: Vec<ItemId>,
    pub positives: Vec<ItemId>,
}

impl Block {
    pub fn new(user: UserId, negatives: Vec<ItemId>, positives: Vec<ItemId>) -> Result<Self> {
        if negatives.is_empty() || positives.is_empty() {
            return Err(Error::invalid("a block needs at least one negative and one positive"));
        }
        Ok(Block {
            user,
            negatives,
            positives,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.negatives.len() * self.positives.len()
    }

    /// Every distinct item of the block, ascending.
    pub fn items(&self) -> Vec<ItemId> {
        let mut items: Vec<ItemId> = self.negatives.iter().chain(&self.positives).copied().collect();
        items.sort_unstable();
        items.dedup();
        items
    }
}

/// Splits one user's stream into blocks.
///
/// Consecutive non-clicks accumulate into the negative side; the first click
/// opens the positive side, which extends over the maximal run of clicks. A
/// following non-click closes the block. Leading clicks and a trailing run
/// of non-clicks are dropped.
pub fn extract_blocks(user: UserId, stream: &[Event]) -> Result<Vec<Block>> {
    if stream.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::invalid("stream is not sorted by timestamp"));
    }
    let mut blocks = Vec::new();
    let mut negatives: Vec<ItemId> = Vec::new();
    let mut positives: Vec<ItemId> = Vec::new();
    for e in stream {
        if e.clicked {
            if !negatives.is_empty() {
                positives.push(e.item);
            }
        } else {
            if !positives.is_empty() {
                blocks.push(Block {
                    user,
                    negatives: core::mem::take(&mut negatives),
                    positives: core::mem::take(&mut positives),
                });
            }
            negatives.push(e.item);
        }
    }
    if !positives.is_empty() {
        blocks.push(Block {
            user,
            negatives,
            positives,
        });
    }
    Ok(blocks)
}

/// Blocks of every user, indexed by dense user id.
pub fn all_blocks(dataset: &Dataset) -> Result<Vec<Vec<Block>>> {
    dataset.streams().map(|(u, s)| extract_blocks(u, s)).collect()
}

/// Number of blocks per user (zero-block users included), indexed by user id.
pub fn block_counts(dataset: &Dataset) -> Result<Vec<usize>> {
    dataset
        .streams()
        .map(|(u, s)| extract_blocks(u, s).map(|b| b.len()))
        .collect()
}

/// Inclusive bounds on the number of blocks a user may contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub lower: usize,
    pub upper: usize,
}

impl Thresholds {
    pub const UNBOUNDED: Thresholds = Thresholds {
        lower: 1,
        upper: usize::MAX,
    };

    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower == 0 || lower > upper {
            return Err(Error::invalid("thresholds require 1 <= b <= B"));
        }
        Ok(Thresholds { lower, upper })
    }

    pub fn contains(&self, count: usize) -> bool {
        (self.lower..=self.upper).contains(&count)
    }
}

pub const DEFAULT_LOWER_QUANTILE: f64 = 0.1;
pub const DEFAULT_UPPER_QUANTILE: f64 = 0.9;

/// `b = max(1, Q(q_lo))`, `B = Q(q_hi)`, with `Q` the nearest-rank quantile
/// (the `ceil(q n)`-th order statistic, rank clamped to `1..=n`) over the
/// positive counts. Zero-block users do not take part.
pub fn estimate_thresholds(counts: &[usize], q_lo: f64, q_hi: f64) -> Result<Thresholds> {
    if !(0.0 <= q_lo && q_lo < q_hi && q_hi <= 1.0) {
        return Err(Error::invalid("quantiles must satisfy 0 <= q_lo < q_hi <= 1"));
    }
    let mut positive: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if positive.is_empty() {
        return Err(Error::Estimation("no user has a positive block count".into()));
    }
    positive.sort_unstable();
    let lower = nearest_rank(&positive, q_lo).max(1);
    let upper = nearest_rank(&positive, q_hi);
    Ok(Thresholds { lower, upper })
}

fn nearest_rank(sorted: &[usize], q: f64) -> usize {
    let rank = ceil_fraction(q, sorted.len()).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn stream(labels: &[u8]) -> Vec<Event> {
        labels
            .iter()
            .enumerate()
            .map(|(t, &l)| Event {
                item: t as ItemId,
                clicked: l == 1,
                timestamp: t as i64,
                row: t as u64,
            })
            .collect()
    }

    #[test]
    fn reference_example() {
        // items a..f = 0..5
        let blocks = extract_blocks(3, &stream(&[0, 0, 1, 0, 1, 1])).unwrap();
        assert_eq!(
            blocks,
            vec![
                Block { user: 3, negatives: vec![0, 1], positives: vec![2] },
                Block { user: 3, negatives: vec![3], positives: vec![4, 5] },
            ]
        );
    }

    #[test]
    fn degenerate_streams_give_no_blocks() {
        assert!(extract_blocks(0, &stream(&[1, 1, 1])).unwrap().is_empty());
        assert!(extract_blocks(0, &stream(&[0, 0, 0])).unwrap().is_empty());
        assert!(extract_blocks(0, &[]).unwrap().is_empty());
        let b = extract_blocks(0, &stream(&[1, 0, 1, 0])).unwrap();
        assert_eq!(b, vec![Block { user: 0, negatives: vec![1], positives: vec![2] }]);
    }

    #[test]
    fn unsorted_stream_rejected() {
        let mut s = stream(&[0, 1]);
        s[0].timestamp = 10;
        assert!(matches!(extract_blocks(0, &s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn block_requires_both_sides() {
        assert!(Block::new(0, vec![], vec![1]).is_err());
        assert!(Block::new(0, vec![1], vec![]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let counts: Vec<usize> = (1..=10).collect();
        assert_eq!(estimate_thresholds(&counts, 0.1, 0.9).unwrap(), Thresholds { lower: 1, upper: 9 });
        assert_eq!(estimate_thresholds(&[5], 0.1, 0.9).unwrap(), Thresholds { lower: 5, upper: 5 });
        assert_eq!(estimate_thresholds(&[4, 4, 4, 0], 0.0, 1.0).unwrap(), Thresholds { lower: 4, upper: 4 });
        assert!(matches!(estimate_thresholds(&[0, 0], 0.1, 0.9), Err(Error::Estimation(_))));
        assert!(matches!(estimate_thresholds(&[], 0.1, 0.9), Err(Error::Estimation(_))));
        assert!(estimate_thresholds(&[1], 0.9, 0.1).is_err());
    }

    #[test]
    fn zero_counts_are_ignored_in_estimation() {
        let mut counts: Vec<usize> = (1..=10).collect();
        counts.extend([0; 50]);
        assert_eq!(estimate_thresholds(&counts, 0.1, 0.9).unwrap(), Thresholds { lower: 1, upper: 9 });
    }

    #[test]
    fn thresholds_contain() {
        let t = Thresholds::new(2, 4).unwrap();
        assert!(!t.contains(1) && t.contains(2) && t.contains(4) && !t.contains(5));
        assert!(Thresholds::UNBOUNDED.contains(usize::MAX));
        assert!(!Thresholds::UNBOUNDED.contains(0));
        assert!(Thresholds::new(0, 3).is_err());
        assert!(Thresholds::new(4, 3).is_err());
    }
}

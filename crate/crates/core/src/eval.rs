//! Top-N evaluation: candidate ranking, NDCG@K, MAP@K and their means over
//! test users.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{dot, ItemId, LatentModel, UserId};

/// Anything that scores every item for a user.
pub trait Scorer {
    /// Size of the user vocabulary, or `None` if scores ignore the user.
    fn n_users(&self) -> Option<usize>;
    fn n_items(&self) -> usize;
    /// Writes one score per item into `out` (`out.len() == n_items()`).
    fn score_items(&self, user: UserId, out: &mut [f64]) -> Result<()>;
}

impl Scorer for LatentModel {
    fn n_users(&self) -> Option<usize> {
        Some(LatentModel::n_users(self))
    }

    fn n_items(&self) -> usize {
        LatentModel::n_items(self)
    }

    fn score_items(&self, user: UserId, out: &mut [f64]) -> Result<()> {
        self.check_user(user)?;
        let u = self.user_row(user);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(u, self.item_row(i as ItemId));
        }
        Ok(())
    }
}

/// Candidate items for one user, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList(pub Vec<ItemId>);

impl RankedList {
    pub fn items(&self) -> &[ItemId] {
        &self.0
    }
}

fn by_score_then_id(scores: &[f64]) -> impl Fn(&ItemId, &ItemId) -> Ordering + '_ {
    move |&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

fn candidates(scorer: &dyn Scorer, user: UserId, train: &Dataset, scores: &mut [f64]) -> Result<Vec<ItemId>> {
    if user as usize >= train.n_users() || scorer.n_users().is_some_and(|n| user as usize >= n) {
        return Err(Error::InvalidArgument(alloc::format!("unknown user {user}")));
    }
    if scorer.n_items() != train.n_items() {
        return Err(Error::invalid("scorer and dataset disagree on the number of items"));
    }
    scorer.score_items(user, scores)?;
    let mut excluded = vec![false; train.n_items()];
    for e in train.stream(user).iter().filter(|e| e.clicked) {
        excluded[e.item as usize] = true;
    }
    Ok((0..train.n_items() as ItemId).filter(|&i| !excluded[i as usize]).collect())
}

/// Every item except the user's training clicks, by descending score with
/// ties broken by ascending item id.
pub fn rank_items(scorer: &dyn Scorer, user: UserId, train: &Dataset) -> Result<RankedList> {
    let mut scores = vec![0.0; train.n_items()];
    let mut items = candidates(scorer, user, train, &mut scores)?;
    items.sort_by(by_score_then_id(&scores));
    Ok(RankedList(items))
}

/// The first `k` entries of [`rank_items`], computed with a partial sort.
pub fn top_k(scorer: &dyn Scorer, user: UserId, train: &Dataset, k: usize, scores: &mut [f64]) -> Result<RankedList> {
    let mut items = candidates(scorer, user, train, scores)?;
    let cmp = by_score_then_id(scores);
    if k < items.len() {
        if k > 0 {
            items.select_nth_unstable_by(k - 1, &cmp);
        }
        items.truncate(k);
    }
    items.sort_by(&cmp);
    Ok(RankedList(items))
}

fn discount(rank: usize) -> f64 {
    1.0 / libm::log2(rank as f64 + 1.0)
}

/// Binary-relevance NDCG@K; `None` when `relevant` is empty or `k == 0`.
pub fn ndcg_at_k(ranked: &[ItemId], relevant: &BTreeSet<ItemId>, k: usize) -> Option<f64> {
    if relevant.is_empty() || k == 0 {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(r, _)| discount(r + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    Some(dcg / ideal)
}

/// Average precision truncated at K, normalized by `min(K, |relevant|)`;
/// `None` when `relevant` is empty or `k == 0`.
pub fn map_at_k(ranked: &[ItemId], relevant: &BTreeSet<ItemId>, k: usize) -> Option<f64> {
    if relevant.is_empty() || k == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Some(sum / k.min(relevant.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAtK {
    pub k: usize,
    pub ndcg: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub metrics: Vec<MetricAtK>,
    pub users_evaluated: usize,
    /// Test users with no clicked test item.
    pub users_excluded: usize,
}

impl MetricsReport {
    pub fn at(&self, k: usize) -> Option<&MetricAtK> {
        self.metrics.iter().find(|m| m.k == k)
    }
}

pub const DEFAULT_KS: [usize; 2] = [5, 10];

/// Mean NDCG@K and MAP@K over test users, each scored against the set of
/// items they clicked in `test`. Users are visited in id order.
pub fn evaluate(scorer: &dyn Scorer, train: &Dataset, test: &Dataset, ks: &[usize]) -> Result<MetricsReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid("cutoffs must be non-empty and positive"));
    }
    if train.n_users() != test.n_users() || train.n_items() != test.n_items() {
        return Err(Error::invalid("train and test must share vocabularies"));
    }
    let k_max = *ks.iter().max().unwrap_or(&1);
    let mut sums = vec![(0.0, 0.0); ks.len()];
    let (mut evaluated, mut excluded) = (0usize, 0usize);
    let mut scores = vec![0.0; train.n_items()];
    for (u, stream) in test.streams() {
        if stream.is_empty() {
            continue;
        }
        let relevant: BTreeSet<ItemId> = stream.iter().filter(|e| e.clicked).map(|e| e.item).collect();
        if relevant.is_empty() {
            excluded += 1;
            continue;
        }
        let ranked = top_k(scorer, u, train, k_max, &mut scores)?;
        for (slot, &k) in sums.iter_mut().zip(ks) {
            slot.0 += ndcg_at_k(ranked.items(), &relevant, k).unwrap_or(0.0);
            slot.1 += map_at_k(ranked.items(), &relevant, k).unwrap_or(0.0);
        }
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::Evaluation("no test user has a clicked test item".into()));
    }
    let n = evaluated as f64;
    Ok(MetricsReport {
        metrics: ks
            .iter()
            .zip(sums)
            .map(|(&k, (ndcg, map))| MetricAtK {
                k,
                ndcg: ndcg / n,
                map: map / n,
            })
            .collect(),
        users_evaluated: evaluated,
        users_excluded: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::PopularityModel;
    use crate::data::{build_index, RawInteraction};
    use alloc::string::ToString;

    fn set(items: &[ItemId]) -> BTreeSet<ItemId> {
        items.iter().copied().collect()
    }

    #[test]
    fn ndcg_examples() {
        let ranked = [0, 1, 2, 3, 4, 5];
        assert_eq!(ndcg_at_k(&ranked, &set(&[0, 1, 2, 3, 4, 5]), 5), Some(1.0));
        assert_eq!(ndcg_at_k(&ranked, &set(&[9]), 5), Some(0.0));
        let v = ndcg_at_k(&ranked, &set(&[2]), 5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&ranked, &set(&[]), 5), None);
    }

    #[test]
    fn map_examples() {
        let ranked = [0, 1, 2, 3, 4, 5];
        assert_eq!(map_at_k(&ranked, &set(&[0, 1, 2, 3, 4, 5]), 5), Some(1.0));
        assert_eq!(map_at_k(&ranked, &set(&[0, 1]), 5), Some(1.0));
        assert_eq!(map_at_k(&ranked, &set(&[7, 8]), 5), Some(0.0));
        let v = map_at_k(&ranked, &set(&[2]), 5).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(map_at_k(&ranked, &set(&[1]), 0), None);
    }

    fn dataset() -> (Dataset, Dataset) {
        let rows: Vec<RawInteraction> = [("u", "a", true), ("u", "b", false), ("u", "c", false)]
            .iter()
            .enumerate()
            .map(|(t, (u, i, c))| RawInteraction {
                user: u.to_string(),
                item: i.to_string(),
                clicked: *c,
                timestamp: t as i64,
            })
            .collect();
        let d = build_index(&rows);
        (d.clone(), d)
    }

    #[test]
    fn ranking_breaks_ties_by_id_and_skips_train_clicks() {
        let (train, _) = dataset();
        let zero = LatentModel::zeros(1, 3, 2).unwrap();
        assert_eq!(rank_items(&zero, 0, &train).unwrap().0, vec![1, 2]);
        let pop = PopularityModel::from_counts(vec![2, 5, 5]);
        // item 0 is a train click of user 0
        assert_eq!(rank_items(&pop, 0, &train).unwrap().0, vec![1, 2]);
        assert!(rank_items(&zero, 1, &train).is_err());
    }

    #[test]
    fn scores_two_five_five_rank_as_one_two_zero() {
        let rows = vec![RawInteraction { user: "u".into(), item: "x".into(), clicked: false, timestamp: 0 }];
        let mut train = build_index(&rows);
        // three items, none clicked
        train = Dataset::from_streams(train.users().clone(), crate::data::Vocab::sequential("i", 3), vec![train.stream(0).to_vec()]).unwrap();
        let pop = PopularityModel::from_counts(vec![2, 5, 5]);
        assert_eq!(rank_items(&pop, 0, &train).unwrap().0, vec![1, 2, 0]);
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let (train, _) = dataset();
        // user 0's test: clicked item 1 (b)
        let test_rows = vec![Vec::from([crate::data::Event { item: 1, clicked: true, timestamp: 9, row: 9 }])];
        let test = Dataset::from_streams(train.users().clone(), train.items().clone(), test_rows).unwrap();
        let model = LatentModel::from_parts(1, 3, 1, vec![1.0], vec![0.0, 2.0, 1.0]).unwrap();
        let report = evaluate(&model, &train, &test, &[5, 10]).unwrap();
        assert_eq!(report.users_evaluated, 1);
        for m in &report.metrics {
            assert_eq!((m.ndcg, m.map), (1.0, 1.0));
        }
    }

    #[test]
    fn no_clicked_test_items_is_an_error() {
        let (train, test) = dataset();
        let unclicked: Vec<_> = test.stream(0).iter().map(|e| crate::data::Event { clicked: false, ..*e }).collect();
        let test = Dataset::from_streams(test.users().clone(), test.items().clone(), vec![unclicked]).unwrap();
        let zero = LatentModel::zeros(1, 3, 2).unwrap();
        assert!(matches!(evaluate(&zero, &train, &test, &[5]), Err(Error::Evaluation(_))));
        assert!(evaluate(&zero, &train, &test, &[]).is_err());
    }
}

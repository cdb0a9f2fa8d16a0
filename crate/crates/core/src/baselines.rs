//! Reference recommenders: global popularity and per-triplet BPR.

use alloc::vec;
use alloc::vec::Vec;

use crate::blocking::{block_counts, Block};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::loss::block_gradient;
use crate::model::{InitSpec, ItemId, LatentModel, UserId};
use crate::rng;
use crate::train::{apply_gradient_step, TrainConfig};

/// Click counts per item and the induced ranking (count desc, id asc).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopularityModel {
    counts: Vec<u64>,
    order: Vec<ItemId>,
}

impl PopularityModel {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let mut order: Vec<ItemId> = (0..counts.len() as ItemId).collect();
        order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
        PopularityModel { counts, order }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Every item, most popular first.
    pub fn ranking(&self) -> &[ItemId] {
        &self.order
    }
}

/// Counts clicked events per item.
pub fn train_mostpop(train: &Dataset) -> PopularityModel {
    let mut counts = vec![0u64; train.n_items()];
    for (_, stream) in train.streams() {
        for e in stream.iter().filter(|e| e.clicked) {
            counts[e.item as usize] += 1;
        }
    }
    PopularityModel::from_counts(counts)
}

impl Scorer for PopularityModel {
    fn n_users(&self) -> Option<usize> {
        None
    }

    fn n_items(&self) -> usize {
        self.counts.len()
    }

    fn score_items(&self, _user: UserId, out: &mut [f64]) -> Result<()> {
        for (o, &c) in out.iter_mut().zip(&self.counts) {
            *o = c as f64;
        }
        Ok(())
    }
}

/// A user's distinct clicked and non-clicked training items.
struct Pools {
    user: UserId,
    positives: Vec<ItemId>,
    negatives: Vec<ItemId>,
}

fn eligible_pools(train: &Dataset) -> Vec<Pools> {
    train
        .streams()
        .filter_map(|(user, stream)| {
            let mut positives: Vec<ItemId> = stream.iter().filter(|e| e.clicked).map(|e| e.item).collect();
            let mut negatives: Vec<ItemId> = stream.iter().filter(|e| !e.clicked).map(|e| e.item).collect();
            positives.sort_unstable();
            positives.dedup();
            negatives.sort_unstable();
            negatives.dedup();
            (!positives.is_empty() && !negatives.is_empty()).then_some(Pools {
                user,
                positives,
                negatives,
            })
        })
        .collect()
}

/// Number of sampled triplets [`train_bpr`] performs for `config`.
pub fn bpr_step_budget(train: &Dataset, config: &TrainConfig) -> Result<u64> {
    Ok(match config.bpr_steps {
        Some(n) => n,
        None => block_counts(train)?.iter().sum::<usize>() as u64 * config.epochs as u64,
    })
}

/// Stochastic BPR: each step draws a user uniformly among users with both
/// clicked and non-clicked items, then a clicked and a non-clicked item
/// uniformly from that user's pools, and takes one gradient step on the
/// pair loss (computed as the loss of the 1x1 block).
pub fn train_bpr(train: &Dataset, config: &TrainConfig, init: InitSpec) -> Result<LatentModel> {
    config.validate()?;
    let model = LatentModel::init(train.n_users(), train.n_items(), config.dim, init)?;
    train_bpr_from(model, train, config)
}

/// BPR starting from an existing model.
pub fn train_bpr_from(mut model: LatentModel, train: &Dataset, config: &TrainConfig) -> Result<LatentModel> {
    config.validate()?;
    if model.n_users() != train.n_users() || model.n_items() != train.n_items() {
        return Err(Error::Config("model shape does not match the training vocabulary".into()));
    }
    let pools = eligible_pools(train);
    if pools.is_empty() {
        return Err(Error::Config(
            "BPR needs at least one user with both clicked and non-clicked items".into(),
        ));
    }
    let steps = bpr_step_budget(train, config)?;
    let params = config.loss_params();
    let eta = config.effective_step(train.active_users().count());
    let mut rng = rng::seeded(config.seed);
    for _ in 0..steps {
        let p = &pools[rng::index(&mut rng, pools.len())];
        let pos = p.positives[rng::index(&mut rng, p.positives.len())];
        let neg = p.negatives[rng::index(&mut rng, p.negatives.len())];
        let block = Block {
            user: p.user,
            negatives: vec![neg],
            positives: vec![pos],
        };
        let grad = block_gradient(&model, &block, &params)?;
        apply_gradient_step(&mut model, &grad, eta, None);
    }
    if !model.is_finite() {
        return Err(Error::InvariantViolation(
            "BPR produced non-finite parameters; reduce the step size".into(),
        ));
    }
    Ok(model)
}

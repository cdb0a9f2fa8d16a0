use alloc::vec;
use alloc::vec::Vec;

use super::checkpoint::{rollback, UserCheckpoint};
use super::config::{Algorithm, ThresholdSpec, TrainConfig};
use super::diagnostics::{BlockRecord, Diagnostics};
use crate::blocking::{all_blocks, estimate_thresholds, Block, Thresholds};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{block_loss_and_gradient, LossParams, SparseGradient};
use crate::model::{InitSpec, LatentModel, UserId};
use crate::rng;

/// `(b, B)` from an explicit pair or from quantiles of the training
/// block-count distribution.
pub fn resolve_thresholds(spec: &ThresholdSpec, block_counts: &[usize]) -> Result<Thresholds> {
    match *spec {
        ThresholdSpec::Explicit(t) => {
            Thresholds::new(t.lower, t.upper).map_err(|_| Error::Config("explicit thresholds need 1 <= b <= B".into()))
        }
        ThresholdSpec::Quantiles { lower, upper } => estimate_thresholds(block_counts, lower, upper)
            .map_err(|e| Error::Config(alloc::format!("cannot resolve thresholds: {e}"))),
    }
}

/// One independently shuffled permutation of `0..n_users` per epoch, all
/// drawn from a single generator seeded with `seed`.
pub fn shuffled_visit_orders(n_users: usize, epochs: usize, seed: u64) -> Vec<Vec<UserId>> {
    let mut rng = rng::seeded(seed);
    (0..epochs)
        .map(|_| {
            let mut order: Vec<UserId> = (0..n_users as UserId).collect();
            rng::shuffle(&mut rng, &mut order);
            order
        })
        .collect()
}

/// `w <- w - eta * g` on the rows of `grad`, journaling each row in
/// `checkpoint` before its first write.
pub fn apply_gradient_step(
    model: &mut LatentModel,
    grad: &SparseGradient,
    eta: f64,
    mut checkpoint: Option<&mut UserCheckpoint>,
) {
    if let Some(ck) = checkpoint.as_deref_mut() {
        ck.touch_user(model);
    }
    for (w, g) in model.user_row_mut(grad.user).iter_mut().zip(&grad.user_row) {
        *w -= eta * g;
    }
    for (&item, row) in &grad.item_rows {
        if let Some(ck) = checkpoint.as_deref_mut() {
            ck.touch_item(model, item);
        }
        for (w, g) in model.item_row_mut(item).iter_mut().zip(row) {
            *w -= eta * g;
        }
    }
}

/// Sparse momentum buffer; a missing row is the zero vector.
struct Momentum {
    gamma: f64,
    users: Vec<Option<Vec<f64>>>,
    items: Vec<Option<Vec<f64>>>,
}

impl Momentum {
    fn new(gamma: f64, n_users: usize, n_items: usize) -> Self {
        Momentum {
            gamma,
            users: vec![None; n_users],
            items: vec![None; n_items],
        }
    }

    /// `v <- gamma v + (1 - gamma) g`, then `w <- w - alpha v`, on the rows
    /// present in `grad`.
    fn step(&mut self, model: &mut LatentModel, grad: &SparseGradient, alpha: f64) {
        let gamma = self.gamma;
        let blend = |v: &mut Option<Vec<f64>>, g: &[f64], w: &mut [f64]| {
            let v = v.get_or_insert_with(|| vec![0.0; g.len()]);
            for ((vd, gd), wd) in v.iter_mut().zip(g).zip(w.iter_mut()) {
                // gamma == 0 must reproduce a plain gradient step bit for bit
                *vd = if gamma == 0.0 { *gd } else { gamma * *vd + (1.0 - gamma) * gd };
                *wd -= alpha * *vd;
            }
        };
        blend(&mut self.users[grad.user as usize], &grad.user_row, model.user_row_mut(grad.user));
        for (&item, row) in &grad.item_rows {
            blend(&mut self.items[item as usize], row, model.item_row_mut(item));
        }
    }
}

enum Variant {
    Bounded(Thresholds),
    Momentum(Momentum),
}

fn check_orders(orders: &[Vec<UserId>], n_users: usize) -> Result<()> {
    if orders.iter().flatten().any(|&u| u as usize >= n_users) {
        return Err(Error::invalid("visit order names an unknown user"));
    }
    Ok(())
}

fn n_active(train: &Dataset) -> usize {
    train.active_users().count()
}

fn run(
    mut model: LatentModel,
    train: &Dataset,
    config: &TrainConfig,
    orders: &[Vec<UserId>],
    blocks: &[Vec<Block>],
    mut variant: Variant,
    mut diagnostics: Diagnostics,
) -> Result<(LatentModel, Diagnostics)> {
    check_orders(orders, train.n_users())?;
    if model.n_users() != train.n_users() || model.n_items() != train.n_items() {
        return Err(Error::Config("model shape does not match the training vocabulary".into()));
    }
    let params: LossParams = config.loss_params();
    let step = config.effective_step(n_active(train));
    diagnostics.step = step;
    diagnostics.user_block_counts = blocks.iter().map(Vec::len).collect();

    let mut visit = 0usize;
    for (epoch, order) in orders.iter().enumerate() {
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for &u in order {
            let user_blocks = &blocks[u as usize];
            let first_record = diagnostics.records.len();
            let mut checkpoint = match variant {
                Variant::Bounded(_) => Some(UserCheckpoint::open(&model, u)?),
                Variant::Momentum(_) => None,
            };
            for (block_index, block) in user_blocks.iter().enumerate() {
                let (loss, grad) = block_loss_and_gradient(&model, block, &params)?;
                diagnostics.records.push(BlockRecord {
                    epoch,
                    visit,
                    user: u,
                    block_index,
                    grad_norm_sq: grad.squared_norm(),
                    loss,
                    accepted: true,
                });
                match &mut variant {
                    Variant::Bounded(_) => apply_gradient_step(&mut model, &grad, step, checkpoint.as_mut()),
                    Variant::Momentum(m) => m.step(&mut model, &grad, step),
                }
            }
            let accepted = match (&variant, checkpoint) {
                (Variant::Bounded(t), Some(ck)) => {
                    let n = user_blocks.len();
                    if t.contains(n) {
                        true
                    } else {
                        rollback(&mut model, ck)?;
                        if n > t.upper {
                            diagnostics.discarded_above += 1;
                        } else if n > 0 {
                            diagnostics.discarded_below += 1;
                        }
                        false
                    }
                }
                _ => true,
            };
            for r in &mut diagnostics.records[first_record..] {
                r.accepted = accepted;
                if accepted {
                    loss_sum += r.loss;
                    loss_n += 1;
                }
            }
            visit += 1;
        }
        diagnostics
            .epoch_mean_loss
            .push(if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN });
    }
    if !model.is_finite() {
        return Err(Error::InvariantViolation(
            "training produced non-finite parameters; reduce the step size".into(),
        ));
    }
    diagnostics.finish();
    Ok((model, diagnostics))
}

/// Bounded-block training with a seeded shuffled visit order per epoch.
///
/// Each user's blocks are processed in time order with a plain gradient
/// step per block; once the user's stream is exhausted, all of that user's
/// updates are rolled back if the block count falls outside `[b, B]`.
pub fn train_saros_b(train: &Dataset, config: &TrainConfig, init: InitSpec) -> Result<(LatentModel, Diagnostics)> {
    let orders = shuffled_visit_orders(train.n_users(), config.epochs, config.seed);
    train_saros_b_with_order(train, config, init, &orders)
}

/// [`train_saros_b`] with an explicit visit order (one list per epoch).
pub fn train_saros_b_with_order(
    train: &Dataset,
    config: &TrainConfig,
    init: InitSpec,
    orders: &[Vec<UserId>],
) -> Result<(LatentModel, Diagnostics)> {
    config.validate()?;
    let model = LatentModel::init(train.n_users(), train.n_items(), config.dim, init)?;
    train_saros_b_from(model, train, config, orders)
}

/// SAROS_b starting from an existing model instead of a fresh init.
pub fn train_saros_b_from(
    model: LatentModel,
    train: &Dataset,
    config: &TrainConfig,
    orders: &[Vec<UserId>],
) -> Result<(LatentModel, Diagnostics)> {
    config.validate()?;
    if config.algorithm != Algorithm::SarosB {
        return Err(Error::Config("configuration is not for SAROS_b".into()));
    }
    let blocks = all_blocks(train)?;
    let counts: Vec<usize> = blocks.iter().map(Vec::len).collect();
    let thresholds = resolve_thresholds(&config.thresholds, &counts)?;
    let diagnostics = Diagnostics {
        thresholds: Some(thresholds),
        ..Default::default()
    };
    run(model, train, config, orders, &blocks, Variant::Bounded(thresholds), diagnostics)
}

/// Momentum training over every user, with a seeded shuffled visit order.
///
/// The momentum buffer starts at zero and is carried across blocks, users
/// and epochs; only the rows a block touches are blended and moved.
pub fn train_saros_m(train: &Dataset, config: &TrainConfig, init: InitSpec) -> Result<(LatentModel, Diagnostics)> {
    let orders = shuffled_visit_orders(train.n_users(), config.epochs, config.seed);
    train_saros_m_with_order(train, config, init, &orders)
}

/// [`train_saros_m`] with an explicit visit order (one list per epoch).
pub fn train_saros_m_with_order(
    train: &Dataset,
    config: &TrainConfig,
    init: InitSpec,
    orders: &[Vec<UserId>],
) -> Result<(LatentModel, Diagnostics)> {
    config.validate()?;
    let model = LatentModel::init(train.n_users(), train.n_items(), config.dim, init)?;
    train_saros_m_from(model, train, config, orders)
}

/// SAROS_m starting from an existing model, with a zero momentum buffer.
pub fn train_saros_m_from(
    model: LatentModel,
    train: &Dataset,
    config: &TrainConfig,
    orders: &[Vec<UserId>],
) -> Result<(LatentModel, Diagnostics)> {
    config.validate()?;
    if config.algorithm != Algorithm::SarosM {
        return Err(Error::Config("configuration is not for SAROS_m".into()));
    }
    let blocks = all_blocks(train)?;
    let momentum = Momentum::new(config.momentum_gamma, train.n_users(), train.n_items());
    run(model, train, config, orders, &blocks, Variant::Momentum(momentum), Diagnostics::default())
}

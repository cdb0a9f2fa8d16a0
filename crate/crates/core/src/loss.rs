//! Regularized logistic pairwise loss, its block average and the exact
//! sparse gradient of the block average.
//!
//! For a user `u` preferring item `i` over `j`, with `d = U_u . (I_i - I_j)`:
//!
//! ```text
//! l(u, i, j) = log(1 + exp(-d)) + lambda * (|U_u|^2 + |I_i|^2 + |I_j|^2)
//! ```
//!
//! The block loss is the mean of `l` over every (positive, negative) pair of
//! the block. The regularizer sits inside the pair sum, so a row shared by
//! several pairs is penalized once per pair.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::blocking::Block;
use crate::error::{Error, Result};
use crate::model::{dot, squared_norm, ItemId, LatentModel, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub reg_lambda: f64,
}

impl LossParams {
    pub fn new(reg_lambda: f64) -> Result<Self> {
        if !(reg_lambda >= 0.0 && reg_lambda.is_finite()) {
            return Err(Error::invalid("reg_lambda must be finite and nonnegative"));
        }
        Ok(LossParams { reg_lambda })
    }
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams { reg_lambda: 0.0 }
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

/// Logistic sigmoid without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Loss of ranking `preferred` above `other` for user `u`.
pub fn pair_loss(
    model: &LatentModel,
    u: UserId,
    preferred: ItemId,
    other: ItemId,
    params: &LossParams,
) -> Result<f64> {
    model.check_user(u)?;
    model.check_item(preferred)?;
    model.check_item(other)?;
    let user = model.user_row(u);
    let d = dot(user, model.item_row(preferred)) - dot(user, model.item_row(other));
    let reg = squared_norm(user) + squared_norm(model.item_row(preferred)) + squared_norm(model.item_row(other));
    Ok(softplus(-d) + params.reg_lambda * reg)
}

fn check_block(model: &LatentModel, block: &Block) -> Result<()> {
    if block.negatives.is_empty() || block.positives.is_empty() {
        return Err(Error::invalid("block has an empty side"));
    }
    model.check_user(block.user)?;
    for &i in block.negatives.iter().chain(&block.positives) {
        model.check_item(i)?;
    }
    Ok(())
}

/// Mean pair loss over the block's `|positives| x |negatives|` pairs.
pub fn block_loss(model: &LatentModel, block: &Block, params: &LossParams) -> Result<f64> {
    check_block(model, block)?;
    let user = model.user_row(block.user);
    let user_reg = squared_norm(user);
    let neg: Vec<(f64, f64)> = block
        .negatives
        .iter()
        .map(|&j| (dot(user, model.item_row(j)), squared_norm(model.item_row(j))))
        .collect();
    let mut total = 0.0;
    for &i in &block.positives {
        let s_pos = dot(user, model.item_row(i));
        let r_pos = squared_norm(model.item_row(i));
        for &(s_neg, r_neg) in &neg {
            total += softplus(-(s_pos - s_neg)) + params.reg_lambda * (user_reg + r_pos + r_neg);
        }
    }
    Ok(total / block.n_pairs() as f64)
}

/// Gradient restricted to the rows a block touches: one user row and the
/// block's distinct item rows (ascending id). Absent rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    pub user: UserId,
    pub user_row: Vec<f64>,
    pub item_rows: BTreeMap<ItemId, Vec<f64>>,
}

impl SparseGradient {
    pub fn squared_norm(&self) -> f64 {
        squared_norm(&self.user_row) + self.item_rows.values().map(|r| squared_norm(r)).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.user_row
            .iter()
            .chain(self.item_rows.values().flatten())
            .all(|x| x.is_finite())
    }
}

/// Exact gradient of [`block_loss`] with respect to the user row and every
/// item row of the block.
pub fn block_gradient(model: &LatentModel, block: &Block, params: &LossParams) -> Result<SparseGradient> {
    block_loss_and_gradient(model, block, params).map(|(_, g)| g)
}

/// [`block_loss`] and [`block_gradient`] sharing one pass over the scores.
pub fn block_loss_and_gradient(
    model: &LatentModel,
    block: &Block,
    params: &LossParams,
) -> Result<(f64, SparseGradient)> {
    check_block(model, block)?;
    let k = model.dim();
    let lambda = params.reg_lambda;
    let user = model.user_row(block.user);
    let n_pos = block.positives.len() as f64;
    let n_neg = block.negatives.len() as f64;
    let n_pairs = n_pos * n_neg;

    let pos_scores: Vec<f64> = block.positives.iter().map(|&i| dot(user, model.item_row(i))).collect();
    let neg_scores: Vec<f64> = block.negatives.iter().map(|&j| dot(user, model.item_row(j))).collect();

    // Per occurrence: sum over its partner items of sigmoid(-d).
    let mut pos_weight = vec![0.0; pos_scores.len()];
    let mut neg_weight = vec![0.0; neg_scores.len()];
    let mut logistic = 0.0;
    for (p, &sp) in pos_scores.iter().enumerate() {
        for (n, &sn) in neg_scores.iter().enumerate() {
            let d = sp - sn;
            logistic += softplus(-d);
            let w = sigmoid(-d);
            pos_weight[p] += w;
            neg_weight[n] += w;
        }
    }

    // Per distinct item: coefficient on the user row, and regularizer weight.
    let mut coef: BTreeMap<ItemId, (f64, f64)> = BTreeMap::new();
    for (p, &i) in block.positives.iter().enumerate() {
        let c = coef.entry(i).or_insert((0.0, 0.0));
        c.0 -= pos_weight[p] / n_pairs;
        c.1 += 2.0 * lambda / n_pos;
    }
    for (n, &j) in block.negatives.iter().enumerate() {
        let c = coef.entry(j).or_insert((0.0, 0.0));
        c.0 += neg_weight[n] / n_pairs;
        c.1 += 2.0 * lambda / n_neg;
    }

    let mut user_row: Vec<f64> = user.iter().map(|x| 2.0 * lambda * x).collect();
    let mut item_rows = BTreeMap::new();
    let mut reg_sum = 0.0;
    for (&i, &(c, r)) in &coef {
        let item = model.item_row(i);
        for d in 0..k {
            user_row[d] += c * item[d];
        }
        let row: Vec<f64> = (0..k).map(|d| c * user[d] + r * item[d]).collect();
        item_rows.insert(i, row);
        // r / (2 lambda) counts the pairs this row appears in, over n_pairs.
        reg_sum += r * squared_norm(item);
    }
    let loss = logistic / n_pairs + lambda * squared_norm(user) + 0.5 * reg_sum;
    Ok((
        loss,
        SparseGradient {
            user: block.user,
            user_row,
            item_rows,
        },
    ))
}

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ItemId, LatentModel, UserId};

/// Copy-on-first-touch journal of the rows a user's pass modifies.
///
/// Rows must be recorded with [`touch_user`](Self::touch_user) /
/// [`touch_item`](Self::touch_item) *before* they are written; the first
/// call per row saves its pre-pass value, later calls are no-ops.
#[derive(Debug, Clone)]
pub struct UserCheckpoint {
    user: UserId,
    shape: (usize, usize, usize),
    user_row: Option<Vec<f64>>,
    item_rows: BTreeMap<ItemId, Vec<f64>>,
}

impl UserCheckpoint {
    pub fn open(model: &LatentModel, user: UserId) -> Result<Self> {
        model.check_user(user)?;
        Ok(UserCheckpoint {
            user,
            shape: (model.n_users(), model.n_items(), model.dim()),
            user_row: None,
            item_rows: BTreeMap::new(),
        })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn touch_user(&mut self, model: &LatentModel) {
        if self.user_row.is_none() {
            self.user_row = Some(model.user_row(self.user).to_vec());
        }
    }

    pub fn touch_item(&mut self, model: &LatentModel, item: ItemId) {
        self.item_rows
            .entry(item)
            .or_insert_with(|| model.item_row(item).to_vec());
    }

    /// Saved item ids, ascending.
    pub fn touched_items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.item_rows.keys().copied()
    }

    pub fn user_touched(&self) -> bool {
        self.user_row.is_some()
    }
}

/// Restores every saved row bitwise. Rows never touched are left alone.
pub fn rollback(model: &mut LatentModel, checkpoint: UserCheckpoint) -> Result<()> {
    if checkpoint.shape != (model.n_users(), model.n_items(), model.dim()) {
        return Err(Error::InvariantViolation(
            "checkpoint was opened on a model of a different shape".into(),
        ));
    }
    if let Some(row) = checkpoint.user_row {
        model.user_row_mut(checkpoint.user).copy_from_slice(&row);
    }
    for (item, row) in checkpoint.item_rows {
        model.item_row_mut(item).copy_from_slice(&row);
    }
    Ok(())
}

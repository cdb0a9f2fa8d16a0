//! Block-sequential training loops, the per-user rollback journal and the
//! gradient-norm diagnostics.

mod checkpoint;
mod config;
mod diagnostics;
mod saros;

pub use checkpoint::{rollback, UserCheckpoint};
pub use config::{Algorithm, StepPolicy, ThresholdSpec, TrainConfig};
pub use diagnostics::{grad_norm_trend, BlockRecord, Diagnostics, GradNormTrend};
pub use saros::{
    apply_gradient_step, resolve_thresholds, shuffled_visit_orders, train_saros_b, train_saros_b_from,
    train_saros_b_with_order, train_saros_m, train_saros_m_from, train_saros_m_with_order,
};

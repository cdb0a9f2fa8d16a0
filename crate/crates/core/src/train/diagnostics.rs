use alloc::string::String;
use alloc::vec::Vec;

use crate::blocking::Thresholds;
use crate::error::{Error, Result};
use crate::model::UserId;

/// One processed block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRecord {
    pub epoch: usize,
    /// Ordinal of the user pass within the whole run (0-based, across epochs).
    pub visit: usize,
    pub user: UserId,
    /// Index of the block within the user's stream.
    pub block_index: usize,
    /// Squared norm of the block gradient at the pre-update parameters.
    pub grad_norm_sq: f64,
    /// Block loss at the pre-update parameters.
    pub loss: f64,
    /// Whether the user's updates were kept (false: rolled back).
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<BlockRecord>,
    /// Mean loss over accepted blocks, one entry per epoch.
    pub epoch_mean_loss: Vec<f64>,
    /// Block count per user id in the training set.
    pub user_block_counts: Vec<usize>,
    /// User passes rolled back because `0 < count < b` (summed over epochs).
    pub discarded_below: usize,
    /// User passes rolled back because `count > B` (summed over epochs).
    pub discarded_above: usize,
    pub thresholds: Option<Thresholds>,
    /// Effective step size used for every update.
    pub step: f64,
    /// Minimum squared gradient norm over accepted blocks.
    pub min_grad_norm_sq: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Squared gradient norms of accepted blocks, in processing order.
    pub fn accepted_grad_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter(|r| r.accepted).map(|r| r.grad_norm_sq)
    }

    /// Minimum squared gradient norm over accepted blocks of the first
    /// `visits` user passes; `None` if there were none.
    pub fn running_min_after_visits(&self, visits: usize) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.accepted && r.visit < visits)
            .map(|r| r.grad_norm_sq)
            .reduce(f64::min)
    }

    pub(crate) fn finish(&mut self) {
        self.min_grad_norm_sq = self.accepted_grad_norms().fold(f64::INFINITY, f64::min);
        let rising = self
            .epoch_mean_loss
            .windows(2)
            .filter(|w| w[1] > w[0])
            .count();
        if self.epoch_mean_loss.len() >= 3 && rising * 2 > self.epoch_mean_loss.len() - 1 {
            self.warnings.push(alloc::format!(
                "mean block loss rose in {rising} of {} epoch transitions; the step size may exceed 1/(B*beta)",
                self.epoch_mean_loss.len() - 1
            ));
        }
    }
}

/// Summary of how the running minimum of squared block-gradient norms decays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradNormTrend {
    pub n_blocks: usize,
    pub min_at_quarter: f64,
    pub min_at_half: f64,
    pub min_at_end: f64,
    /// Least-squares slope of `ln(running_min[n])` against `ln(n)`,
    /// `n = 1..=N`. `None` when the running minimum reaches zero.
    pub log_log_slope: Option<f64>,
}

pub const MIN_TREND_BLOCKS: usize = 100;

/// Running-minimum report over the accepted blocks' squared gradient norms.
pub fn grad_norm_trend(diagnostics: &Diagnostics) -> Result<GradNormTrend> {
    let trace: Vec<f64> = diagnostics.accepted_grad_norms().collect();
    trend_of(&trace)
}

pub(crate) fn trend_of(trace: &[f64]) -> Result<GradNormTrend> {
    let n = trace.len();
    if n < MIN_TREND_BLOCKS {
        return Err(Error::invalid(alloc::format!(
            "gradient trend needs at least {MIN_TREND_BLOCKS} blocks, got {n}"
        )));
    }
    let mut running = Vec::with_capacity(n);
    let mut m = f64::INFINITY;
    for &g in trace {
        m = m.min(g);
        running.push(m);
    }
    let at = |count: usize| running[count.max(1) - 1];
    let log_log_slope = if running[n - 1] > 0.0 {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (idx, &r) in running.iter().enumerate() {
            let x = libm::log((idx + 1) as f64);
            let y = libm::log(r);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let nf = n as f64;
        Some((nf * sxy - sx * sy) / (nf * sxx - sx * sx))
    } else {
        None
    };
    Ok(GradNormTrend {
        n_blocks: n,
        min_at_quarter: at(n / 4),
        min_at_half: at(n / 2),
        min_at_end: running[n - 1],
        log_log_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increasing_trace_has_flat_running_min() {
        let trace: Vec<f64> = (1..=200).map(|n| n as f64).collect();
        let t = trend_of(&trace).unwrap();
        assert_eq!(t.min_at_quarter, 1.0);
        assert_eq!(t.min_at_end, 1.0);
        assert_eq!(t.log_log_slope, Some(0.0));
    }

    #[test]
    fn inverse_sqrt_trace_has_half_slope() {
        let trace: Vec<f64> = (1..=1000).map(|n| 3.0 / libm::sqrt(n as f64)).collect();
        let t = trend_of(&trace).unwrap();
        let slope = t.log_log_slope.unwrap();
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
        assert!(t.min_at_end < t.min_at_half && t.min_at_half < t.min_at_quarter);
    }

    #[test]
    fn short_trace_rejected() {
        assert!(matches!(trend_of(&[1.0; 99]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_running_min_has_no_slope() {
        let mut trace = alloc::vec![1.0; 150];
        trace[70] = 0.0;
        assert_eq!(trend_of(&trace).unwrap().log_log_slope, None);
    }

    #[test]
    fn persistent_loss_increase_warns() {
        let mut d = Diagnostics {
            epoch_mean_loss: alloc::vec![0.5, 0.6, 0.7, 0.8],
            ..Default::default()
        };
        d.finish();
        assert_eq!(d.warnings.len(), 1);
        let mut d = Diagnostics {
            epoch_mean_loss: alloc::vec![0.5, 0.4, 0.41, 0.3],
            ..Default::default()
        };
        d.finish();
        assert!(d.warnings.is_empty());
    }
}

//! JSON, JSON-lines and CSV artifacts written by the command-line driver.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use saros_core::baselines::PopularityModel;
use saros_core::blocking::Thresholds;
use saros_core::data::Dataset;
use saros_core::eval::MetricsReport;
use saros_core::train::{grad_norm_trend, Diagnostics};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub ndcg: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    pub dataset: String,
    pub algorithm: String,
    pub users_evaluated: usize,
    pub users_excluded: usize,
    pub metrics: Vec<MetricRow>,
}

impl MetricsJson {
    pub fn new(dataset: &str, algorithm: &str, report: &MetricsReport) -> Self {
        MetricsJson {
            dataset: dataset.into(),
            algorithm: algorithm.into(),
            users_evaluated: report.users_evaluated,
            users_excluded: report.users_excluded,
            metrics: report
                .metrics
                .iter()
                .map(|m| MetricRow { k: m.k, ndcg: m.ndcg, map: m.map })
                .collect(),
        }
    }

    /// One CSV row per cutoff:
    /// `dataset,algorithm,K,NDCG,MAP,users_evaluated,users_excluded`.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["dataset", "algorithm", "K", "NDCG", "MAP", "users_evaluated", "users_excluded"])?;
        for m in &self.metrics {
            csv.write_record([
                self.dataset.clone(),
                self.algorithm.clone(),
                m.k.to_string(),
                m.ndcg.to_string(),
                m.map.to_string(),
                self.users_evaluated.to_string(),
                self.users_excluded.to_string(),
            ])?;
        }
        csv.flush()
    }
}

/// `{raw item id: click count}` for every item in the vocabulary.
pub fn popularity_json(model: &PopularityModel, train: &Dataset) -> BTreeMap<String, u64> {
    model
        .counts()
        .iter()
        .enumerate()
        .map(|(i, &c)| (train.items().raw(i as u32).unwrap_or_default().to_string(), c))
        .collect()
}

/// Inverse of [`popularity_json`] against `train`'s vocabulary; items absent
/// from the map count zero.
pub fn popularity_from_json(map: &BTreeMap<String, u64>, train: &Dataset) -> Result<PopularityModel, String> {
    let mut counts = vec![0u64; train.n_items()];
    for (raw, &c) in map {
        let id = train
            .items()
            .get(raw)
            .ok_or_else(|| format!("popularity file names item {raw:?} unknown to the data"))?;
        counts[id as usize] = c;
    }
    Ok(PopularityModel::from_counts(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub blocks: usize,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksJson {
    pub users: usize,
    pub users_with_blocks: usize,
    pub total_blocks: usize,
    pub histogram: Vec<HistogramBin>,
    pub b: usize,
    #[serde(rename = "B")]
    pub upper: usize,
    pub users_below_b: usize,
    pub users_above_upper: usize,
}

impl BlocksJson {
    pub fn new(counts: &[usize], t: Thresholds) -> Self {
        let mut hist = BTreeMap::<usize, usize>::new();
        for &c in counts {
            *hist.entry(c).or_default() += 1;
        }
        BlocksJson {
            users: counts.len(),
            users_with_blocks: counts.iter().filter(|&&c| c > 0).count(),
            total_blocks: counts.iter().sum(),
            histogram: hist.into_iter().map(|(blocks, users)| HistogramBin { blocks, users }).collect(),
            b: t.lower,
            upper: t.upper,
            users_below_b: counts.iter().filter(|&&c| c > 0 && c < t.lower).count(),
            users_above_upper: counts.iter().filter(|&&c| c > t.upper).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub epoch: usize,
    pub user: String,
    pub block_index: usize,
    pub grad_norm_sq: f64,
    pub loss: f64,
    pub accepted: bool,
}

/// One JSON object per processed block, in processing order.
pub fn write_trace<W: Write>(w: W, diag: &Diagnostics, train: &Dataset) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for r in &diag.records {
        let line = TraceLine {
            epoch: r.epoch,
            user: train.users().raw(r.user).unwrap_or_default().to_string(),
            block_index: r.block_index,
            grad_norm_sq: r.grad_norm_sq,
            loss: r.loss,
            accepted: r.accepted,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsJson {
    pub blocks_processed: usize,
    pub blocks_accepted: usize,
    pub step: f64,
    pub b: Option<usize>,
    #[serde(rename = "B")]
    pub upper: Option<usize>,
    pub users_discarded_below_b: usize,
    pub users_discarded_above_upper: usize,
    /// `null` for epochs without accepted blocks.
    pub epoch_mean_loss: Vec<Option<f64>>,
    pub min_grad_norm_sq: Option<f64>,
    pub running_min_quarter: Option<f64>,
    pub running_min_half: Option<f64>,
    pub running_min_end: Option<f64>,
    pub log_log_slope: Option<f64>,
    pub warnings: Vec<String>,
}

impl DiagnosticsJson {
    pub fn new(diag: &Diagnostics) -> Self {
        let trend = grad_norm_trend(diag).ok();
        let finite = |x: f64| x.is_finite().then_some(x);
        DiagnosticsJson {
            blocks_processed: diag.records.len(),
            blocks_accepted: diag.records.iter().filter(|r| r.accepted).count(),
            step: diag.step,
            b: diag.thresholds.map(|t| t.lower),
            upper: diag.thresholds.map(|t| t.upper),
            users_discarded_below_b: diag.discarded_below,
            users_discarded_above_upper: diag.discarded_above,
            epoch_mean_loss: diag.epoch_mean_loss.iter().map(|&x| finite(x)).collect(),
            min_grad_norm_sq: finite(diag.min_grad_norm_sq),
            running_min_quarter: trend.as_ref().map(|t| t.min_at_quarter),
            running_min_half: trend.as_ref().map(|t| t.min_at_half),
            running_min_end: trend.as_ref().map(|t| t.min_at_end),
            log_log_slope: trend.and_then(|t| t.log_log_slope),
            warnings: diag.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: &Path) -> io::Result<InputDigest> {
    let data = std::fs::read(path)?;
    let hash = Sha256::digest(&data);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        bytes: data.len() as u64,
    })
}

/// Everything needed to re-run a command: its resolved configuration and
/// the digests of its inputs. Contains no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

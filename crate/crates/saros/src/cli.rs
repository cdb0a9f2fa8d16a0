//! Command-line surface and configuration files.
//!
//! A configuration file (`--config PATH`) holds flat `key=value` lines or a
//! flat JSON object whose keys are the long flag names of the chosen
//! subcommand. File entries are applied first and command-line flags after
//! them, so flags win. Unknown keys are rejected.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::run::CliError;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(name = "saros", version, about = "Block-wise sequential pairwise ranking")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Parse and binarize a raw log, split it per user in time, and write
    /// train/test files in the standard layout.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Histogram of per-user block counts and the resolved (b, B).
    #[command(args_override_self = true)]
    InspectBlocks(InspectArgs),
    /// Train a model; evaluates it too when test data is available.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Evaluate a saved model or popularity file.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Write a synthetic planted-factor log, optionally with bot users.
    #[command(args_override_self = true)]
    Gen(GenArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::InspectBlocks(_) => "inspect-blocks",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Gen(_) => "gen",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SchemaArgs {
    /// Column layout by position: names from user, item, rating, click, ts,
    /// or `_` to skip. Defaults to `user,item,click,ts`, or to the header
    /// when --header is given.
    #[arg(long)]
    pub columns: Option<String>,
    /// Field separator; `tab`, `comma`, `space` or a literal such as `::`.
    #[arg(long, default_value = "tab")]
    pub sep: String,
    /// Skip the first line (and read the layout from it unless --columns).
    #[arg(long)]
    pub header: bool,
    /// Ratings strictly above this are clicks.
    #[arg(long, default_value_t = 3.0)]
    pub pos_threshold: f64,
    /// Abort when more than this fraction of lines is malformed.
    #[arg(long, default_value_t = 0.5)]
    pub max_bad_fraction: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// A single log, split per user in time with --test-fraction.
    #[arg(long, conflicts_with = "train")]
    pub input: Option<PathBuf>,
    /// Pre-split training log.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Pre-split test log.
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Name of the dataset in reports; defaults to the input file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

impl DataArgs {
    pub fn label(&self) -> String {
        if let Some(d) = &self.dataset {
            return d.clone();
        }
        self.input
            .as_deref()
            .or(self.train.as_deref())
            .and_then(Path::file_stem)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ThresholdArgs {
    /// Explicit lower block-count bound b.
    #[arg(long = "b", conflicts_with_all = ["b_quantile", "upper_quantile"])]
    pub lower: Option<usize>,
    /// Explicit upper block-count bound B.
    #[arg(long = "B", conflicts_with_all = ["b_quantile", "upper_quantile"])]
    pub upper: Option<usize>,
    /// Quantile of the block-count distribution used for b (default 0.1).
    #[arg(long)]
    pub b_quantile: Option<f64>,
    /// Quantile of the block-count distribution used for B (default 0.9).
    #[arg(long = "B-quantile")]
    pub upper_quantile: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// key=value or JSON file of defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Write blocks.json here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    SarosB,
    SarosM,
    Bpr,
    Mostpop,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::SarosB => "saros-b",
            Algo::SarosM => "saros-m",
            Algo::Bpr => "bpr",
            Algo::Mostpop => "mostpop",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrPolicy {
    /// --lr used as is.
    Const,
    /// --lr / sqrt(number of training users).
    CSqrt,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "saros-b")]
    pub algo: Algo,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "const")]
    pub lr_policy: LrPolicy,
    /// Momentum coefficient for saros-m (default 0.9).
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub reg: f64,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the initial factors; defaults to --seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Half-width of the uniform initial factors.
    #[arg(long, default_value_t = saros_core::model::DEFAULT_INIT_SCALE)]
    pub init_scale: f64,
    /// Sampled triplets for bpr; defaults to epochs x training blocks.
    #[arg(long)]
    pub bpr_steps: Option<u64>,
    /// Cutoffs for evaluation.
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub k: Vec<usize>,
    /// Write one JSON line per processed block to trace.jsonl.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model file (binary) or popularity file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Algorithm name used in the report.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub items: usize,
    #[arg(long, default_value_t = 4)]
    pub k_true: usize,
    #[arg(long, default_value_t = 40)]
    pub per_user: usize,
    /// Probability of flipping each click label.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.5)]
    pub factor_scale: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub bias: f64,
    #[arg(long, default_value_t = 0)]
    pub bots: usize,
    #[arg(long, default_value_t = 100)]
    pub bot_clicks: usize,
    /// Dense ids of the items bots click.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub bot_targets: Vec<u32>,
    /// Writes data.tsv, truth.sarm and manifest.json here.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Finds `--config PATH` or `--config=PATH` among raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Flat `(key, value)` pairs from a key=value or JSON config file.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    if text.trim_start().starts_with('{') {
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| format!("config JSON: {e}"))?;
        return obj
            .into_iter()
            .map(|(k, v)| {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    serde_json::Value::Bool(b) => b.to_string(),
                    serde_json::Value::Array(xs) if xs.iter().all(|x| x.is_number()) => {
                        xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                    }
                    other => return Err(format!("config key {k:?}: unsupported value {other}")),
                };
                Ok((k, v))
            })
            .collect();
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Converts config entries into flag tokens for `subcommand`.
fn config_tokens(subcommand: &str, entries: &[(String, String)]) -> Result<Vec<OsString>, String> {
    let cmd = RunConfig::command();
    let sub = cmd
        .find_subcommand(subcommand)
        .ok_or_else(|| format!("unknown subcommand {subcommand:?}"))?;
    let mut tokens = Vec::new();
    for (key, value) in entries {
        let long = if key.len() > 1 { key.replace('_', "-") } else { key.clone() };
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && long != "config")
            .ok_or_else(|| format!("unknown config key {key:?} for {subcommand}"))?;
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" => tokens.push(OsString::from(format!("--{long}"))),
                "false" | "0" => {}
                _ => return Err(format!("config key {key:?}: expected true/false, found {value:?}")),
            },
            _ => tokens.push(OsString::from(format!("--{long}={value}"))),
        }
    }
    Ok(tokens)
}

/// Parses `argv` (program name first), merging a `--config` file under the
/// command-line flags.
pub fn parse_config(argv: Vec<OsString>) -> Result<RunConfig, CliError> {
    let usage = |e: clap::Error| CliError::clap(e);
    let first = RunConfig::try_parse_from(&argv).map_err(usage)?;
    let Some(path) = config_path(&argv) else {
        return Ok(first);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let entries = parse_config_file(&text).map_err(CliError::usage)?;
    let sub = first.command.name();
    let injected = config_tokens(sub, &entries).map_err(CliError::usage)?;
    let pos = argv
        .iter()
        .position(|a| a == sub)
        .ok_or_else(|| CliError::usage("subcommand not found in arguments"))?;
    let mut merged: Vec<OsString> = argv[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&argv[pos + 1..]);
    RunConfig::try_parse_from(merged).map_err(usage)
}

//! Executes a parsed [`RunConfig`] and maps failures onto exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::Path;

use log::{info, warn};
use saros_core::baselines::{train_bpr, train_mostpop, PopularityModel};
use saros_core::blocking::{block_counts, Thresholds, DEFAULT_LOWER_QUANTILE, DEFAULT_UPPER_QUANTILE};
use saros_core::data::{binarize, build_index, build_index_pair, temporal_split, Dataset, RawInteraction};
use saros_core::eval::{evaluate, Scorer};
use saros_core::synth::{generate_planted, inject_bots, BotSpec, SynthSpec};
use saros_core::train::{
    resolve_thresholds, train_saros_b, train_saros_m, Algorithm, StepPolicy, ThresholdSpec, TrainConfig,
};
use saros_core::{InitSpec, LatentModel};

use crate::cli::{parse_config, Algo, Command, DataArgs, EvalArgs, GenArgs, IngestArgs, InspectArgs, LrPolicy, RunConfig, ThresholdArgs, TrainArgs};
use crate::model_io::{self, ModelIoError};
use crate::report::{self, BlocksJson, DiagnosticsJson, InputDigest, Manifest, MetricsJson};
use crate::tsv::{self, ReadOptions, Schema, TsvError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_TRAINING: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Data,
    Training,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Clap's own rendering (help, version, usage errors).
    clap: Option<clap::Error>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), clap: None }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, message)
    }

    pub(crate) fn clap(e: clap::Error) -> Self {
        CliError { kind: ErrorKind::Usage, message: e.render().to_string(), clap: Some(e) }
    }

    pub fn exit_code(&self) -> i32 {
        match &self.clap {
            Some(e) if !e.use_stderr() => EXIT_OK,
            _ => match self.kind {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Training => EXIT_TRAINING,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<TsvError> for CliError {
    fn from(e: TsvError) -> Self {
        match e {
            TsvError::Io(e) => e.into(),
            TsvError::Schema(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        match e {
            ModelIoError::Io(e) => e.into(),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<saros_core::Error> for CliError {
    fn from(e: saros_core::Error) -> Self {
        use saros_core::Error as E;
        let kind = match e {
            E::Config(_) => ErrorKind::Usage,
            E::InvariantViolation(_) => ErrorKind::Training,
            E::InvalidArgument(_) | E::Estimation(_) | E::Evaluation(_) => ErrorKind::Data,
        };
        CliError::new(kind, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Parses `argv`, runs the command and returns the process exit code.
/// Errors are reported on stderr.
pub fn main_with_args(argv: Vec<OsString>) -> i32 {
    let result = parse_config(argv).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e.clap {
                Some(c) => {
                    let _ = c.print();
                }
                None => eprintln!("error: {e}"),
            }
            e.exit_code()
        }
    }
}

pub fn run(config: &RunConfig) -> Result<()> {
    let resolved = serde_json::to_string(config).map_err(|e| CliError::usage(e.to_string()))?;
    info!("resolved config: {resolved}");
    match &config.command {
        Command::Ingest(a) => ingest(a),
        Command::InspectBlocks(a) => inspect_blocks(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
    }
}

fn read_options(data: &DataArgs) -> Result<ReadOptions> {
    let s = &data.schema;
    if !(0.0..=1.0).contains(&s.max_bad_fraction) {
        return Err(CliError::usage("--max-bad-fraction must lie in [0, 1]"));
    }
    if !s.pos_threshold.is_finite() {
        return Err(CliError::usage("--pos-threshold must be finite"));
    }
    Ok(ReadOptions {
        schema: s.columns.as_deref().map(Schema::parse).transpose()?,
        separator: tsv::parse_separator(&s.sep)?,
        header: s.header,
        max_bad_fraction: s.max_bad_fraction,
    })
}

fn read_log(path: &Path, opts: &ReadOptions, pos_threshold: f64) -> Result<Vec<RawInteraction>> {
    let out = tsv::read_file(path, opts)?;
    if !out.errors.is_empty() {
        let lines: Vec<String> = out.errors.iter().take(5).map(|e| format!("{}: {}", e.line, e.message)).collect();
        warn!(
            "{}: skipped {} malformed line(s); first: {}",
            path.display(),
            out.errors.len(),
            lines.join("; ")
        );
    }
    Ok(binarize(&out.records, pos_threshold))
}

/// Train and test data under one vocabulary, plus what produced them.
struct Loaded {
    train: Dataset,
    test: Dataset,
    /// Rows of an internal split, when one was made.
    split: Option<(Vec<RawInteraction>, Vec<RawInteraction>)>,
    inputs: Vec<InputDigest>,
}

impl Loaded {
    fn has_test(&self) -> bool {
        self.test.n_events() > 0
    }
}

/// Loads `--input` (splitting it) or `--train`/`--test`. Ids are always
/// assigned by first occurrence over the train rows and then the test rows,
/// so a split written to disk and read back indexes identically.
fn load(data: &DataArgs) -> Result<Loaded> {
    let opts = read_options(data)?;
    let thr = data.schema.pos_threshold;
    match (&data.input, &data.train) {
        (Some(input), None) => {
            let rows = read_log(input, &opts, thr)?;
            let full = build_index(&rows);
            let (tr, te) = temporal_split(&full, data.test_fraction).map_err(|e| CliError::usage(e.to_string()))?;
            let (train_rows, test_rows) = (tr.flatten(), te.flatten());
            let (train, test) = build_index_pair(&train_rows, &test_rows);
            Ok(Loaded { train, test, split: Some((train_rows, test_rows)), inputs: vec![report::digest_file(input)?] })
        }
        (None, Some(train_path)) => {
            let train_rows = read_log(train_path, &opts, thr)?;
            let mut inputs = vec![report::digest_file(train_path)?];
            let test_rows = match &data.test {
                Some(p) => {
                    inputs.push(report::digest_file(p)?);
                    read_log(p, &opts, thr)?
                }
                None => Vec::new(),
            };
            let (train, test) = build_index_pair(&train_rows, &test_rows);
            Ok(Loaded { train, test, split: None, inputs })
        }
        _ => Err(CliError::usage("give either --input or --train")),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

fn write_rows(path: &Path, rows: &[RawInteraction]) -> Result<()> {
    tsv::write_interactions(BufWriter::new(File::create(path)?), rows)?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, config: &impl serde::Serialize, inputs: Vec<InputDigest>, mut outputs: Vec<String>, resolved: serde_json::Value) -> Result<()> {
    outputs.push("manifest.json".into());
    let mut config = serde_json::to_value(config).map_err(|e| CliError::usage(e.to_string()))?;
    if let (serde_json::Value::Object(map), serde_json::Value::Object(extra)) = (&mut config, resolved) {
        map.insert("resolved".into(), serde_json::Value::Object(extra));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config,
        inputs,
        outputs,
    };
    report::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    if a.data.input.is_none() {
        return Err(CliError::usage("ingest needs --input"));
    }
    let loaded = load(&a.data)?;
    let (train_rows, test_rows) = loaded.split.as_ref().expect("input was split");
    create_out_dir(&a.out_dir)?;
    write_rows(&a.out_dir.join("train.tsv"), train_rows)?;
    write_rows(&a.out_dir.join("test.tsv"), test_rows)?;
    let summary = serde_json::json!({
        "users": loaded.train.active_users().count(),
        "items": loaded.train.n_items(),
        "train_events": train_rows.len(),
        "test_events": test_rows.len(),
        "train_clicks": train_rows.iter().filter(|r| r.clicked).count(),
        "test_clicks": test_rows.iter().filter(|r| r.clicked).count(),
    });
    info!("ingest: {summary}");
    write_manifest(
        &a.out_dir,
        "ingest",
        a,
        loaded.inputs,
        vec!["train.tsv".into(), "test.tsv".into()],
        summary,
    )
}

fn threshold_spec(t: &ThresholdArgs) -> Result<ThresholdSpec> {
    Ok(match (t.lower, t.upper) {
        (None, None) => ThresholdSpec::Quantiles {
            lower: t.b_quantile.unwrap_or(DEFAULT_LOWER_QUANTILE),
            upper: t.upper_quantile.unwrap_or(DEFAULT_UPPER_QUANTILE),
        },
        (lo, hi) => ThresholdSpec::Explicit(
            Thresholds::new(lo.unwrap_or(1), hi.unwrap_or(usize::MAX))
                .map_err(|_| CliError::usage("thresholds need 1 <= b <= B"))?,
        ),
    })
}

fn inspect_blocks(a: &InspectArgs) -> Result<()> {
    let loaded = load(&a.data)?;
    let counts = block_counts(&loaded.train)?;
    let spec = threshold_spec(&a.thresholds)?;
    if let ThresholdSpec::Quantiles { lower, upper } = spec {
        if !(0.0 <= lower && lower < upper && upper <= 1.0) {
            return Err(CliError::usage("threshold quantiles must satisfy 0 <= lo < hi <= 1"));
        }
    }
    let t = resolve_thresholds(&spec, &counts).map_err(|e| CliError::data(e.to_string()))?;
    let json = BlocksJson::new(&counts, t);
    match &a.out_dir {
        Some(dir) => {
            create_out_dir(dir)?;
            report::write_json(&dir.join("blocks.json"), &json)?;
            write_manifest(dir, "inspect-blocks", a, loaded.inputs, vec!["blocks.json".into()], serde_json::json!({}))
        }
        None => {
            let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::io(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let algorithm = match a.algo {
        Algo::SarosM => Algorithm::SarosM,
        _ => Algorithm::SarosB,
    };
    if a.momentum.is_some() && a.algo != Algo::SarosM {
        warn!("--momentum is ignored unless --algo saros-m");
    }
    let cfg = TrainConfig {
        algorithm,
        dim: a.dim,
        step_eta: a.lr,
        step_policy: match a.lr_policy {
            LrPolicy::Const => StepPolicy::Constant,
            LrPolicy::CSqrt => StepPolicy::COverSqrtN { c: a.lr },
        },
        momentum_gamma: match a.algo {
            Algo::SarosM => a.momentum.unwrap_or(0.9),
            _ => 0.9,
        },
        reg_lambda: a.reg,
        thresholds: threshold_spec(&a.thresholds)?,
        epochs: a.epochs,
        seed: a.seed,
        bpr_steps: a.bpr_steps,
    };
    cfg.validate()?;
    if !(a.init_scale >= 0.0 && a.init_scale.is_finite()) {
        return Err(CliError::usage("--init-scale must be finite and nonnegative"));
    }
    Ok(cfg)
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::usage("--k needs positive cutoffs"));
    }
    Ok(())
}

fn write_metrics(dir: &Path, dataset: &str, algorithm: &str, scorer: &dyn Scorer, loaded: &Loaded, ks: &[usize]) -> Result<MetricsJson> {
    let report = evaluate(scorer, &loaded.train, &loaded.test, ks)?;
    let json = MetricsJson::new(dataset, algorithm, &report);
    report::write_json(&dir.join("metrics.json"), &json)?;
    json.write_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
    Ok(json)
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    check_ks(&a.k)?;
    let loaded = load(&a.data)?;
    if loaded.train.n_users() == 0 || loaded.train.n_items() == 0 {
        return Err(CliError::data("training data is empty"));
    }
    create_out_dir(&a.out_dir)?;
    let mut outputs = Vec::new();
    if let Some((tr, te)) = &loaded.split {
        write_rows(&a.out_dir.join("train.tsv"), tr)?;
        write_rows(&a.out_dir.join("test.tsv"), te)?;
        outputs.extend(["train.tsv".to_string(), "test.tsv".to_string()]);
    }
    let init = InitSpec { seed: a.init_seed.unwrap_or(a.seed), scale: a.init_scale };
    let mut resolved = serde_json::Map::new();
    resolved.insert("n_users".into(), loaded.train.n_users().into());
    resolved.insert("n_items".into(), loaded.train.n_items().into());
    resolved.insert("init_seed".into(), init.seed.into());
    if a.trace && matches!(a.algo, Algo::Bpr | Algo::Mostpop) {
        warn!("--trace is only produced by saros-b and saros-m");
    }

    let scorer: Box<dyn Scorer> = match a.algo {
        Algo::Mostpop => {
            let pop: PopularityModel = train_mostpop(&loaded.train);
            report::write_json(&a.out_dir.join("popularity.json"), &report::popularity_json(&pop, &loaded.train))?;
            outputs.push("popularity.json".into());
            Box::new(pop)
        }
        Algo::Bpr => {
            let steps = saros_core::baselines::bpr_step_budget(&loaded.train, &cfg)?;
            resolved.insert("bpr_steps".into(), steps.into());
            resolved.insert("step".into(), cfg.effective_step(loaded.train.active_users().count()).into());
            let model = train_bpr(&loaded.train, &cfg, init)?;
            save(&a.out_dir, &model, &mut outputs)?;
            Box::new(model)
        }
        Algo::SarosB | Algo::SarosM => {
            let (model, diag) = match a.algo {
                Algo::SarosB => train_saros_b(&loaded.train, &cfg, init)?,
                _ => train_saros_m(&loaded.train, &cfg, init)?,
            };
            for w in &diag.warnings {
                warn!("{w}");
            }
            resolved.insert("step".into(), diag.step.into());
            if let Some(t) = diag.thresholds {
                resolved.insert("b".into(), t.lower.into());
                resolved.insert("B".into(), t.upper.into());
            }
            save(&a.out_dir, &model, &mut outputs)?;
            report::write_json(&a.out_dir.join("diagnostics.json"), &DiagnosticsJson::new(&diag))?;
            outputs.push("diagnostics.json".into());
            if a.trace {
                report::write_trace(File::create(a.out_dir.join("trace.jsonl"))?, &diag, &loaded.train)?;
                outputs.push("trace.jsonl".into());
            }
            Box::new(model)
        }
    };
    if loaded.has_test() {
        let m = write_metrics(&a.out_dir, &a.data.label(), a.algo.label(), scorer.as_ref(), &loaded, &a.k)?;
        outputs.extend(["metrics.json".to_string(), "metrics.csv".to_string()]);
        for row in &m.metrics {
            info!("{} NDCG@{} = {:.4}, MAP@{} = {:.4}", a.algo.label(), row.k, row.ndcg, row.k, row.map);
        }
    } else {
        info!("no test data; skipping evaluation");
    }
    write_manifest(&a.out_dir, "train", a, loaded.inputs, outputs, serde_json::Value::Object(resolved))
}

fn save(dir: &Path, model: &LatentModel, outputs: &mut Vec<String>) -> Result<()> {
    model_io::save_model(&dir.join("model.sarm"), model)?;
    outputs.push("model.sarm".into());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    check_ks(&a.k)?;
    let loaded = load(&a.data)?;
    if !loaded.has_test() {
        return Err(CliError::usage("eval needs test data (--test, or --input to split)"));
    }
    let bytes = fs::read(&a.model).map_err(|e| CliError::io(format!("{}: {e}", a.model.display())))?;
    let (scorer, default_label): (Box<dyn Scorer>, &str) = if model_io::looks_like_model(&bytes) {
        let model = model_io::read_model(bytes.as_slice())?;
        model_io::check_shape(&model, loaded.train.n_users(), loaded.train.n_items())?;
        (Box::new(model), "model")
    } else {
        let map: BTreeMap<String, u64> = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::data(format!("{}: neither a model file nor popularity JSON ({e})", a.model.display())))?;
        let pop = report::popularity_from_json(&map, &loaded.train).map_err(CliError::data)?;
        (Box::new(pop), "mostpop")
    };
    create_out_dir(&a.out_dir)?;
    let label = a.label.as_deref().unwrap_or(default_label);
    let m = write_metrics(&a.out_dir, &a.data.label(), label, scorer.as_ref(), &loaded, &a.k)?;
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::io(e.to_string()))?;
    println!("{text}");
    let mut inputs = loaded.inputs;
    inputs.push(report::digest_file(&a.model)?);
    write_manifest(
        &a.out_dir,
        "eval",
        a,
        inputs,
        vec!["metrics.json".into(), "metrics.csv".into()],
        serde_json::json!({}),
    )
}

fn gen(a: &GenArgs) -> Result<()> {
    let spec = SynthSpec {
        n_users: a.users,
        n_items: a.items,
        k_true: a.k_true,
        interactions_per_user: a.per_user,
        noise: a.noise,
        seed: a.seed,
        factor_scale: a.factor_scale,
        bias: a.bias,
    };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let (organic, truth) = generate_planted(&spec)?;
    let data = if a.bots > 0 {
        let bots = BotSpec { n_bots: a.bots, targets: a.bot_targets.clone(), clicks_per_bot: a.bot_clicks, seed: a.seed };
        inject_bots(&organic, &bots).map_err(|e| CliError::usage(e.to_string()))?
    } else {
        organic
    };
    create_out_dir(&a.out_dir)?;
    write_rows(&a.out_dir.join("data.tsv"), &data.flatten())?;
    model_io::save_model(&a.out_dir.join("truth.sarm"), &truth)?;
    write_manifest(
        &a.out_dir,
        "gen",
        a,
        Vec::new(),
        vec!["data.tsv".into(), "truth.sarm".into()],
        serde_json::json!({ "users": data.n_users(), "events": data.n_events() }),
    )
}

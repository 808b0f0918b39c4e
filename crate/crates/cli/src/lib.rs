//! The `tcn` command line: training, evaluation, retrieval and the small
//! numerical utilities around them.
//!
//! Exit codes: 0 on success, 1 when the input or flags are invalid, 2 when a
//! run fails. Every subcommand prints its resolved configuration to stderr
//! and checks its inputs before it writes anything.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use tcn::data::{
    load_checkpoint, load_dataset, save_checkpoint, save_dataset, synth_generate, Dataset,
    SynthConfig, Triplet,
};
use tcn::eval::{
    few_shot_recall, few_shot_split, frequent_queries, median_rank, recall_at_k, Averaging,
    EvalReport,
};
use tcn::gradcheck::random_gradcheck;
use tcn::model::{TcnParams, Variant};
use tcn::training::{mean_tensor, train, RankSpec, TrainConfig};
use tcn::tucker::{
    compression_ratio, hosvd, reconstruction_error, Ranks, PUBLISHED_COMPRESSION_TABLE,
};
use tcn::TcnError;

/// Gradient checks above this relative error fail the run.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<TcnError> for CliError {
    fn from(e: TcnError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "tcn", version, about = "Tensor Composition Network experiments")]
pub struct Cli {
    /// Random seed; falls back to $TCN_SEED, then 0.
    #[arg(long, global = true, env = "TCN_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint plus a training log.
    Train(TrainArgs),
    /// Recall@K and m-shot recall of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Relation-based image retrieval, reported as median rank.
    Retrieve(RetrieveArgs),
    /// HOSVD of a dataset's mean relation tensor.
    Hosvd(HosvdArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic planted-rank dataset.
    Synth(SynthArgs),
    /// Recompute the published compression ratios.
    CompressTable(CompressArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path (default: <out>.log).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub lr0: f64,
    /// Epochs between learning-rate halvings.
    #[arg(long, default_value_t = 10)]
    pub lr_period: usize,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Fixed Tucker ranks `r1,r2,r3`.
    #[arg(long, value_parser = parse_ranks, conflicts_with = "epsilon")]
    pub ranks: Option<Ranks>,
    /// HOSVD relative error used to pick ranks (default 0.02).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// tucker, cp or abc.
    #[arg(long, default_value = "tucker", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long)]
    pub cp_rank: Option<usize>,
    /// Sample training images uniformly instead of by label rarity.
    #[arg(long)]
    pub no_weighted_sampling: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated K values, or `all`.
    #[arg(long, default_value = "20,50,100")]
    pub k: String,
    /// Comma-separated m values for m-shot recall; needs --train.
    #[arg(long)]
    pub shots: Option<String>,
    /// Training set used for shot splits and frequent queries.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Also report retrieval median rank for `top:N` or a query file.
    #[arg(long)]
    pub queries: Option<String>,
    /// Pool hits over all ground truth instead of averaging per image.
    #[arg(long)]
    pub micro: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// `top:N` most frequent training triplets, or a file of `[s,p,o]` lines.
    #[arg(long, default_value = "top:1000")]
    pub queries: String,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct HosvdArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Relation tensor dims `n,n,m`.
    #[arg(long, default_value = "5,5,4", value_parser = parse_ranks)]
    pub dims: Ranks,
    #[arg(long, default_value = "2,3,2", value_parser = parse_ranks)]
    pub ranks: Ranks,
    #[arg(long, default_value_t = 6)]
    pub feature_dim: usize,
    /// Check only this variant (default: all three).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON config; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for train.jsonl, test.jsonl and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub json: bool,
}

fn parse_ranks(s: &str) -> std::result::Result<Ranks, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("expected three comma-separated integers: {e}"))?;
    match parts[..] {
        [a, b, c] => Ok(Ranks(a, b, c)),
        _ => Err(format!("expected three comma-separated integers, got {}", parts.len())),
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

fn parse_usize_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    let mut out: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Validation(format!("bad {what} list {s:?}: {e}")))?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Which queries to run for retrieval.
#[derive(Debug, Clone, PartialEq)]
enum QuerySpec {
    Top(usize),
    File(PathBuf),
}

fn parse_query_spec(s: &str) -> CliResult<QuerySpec> {
    match s.strip_prefix("top:") {
        Some(n) => match n.parse::<usize>() {
            Ok(q) if q > 0 => Ok(QuerySpec::Top(q)),
            _ => Err(CliError::Validation(format!("bad query count in {s:?}"))),
        },
        None => Ok(QuerySpec::File(PathBuf::from(s))),
    }
}

fn load_queries(path: &Path, ds: &Dataset) -> CliResult<Vec<Triplet>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Validation(format!("{}:{}: {msg}", path.display(), i + 1));
        let [s, p, o]: [usize; 3] =
            serde_json::from_str(line).map_err(|e| bad(format!("expected [s,p,o]: {e}")))?;
        let t = Triplet::new(s, p, o);
        t.check_bounds(ds.n_objects, ds.n_predicates)
            .map_err(|e| bad(e.to_string()))?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no queries", path.display())));
    }
    Ok(out)
}

fn resolve_queries(spec: &QuerySpec, data: &Dataset, train: Option<&Dataset>) -> CliResult<Vec<Triplet>> {
    match spec {
        QuerySpec::Top(q) => {
            let train = train.ok_or_else(|| {
                CliError::Validation("--queries top:N needs --train".into())
            })?;
            Ok(frequent_queries(train, *q)?)
        }
        QuerySpec::File(path) => load_queries(path, data),
    }
}

/// Adds the path to input errors; a missing input file is bad input.
fn with_path<T>(path: &Path, r: tcn::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        TcnError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Validation(format!("{}: {io}", path.display()))
        }
        TcnError::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
        TcnError::Persistence(msg) => CliError::Runtime(format!("{}: {msg}", path.display())),
        other => other.into(),
    })
}

fn read_dataset(path: &Path) -> CliResult<Dataset> {
    with_path(path, load_dataset(path))
}

fn read_model(path: &Path) -> CliResult<TcnParams> {
    with_path(path, load_checkpoint(path))
}

fn check_compatible(model: &TcnParams, ds: &Dataset, what: &str) -> CliResult<()> {
    let want = (model.n_objects, model.n_predicates, model.feature_dim);
    let got = (ds.n_objects, ds.n_predicates, ds.feature_dim);
    if want != got {
        return Err(CliError::Validation(format!(
            "{what} has (n, m, d) = {got:?} but the model expects {want:?}"
        )));
    }
    Ok(())
}

struct Context<'a> {
    seed: Option<u64>,
    threads: Option<usize>,
    out: &'a mut (dyn Write + Send),
    err: &'a mut (dyn Write + Send),
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn announce(&mut self, command: &str, config: serde_json::Value) -> CliResult<()> {
        let resolved = json!({
            "command": command,
            "seed": self.seed,
            "threads": self.threads,
            "config": config,
        });
        writeln!(self.err, "resolved config: {resolved}")?;
        Ok(())
    }
}

/// Parses `argv` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e {
                CliError::Validation(_) => "invalid input",
                CliError::Runtime(_) => "run failed",
            };
            let _ = writeln!(err, "error: {kind}: {e}");
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn execute(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    if cli.threads == Some(0) {
        return Err(CliError::Validation("--threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let mut ctx = Context {
        seed: cli.seed,
        threads: cli.threads,
        out,
        err,
    };
    pool.install(|| match cli.command {
        Command::Train(a) => cmd_train(&mut ctx, a),
        Command::Eval(a) => cmd_eval(&mut ctx, a),
        Command::Retrieve(a) => cmd_retrieve(&mut ctx, a),
        Command::Hosvd(a) => cmd_hosvd(&mut ctx, a),
        Command::Gradcheck(a) => cmd_gradcheck(&mut ctx, a),
        Command::Synth(a) => cmd_synth(&mut ctx, a),
        Command::CompressTable(a) => cmd_compress(&mut ctx, a),
    })
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

fn cmd_train(ctx: &mut Context, a: TrainArgs) -> CliResult<()> {
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr0: a.lr0,
        lr_halving_period: a.lr_period,
        momentum: a.momentum,
        seed: ctx.seed(),
        variant: a.variant,
        rank_spec: match a.ranks {
            Some(r) => RankSpec::Fixed(r),
            None => RankSpec::Epsilon(a.epsilon.unwrap_or(0.02)),
        },
        cp_rank: a.cp_rank,
        weighted_sampling: !a.no_weighted_sampling,
        threads: ctx.threads,
    };
    let log_path = a.log.clone().unwrap_or_else(|| default_log_path(&a.out));
    ctx.announce(
        "train",
        json!({
            "data": a.data,
            "out": a.out,
            "log": log_path,
            "train": serde_json::to_value(&config).expect("config serializes"),
        }),
    )?;
    config.validate()?;
    let dataset = read_dataset(&a.data)?;
    if let RankSpec::Fixed(r) = config.rank_spec {
        r.validate_against(dataset.tensor_dims())?;
    }

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let (params, log) = train(&dataset, &config)?;

    save_checkpoint(&params, &a.out)?;
    let mut text = format!("# started unix_time={started}\n");
    text.push_str(&format!(
        "ranks={} variant={} skipped_samples={}\n",
        log.ranks, params.variant, log.skipped_samples
    ));
    for line in log.lines() {
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(&log_path, text)?;

    let last = log.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
    writeln!(ctx.out, "variant        {}", params.variant)?;
    writeln!(ctx.out, "ranks          {}", log.ranks)?;
    writeln!(ctx.out, "parameters     {}", params.parameter_count())?;
    writeln!(ctx.out, "final_loss     {last}")?;
    writeln!(ctx.out, "checkpoint     {}", a.out.display())?;
    writeln!(ctx.out, "log            {}", log_path.display())?;
    Ok(())
}

fn cmd_eval(ctx: &mut Context, a: EvalArgs) -> CliResult<()> {
    let shots = a.shots.as_deref().map(|s| parse_usize_list(s, "shot")).transpose()?;
    let queries = a.queries.as_deref().map(parse_query_spec).transpose()?;
    ctx.announce(
        "eval",
        json!({
            "data": a.data, "model": a.model, "train": a.train, "k": a.k,
            "shots": shots, "queries": a.queries, "micro": a.micro, "json": a.json,
        }),
    )?;
    if shots.is_some() && a.train.is_none() {
        return Err(CliError::Validation("--shots needs --train".into()));
    }

    let model = read_model(&a.model)?;
    let test = read_dataset(&a.data)?;
    check_compatible(&model, &test, "dataset")?;
    let train = a.train.as_ref().map(|p| read_dataset(p)).transpose()?;
    if let Some(t) = &train {
        check_compatible(&model, t, "training set")?;
    }
    let label_space = model.n_objects * model.n_objects * model.n_predicates;
    let ks = if a.k.trim() == "all" {
        vec![label_space]
    } else {
        parse_usize_list(&a.k, "k")?
    };
    if ks.contains(&0) {
        return Err(CliError::Validation("k values must be positive".into()));
    }
    let queries = queries
        .map(|q| resolve_queries(&q, &test, train.as_ref()))
        .transpose()?;

    let averaging = if a.micro { Averaging::Micro } else { Averaging::Macro };
    let mut report = EvalReport::default();
    for &k in &ks {
        let r = recall_at_k(&model, &test.samples, k, averaging)?;
        report.recall_at.insert(k, r.value);
    }
    if let (Some(shots), Some(train)) = (&shots, &train) {
        for &m in shots {
            let split = few_shot_split(train, &test, m)?;
            let r50 = few_shot_recall(&model, &test.samples, &split, 50, averaging)?;
            let r100 = few_shot_recall(&model, &test.samples, &split, 100, averaging)?;
            report.per_shot.insert(m, (r50.value, r100.value));
        }
    }
    if let Some(q) = &queries {
        let mr = median_rank(&model, &test.samples, q)?;
        report.retrieval_median_rank = Some(mr.median);
        report.skipped_queries = mr.skipped;
    }

    if a.json {
        writeln!(ctx.out, "{}", report.to_json())?;
    } else {
        write!(ctx.out, "{report}")?;
    }
    Ok(())
}

fn cmd_retrieve(ctx: &mut Context, a: RetrieveArgs) -> CliResult<()> {
    let spec = parse_query_spec(&a.queries)?;
    ctx.announce(
        "retrieve",
        json!({ "data": a.data, "model": a.model, "queries": a.queries, "train": a.train }),
    )?;
    if matches!(spec, QuerySpec::Top(_)) && a.train.is_none() {
        return Err(CliError::Validation("--queries top:N needs --train".into()));
    }
    let model = read_model(&a.model)?;
    let data = read_dataset(&a.data)?;
    check_compatible(&model, &data, "dataset")?;
    let train = a.train.as_ref().map(|p| read_dataset(p)).transpose()?;
    let queries = resolve_queries(&spec, &data, train.as_ref())?;
    let mr = median_rank(&model, &data.samples, &queries)?;
    if a.json {
        let v = json!({
            "median_rank": mr.median,
            "evaluated_queries": mr.evaluated,
            "skipped_queries": mr.skipped,
        });
        writeln!(ctx.out, "{v}")?;
    } else {
        writeln!(ctx.out, "median_rank      {}", mr.median)?;
        writeln!(ctx.out, "evaluated        {}", mr.evaluated)?;
        writeln!(ctx.out, "skipped_queries  {}", mr.skipped)?;
    }
    Ok(())
}

fn cmd_hosvd(ctx: &mut Context, a: HosvdArgs) -> CliResult<()> {
    ctx.announce("hosvd", json!({ "data": a.data, "epsilon": a.epsilon }))?;
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(CliError::Validation(format!(
            "epsilon must lie in (0, 1), got {}",
            a.epsilon
        )));
    }
    let data = read_dataset(&a.data)?;
    let t = mean_tensor(&data)?;
    let model = hosvd(&t, a.epsilon)?;
    let ranks = model.factors.ranks();
    let error = reconstruction_error(&t, &model)?;
    let ratio = compression_ratio(t.dims(), ranks);
    if a.json {
        let v = json!({
            "dims": [t.dims().0, t.dims().1, t.dims().2],
            "ranks": ranks,
            "reconstruction_error": error,
            "compression_ratio": ratio,
        });
        writeln!(ctx.out, "{v}")?;
    } else {
        let (n1, n2, n3) = t.dims();
        writeln!(ctx.out, "dims                  ({n1},{n2},{n3})")?;
        writeln!(ctx.out, "ranks                 {ranks}")?;
        writeln!(ctx.out, "reconstruction_error  {error}")?;
        writeln!(ctx.out, "compression_ratio     {ratio}")?;
    }
    Ok(())
}

fn cmd_gradcheck(ctx: &mut Context, a: GradcheckArgs) -> CliResult<()> {
    let seed = ctx.seed();
    ctx.announce(
        "gradcheck",
        json!({
            "dims": a.dims, "ranks": a.ranks, "feature_dim": a.feature_dim,
            "variant": a.variant.map(|v| v.name()),
        }),
    )?;
    let Ranks(n1, n2, m) = a.dims;
    if n1 != n2 {
        return Err(CliError::Validation(format!(
            "subject and object dims must match, got {n1} and {n2}"
        )));
    }
    let variants = match a.variant {
        Some(v) => vec![v],
        None => vec![Variant::TuckerCore, Variant::Cp, Variant::Abc],
    };
    let mut worst = 0.0f64;
    for v in variants {
        let report = random_gradcheck(n1, m, a.feature_dim, a.ranks, v, seed)?;
        let detail: Vec<String> = report
            .per_array
            .iter()
            .map(|(name, e)| format!("{name}={e:.3e}"))
            .collect();
        writeln!(
            ctx.out,
            "{:<7} max_relative_error={:.3e} {}",
            v.name(),
            report.max_relative_error,
            detail.join(" ")
        )?;
        worst = worst.max(report.max_relative_error);
    }
    writeln!(ctx.out, "max_relative_error {worst:.3e}")?;
    if worst.is_nan() || worst >= GRADCHECK_TOLERANCE {
        return Err(CliError::Runtime(format!(
            "gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
        )));
    }
    Ok(())
}

fn cmd_synth(ctx: &mut Context, a: SynthArgs) -> CliResult<()> {
    let mut config: SynthConfig = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    ctx.announce(
        "synth",
        json!({ "out": a.out, "synth": serde_json::to_value(&config).expect("config serializes") }),
    )?;
    config.validate()?;
    if a.out.exists() && !a.out.is_dir() {
        return Err(CliError::Validation(format!(
            "{} exists and is not a directory",
            a.out.display()
        )));
    }
    let (train, test, truth) = synth_generate(&config)?;

    fs::create_dir_all(&a.out)?;
    save_dataset(&train, a.out.join("train.jsonl"))?;
    save_dataset(&test, a.out.join("test.jsonl"))?;
    let record = json!({ "config": config, "truth": truth });
    fs::write(a.out.join("truth.json"), format!("{record}\n"))?;

    for (name, ds) in [("train", &train), ("test", &test)] {
        let s = ds.stats();
        writeln!(
            ctx.out,
            "{name:<6} images={} relationships_per_image={:.3} distinct_triplets={}",
            s.images, s.relationships_per_image, s.distinct_triplets
        )?;
    }
    writeln!(ctx.out, "holdout {}", truth.holdout.len())?;
    writeln!(ctx.out, "wrote  {}", a.out.display())?;
    Ok(())
}

/// One formatted row per published configuration:
/// `dataset epsilon dims ranks ratio`.
pub fn compression_rows() -> Vec<String> {
    PUBLISHED_COMPRESSION_TABLE
        .iter()
        .map(|&(name, (n1, n2, n3), eps, ranks, _)| {
            let ratio = compression_ratio((n1, n2, n3), ranks);
            format!("{name:<6} {eps:<5} ({n1},{n2},{n3}) {ranks} {ratio:.3}")
        })
        .collect()
}

fn cmd_compress(ctx: &mut Context, a: CompressArgs) -> CliResult<()> {
    ctx.announce("compress-table", json!({ "json": a.json }))?;
    if a.json {
        for &(name, dims, eps, ranks, published) in &PUBLISHED_COMPRESSION_TABLE {
            let v = json!({
                "dataset": name,
                "epsilon": eps,
                "dims": [dims.0, dims.1, dims.2],
                "ranks": ranks,
                "ratio": compression_ratio(dims, ranks),
                "published": published,
            });
            writeln!(ctx.out, "{v}")?;
        }
    } else {
        writeln!(ctx.out, "{:<6} {:<5} dims ranks ratio", "data", "eps")?;
        for row in compression_rows() {
            writeln!(ctx.out, "{row}")?;
        }
    }
    Ok(())
}

//! Command-line front end. Every subcommand reads and writes the same
//! documents as the library and the HTTP service.
//!
//! Exit codes: 0 on success, 2 on validation or input errors, 3 when an
//! annotator or environment endpoint cannot be reached.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::annotate::{annotate_trace, AnnotateError, AnnotatorConfig, WindowSpec};
use crate::graph::{validate_graph_with, GraphDraft, ValidateOptions, WarningCategory};
use crate::intervention::{
    build_seed_history, HttpExecutor, InterventionError, InterventionSpec, PoolKind, RegistryKey,
    RegistryOptions, ReplayExecutor, ToolExecutor, TraceRegistry,
};
use crate::irt::{fit, FitConfig, ResponseMatrix, StepRule};
use crate::markers::marker_counts;
use crate::motif::{detect, prevalence_with, GroupKey, MotifDocument, MotifHit, Weighting};
use crate::service::{self, AppState};
use crate::stats::{
    cohen_kappa, mean_logprob_with, pabak, pass_at_k, pass_hat_k_with, percent_agreement,
    LabelPairSeries, PassHatEstimator, TrialTally,
};
use crate::store::{GraphRecord, Store};
use crate::trace::{IngestOptions, TaskDescriptionRule, TraceCorpus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Transport(_) => EXIT_TRANSPORT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Transport(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

impl From<AnnotateError> for CliError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::Transport(_) => CliError::Transport(e.to_string()),
            _ => invalid(e),
        }
    }
}

impl From<InterventionError> for CliError {
    fn from(e: InterventionError) -> Self {
        match e {
            InterventionError::Execution { .. } => CliError::Transport(e.to_string()),
            _ => invalid(e),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "epitrace", version, about = "Epistemic graphs, motifs and evaluation statistics for agent traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Store root directory.
    #[arg(long, env = service::ENV_STORE, default_value = "epitrace-store")]
    pub store: PathBuf,
}

impl StoreArg {
    fn open(&self) -> Result<Store, CliError> {
        Store::open(&self.store).map_err(invalid)
    }
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl OutArg {
    fn emit(&self, body: &str) -> CliResult {
        match &self.out {
            Some(p) => fs::write(p, body).map_err(|e| invalid(format!("{}: {e}", p.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(body.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(invalid)
            }
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load trace files (a directory of JSON documents or NDJSON) into the store.
    Ingest(IngestArgs),
    /// Build epistemic graphs for stored traces with the LLM annotator.
    Annotate(AnnotateArgs),
    /// Validate a graph draft against its stored trace.
    Validate(ValidateArgs),
    /// Detect motifs on stored graphs.
    Motifs(MotifsArgs),
    /// Motif prevalence table from stored motif results.
    Prevalence(PrevalenceArgs),
    /// Pass@k and Pass^k from per-trial outcomes.
    Passk(PasskArgs),
    /// Percent agreement, Cohen's kappa and PABAK for two raters.
    Agreement(AgreementArgs),
    /// Mean token log-probability per group.
    Logprob(LogprobArgs),
    /// Fit the 2PL IRT model by MAP.
    IrtFit(IrtFitArgs),
    /// Build a seeded history for one trace-intervention trial.
    InterveneBuild(IntervenArgs),
    /// Serve the HTTP API over the store.
    Serve(ServeArgs),
    /// Summary tables over the store.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Trace directory, NDJSON file or single trace document.
    pub path: PathBuf,
    /// Flag exactly these message indices as the task description.
    #[arg(long, value_delimiter = ',')]
    pub task_index: Vec<usize>,
    /// Extra iteration-limit sentinel message.
    #[arg(long)]
    pub sentinel: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Traces to annotate; all stored traces when omitted.
    #[arg(long)]
    pub trace: Vec<String>,
    #[arg(long, env = crate::annotate::ENV_ENDPOINT)]
    pub endpoint: Option<String>,
    #[arg(long, env = crate::annotate::ENV_TOKEN, hide_env_values = true)]
    pub token: Option<String>,
    #[arg(long, env = crate::annotate::ENV_MODEL)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2)]
    pub max_retries: usize,
    #[arg(long, default_value_t = 300)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 20)]
    pub window_size: usize,
    #[arg(long, default_value_t = 15)]
    pub window_stride: usize,
    #[command(flatten)]
    pub validate: ValidateFlags,
}

#[derive(Debug, Args)]
pub struct ValidateFlags {
    /// Reject graphs that needed any structural repair.
    #[arg(long)]
    pub strict: bool,
    /// Reject graphs with more schema violations than this.
    #[arg(long)]
    pub schema_violation_limit: Option<usize>,
}

impl ValidateFlags {
    fn options(&self) -> ValidateOptions {
        ValidateOptions {
            strict: self.strict,
            schema_violation_limit: self.schema_violation_limit,
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Graph draft document.
    pub graph: PathBuf,
    #[command(flatten)]
    pub validate: ValidateFlags,
    /// Persist the validated graph.
    #[arg(long)]
    pub save: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct MotifsArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Traces to process; every stored graph when omitted.
    #[arg(long)]
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Pooled,
    EqualEnvironment,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Wide,
    Long,
}

#[derive(Debug, Args)]
pub struct PrevalenceArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Grouping columns: model, environment, scope, scaffold, domain_group.
    #[arg(long, value_delimiter = ',', default_value = "model")]
    pub group_by: Vec<GroupKey>,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// JSON object mapping environment to domain group.
    #[arg(long)]
    pub domain_groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: TableFormat,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Hypergeometric,
    PlugIn,
}

#[derive(Debug, Args)]
pub struct PasskArgs {
    /// CSV with columns `group,outcome` (outcome 1/0 or true/false).
    #[arg(long, conflicts_with = "store")]
    pub outcomes: Option<PathBuf>,
    /// Take outcomes from stored traces instead.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Grouping for stored traces.
    #[arg(long, value_delimiter = ',', default_value = "model,environment")]
    pub group_by: Vec<GroupKey>,
    /// Outcome score counted as a success for stored traces.
    #[arg(long, default_value_t = 1.0)]
    pub success_threshold: f64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<u64>,
    #[arg(long, value_enum, default_value = "hypergeometric")]
    pub estimator: EstimatorArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// CSV with columns `rater_a,rater_b` and optional `group`; labels 1/0.
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct LogprobArgs {
    /// Trace directory or NDJSON file; the store is used when omitted.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, default_value = "environment")]
    pub group_by: GroupKey,
    #[arg(long)]
    pub domain_groups: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepRuleArg {
    Armijo,
    BarzilaiBorwein,
}

#[derive(Debug, Args)]
pub struct IrtFitArgs {
    /// Long-format response CSV.
    pub responses: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value = "barzilai-borwein")]
    pub step_rule: StepRuleArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolArg {
    Success,
    Failed,
}

#[derive(Debug, Args)]
pub struct IntervenArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub environment: String,
    /// Agent as `model/scaffold`.
    #[arg(long)]
    pub agent: String,
    #[arg(long)]
    pub task: String,
    #[arg(long, value_enum)]
    pub pool: PoolArg,
    #[arg(long, allow_hyphen_values = true)]
    pub k: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Environment server base URL; observations are replayed when omitted.
    #[arg(long)]
    pub executor_url: Option<String>,
    /// Also write pool membership to this file.
    #[arg(long)]
    pub registry_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, env = service::ENV_BIND, default_value = "127.0.0.1:8787")]
    pub bind: SocketAddr,
    #[arg(long, env = service::ENV_SERVICE_TOKEN, hide_env_values = true)]
    pub token: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportKind {
    /// Marker occurrences per model and scaffold from the latest annotations.
    Markers,
    /// Validation warning totals per category across stored graphs.
    Warnings,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(value_enum)]
    pub kind: ReportKind,
    #[command(flatten)]
    pub out: OutArg,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Annotate(a) => annotate(a),
        Command::Validate(a) => validate(a),
        Command::Motifs(a) => motifs(a),
        Command::Prevalence(a) => prevalence(a),
        Command::Passk(a) => passk(a),
        Command::Agreement(a) => agreement(a),
        Command::Logprob(a) => logprob(a),
        Command::IrtFit(a) => irt_fit(a),
        Command::InterveneBuild(a) => intervene_build(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
    }
}

fn corpus_of(store: &Store) -> Result<TraceCorpus, CliError> {
    TraceCorpus::from_traces(store.all_traces().map_err(invalid)?).map_err(invalid)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn domain_groups(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, CliError> {
    path.as_deref().map(read_json).unwrap_or_else(|| Ok(BTreeMap::new()))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn parse_label(s: &str) -> Result<bool, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "correct" => Ok(true),
        "0" | "false" | "no" | "incorrect" => Ok(false),
        other => Err(invalid(format!("cannot read `{other}` as a binary label"))),
    }
}

/// `group,metric,value,n` rows.
fn metric_table(rows: &[(String, &str, Option<f64>, u64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "metric", "value", "n"]).expect("in-memory write");
    for (group, metric, value, n) in rows {
        let value = value.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        w.write_record([group.as_str(), metric, &value, &n.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn ingest(a: IngestArgs) -> CliResult {
    let mut opts = IngestOptions::default();
    if !a.task_index.is_empty() {
        opts.task_description = TaskDescriptionRule::Explicit(a.task_index);
    }
    opts.iteration_limit_sentinels.extend(a.sentinel);
    let corpus = TraceCorpus::load_path(&a.path, &opts).map_err(invalid)?;
    let store = a.store.open()?;
    store
        .put_traces(corpus.iter().map(|t| t.as_ref()))
        .map_err(invalid)?;
    eprintln!("ingested {} traces into {}", corpus.len(), store.root().display());
    Ok(())
}

fn annotate(a: AnnotateArgs) -> CliResult {
    let store = a.store.open()?;
    let mut cfg = AnnotatorConfig::default();
    if let Some(e) = a.endpoint {
        cfg.endpoint = e;
    }
    if let Some(m) = a.model {
        cfg.model_name = m;
    }
    cfg.token = a.token.filter(|t| !t.is_empty());
    cfg.temperature = a.temperature;
    cfg.max_retries = a.max_retries;
    cfg.request_timeout = Duration::from_secs(a.timeout_secs);
    cfg.max_in_flight = a.max_in_flight;
    cfg.validate = a.validate.options();
    let spec = WindowSpec::new(a.window_size, a.window_stride).map_err(CliError::from)?;
    let backend = cfg.http_backend()?;

    let traces = if a.trace.is_empty() {
        store.all_traces().map_err(invalid)?
    } else {
        a.trace
            .iter()
            .map(|id| {
                store
                    .get_trace(id)
                    .map_err(invalid)?
                    .ok_or_else(|| invalid(format!("trace `{id}` is not in the store")))
            })
            .collect::<Result<_, _>>()?
    };
    for trace in &traces {
        let (graph, warnings) = annotate_trace(trace, &backend, &cfg, spec)?;
        eprintln!(
            "{}: {} nodes, {} edges, {} warnings",
            trace.trace_id,
            graph.nodes.len(),
            graph.edges.len(),
            warnings.len()
        );
        store
            .put_graph(&GraphRecord { graph, warnings })
            .map_err(invalid)?;
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> CliResult {
    let store = a.store.open()?;
    let draft: GraphDraft = read_json(&a.graph)?;
    let trace = store
        .get_trace(&draft.trace_id)
        .map_err(invalid)?
        .ok_or_else(|| invalid(format!("trace `{}` is not in the store", draft.trace_id)))?;
    let (graph, warnings) = validate_graph_with(&draft, &trace, a.validate.options()).map_err(invalid)?;
    let record = GraphRecord { graph, warnings };
    if a.save {
        store.put_graph(&record).map_err(invalid)?;
    }
    let mut body = serde_json::to_string_pretty(&record).expect("serializes");
    body.push('\n');
    a.out.emit(&body)
}

fn motifs(a: MotifsArgs) -> CliResult {
    let store = a.store.open()?;
    let ids = if a.trace.is_empty() {
        store.graph_ids().map_err(invalid)?
    } else {
        a.trace
    };
    for id in ids {
        let record = store
            .get_graph(&id)
            .map_err(invalid)?
            .ok_or_else(|| invalid(format!("no stored graph for `{id}`")))?;
        let hits: Vec<MotifHit> = detect(&record.graph).into_iter().collect();
        eprintln!("{id}: {} motif hits", hits.len());
        store
            .put_motifs(&MotifDocument { trace_id: id, hits })
            .map_err(invalid)?;
    }
    Ok(())
}

fn prevalence(a: PrevalenceArgs) -> CliResult {
    let store = a.store.open()?;
    let corpus = corpus_of(&store)?;
    let mut results = BTreeMap::new();
    for id in store.motif_ids().map_err(invalid)? {
        if let Some(doc) = store.get_motifs(&id).map_err(invalid)? {
            results.insert(doc.trace_id, doc.hits.into_iter().collect::<BTreeSet<_>>());
        }
    }
    let weighting = match a.weighting {
        Some(WeightingArg::Pooled) => Weighting::Pooled,
        Some(WeightingArg::EqualEnvironment) => Weighting::EqualEnvironment,
        None => Weighting::default_for(&a.group_by),
    };
    let report = prevalence_with(&results, &corpus, &a.group_by, weighting, &domain_groups(&a.domain_groups)?)
        .map_err(invalid)?;
    let body = match a.format {
        TableFormat::Wide => report.to_wide_csv(),
        TableFormat::Long => report.to_long_csv(),
    }
    .map_err(invalid)?;
    a.out.emit(&body)
}

fn passk(a: PasskArgs) -> CliResult {
    let mut outcomes: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    match (&a.outcomes, &a.store) {
        (Some(path), _) => {
            let mut rdr = csv_reader(path)?;
            for rec in rdr.deserialize::<(String, String)>() {
                let (group, outcome) = rec.map_err(invalid)?;
                outcomes.entry(group).or_default().push(parse_label(&outcome)?);
            }
        }
        (None, Some(root)) => {
            let store = Store::open(root).map_err(invalid)?;
            let none = BTreeMap::new();
            for t in store.all_traces().map_err(invalid)? {
                let group: Vec<String> = a.group_by.iter().map(|k| k.value(&t, &none)).collect();
                outcomes
                    .entry(group.join("/"))
                    .or_default()
                    .push(t.outcome_score >= a.success_threshold);
            }
        }
        (None, None) => return Err(invalid("one of --outcomes or --store is required")),
    }
    let estimator = match a.estimator {
        EstimatorArg::Hypergeometric => PassHatEstimator::Hypergeometric,
        EstimatorArg::PlugIn => PassHatEstimator::PlugIn,
    };
    let mut rows = Vec::new();
    let mut metric_names = Vec::new();
    for k in &a.k {
        metric_names.push((format!("pass@{k}"), format!("pass^{k}")));
    }
    for (group, outs) in &outcomes {
        let tally = TrialTally::from_outcomes(outs).map_err(invalid)?;
        for (k, (at, hat)) in a.k.iter().zip(&metric_names) {
            rows.push((group.clone(), at.as_str(), Some(pass_at_k(tally, *k).map_err(invalid)?), tally.n));
            rows.push((
                group.clone(),
                hat.as_str(),
                Some(pass_hat_k_with(tally, *k, estimator).map_err(invalid)?),
                tally.n,
            ));
        }
    }
    a.out.emit(&metric_table(&rows))
}

#[derive(serde::Deserialize)]
struct AgreementRow {
    #[serde(default)]
    group: Option<String>,
    rater_a: String,
    rater_b: String,
}

fn agreement(a: AgreementArgs) -> CliResult {
    let mut series: BTreeMap<String, Vec<(bool, bool)>> = BTreeMap::new();
    let mut rdr = csv_reader(&a.input)?;
    for rec in rdr.deserialize::<AgreementRow>() {
        let row = rec.map_err(invalid)?;
        series
            .entry(row.group.unwrap_or_else(|| "all".into()))
            .or_default()
            .push((parse_label(&row.rater_a)?, parse_label(&row.rater_b)?));
    }
    let mut rows = Vec::new();
    for (group, items) in series {
        let n = items.len() as u64;
        let s = LabelPairSeries::new(items);
        rows.push((group.clone(), "percent_agreement", Some(percent_agreement(&s).map_err(invalid)?), n));
        rows.push((group.clone(), "cohen_kappa", cohen_kappa(&s).map_err(invalid)?, n));
        rows.push((group, "pabak", Some(pabak(&s).map_err(invalid)?), n));
    }
    a.out.emit(&metric_table(&rows))
}

fn logprob(a: LogprobArgs) -> CliResult {
    let traces = match &a.traces {
        Some(p) => TraceCorpus::load_path(p, &IngestOptions::default()).map_err(invalid)?,
        None => corpus_of(&a.store.open()?)?,
    };
    let groups = domain_groups(&a.domain_groups)?;
    let pools = mean_logprob_with(traces.iter().map(|t| t.as_ref()), a.group_by, &groups);
    let rows: Vec<_> = pools
        .iter()
        .map(|(g, pool)| (g.clone(), "mean_logprob", pool.mean(), pool.values.len() as u64))
        .collect();
    a.out.emit(&metric_table(&rows))
}

fn irt_fit(a: IrtFitArgs) -> CliResult {
    let file = fs::File::open(&a.responses).map_err(|e| invalid(format!("{}: {e}", a.responses.display())))?;
    let data = ResponseMatrix::from_csv(file).map_err(invalid)?;
    let cfg = FitConfig {
        max_iters: a.max_iters,
        tolerance: a.tolerance,
        step_rule: match a.step_rule {
            StepRuleArg::Armijo => StepRule::Armijo,
            StepRuleArg::BarzilaiBorwein => StepRule::BarzilaiBorwein,
        },
        ..FitConfig::default()
    };
    let fits = fit(&data, &cfg).map_err(invalid)?;
    for (set, f) in &fits {
        eprintln!(
            "{set:?}: converged={} iterations={} objective={:.6}",
            f.converged, f.iterations, f.final_objective
        );
    }
    let mut body = serde_json::to_string_pretty(&fits).expect("serializes");
    body.push('\n');
    a.out.emit(&body)
}

fn intervene_build(a: IntervenArgs) -> CliResult {
    let store = a.store.open()?;
    let corpus = corpus_of(&store)?;
    let registry = TraceRegistry::build(&corpus, RegistryOptions::default());
    if let Some(p) = &a.registry_out {
        fs::write(p, registry.to_json()).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
    }
    let kind = match a.pool {
        PoolArg::Success => PoolKind::Success,
        PoolArg::Failed => PoolKind::Failed,
    };
    let spec = InterventionSpec::new(kind, a.k, a.seed)?;
    let key = RegistryKey {
        environment: a.environment,
        agent: a.agent,
        task: a.task,
    };
    let source: Arc<_> = registry.draw(&key, &spec)?;
    let executor: Box<dyn ToolExecutor> = match a.executor_url {
        Some(url) => Box::new(HttpExecutor::new(url)?),
        None => Box::new(ReplayExecutor::from_trace(&source)),
    };
    let history = build_seed_history(&source, &spec, executor.as_ref())?;
    let mut body = serde_json::to_string_pretty(&history.to_trace(&source)).expect("serializes");
    body.push('\n');
    a.out.emit(&body)
}

fn serve(a: ServeArgs) -> CliResult {
    let store = Arc::new(a.store.open()?);
    let state = AppState {
        store,
        token: a.token.filter(|t| !t.is_empty()),
    };
    let rt = tokio::runtime::Runtime::new().map_err(invalid)?;
    eprintln!("listening on http://{}", a.bind);
    rt.block_on(service::serve(a.bind, state)).map_err(invalid)
}

fn report(a: ReportArgs) -> CliResult {
    let store = a.store.open()?;
    let body = match a.kind {
        ReportKind::Markers => {
            let corpus = corpus_of(&store)?;
            let annotations = store.latest_annotations().map_err(invalid)?;
            marker_counts(&annotations, &corpus).to_csv()
        }
        ReportKind::Warnings => {
            let mut totals: BTreeMap<WarningCategory, u64> = BTreeMap::new();
            let ids = store.graph_ids().map_err(invalid)?;
            for id in &ids {
                if let Some(rec) = store.get_graph(id).map_err(invalid)? {
                    for (c, n) in rec.warnings.counts() {
                        *totals.entry(c).or_default() += n as u64;
                    }
                }
            }
            let rows: Vec<_> = totals
                .into_iter()
                .map(|(c, n)| ("all".to_string(), c.as_str(), Some(n as f64), ids.len() as u64))
                .collect();
            metric_table(&rows)
        }
    };
    a.out.emit(&body)
}

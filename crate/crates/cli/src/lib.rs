//! Command-line front end: configuration, subcommands and run manifests.
//!
//! Every subcommand writes into the configured output directory. Results
//! depend only on the configuration and seed, never on the worker count.

pub mod config;
mod error;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use mlgw::analysis::{
    heatmap_from_traces, labels_per_visited_node_from_traces, statistics_csv, VisitOptions,
};
use mlgw::eval::{
    evaluate_nodes, logistic_baseline, run_protocol, write_reports_csv, LogisticBaseline,
    MetricsReport, DEFAULT_LAMBDAS,
};
use mlgw::graph::{load_graph, stratified_kfold, write_graph, NodeId};
use mlgw::learn::{train_with, write_training_log, TRAINING_LOG_HEADER};
use mlgw::nn::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use mlgw::walk::{node_episodes, read_traces, write_traces, TraceRecord};
use mlgw::{AgentParameters, Graph, HyperParams};

pub use config::Config;
pub use error::CliError;

/// Version string recorded in manifests, in `git describe` style.
pub const VERSION: &str = env!("MLGW_VERSION");

const TRACE_FORMAT: &str = "mlgw-traces/1";
const GRAPH_FORMAT: &str = "mlgw-graph-jsonl/1";

#[derive(Debug, Parser)]
#[command(
    name = "mlgw",
    version = VERSION,
    about = "Multi-agent graph walks for multi-label node classification",
    after_help = "Every configuration key can be given as `--key value` (for example \
                  `--seed 7`, `--variant reg+`, `--mode ind`, `--regime tr1`, \
                  `--workers 4`, `--out dir`); flags override the configuration file.\n\
                  Log verbosity is read from MLGW_LOG (error, warn, info, debug, trace)."
)]
struct Cli {
    /// Configuration file with `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train agents on the labeled nodes of the configured graph.
    Train,
    /// Score a checkpoint on the graph, or cross-validate without one.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export the prediction walks from the given nodes as JSON Lines.
    Trace {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Node ids as they appear in the node file.
        #[arg(required = true)]
        nodes: Vec<String>,
    },
    /// Compute the visit heatmap and labels-per-visited-node statistic.
    Analyze {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Write a planted synthetic graph and a configuration that loads it.
    Generate,
}

/// `(key, value)` pairs from configuration flags, in command-line order.
type Overrides = Vec<(String, String)>;

/// Splits `--key value` and `--key=value` configuration flags from the
/// arguments clap sees.
fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !config::is_key(&name) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::Input(format!("flag `--{name}` needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

/// Initializes logging from `MLGW_LOG`, defaulting to warnings.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("MLGW_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Runs the command line `args` (program name first).
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args
        .into_iter()
        .map(|a| {
            a.into()
                .into_string()
                .map_err(|a| CliError::Input(format!("argument {a:?} is not valid UTF-8")))
        })
        .collect::<Result<_, _>>()?;
    let (rest, overrides) = extract_overrides(args)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            return Err(CliError::Input(
                e.render().to_string().trim_end().to_string(),
            ))
        }
    };
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for (k, v) in &overrides {
        cfg.set(k, v).map_err(CliError::Input)?;
    }

    let workers = cfg.workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Evaluate { checkpoint } => cmd_evaluate(&cfg, checkpoint.as_deref()),
        Command::Trace { checkpoint, nodes } => cmd_trace(&cfg, checkpoint, nodes),
        Command::Analyze { traces } => cmd_analyze(&cfg, traces),
        Command::Generate => cmd_generate(&cfg),
    })
}

fn out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir()?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    write_file(path, text + "\n")
}

fn load(cfg: &Config) -> Result<Graph, CliError> {
    let (nodes, edges) = cfg.graph_paths()?;
    Ok(load_graph(nodes, edges, cfg.load_options()?)?)
}

fn load_params(path: &Path, graph: &Graph) -> Result<AgentParameters, CliError> {
    let ck = Checkpoint::load(path)?;
    let params = AgentParameters::from_checkpoint(&ck)?;
    params.check_compatible(graph)?;
    Ok(params)
}

fn checkpoint_metadata(
    hp: &HyperParams,
    epochs_done: usize,
) -> BTreeMap<String, serde_json::Value> {
    BTreeMap::from([
        (
            "variant".to_string(),
            serde_json::json!(hp.variant.to_string()),
        ),
        ("seed".to_string(), serde_json::json!(hp.seed)),
        ("epochs".to_string(), serde_json::json!(epochs_done)),
    ])
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    workers: usize,
    formats: BTreeMap<&'static str, String>,
    vocabulary: Vec<String>,
    nodes: usize,
    edges: usize,
    config: BTreeMap<&'static str, BTreeMap<&'static str, &'a str>>,
}

fn write_manifest(dir: &Path, command: &str, cfg: &Config, graph: &Graph) -> Result<(), CliError> {
    let mut sections: BTreeMap<&'static str, BTreeMap<&'static str, &str>> = BTreeMap::new();
    for (s, k, v) in cfg.entries() {
        sections.entry(s).or_default().insert(k, v);
    }
    let manifest = Manifest {
        tool: "mlgw",
        version: VERSION,
        command,
        seed: cfg.seed()?,
        workers: cfg.workers()?,
        formats: BTreeMap::from([
            (
                "checkpoint",
                format!("{CHECKPOINT_FORMAT}/{CHECKPOINT_VERSION}"),
            ),
            ("training_log", TRAINING_LOG_HEADER.to_string()),
            ("traces", TRACE_FORMAT.to_string()),
            ("graph", GRAPH_FORMAT.to_string()),
        ]),
        vocabulary: graph.label_names().to_vec(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        config: sections,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_train(cfg: &Config) -> Result<(), CliError> {
    let hp = cfg.hyper_params()?;
    let graph = load(cfg)?;
    let dir = out_dir(cfg)?;
    write_manifest(&dir, "train", cfg, &graph)?;
    let every = cfg.checkpoint_every()?;
    let train_nodes = graph.labeled_nodes();
    log::info!(
        "training {} agents on {} labeled nodes of {}",
        graph.label_count(),
        train_nodes.len(),
        graph.node_count()
    );
    let params =
        AgentParameters::for_graph(&graph, hp.hidden_dim, hp.variant.uses_distilled(), hp.seed);
    let mut periodic_error = None;
    let result = train_with(&graph, &hp, &train_nodes, params, |epoch, params, _| {
        if every > 0 && (epoch + 1) % every == 0 && epoch + 1 < hp.epochs {
            let path = dir.join(format!("checkpoint-epoch-{}.json", epoch + 1));
            if let Err(e) = params
                .to_checkpoint(checkpoint_metadata(&hp, epoch + 1))
                .save(&path)
            {
                periodic_error = Some(e);
            }
        }
        Ok(())
    });
    let (params, logs) = result?;
    if let Some(e) = periodic_error {
        return Err(e.into());
    }
    params
        .to_checkpoint(checkpoint_metadata(&hp, hp.epochs))
        .save(dir.join("checkpoint.json"))?;
    let log_path = dir.join("training_log.csv");
    write_training_log(&log_path, &logs, cfg.flag("log_wall_time")?)
        .map_err(|e| CliError::io(&log_path, e))?;
    Ok(())
}

/// Nodes scored by `evaluate --checkpoint`.
fn eval_nodes(cfg: &Config, graph: &Graph) -> Result<Vec<NodeId>, CliError> {
    let with_truth = |v: NodeId| graph.label_bits(v).iter().any(|&b| b);
    let nodes: Vec<NodeId> = match cfg.raw("eval_nodes") {
        "labeled" => graph.labeled_nodes(),
        "unlabeled" => (0..graph.node_count())
            .filter(|&v| !graph.is_labeled(v) && with_truth(v))
            .collect(),
        "all" => (0..graph.node_count()).filter(|&v| with_truth(v)).collect(),
        other => {
            return Err(CliError::Input(format!(
                "invalid value `{other}` for `eval_nodes`: expected labeled, unlabeled or all"
            )))
        }
    };
    if nodes.is_empty() {
        return Err(CliError::Input(
            "no nodes with known labels to evaluate".into(),
        ));
    }
    Ok(nodes)
}

/// Per-label counts and scores, then the macro and micro averages.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("label,tp,fp,fn,precision,recall,f1\n");
    for l in &report.labels {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            l.label,
            l.tp,
            l.fp,
            l.fn_,
            l.precision(),
            l.recall(),
            l.f1()
        );
    }
    let s = &report.summary;
    let _ = writeln!(
        out,
        "macro,,,,{:.6},{:.6},{:.6}",
        s.macro_precision, s.macro_recall, s.macro_f1
    );
    let _ = writeln!(
        out,
        "micro,,,,{:.6},{:.6},{:.6}",
        s.micro_precision, s.micro_recall, s.micro_f1
    );
    out
}

#[derive(Serialize)]
struct BaselineResult {
    configuration: usize,
    #[serde(flatten)]
    result: LogisticBaseline,
}

fn cmd_evaluate(cfg: &Config, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let hp = cfg.hyper_params()?;
    let graph = load(cfg)?;
    let dir = out_dir(cfg)?;
    write_manifest(&dir, "evaluate", cfg, &graph)?;
    if let Some(path) = checkpoint {
        let params = load_params(path, &graph)?;
        let nodes = eval_nodes(cfg, &graph)?;
        let report = evaluate_nodes(&graph, &params, &hp, &nodes)?;
        log::info!(
            "micro-F1 {:.4} on {} nodes",
            report.summary.micro_f1,
            nodes.len()
        );
        write_json(&dir.join("metrics.json"), &report)?;
        return write_file(&dir.join("metrics.csv"), metrics_csv(&report));
    }

    let protocol = cfg.protocol()?;
    let report = run_protocol(&graph, &hp, &protocol)?;
    write_json(&dir.join("report.json"), &report)?;
    write_file(
        &dir.join("report.csv"),
        write_reports_csv(std::slice::from_ref(&report)),
    )?;
    if cfg.flag("baseline")? {
        let folds = stratified_kfold(&graph, protocol.folds, protocol.fold_seed)?;
        let count = protocol
            .max_configurations
            .map_or(folds.k(), |m| m.min(folds.k()));
        let mut results = Vec::with_capacity(count);
        let mut csv = String::from(
            "configuration,lambda,macro_P,macro_R,macro_F1,micro_P,micro_R,micro_F1\n",
        );
        for f in 0..count {
            let (train, test) = folds.split(protocol.regime, f);
            let result = logistic_baseline(&graph, &train, &test, &DEFAULT_LAMBDAS)?;
            let s = &result.report.summary;
            let _ = writeln!(
                csv,
                "{f},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                result.lambda,
                s.macro_precision,
                s.macro_recall,
                s.macro_f1,
                s.micro_precision,
                s.micro_recall,
                s.micro_f1
            );
            results.push(BaselineResult {
                configuration: f,
                result,
            });
        }
        write_json(&dir.join("baseline.json"), &results)?;
        write_file(&dir.join("baseline.csv"), csv)?;
    }
    Ok(())
}

fn cmd_trace(cfg: &Config, checkpoint: &Path, names: &[String]) -> Result<(), CliError> {
    let hp = cfg.hyper_params()?;
    let graph = load(cfg)?;
    let params = load_params(checkpoint, &graph)?;
    let dir = out_dir(cfg)?;
    let mut records: Vec<TraceRecord> = Vec::new();
    for name in names {
        let v = graph
            .node_by_name(name)
            .ok_or_else(|| CliError::Input(format!("unknown node id `{name}`")))?;
        let episodes = node_episodes(
            &graph,
            &params,
            v,
            hp.walk_length,
            hp.walks_per_node,
            hp.variant.walk_policy(),
            hp.seed,
        )?;
        records.extend(
            episodes
                .iter()
                .map(|e| TraceRecord::from_episode(e, &graph)),
        );
    }
    write_manifest(&dir, "trace", cfg, &graph)?;
    Ok(write_traces(dir.join("traces.jsonl"), &records)?)
}

fn cmd_analyze(cfg: &Config, paths: &[PathBuf]) -> Result<(), CliError> {
    let mut traces = Vec::new();
    for p in paths {
        traces.extend(read_traces(p)?);
    }
    let opts = VisitOptions {
        include_start: cfg.flag("include_start")?,
        normalize: cfg.flag("normalize_heatmap")?,
    };
    let heatmap = heatmap_from_traces(&traces, &opts)?;
    let stats = labels_per_visited_node_from_traces(&traces, &opts)?;
    let dir = out_dir(cfg)?;
    write_file(&dir.join("heatmap.csv"), heatmap.to_csv())?;
    write_file(&dir.join("statistics.csv"), statistics_csv(&stats))
}

fn cmd_generate(cfg: &Config) -> Result<(), CliError> {
    let planted = cfg.planted()?;
    let graph: Graph = mlgw::synth::planted_graph(&planted, cfg.seed()?)?;
    let dir = out_dir(cfg)?;
    write_graph(&graph, dir.join("nodes.jsonl"), dir.join("edges.jsonl"))?;
    let mut run = cfg.clone();
    for (k, v) in [
        ("nodes", "nodes.jsonl"),
        ("edges", "edges.jsonl"),
        ("symmetrize", "true"),
    ] {
        run.set(k, v).map_err(CliError::Input)?;
    }
    write_file(&dir.join("run.cfg"), run.to_file_string())
}

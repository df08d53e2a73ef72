//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use crate::cpg::to_dot;
use crate::datakit::{default_allowlist, downsample, synth_generate, write_corpus, Cwe, DatasetManifest};
use crate::frontend::FunctionAst;
use crate::gcgat::{GcGatConfig, GcGatModel};
use crate::pipeline::{
    evaluate_timed, graph_of, label_directory, load_allowlist, load_functions, read_json, select, train_manifest,
    write_text, RunConfig,
};
use crate::veccpg::{FunctionVocabulary, VecCpg};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "grapheye", version, about = "Function-level vulnerability classification for C code")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a source file and print the syntax tree of its functions.
    Parse(ParseArgs),
    /// Build the code property graph of a function.
    Cpg(CpgArgs),
    /// Turn a function into its feature and adjacency matrices.
    Vectorize(VectorizeArgs),
    /// Build datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a classifier on a manifest.
    Train(TrainArgs),
    /// Classify the functions of a source file.
    Predict(PredictArgs),
    /// Evaluate a model on a manifest.
    Eval(EvalArgs),
    /// Run data, split, training and evaluation end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    pub file: PathBuf,
    /// Only this function.
    #[arg(long = "fn")]
    pub function: Option<String>,
    /// Emit JSON instead of an indented tree.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
}

#[derive(Debug, Args)]
pub struct CpgArgs {
    pub file: PathBuf,
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: GraphFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write DOT to this path.
    #[arg(long, value_name = "PATH", conflicts_with = "out")]
    pub dot: Option<PathBuf>,
    /// Write JSON to this path.
    #[arg(long = "json", value_name = "PATH", conflicts_with = "out")]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    pub file: PathBuf,
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Label the root good/bad functions under a directory.
    Label {
        dir: PathBuf,
        #[arg(long)]
        allowlist: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus of good/bad pairs.
    Synth {
        #[arg(long, value_parser = parse_cwe)]
        cwe: Cwe,
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_cwe(s: &str) -> std::result::Result<Cwe, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Balance classes before training.
    #[arg(long)]
    pub downsample: bool,
    /// Report validation F1 per epoch on this manifest.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    pub file: PathBuf,
    #[arg(long = "fn")]
    pub function: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("GRAPHEYE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// One document for a single function, an array otherwise.
fn one_or_many(mut docs: Vec<serde_json::Value>) -> serde_json::Value {
    if docs.len() == 1 {
        docs.pop().expect("one element")
    } else {
        serde_json::Value::Array(docs)
    }
}

fn tree_text(f: &FunctionAst) -> String {
    fn walk(f: &FunctionAst, id: crate::frontend::NodeId, depth: usize, out: &mut String) {
        let n = f.node(id);
        out.push_str(&format!("{}{} {}\n", "  ".repeat(depth), n.label, n.code.split_whitespace().collect::<Vec<_>>().join(" ")));
        for &c in &n.children {
            walk(f, c, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(f, f.root().id, 0, &mut out);
    out
}

fn load_model(path: &Path) -> Result<GcGatModel> {
    GcGatModel::load(path)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Parse(a) => {
            let fns = load_functions(&a.file)?;
            let chosen = select(&fns, a.function.as_deref())?;
            if a.json {
                emit(None, &pretty(&one_or_many(chosen.iter().map(|f| f.to_json_value()).collect())))
            } else {
                emit(None, &chosen.iter().map(|f| tree_text(f)).collect::<Vec<_>>().join("\n"))
            }
        }
        Command::Cpg(a) => {
            let fns = load_functions(&a.file)?;
            let graphs = select(&fns, a.function.as_deref())?.into_iter().map(graph_of).collect::<Result<Vec<_>>>()?;
            let json = || pretty(&one_or_many(graphs.iter().map(|g| g.to_json_value()).collect()));
            let dot = || graphs.iter().map(to_dot).collect::<Vec<_>>().join("\n");
            match (&a.dot, &a.json_out) {
                (None, None) => emit(
                    a.out.as_deref(),
                    &match a.format {
                        GraphFormat::Json => json(),
                        GraphFormat::Dot => dot(),
                    },
                ),
                (d, j) => {
                    if let Some(p) = d {
                        write_text(p, &dot())?;
                    }
                    if let Some(p) = j {
                        write_text(p, &json())?;
                    }
                    Ok(())
                }
            }
        }
        Command::Vectorize(a) => {
            let vocab: FunctionVocabulary = read_json(&a.vocab)?;
            let fns = load_functions(&a.file)?;
            let docs = select(&fns, a.function.as_deref())?
                .into_iter()
                .map(|f| graph_of(f).map(|g| VecCpg::new(&g, &vocab).to_json_value()))
                .collect::<Result<Vec<_>>>()?;
            emit(a.out.as_deref(), &(one_or_many(docs).to_string() + "\n"))
        }
        Command::Dataset(DatasetCommand::Label { dir, allowlist, out }) => {
            let allow = match &allowlist {
                Some(p) => load_allowlist(p)?,
                None => default_allowlist(),
            };
            if !dir.is_dir() {
                return Err(Error::Config(format!("{} is not a directory", dir.display())));
            }
            let manifest_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
            if !manifest_dir.as_os_str().is_empty() {
                std::fs::create_dir_all(&manifest_dir).map_err(|e| Error::io(&manifest_dir, e))?;
            }
            let m = label_directory(&dir, &allow, if manifest_dir.as_os_str().is_empty() { Path::new(".") } else { &manifest_dir })?;
            m.save(&out)?;
            info!("labeled {} functions ({} good, {} bad)", m.len(), m.counts.good, m.counts.bad);
            Ok(())
        }
        Command::Dataset(DatasetCommand::Synth { cwe, pairs, seed, out }) => {
            if pairs == 0 {
                return Err(Error::Config("--pairs must be at least 1".into()));
            }
            let m = write_corpus(&out, &synth_generate(cwe, pairs, seed))?;
            info!("wrote {} functions to {}", m.len(), out.display());
            Ok(())
        }
        Command::Train(a) => {
            let mut cfg: GcGatConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => GcGatConfig::default(),
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let mut manifest = DatasetManifest::load(&a.data)?;
            if a.downsample {
                manifest = downsample(&manifest, cfg.seed)?;
            }
            let validation = a.validation.as_deref().map(DatasetManifest::load).transpose()?;
            let (model, history) = train_manifest(&manifest, &cfg, validation.as_ref())?;
            write_text(&a.out, &model.to_json())?;
            if let Some(h) = &a.history {
                write_text(h, &pretty(&serde_json::to_value(&history).expect("serializable")))?;
            }
            Ok(())
        }
        Command::Predict(a) => {
            let model = load_model(&a.model)?;
            let fns = load_functions(&a.file)?;
            let chosen = select(&fns, a.function.as_deref())?;
            let start = Instant::now();
            let mut docs = Vec::new();
            for f in &chosen {
                let p = model.predict(&graph_of(f)?)?;
                docs.push(json!({ "function": f.name, "class": p.class, "prob_bad": p.prob_bad }));
            }
            let secs = start.elapsed().as_secs_f64();
            info!("predicted {} functions in {secs:.3}s", chosen.len());
            emit(None, &pretty(&one_or_many(docs)))
        }
        Command::Eval(a) => {
            let model = load_model(&a.model)?;
            let manifest = DatasetManifest::load(&a.data)?;
            let (report, fps) = evaluate_timed(&model, &manifest)?;
            eprintln!("throughput: {fps:.2} functions/s");
            if let Some(r) = &a.report {
                write_text(r, &report.to_json())?;
            }
            emit(None, &report.csv())
        }
        Command::Pipeline(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(v) = cfg.verbosity {
                if std::env::var_os("GRAPHEYE_LOG").is_none() {
                    log::set_max_level(v.level());
                }
            }
            let out = a
                .out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let outcome = crate::pipeline::run_pipeline(&cfg, &out)?;
            eprintln!("throughput: {:.2} functions/s", outcome.functions_per_second);
            emit(None, &format!("{}\n", outcome.report_path.display()))
        }
    }
}

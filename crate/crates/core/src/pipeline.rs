//! Glue between the stages: loading sources, vectorizing manifests, training
//! from a manifest and the staged end-to-end run.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::cpg::{build_cpg, PropertyGraph};
use crate::datakit::{
    default_allowlist, downsample, evaluate, label_sources, split, synth_generate, write_corpus, ConfusionCounts, Cwe,
    DatasetManifest, LabeledFunction, ManifestEntry, MetricsReport, SourceUnit,
};
use crate::frontend::{parse_unit, FunctionAst};
use crate::gcgat::{train_with, GcGatConfig, GcGatModel, Sample, TrainHistory, TrainOptions};
use crate::veccpg::{build_vocab, FunctionVocabulary, VecCpg};
use crate::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::in_file(path, e.into()))
}

/// Every function defined in a source file.
pub fn load_functions(path: &Path) -> Result<Vec<FunctionAst>> {
    let text = read_text(path)?;
    parse_unit(&text).map_err(|e| Error::in_file(path, e.into()))
}

/// The function called `name`, or all functions when `name` is `None`.
pub fn select<'a>(functions: &'a [FunctionAst], name: Option<&str>) -> Result<Vec<&'a FunctionAst>> {
    match name {
        None => Ok(functions.iter().collect()),
        Some(n) => functions
            .iter()
            .find(|f| f.name == n || f.name.rsplit("::").next() == Some(n))
            .map(|f| vec![f])
            .ok_or_else(|| Error::NoSuchFunction(n.to_string())),
    }
}

pub fn graph_of(f: &FunctionAst) -> Result<PropertyGraph> {
    Ok(build_cpg(f)?)
}

/// Allowlist file: a JSON array of names, or `{"names": [...]}`.
pub fn load_allowlist(path: &Path) -> Result<BTreeSet<String>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Allow {
        List(Vec<String>),
        Object { names: Vec<String> },
    }
    Ok(match read_json::<Allow>(path)? {
        Allow::List(v) | Allow::Object { names: v } => v.into_iter().collect(),
    })
}

/// Source files (`.c`, `.cc`, `.cpp`, `.cxx`) under `dir`, sorted.
pub fn source_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(&path, e.into())
        })?;
        let ext = entry.path().extension().and_then(|e| e.to_str()).unwrap_or("");
        if entry.file_type().is_file() && matches!(ext, "c" | "cc" | "cpp" | "cxx") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// `target` relative to `base` when it lies beneath it, else absolute.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let (target, base) = (absolute(target), absolute(base));
    target.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(target)
}

fn path_string(p: &Path) -> String {
    p.components()
        .filter(|c| !matches!(c, Component::CurDir))
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Labels the root functions under `dir` into a manifest whose paths are
/// relative to `manifest_dir` where possible.
pub fn label_directory(dir: &Path, allowlist: &BTreeSet<String>, manifest_dir: &Path) -> Result<DatasetManifest> {
    let mut units = Vec::new();
    for file in source_files(dir)? {
        units.push(SourceUnit { path: path_string(&file), text: read_text(&file)? });
    }
    let labeled: Vec<LabeledFunction> = label_sources(&units, allowlist)?;
    let entries = labeled
        .into_iter()
        .map(|f| {
            let file = f.file.unwrap_or_default();
            ManifestEntry {
                file: path_string(&relative_to(Path::new(&file), manifest_dir)),
                function: f.name,
                label: f.label,
                cwe: f.cwe,
            }
        })
        .collect();
    let mut m = DatasetManifest::new(entries);
    m.base_dir = manifest_dir.to_path_buf();
    Ok(m)
}

/// The same manifest with entry paths rewritten relative to `new_base`.
pub fn rebase(manifest: &DatasetManifest, new_base: &Path) -> DatasetManifest {
    let entries = manifest
        .entries
        .iter()
        .map(|e| ManifestEntry { file: path_string(&relative_to(&manifest.resolve(e), new_base)), ..e.clone() })
        .collect();
    let mut m = DatasetManifest::new(entries);
    m.base_dir = new_base.to_path_buf();
    m
}

pub fn samples(graphs: &[(ManifestEntry, PropertyGraph)], vocab: &FunctionVocabulary) -> Vec<Sample> {
    graphs.iter().map(|(e, g)| Sample { graph: VecCpg::new(g, vocab), label: e.label }).collect()
}

/// Builds the vocabulary from the manifest's functions and trains on them.
pub fn train_manifest(
    manifest: &DatasetManifest,
    config: &GcGatConfig,
    validation: Option<&DatasetManifest>,
) -> Result<(GcGatModel, TrainHistory)> {
    let graphs = manifest.graphs()?;
    let corpus: Vec<PropertyGraph> = graphs.iter().map(|(_, g)| g.clone()).collect();
    let vocab = build_vocab(&corpus)?;
    let train_set = samples(&graphs, &vocab);
    let val_set = match validation {
        Some(v) => Some(samples(&v.graphs()?, &vocab)),
        None => None,
    };
    let opts = TrainOptions { validation: val_set.as_deref(), ..Default::default() };
    train_with(&train_set, config, &vocab, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { cwe: Cwe, pairs: usize },
    Manifest { path: PathBuf },
    Directory {
        path: PathBuf,
        #[serde(default)]
        allowlist: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    Error,
    Info,
    Debug,
}

impl Verbosity {
    pub fn level(self) -> log::LevelFilter {
        match self {
            Verbosity::Error => log::LevelFilter::Error,
            Verbosity::Info => log::LevelFilter::Info,
            Verbosity::Debug => log::LevelFilter::Debug,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Configuration of an end-to-end run. The top-level seed drives data
/// generation, splitting, downsampling and model initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSource,
    #[serde(default)]
    pub model: GcGatConfig,
    #[serde(default = "default_true")]
    pub downsample: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub verbosity: Option<Verbosity>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.data {
            DataSource::Synthetic { .. } => {}
            DataSource::Manifest { path } => fix(path),
            DataSource::Directory { path, allowlist } => {
                fix(path);
                if let Some(a) = allowlist {
                    fix(a);
                }
            }
        }
        if let Some(o) = &mut cfg.output_dir {
            fix(o);
        }
        Ok(cfg)
    }

    /// Checks inputs exist and settings are coherent before any work starts.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        match &self.data {
            DataSource::Synthetic { pairs, .. } if *pairs < 3 => {
                return Err(Error::Config("synthetic data needs at least 3 pairs".into()))
            }
            DataSource::Synthetic { .. } => {}
            DataSource::Manifest { path } => must_exist(path, "manifest")?,
            DataSource::Directory { path, allowlist } => {
                must_exist(path, "source directory")?;
                if let Some(a) = allowlist {
                    must_exist(a, "allowlist")?;
                }
            }
        }
        let mut model = self.model.clone();
        model.seed = self.seed;
        model.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub functions: usize,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible") + "\n"
    }

    pub fn csv(&self) -> String {
        format!("{}\n{}\n", MetricsReport::CSV_HEADER, self.metrics.csv_row(&self.counts))
    }
}

/// Evaluates and measures prediction throughput in functions per second.
pub fn evaluate_timed(model: &GcGatModel, manifest: &DatasetManifest) -> Result<(EvalReport, f64)> {
    let start = Instant::now();
    let (counts, metrics) = evaluate(model, manifest)?;
    let secs = start.elapsed().as_secs_f64();
    let throughput = if secs > 0.0 { manifest.len() as f64 / secs } else { f64::INFINITY };
    Ok((EvalReport { functions: manifest.len(), counts, metrics }, throughput))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub model_path: PathBuf,
    pub history: TrainHistory,
    pub functions_per_second: f64,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::stage(name, e))
}

/// Data → split → downsample → vocabulary → train → evaluate, persisting every
/// intermediate under `out`. Timing goes to `timing.json`, so `report.json`
/// and `model.json` are identical across runs with the same configuration.
pub fn run_pipeline(config: &RunConfig, out: &Path) -> Result<PipelineOutcome> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let seed = config.seed;

    let corpus = stage("data", (|| -> Result<DatasetManifest> {
        match &config.data {
            DataSource::Synthetic { cwe, pairs } => {
                let functions = synth_generate(*cwe, *pairs, seed);
                write_corpus(&out.join("corpus"), &functions)
            }
            DataSource::Manifest { path } => DatasetManifest::load(path),
            DataSource::Directory { path, allowlist } => {
                let allow = match allowlist {
                    Some(a) => load_allowlist(a)?,
                    None => default_allowlist(),
                };
                let m = label_directory(path, &allow, out)?;
                m.save(&out.join("manifest.json"))?;
                Ok(m)
            }
        }
    })())?;
    info!("data: {} functions ({} good, {} bad)", corpus.len(), corpus.counts.good, corpus.counts.bad);

    let (train_m, test_m) = stage("split", split(&corpus, seed).map_err(Error::from))?;
    let train_m = if config.downsample {
        stage("downsample", downsample(&train_m, seed).map_err(Error::from))?
    } else {
        train_m
    };
    let (train_m, test_m) = (rebase(&train_m, out), rebase(&test_m, out));
    stage("split", train_m.save(&out.join("train.json")).and_then(|_| test_m.save(&out.join("test.json"))))?;

    let train_graphs = stage("vocabulary", train_m.graphs())?;
    let corpus_graphs: Vec<PropertyGraph> = train_graphs.iter().map(|(_, g)| g.clone()).collect();
    let vocab = stage("vocabulary", build_vocab(&corpus_graphs).map_err(Error::from))?;
    stage(
        "vocabulary",
        write_text(&out.join("vocab.json"), &(serde_json::to_string_pretty(&vocab).expect("serializable") + "\n")),
    )?;

    let mut model_cfg = config.model.clone();
    model_cfg.seed = seed;
    let train_set = samples(&train_graphs, &vocab);
    let (model, history) = stage("train", train_with(&train_set, &model_cfg, &vocab, &TrainOptions::default()))?;
    let model_path = out.join("model.json");
    stage("train", write_text(&model_path, &model.to_json()))?;
    stage(
        "train",
        write_text(&out.join("history.json"), &(serde_json::to_string_pretty(&history).expect("serializable") + "\n")),
    )?;

    let (report, fps) = stage("evaluate", evaluate_timed(&model, &test_m))?;
    let report_path = out.join("report.json");
    stage("evaluate", write_text(&report_path, &report.to_json()))?;
    stage("evaluate", write_text(&out.join("report.csv"), &report.csv()))?;
    stage(
        "evaluate",
        write_text(
            &out.join("timing.json"),
            &(serde_json::json!({ "functions": test_m.len(), "functions_per_second": fps }).to_string() + "\n"),
        ),
    )?;
    info!("evaluate: {} functions at {fps:.1} functions/s", test_m.len());
    Ok(PipelineOutcome { report, report_path, model_path, history, functions_per_second: fps })
}

//! File-level orchestration: reads inputs, runs every model, writes the
//! per-model artifact directories.
//!
//! ```text
//! out/
//!   run.json              config echo, model list, timestamps
//!   comparison.csv        one row per model (clique and std columns)
//!   <model>/heatmap.csv   normalized quantity contrast matrix
//!   <model>/heatmap_raw.csv
//!   <model>/proxies.csv   noun,category,value
//!   <model>/pvalues.csv   classes ordered by descending mean proxy
//!   <model>/cliques.json
//!   <model>/summary.json  deterministic; no timestamps
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use thiserror::Error;

use crate::embedding_store::{read_table, EmbeddingTable, TableError};
use crate::format::{round6, sig6};
use crate::lexicon::{filter_by_categories, parse_lexicon, CategorySet, Lexicon, LexiconError};
use crate::phrasegen::{phrase_manifest, PhraseManifest, QuantityRange};
use crate::pipeline::{analyze_model, AnalysisOptions, ModelAnalysis, PipelineError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Lexicon { path: PathBuf, source: LexiconError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl ReportError {
    /// 1 usage, 2 data or parse problem, 3 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Usage(_) => 1,
            ReportError::Pipeline(PipelineError::Config(_)) => 1,
            ReportError::Pipeline(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone)]
pub struct TableSource {
    pub model_id: String,
    pub path: PathBuf,
}

impl std::str::FromStr for TableSource {
    type Err = String;
    /// `MODEL_ID=PATH`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, path) = s.split_once('=').ok_or_else(|| format!("expected MODEL_ID=PATH, got '{s}'"))?;
        if id.is_empty() || path.is_empty() {
            return Err(format!("expected MODEL_ID=PATH, got '{s}'"));
        }
        Ok(Self { model_id: id.to_string(), path: PathBuf::from(path) })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lexicon_path: PathBuf,
    pub tables: Vec<TableSource>,
    pub options: AnalysisOptions,
    pub output_dir: PathBuf,
}

#[derive(Debug)]
pub struct RunReport {
    pub models: Vec<ModelAnalysis>,
    pub output_dir: PathBuf,
    /// Per-model directories, same order as `models`.
    pub model_dirs: Vec<PathBuf>,
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
    let (lex, report) =
        parse_lexicon(&text).map_err(|source| ReportError::Lexicon { path: path.to_path_buf(), source })?;
    for d in &report.duplicates {
        eprintln!(
            "warning: {}:{}: duplicate singular '{}' (first seen on line {}), skipped",
            path.display(),
            d.line,
            d.singular,
            d.first_line
        );
    }
    Ok(lex)
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable, ReportError> {
    let file = fs::File::open(path).map_err(|e| ReportError::io(path, e))?;
    read_table(BufReader::new(file)).map_err(|source| ReportError::Table { path: path.to_path_buf(), source })
}

/// Directory name for a model id.
pub fn model_dir_name(model_id: &str) -> String {
    model_id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn write(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|e| ReportError::io(path, e))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn proxies_csv(a: &ModelAnalysis) -> String {
    let mut out = String::from("noun,category,value\n");
    for (entry, score) in &a.scores {
        if entry.categories.is_empty() {
            let _ = writeln!(out, "{},,{}", entry.singular, sig6(score.value));
        }
        for c in &entry.categories {
            let _ = writeln!(out, "{},{c},{}", entry.singular, sig6(score.value));
        }
    }
    out
}

pub fn summary_json(a: &ModelAnalysis, opts: &AnalysisOptions) -> Value {
    let classes: Vec<Value> = a
        .ordered_classes()
        .into_iter()
        .map(|c| {
            json!({
                "category": c.category,
                "n": c.len(),
                "mean": round6(c.mean),
                "std": round6(c.std),
                "std_defined": c.std_defined,
            })
        })
        .collect();
    let n = a.anchor_row.len();
    json!({
        "model_id": a.model_id,
        "config": opts,
        "nouns": {
            "total": a.nouns_total,
            "used": a.nouns_used,
            "excluded_uncovered": a.exclusions.uncovered.len(),
            "excluded_degenerate": a.exclusions.degenerate.len(),
            "uncovered": a.exclusions.uncovered,
            "degenerate": a.exclusions.degenerate,
            "missing_phrases": a.coverage.missing.len(),
            "extra_phrases": a.coverage.extra.len(),
        },
        "heatmap": {
            "quantities": a.heatmap.quantities(),
            "raw_min": round6(a.heatmap_raw.off_diagonal().fold(f64::INFINITY, f64::min)),
            "raw_max": round6(a.heatmap_raw.off_diagonal().fold(f64::NEG_INFINITY, f64::max)),
        },
        "classes": classes,
        "pvalue_order": a.pvalues.classes,
        "cliques": {
            "count": a.cliques.count,
            "avg_size": round6(a.cliques.avg_size),
        },
        "average_class_std": round6(a.average_class_std),
        "inversions": {
            "anchor": opts.anchor,
            "sequence": a.anchor_row.iter().map(|v| round6(*v)).collect::<Vec<_>>(),
            "count": a.inversions,
            "pairs": n * n.saturating_sub(1) / 2,
        },
        "files": {
            "heatmap": "heatmap.csv",
            "heatmap_raw": "heatmap_raw.csv",
            "proxies": "proxies.csv",
            "pvalues": "pvalues.csv",
            "cliques": "cliques.json",
        },
    })
}

/// Side-by-side table in the style of the clique and std tables.
pub fn comparison_csv(rows: &[Value]) -> String {
    let mut out = String::from("model,cliques,avg_clique_size,average_class_std,inversions,pairs\n");
    for s in rows {
        let num = |v: &Value| v.as_f64().map(sig6).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s["model_id"].as_str().unwrap_or(""),
            s["cliques"]["count"],
            num(&s["cliques"]["avg_size"]),
            num(&s["average_class_std"]),
            s["inversions"]["count"],
            s["inversions"]["pairs"],
        );
    }
    out
}

fn write_model(dir: &Path, a: &ModelAnalysis, opts: &AnalysisOptions) -> Result<Value, ReportError> {
    fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    let summary = summary_json(a, opts);
    write(&dir.join("heatmap.csv"), &a.heatmap.to_csv())?;
    write(&dir.join("heatmap_raw.csv"), &a.heatmap_raw.to_csv())?;
    write(&dir.join("proxies.csv"), &proxies_csv(a))?;
    write(&dir.join("pvalues.csv"), &a.pvalues.to_csv())?;
    write(&dir.join("cliques.json"), &(a.cliques.to_json() + "\n"))?;
    write(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("json value") + "\n"))?;
    Ok(summary)
}

/// Runs every configured model and writes its artifacts.
///
/// Everything is computed before anything is written. Files go to a staging
/// directory that is moved into place at the end and removed on failure.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, ReportError> {
    let started = unix_ms();
    if cfg.tables.is_empty() {
        return Err(ReportError::Usage("at least one --table is required".into()));
    }
    let mut dir_names: Vec<String> = Vec::new();
    for t in &cfg.tables {
        let name = model_dir_name(&t.model_id);
        if dir_names.contains(&name) {
            return Err(ReportError::Usage(format!("duplicate model id '{}'", t.model_id)));
        }
        dir_names.push(name);
    }
    cfg.options.validate()?;

    let lexicon = load_lexicon(&cfg.lexicon_path)?;
    let mut models = Vec::with_capacity(cfg.tables.len());
    for src in &cfg.tables {
        let mut table = load_table(&src.path)?;
        table.set_model_id(src.model_id.clone());
        let analysis = analyze_model(&lexicon, &table, &cfg.options)?;
        for noun in &analysis.exclusions.uncovered {
            eprintln!("note: {}: noun '{noun}' lacks phrases, excluded", src.model_id);
        }
        if !analysis.exclusions.degenerate.is_empty() {
            eprintln!(
                "note: {}: {} noun(s) with vanishing 2-vs-3 similarity excluded",
                src.model_id,
                analysis.exclusions.degenerate.len()
            );
        }
        models.push(analysis);
    }

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| ReportError::io(out, e))?;
    let staging = out.join(format!(".staging-{}", std::process::id()));
    let result = write_all(&staging, &models, &dir_names, cfg, started);
    let summaries = match result {
        Ok(s) => s,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    let mut model_dirs = Vec::new();
    let mut entries: Vec<String> = dir_names.clone();
    entries.push("run.json".into());
    entries.push("comparison.csv".into());
    for name in &entries {
        let target = out.join(name);
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(|e| ReportError::io(&target, e))?;
        }
        fs::rename(staging.join(name), &target).map_err(|e| ReportError::io(&target, e))?;
    }
    let _ = fs::remove_dir_all(&staging);
    for name in &dir_names {
        model_dirs.push(out.join(name));
    }
    debug_assert_eq!(summaries.len(), models.len());
    Ok(RunReport { models, output_dir: out.clone(), model_dirs })
}

fn write_all(
    staging: &Path,
    models: &[ModelAnalysis],
    dir_names: &[String],
    cfg: &RunConfig,
    started: u128,
) -> Result<Vec<Value>, ReportError> {
    fs::create_dir_all(staging).map_err(|e| ReportError::io(staging, e))?;
    let mut summaries = Vec::new();
    for (a, name) in models.iter().zip(dir_names) {
        summaries.push(write_model(&staging.join(name), a, &cfg.options)?);
    }
    write(&staging.join("comparison.csv"), &comparison_csv(&summaries))?;
    let run = json!({
        "lexicon": cfg.lexicon_path,
        "tables": cfg.tables.iter().map(|t| json!({"model_id": t.model_id, "path": t.path, "dir": model_dir_name(&t.model_id)})).collect::<Vec<_>>(),
        "config": cfg.options,
        "jobs": cfg.options.jobs,
        "started_unix_ms": started as u64,
        "finished_unix_ms": unix_ms() as u64,
    });
    write(&staging.join("run.json"), &(serde_json::to_string_pretty(&run).expect("json value") + "\n"))?;
    Ok(summaries)
}

/// Builds the manifest for a lexicon file, optionally restricted to categories.
pub fn build_manifest(
    lexicon_path: &Path,
    categories: Option<&CategorySet>,
    quantities: QuantityRange,
) -> Result<PhraseManifest, ReportError> {
    let lex = load_lexicon(lexicon_path)?;
    let lex = match categories {
        Some(c) => filter_by_categories(&lex, c)
            .map_err(|source| ReportError::Lexicon { path: lexicon_path.to_path_buf(), source })?,
        None => lex,
    };
    Ok(phrase_manifest(&lex, quantities))
}

/// Writes the manifest (one phrase per line).
pub fn emit_manifest(
    lexicon_path: &Path,
    categories: Option<&CategorySet>,
    quantities: QuantityRange,
    out: &Path,
) -> Result<PhraseManifest, ReportError> {
    let manifest = build_manifest(lexicon_path, categories, quantities)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ReportError::io(parent, e))?;
    }
    write(out, &manifest.to_text())?;
    Ok(manifest)
}

/// Reads `summary.json` files from analyze output directories.
pub fn collect_summaries(dirs: &[PathBuf]) -> Result<Vec<Value>, ReportError> {
    let mut out = Vec::new();
    for dir in dirs {
        let direct = dir.join("summary.json");
        let mut paths = Vec::new();
        if direct.is_file() {
            paths.push(direct);
        } else {
            let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| ReportError::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join("summary.json").is_file())
                .collect();
            subdirs.sort();
            paths.extend(subdirs.into_iter().map(|p| p.join("summary.json")));
        }
        if paths.is_empty() {
            return Err(ReportError::Parse { path: dir.clone(), message: "no summary.json found".into() });
        }
        for p in paths {
            let text = fs::read_to_string(&p).map_err(|e| ReportError::io(&p, e))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| ReportError::Parse { path: p.clone(), message: e.to_string() })?;
            out.push(v);
        }
    }
    Ok(out)
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use indiv_probe::lexicon::{filter_by_categories, CategorySet, LexiconError};
use indiv_probe::metrics::SumUpper;
use indiv_probe::phrasegen::QuantityRange;
use indiv_probe::report::{
    collect_summaries, comparison_csv, emit_manifest, load_lexicon, run_pipeline, ReportError, RunConfig,
    TableSource,
};
use indiv_probe::stats::{Correction, PValueMatrix, SignificanceTest};
use indiv_probe::synth::{synth_table, SynthError};
use indiv_probe::{build_graph, maximal_cliques, AnalysisOptions, SynthConfig};

#[derive(Parser)]
#[command(name = "indiv-probe", version, about = "Quantity-individuation probes for embedding models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the phrase manifest for a lexicon.
    Manifest(ManifestArgs),
    /// Analyze one or more embedding tables.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic embedding table.
    Synth(SynthArgs),
    /// Re-run the clique analysis on a saved p-value CSV.
    Cliques(CliquesArgs),
    /// Side-by-side table of analyze outputs.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ManifestArgs {
    #[arg(long)]
    lexicon: PathBuf,
    /// Comma-separated list, or @FILE with one name per line.
    #[arg(long)]
    categories: Option<String>,
    #[arg(long, default_value = "2..11")]
    quantities: QuantityRange,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    lexicon: PathBuf,
    /// MODEL_ID=PATH; repeatable.
    #[arg(long = "table", required = true)]
    tables: Vec<TableSource>,
    #[arg(long)]
    categories: Option<String>,
    #[arg(long, default_value = "2..11")]
    quantities: QuantityRange,
    /// Heatmap quantity range.
    #[arg(long, default_value = "2..10")]
    heatmap: QuantityRange,
    #[arg(long = "proxy-T", default_value_t = 10)]
    proxy_t: u32,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "mannwhitney")]
    test: SignificanceTest,
    #[arg(long = "sum-upper", default_value = "inclusive")]
    sum_upper: SumUpper,
    /// Apply a Bonferroni correction to the p-value matrix.
    #[arg(long)]
    bonferroni: bool,
    /// Heatmap row used for the inversion count.
    #[arg(long, default_value_t = 2)]
    anchor: u32,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, env = "INDIV_PROBE_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    lexicon: PathBuf,
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quantities: Option<QuantityRange>,
    /// CATEGORY=FACTOR; repeatable.
    #[arg(long = "multiplier")]
    multipliers: Vec<String>,
    #[arg(long = "model-id")]
    model_id: Option<String>,
    #[arg(long)]
    categories: Option<String>,
    /// Output JSON-Lines table; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CliquesArgs {
    /// P-value CSV as written by `analyze`.
    #[arg(long)]
    pvalues: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Analyze output directories or model subdirectories.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Self { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Table(_) => Failure::data(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Manifest(a) => manifest(a),
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a),
        Command::Cliques(a) => cliques(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_categories(arg: &str) -> Result<CategorySet, Failure> {
    let parsed = match arg.strip_prefix('@') {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{path}: {e}")))?;
            CategorySet::from_lines(&text)
        }
        None => CategorySet::from_csv(arg),
    };
    parsed.map_err(|e: LexiconError| Failure::usage(format!("--categories: {e}")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| Failure::data(format!("{}: {e}", parent.display())))?;
            }
            fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn manifest(a: ManifestArgs) -> Result<(), Failure> {
    let cats = a.categories.as_deref().map(parse_categories).transpose()?;
    let manifest = match &a.out {
        Some(out) => emit_manifest(&a.lexicon, cats.as_ref(), a.quantities, out)?,
        None => {
            let m = indiv_probe::report::build_manifest(&a.lexicon, cats.as_ref(), a.quantities)?;
            print!("{}", m.to_text());
            m
        }
    };
    eprintln!("{} phrases from {} records", manifest.phrases.len(), manifest.provenance.len());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let options = AnalysisOptions {
        categories: a.categories.as_deref().map(parse_categories).transpose()?,
        quantities: a.quantities,
        heatmap: a.heatmap,
        horizon: a.proxy_t,
        sum_upper: a.sum_upper,
        alpha: a.alpha,
        test: a.test,
        correction: if a.bonferroni { Correction::Bonferroni } else { Correction::None },
        anchor: a.anchor,
        jobs: a.jobs,
    };
    let cfg = RunConfig { lexicon_path: a.lexicon, tables: a.tables, options, output_dir: a.out };
    let report = run_pipeline(&cfg)?;
    for (m, dir) in report.models.iter().zip(&report.model_dirs) {
        eprintln!(
            "{}: {} nouns, {} classes, {} cliques (avg size {}) -> {}",
            m.model_id,
            m.nouns_used,
            m.classes.len(),
            m.cliques.count,
            indiv_probe::format::sig6(m.cliques.avg_size),
            dir.display()
        );
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthConfig>(&text)
                .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?
        }
        None => {
            SynthConfig::new(a.beta.ok_or_else(|| Failure::usage("either --config or --beta is required"))?)
        }
    };
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(d) = a.dimension {
        cfg.dimension = d;
    }
    if let Some(s) = a.noise {
        cfg.noise_sigma = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(q) = a.quantities {
        cfg.quantities = q;
    }
    if let Some(id) = a.model_id {
        cfg.model_id = id;
    }
    for m in &a.multipliers {
        let (cat, factor) = m
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--multiplier expects CATEGORY=FACTOR, got '{m}'")))?;
        let factor: f64 =
            factor.parse().map_err(|_| Failure::usage(format!("--multiplier: bad factor in '{m}'")))?;
        cfg.multipliers.insert(cat.trim().to_lowercase(), factor);
    }
    let lex = load_lexicon(&a.lexicon)?;
    let lex = match a.categories.as_deref().map(parse_categories).transpose()? {
        Some(c) => {
            filter_by_categories(&lex, &c).map_err(|e| Failure::usage(format!("--categories: {e}")))?
        }
        None => lex,
    };
    let table = synth_table(&cfg, &lex)?;
    emit(a.out.as_deref(), &table.to_jsonl())?;
    eprintln!("{} phrases, dimension {}", table.len(), table.dimension());
    Ok(())
}

fn cliques(a: CliquesArgs) -> Result<(), Failure> {
    let path = &a.pvalues;
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let p = PValueMatrix::from_csv(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let graph = build_graph(&p, a.alpha).map_err(|e| Failure::usage(e.to_string()))?;
    let report = maximal_cliques(&graph).map_err(|e| Failure::data(e.to_string()))?;
    emit(a.out.as_deref(), &(report.to_json() + "\n"))
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let rows = collect_summaries(&a.dirs)?;
    emit(a.out.as_deref(), &comparison_csv(&rows))
}

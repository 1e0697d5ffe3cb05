//! Per-model analysis: heatmap, class proxies, p-values and cliques.

use std::num::NonZeroUsize;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::cliquegraph::{build_graph, maximal_cliques, CliqueError, CliqueReport};
use crate::embedding_store::{validate_coverage, CoverageReport, EmbeddingTable};
use crate::lexicon::{filter_by_categories, CategorySet, Lexicon, LexiconError, NounEntry};
use crate::metrics::{
    average_class_std, average_matrices, class_proxy, individuation_proxy, inversion_count, minmax_normalize,
    quantity_distance_matrix, ClassProxy, MetricsError, ProxyScore, QuantityMatrix, SumUpper,
};
use crate::phrasegen::{phrase_manifest, QuantityRange};
use crate::stats::{pvalue_matrix, Correction, PValueMatrix, SignificanceTest, StatsError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Clique(#[from] CliqueError),
    #[error("model '{0}': no noun is fully covered by the embedding table")]
    NoCoverage(String),
    #[error("model '{model}': category '{category}' has no usable nouns after exclusions")]
    EmptyClass { model: String, category: String },
}

impl PipelineError {
    /// True for failures caused by degenerate numbers rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::NoCoverage(_)
                | PipelineError::EmptyClass { .. }
                | PipelineError::Metrics(MetricsError::EmptyClass(_))
                | PipelineError::Metrics(MetricsError::Degenerate { .. })
                | PipelineError::Stats(StatsError::TooFewClasses(_))
                | PipelineError::Stats(StatsError::TooSmallForWelch(..))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// Classes to analyze; all lexicon categories when `None`.
    #[serde(serialize_with = "ser_categories")]
    pub categories: Option<CategorySet>,
    /// Quantities every noun must cover to take part.
    pub quantities: QuantityRange,
    /// Quantities shown in the heatmap.
    pub heatmap: QuantityRange,
    pub horizon: u32,
    pub sum_upper: SumUpper,
    pub alpha: f64,
    pub test: SignificanceTest,
    pub correction: Correction,
    /// Heatmap row whose values form the monotonicity sequence.
    pub anchor: u32,
    /// Worker threads for per-noun work; 0 picks the available parallelism.
    #[serde(skip)]
    pub jobs: usize,
}

fn ser_categories<S: serde::Serializer>(c: &Option<CategorySet>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.collect_seq(c.names()),
        None => s.serialize_none(),
    }
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            categories: None,
            quantities: QuantityRange::default(),
            heatmap: QuantityRange::new(2, 10).expect("valid"),
            horizon: 10,
            sum_upper: SumUpper::Inclusive,
            alpha: 0.05,
            test: SignificanceTest::MannWhitney,
            correction: Correction::None,
            anchor: 2,
            jobs: 1,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.horizon < 4 {
            return bad(format!("proxy horizon must be at least 4, got {}", self.horizon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.quantities.lo() != 2 {
            return bad(format!(
                "quantities must start at 2 (the proxy reads '2 <noun>'), got {}",
                self.quantities
            ));
        }
        let need = self.sum_upper.max_quantity(self.horizon);
        if need > self.quantities.hi() {
            return bad(format!(
                "horizon {} with {:?} summation needs quantity {need}, range is {}",
                self.horizon, self.sum_upper, self.quantities
            ));
        }
        if !self.quantities.contains(self.heatmap.lo()) || !self.quantities.contains(self.heatmap.hi()) {
            return bad(format!("heatmap range {} lies outside {}", self.heatmap, self.quantities));
        }
        if !self.heatmap.contains(self.anchor) {
            return bad(format!("anchor {} lies outside heatmap range {}", self.anchor, self.heatmap));
        }
        Ok(())
    }

    fn workers(&self) -> usize {
        match self.jobs {
            0 => thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1),
            n => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusions {
    /// Nouns missing at least one phrase in the quantity range.
    pub uncovered: Vec<String>,
    /// Nouns whose 2-vs-3 similarity vanishes.
    pub degenerate: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAnalysis {
    pub model_id: String,
    pub nouns_total: usize,
    pub nouns_used: usize,
    pub coverage: CoverageReport,
    pub exclusions: Exclusions,
    pub heatmap_raw: QuantityMatrix,
    pub heatmap: QuantityMatrix,
    /// Every scored noun, lexicon order.
    pub scores: Vec<(NounEntry, ProxyScore)>,
    /// Classes in requested category order.
    pub classes: Vec<ClassProxy>,
    pub pvalues: PValueMatrix,
    pub cliques: CliqueReport,
    pub average_class_std: f64,
    pub anchor_row: Vec<f64>,
    pub inversions: usize,
}

impl ModelAnalysis {
    /// Classes in p-value matrix order (descending mean).
    pub fn ordered_classes(&self) -> Vec<&ClassProxy> {
        self.pvalues
            .classes
            .iter()
            .map(|name| self.classes.iter().find(|c| &c.category == name).expect("same class set"))
            .collect()
    }

    pub fn class(&self, name: &str) -> Option<&ClassProxy> {
        self.classes.iter().find(|c| c.category == name)
    }
}

struct NounResult {
    matrix: QuantityMatrix,
    proxy: Result<ProxyScore, MetricsError>,
}

fn noun_work(
    table: &EmbeddingTable,
    entry: &NounEntry,
    opts: &AnalysisOptions,
) -> Result<NounResult, MetricsError> {
    let matrix = quantity_distance_matrix(table, entry, opts.heatmap)?;
    let proxy = individuation_proxy(table, entry, opts.horizon, opts.sum_upper);
    if let Err(e) = &proxy {
        if !matches!(e, MetricsError::Degenerate { .. }) {
            return Err(e.clone());
        }
    }
    Ok(NounResult { matrix, proxy })
}

/// Runs `noun_work` over contiguous chunks on `workers` threads; output
/// order equals input order for any worker count.
fn fan_out(
    table: &EmbeddingTable,
    entries: &[&NounEntry],
    opts: &AnalysisOptions,
) -> Result<Vec<NounResult>, MetricsError> {
    let workers = opts.workers().min(entries.len()).max(1);
    if workers == 1 {
        return entries.iter().map(|e| noun_work(table, e, opts)).collect();
    }
    let chunk = entries.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = entries
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || part.iter().map(|e| noun_work(table, e, opts)).collect::<Result<Vec<_>, _>>())
            })
            .collect();
        let mut out = Vec::with_capacity(entries.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

pub fn analyze_model(
    lexicon: &Lexicon,
    table: &EmbeddingTable,
    opts: &AnalysisOptions,
) -> Result<ModelAnalysis, PipelineError> {
    opts.validate()?;
    let model = table.model_id().to_string();

    let (working, class_set) = match &opts.categories {
        Some(cats) => (filter_by_categories(lexicon, cats)?, cats.clone()),
        None => (lexicon.clone(), lexicon.categories()),
    };
    if class_set.len() < 2 {
        return Err(PipelineError::Config(format!(
            "need at least 2 categories to compare, found {}",
            class_set.len()
        )));
    }

    let manifest = phrase_manifest(&working, opts.quantities);
    let coverage = validate_coverage(table, &manifest);
    let covered: std::collections::HashSet<&str> =
        coverage.covered_nouns.iter().map(String::as_str).collect();
    let used: Vec<&NounEntry> =
        working.entries().iter().filter(|e| covered.contains(e.singular.as_str())).collect();
    if used.is_empty() {
        return Err(PipelineError::NoCoverage(model));
    }

    let results = fan_out(table, &used, opts)?;

    let matrices: Vec<QuantityMatrix> = results.iter().map(|r| r.matrix.clone()).collect();
    let heatmap_raw = average_matrices(&matrices)?;
    let heatmap = minmax_normalize(&heatmap_raw);

    let mut scores = Vec::new();
    let mut degenerate = Vec::new();
    for (entry, r) in used.iter().zip(results) {
        match r.proxy {
            Ok(score) => scores.push(((*entry).clone(), score)),
            Err(_) => degenerate.push(entry.singular.clone()),
        }
    }

    let mut classes = Vec::with_capacity(class_set.len());
    for name in class_set.names() {
        let members: Vec<ProxyScore> =
            scores.iter().filter(|(e, _)| e.has_category(name)).map(|(_, s)| s.clone()).collect();
        if members.is_empty() {
            return Err(PipelineError::EmptyClass { model: model.clone(), category: name.clone() });
        }
        classes.push(class_proxy(members, name)?);
    }

    let pvalues = pvalue_matrix(&classes, opts.test, opts.correction)?;
    let graph = build_graph(&pvalues, opts.alpha)?;
    let cliques = maximal_cliques(&graph)?;
    let avg_std = average_class_std(&classes)?;
    let anchor_row = heatmap.row(opts.anchor).expect("anchor validated against heatmap range").to_vec();
    let inversions = inversion_count(&anchor_row);

    Ok(ModelAnalysis {
        model_id: model,
        nouns_total: working.len(),
        nouns_used: used.len(),
        exclusions: Exclusions { uncovered: coverage.uncovered_nouns.clone(), degenerate },
        coverage,
        heatmap_raw,
        heatmap,
        scores,
        classes,
        pvalues,
        cliques,
        average_class_std: avg_std,
        anchor_row,
        inversions,
    })
}

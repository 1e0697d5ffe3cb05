//! Probes for how an embedding model encodes individuation.
//!
//! The toolkit renders numeral-noun phrases ("2 apples", "3 apples", ...),
//! ingests phrase→vector tables produced by any model, and derives:
//!
//! * quantity contrast heatmaps (cosine distance between quantities of the
//!   same noun, averaged across nouns and min–max normalized),
//! * a per-noun individuation proxy built from consecutive-quantity cosine
//!   similarities, aggregated over noun classes,
//! * pairwise significance between classes and the maximal cliques of the
//!   resulting indistinguishability graph.
//!
//! A synthetic table generator with closed-form behaviour backs the tests.

pub mod cliquegraph;
pub mod embedding_store;
pub mod format;
pub mod lexicon;
pub mod metrics;
pub mod phrasegen;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use cliquegraph::{build_graph, maximal_cliques, CliqueReport, EquivalenceGraph};
pub use embedding_store::{CoverageReport, EmbeddingTable};
pub use lexicon::{CategorySet, Lexicon, NounEntry};
pub use metrics::{ClassProxy, ProxyScore, QuantityMatrix, SumUpper};
pub use phrasegen::{PhraseManifest, QuantityRange};
pub use pipeline::{analyze_model, AnalysisOptions, ModelAnalysis};
pub use stats::{Correction, PValueMatrix, SignificanceTest};
pub use synth::SynthConfig;

//! Cosine geometry over numeral-noun embeddings.
//!
//! Two readings of "distance" coexist here. Heatmaps use cosine *distance*
//! (`1 - similarity`); the individuation proxy uses raw cosine *similarity*.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::embedding_store::EmbeddingTable;
use crate::format::sig6;
use crate::lexicon::NounEntry;
use crate::phrasegen::{render_phrase, QuantityRange};

/// `|sim(2, 3)|` below this makes the proxy undefined for a noun.
pub const DEGENERATE_SIMILARITY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("noun '{noun}': missing phrase '{phrase}' (quantity {quantity})")]
    MissingPhrase { noun: String, quantity: u32, phrase: String },
    #[error("noun '{noun}': similarity between 2 and 3 is {similarity:e}, proxy undefined")]
    Degenerate { noun: String, similarity: f64 },
    #[error("proxy horizon must be at least 4, got {0}")]
    HorizonTooSmall(u32),
    #[error("quantity matrices have different axes")]
    AxisMismatch,
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("category '{0}' has no scores")]
    EmptyClass(String),
    #[error("malformed matrix CSV: {0}")]
    Csv(String),
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    // sqrt of the product keeps identical inputs at exactly 1
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric, zero-diagonal matrix indexed by quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityMatrix {
    quantities: Vec<u32>,
    values: Vec<f64>,
}

impl QuantityMatrix {
    pub fn zeros(quantities: Vec<u32>) -> Self {
        let n = quantities.len();
        Self { quantities, values: vec![0.0; n * n] }
    }

    /// Builds a matrix from the strict upper triangle.
    pub fn from_pairs(quantities: Vec<u32>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(quantities);
        let n = m.size();
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                m.values[i * n + j] = v;
                m.values[j * n + i] = v;
            }
        }
        m
    }

    pub fn quantities(&self) -> &[u32] {
        &self.quantities
    }

    pub fn size(&self) -> usize {
        self.quantities.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    /// Value for a pair of quantities.
    pub fn at(&self, a: u32, b: u32) -> Option<f64> {
        let i = self.quantities.iter().position(|&q| q == a)?;
        let j = self.quantities.iter().position(|&q| q == b)?;
        Some(self.get(i, j))
    }

    pub fn row(&self, quantity: u32) -> Option<&[f64]> {
        let i = self.quantities.iter().position(|&q| q == quantity)?;
        let n = self.size();
        Some(&self.values[i * n..(i + 1) * n])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.size().max(1))
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.size();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| self.get(i, j)))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// CSV with a header row and column of quantities.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity");
        for q in &self.quantities {
            let _ = write!(out, ",{q}");
        }
        out.push('\n');
        for (q, row) in self.quantities.iter().zip(self.rows()) {
            let _ = write!(out, "{q}");
            for v in row {
                let _ = write!(out, ",{}", sig6(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MetricsError::Csv("empty".into()))?;
        let quantities: Vec<u32> = header
            .split(',')
            .skip(1)
            .map(|s| s.trim().parse().map_err(|_| MetricsError::Csv(format!("bad quantity '{s}'"))))
            .collect::<Result<_, _>>()?;
        let n = quantities.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let q: u32 = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| MetricsError::Csv(format!("row {}: bad label", i + 2)))?;
            if quantities.get(i) != Some(&q) {
                return Err(MetricsError::Csv(format!("row {}: label {q} out of order", i + 2)));
            }
            for c in cells {
                values.push(
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| MetricsError::Csv(format!("row {}: bad value '{c}'", i + 2)))?,
                );
            }
        }
        if values.len() != n * n {
            return Err(MetricsError::Csv(format!("expected {n}x{n} values")));
        }
        Ok(Self { quantities, values })
    }
}

fn phrase_vector<'t>(
    table: &'t EmbeddingTable,
    entry: &NounEntry,
    n: u32,
) -> Result<&'t [f64], MetricsError> {
    let phrase = render_phrase(n, entry).expect("quantities start at 2");
    match table.get(&phrase) {
        Some(v) => Ok(v),
        None => Err(MetricsError::MissingPhrase { noun: entry.singular.clone(), quantity: n, phrase }),
    }
}

/// Cosine distances between every pair of quantities for one noun.
pub fn quantity_distance_matrix(
    table: &EmbeddingTable,
    entry: &NounEntry,
    range: QuantityRange,
) -> Result<QuantityMatrix, MetricsError> {
    let vectors: Vec<&[f64]> =
        range.iter().map(|n| phrase_vector(table, entry, n)).collect::<Result<_, _>>()?;
    let quantities: Vec<u32> = range.iter().collect();
    let n = quantities.len();
    let mut m = QuantityMatrix::zeros(quantities);
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 - cosine_similarity(vectors[i], vectors[j])?;
            m.values[i * n + j] = d;
            m.values[j * n + i] = d;
        }
    }
    Ok(m)
}

/// Entrywise mean, summed in input order.
pub fn average_matrices(ms: &[QuantityMatrix]) -> Result<QuantityMatrix, MetricsError> {
    let first = ms.first().ok_or(MetricsError::EmptyInput)?;
    if ms.iter().any(|m| m.quantities != first.quantities) {
        return Err(MetricsError::AxisMismatch);
    }
    let mut out = QuantityMatrix::zeros(first.quantities.clone());
    for m in ms {
        for (acc, v) in out.values.iter_mut().zip(&m.values) {
            *acc += v;
        }
    }
    let k = ms.len() as f64;
    for v in &mut out.values {
        *v /= k;
    }
    Ok(out)
}

/// Min–max rescaling of off-diagonal entries onto `[0, 1]`.
///
/// A constant off-diagonal maps to all zeros.
pub fn minmax_normalize(m: &QuantityMatrix) -> QuantityMatrix {
    let (lo, hi) =
        m.off_diagonal().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let n = m.size();
    let mut out = QuantityMatrix::zeros(m.quantities.clone());
    if n < 2 || !(span > 0.0) {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.values[i * n + j] = ((m.get(i, j) - lo) / span).clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Upper bound of the consecutive-similarity sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SumUpper {
    /// Sum over `n = 3..=T`, which needs the quantity `T + 1`.
    #[default]
    Inclusive,
    /// Sum over `n = 3..T`; quantities up to `T` suffice.
    Exclusive,
}

impl SumUpper {
    pub fn last_term(self, horizon: u32) -> u32 {
        match self {
            SumUpper::Inclusive => horizon,
            SumUpper::Exclusive => horizon - 1,
        }
    }

    /// Largest quantity the proxy reads.
    pub fn max_quantity(self, horizon: u32) -> u32 {
        self.last_term(horizon) + 1
    }
}

impl std::str::FromStr for SumUpper {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inclusive" => Ok(Self::Inclusive),
            "exclusive" => Ok(Self::Exclusive),
            other => Err(format!("expected 'inclusive' or 'exclusive', got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxyScore {
    pub noun: String,
    pub value: f64,
    pub horizon: u32,
}

/// Individuation proxy for one noun:
///
/// `sum_{n=3}^{T} sim(n, n+1) / (T * sim(2, 3))`
///
/// where `sim` is the cosine similarity of the phrase embeddings. Higher
/// values mean high quantities are harder to tell apart relative to the
/// 2-vs-3 contrast.
pub fn individuation_proxy(
    table: &EmbeddingTable,
    entry: &NounEntry,
    horizon: u32,
    upper: SumUpper,
) -> Result<ProxyScore, MetricsError> {
    if horizon < 4 {
        return Err(MetricsError::HorizonTooSmall(horizon));
    }
    let vectors: Vec<&[f64]> = (2..=upper.max_quantity(horizon))
        .map(|n| phrase_vector(table, entry, n))
        .collect::<Result<_, _>>()?;
    let sim = |n: u32| cosine_similarity(vectors[n as usize - 2], vectors[n as usize - 1]);

    let base = sim(2)?;
    if base.abs() < DEGENERATE_SIMILARITY {
        return Err(MetricsError::Degenerate { noun: entry.singular.clone(), similarity: base });
    }
    let mut total = 0.0;
    for n in 3..=upper.last_term(horizon) {
        total += sim(n)?;
    }
    Ok(ProxyScore { noun: entry.singular.clone(), value: total / (horizon as f64 * base), horizon })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassProxy {
    pub category: String,
    pub scores: Vec<ProxyScore>,
    pub mean: f64,
    /// Sample standard deviation; 0 when only one score exists.
    pub std: f64,
    pub std_defined: bool,
}

impl ClassProxy {
    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.value).collect()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn class_proxy(scores: Vec<ProxyScore>, category: &str) -> Result<ClassProxy, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyClass(category.to_string()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().map(|s| s.value).sum::<f64>() / n;
    let (std, std_defined) = if scores.len() > 1 {
        let ss: f64 = scores.iter().map(|s| (s.value - mean).powi(2)).sum();
        ((ss / (n - 1.0)).sqrt(), true)
    } else {
        (0.0, false)
    };
    Ok(ClassProxy { category: category.to_string(), scores, mean, std, std_defined })
}

pub fn average_class_std(classes: &[ClassProxy]) -> Result<f64, MetricsError> {
    if classes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(classes.iter().map(|c| c.std).sum::<f64>() / classes.len() as f64)
}

/// Number of pairs `i < j` with `seq[i] >= seq[j]`.
pub fn inversion_count(seq: &[f64]) -> usize {
    let mut buf = seq.to_vec();
    let mut scratch = vec![0.0; seq.len()];
    merge_count(&mut buf, &mut scratch)
}

fn merge_count(a: &mut [f64], scratch: &mut [f64]) -> usize {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = a.split_at_mut(mid);
        merge_count(l, &mut scratch[..mid]) + merge_count(r, &mut scratch[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[i] < a[j] {
            scratch[k] = a[i];
            i += 1;
        } else {
            // every remaining left element is >= a[j]
            count += mid - i;
            scratch[k] = a[j];
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&a[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&a[j..n]);
    a.copy_from_slice(&scratch[..n]);
    count
}

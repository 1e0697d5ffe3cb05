//! Two-sample significance tests and the class-by-class p-value matrix.

use std::fmt::Write as _;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::format::sig6;
use crate::metrics::ClassProxy;

/// Largest pooled sample size handled by exact enumeration.
pub const EXACT_MAX_TOTAL: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("welch test needs at least 2 observations per sample, got {0} and {1}")]
    TooSmallForWelch(usize, usize),
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("malformed p-value CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignificanceTest {
    #[default]
    MannWhitney,
    Welch,
}

impl std::str::FromStr for SignificanceTest {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mannwhitney" => Ok(Self::MannWhitney),
            "welch" => Ok(Self::Welch),
            other => Err(format!("expected 'mannwhitney' or 'welch', got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p: f64,
    pub method: UMethod,
}

fn check(sample: &[f64]) -> Result<(), StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Midranks of the pooled sample plus the tie-group sizes.
fn pooled_ranks(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        for item in &pooled[i..j] {
            ranks[item.1] = midrank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn u_statistic(x: &[f64], y: &[f64]) -> (f64, Vec<usize>) {
    let (ranks, ties) = pooled_ranks(x, y);
    let n1 = x.len() as f64;
    let r1: f64 = ranks[..x.len()].iter().sum();
    (r1 - n1 * (n1 + 1.0) / 2.0, ties)
}

/// Number of arrangements of `n1` x-labels among `n1 + n2` positions giving
/// each U value `0..=n1*n2`.
fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    // table[m][k] over u, built up in m (x count) and k (y count)
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![1.0]).collect();
    for m in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1.0]);
        for k in 1..=n2 {
            // the largest element is either an x (adds k to U) or a y
            let mut dist = vec![0.0; m * k + 1];
            for (u, c) in prev[k].iter().enumerate() {
                dist[u + k] += c;
            }
            for (u, c) in cur[k - 1].iter().enumerate() {
                dist[u] += c;
            }
            cur.push(dist);
        }
        prev = cur;
    }
    let mut out = prev.swap_remove(n2);
    out.resize(max_u + 1, 0.0);
    out
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let dist = u_distribution(n1, n2);
    let total: f64 = dist.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = dist[..=u].iter().sum();
    let upper: f64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0)).max(1.0);
    let var = a * b / 12.0 * ((n + 1.0) - tie_term);
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// Two-sided Mann–Whitney U test.
///
/// Exact enumeration of the U distribution when the pooled size is at most
/// [`EXACT_MAX_TOTAL`] and there are no ties; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney, StatsError> {
    check(x)?;
    check(y)?;
    let (u, ties) = u_statistic(x, y);
    if x.len() + y.len() <= EXACT_MAX_TOTAL && ties.is_empty() {
        Ok(MannWhitney { u, p: exact_p(u, x.len(), y.len()), method: UMethod::Exact })
    } else {
        Ok(MannWhitney { u, p: normal_p(u, x.len(), y.len(), &ties), method: UMethod::Normal })
    }
}

pub fn mann_whitney_p(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    mann_whitney(x, y).map(|r| r.p)
}

/// The normal-approximation path regardless of sample size.
pub fn mann_whitney_normal_p(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x)?;
    check(y)?;
    let (u, ties) = u_statistic(x, y);
    Ok(normal_p(u, x.len(), y.len(), &ties))
}

fn mean_var(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let m = s.iter().sum::<f64>() / n;
    let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sided Welch t-test.
pub fn welch_p(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x)?;
    check(y)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::TooSmallForWelch(x.len(), y.len()));
    }
    let (m1, v1) = mean_var(x);
    let (m2, v2) = mean_var(y);
    let (a, b) = (v1 / x.len() as f64, v2 / y.len() as f64);
    let se2 = a + b;
    if !(se2 > 0.0) {
        return Ok(if m1 == m2 { 1.0 } else { 0.0 });
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (a * a / (x.len() as f64 - 1.0) + b * b / (y.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

pub fn two_sample_p(x: &[f64], y: &[f64], test: SignificanceTest) -> Result<f64, StatsError> {
    match test {
        SignificanceTest::MannWhitney => mann_whitney_p(x, y),
        SignificanceTest::Welch => welch_p(x, y),
    }
}

/// Symmetric class-by-class p-values, rows ordered by descending class mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueMatrix {
    pub classes: Vec<String>,
    values: Vec<f64>,
}

impl PValueMatrix {
    pub fn new(classes: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), classes.len() * classes.len());
        Self { classes, values }
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    pub fn between(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.classes.iter().position(|c| c == a)?;
        let j = self.classes.iter().position(|c| c == b)?;
        Some(self.get(i, j))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for c in &self.classes {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (i, c) in self.classes.iter().enumerate() {
            out.push_str(c);
            for j in 0..self.size() {
                let _ = write!(out, ",{}", sig6(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| StatsError::Csv("empty input".into()))?;
        let classes: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let n = classes.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or("").trim();
            if classes.get(i).map(String::as_str) != Some(label) {
                return Err(StatsError::Csv(format!(
                    "row {} label '{label}' does not match the header",
                    i + 2
                )));
            }
            let row: Vec<f64> = cells
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|p| (0.0..=1.0).contains(p))
                        .ok_or_else(|| StatsError::Csv(format!("row {}: bad p-value '{c}'", i + 2)))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != n {
                return Err(StatsError::Csv(format!("row {} has {} values, expected {n}", i + 2, row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(StatsError::Csv(format!("expected {n} rows, found {rows}")));
        }
        Ok(Self { classes, values })
    }
}

/// Orders classes by descending mean proxy (least individuated first), ties
/// broken alphabetically.
pub fn order_classes(classes: &[ClassProxy]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..classes.len()).collect();
    idx.sort_by(|&a, &b| {
        classes[b]
            .mean
            .total_cmp(&classes[a].mean)
            .then_with(|| classes[a].category.cmp(&classes[b].category))
    });
    idx
}

pub fn pvalue_matrix(
    classes: &[ClassProxy],
    test: SignificanceTest,
    correction: Correction,
) -> Result<PValueMatrix, StatsError> {
    if classes.len() < 2 {
        return Err(StatsError::TooFewClasses(classes.len()));
    }
    let order = order_classes(classes);
    let samples: Vec<Vec<f64>> = order.iter().map(|&i| classes[i].values()).collect();
    let n = order.len();
    let pairs = (n * (n - 1) / 2) as f64;
    let mut values = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mut p = two_sample_p(&samples[i], &samples[j], test)?;
            if correction == Correction::Bonferroni {
                p = (p * pairs).min(1.0);
            }
            values[i * n + j] = p;
            values[j * n + i] = p;
        }
    }
    Ok(PValueMatrix { classes: order.iter().map(|&i| classes[i].category.clone()).collect(), values })
}

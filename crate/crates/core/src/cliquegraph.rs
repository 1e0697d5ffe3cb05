//! Indistinguishability graph over classes and its maximal cliques.

use serde::Serialize;
use thiserror::Error;

use crate::format::round6;
use crate::stats::PValueMatrix;

pub const MAX_VERTICES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliqueError {
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("graph has {0} vertices; clique enumeration supports at most {MAX_VERTICES}")]
    TooManyVertices(usize),
}

/// Classes as vertices; an edge joins two classes whose p-value exceeds alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceGraph {
    pub vertices: Vec<String>,
    adjacency: Vec<Vec<bool>>,
    pub alpha: f64,
}

impl EquivalenceGraph {
    /// Graph from an explicit edge list over `vertices` (indices).
    pub fn from_edges(vertices: Vec<String>, edges: &[(usize, usize)], alpha: f64) -> Self {
        let n = vertices.len();
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        Self { vertices, adjacency, alpha }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n).map(|i| (i + 1..n).filter(|&j| self.adjacency[i][j]).count()).sum()
    }
}

/// Connects classes `i != j` when `p[i][j] > alpha`.
pub fn build_graph(p: &PValueMatrix, alpha: f64) -> Result<EquivalenceGraph, CliqueError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliqueError::InvalidAlpha(alpha));
    }
    let n = p.size();
    let adjacency = (0..n).map(|i| (0..n).map(|j| i != j && p.get(i, j) > alpha).collect()).collect();
    Ok(EquivalenceGraph { vertices: p.classes.clone(), adjacency, alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueReport {
    pub alpha: f64,
    /// Member names sorted alphabetically; cliques by size descending, then
    /// lexicographically.
    pub cliques: Vec<Vec<String>>,
    pub count: usize,
    pub avg_size: f64,
}

impl CliqueReport {
    pub fn to_json(&self) -> String {
        let rounded = CliqueReport {
            alpha: self.alpha,
            cliques: self.cliques.clone(),
            count: self.count,
            avg_size: round6(self.avg_size),
        };
        serde_json::to_string_pretty(&rounded).expect("plain data serializes")
    }
}

type Mask = u64;

fn bit(i: usize) -> Mask {
    1 << i
}

/// Enumerates all maximal cliques (Bron–Kerbosch with Tomita pivoting over
/// 64-bit vertex sets). Isolated vertices are singleton cliques.
pub fn maximal_clique_masks(g: &EquivalenceGraph) -> Result<Vec<Mask>, CliqueError> {
    let n = g.len();
    if n > MAX_VERTICES {
        return Err(CliqueError::TooManyVertices(n));
    }
    let neighbors: Vec<Mask> =
        (0..n).map(|i| (0..n).filter(|&j| g.adjacent(i, j)).fold(0, |m, j| m | bit(j))).collect();
    let all = if n == MAX_VERTICES { Mask::MAX } else { bit(n) - 1 };
    let mut out = Vec::new();
    if n > 0 {
        expand(0, all, 0, &neighbors, &mut out);
    }
    Ok(out)
}

fn expand(r: Mask, mut p: Mask, mut x: Mask, nb: &[Mask], out: &mut Vec<Mask>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    // pivot maximizing |P ∩ N(u)| over P ∪ X
    let mut best = 0;
    let mut best_count = -1i32;
    let mut candidates = p | x;
    while candidates != 0 {
        let u = candidates.trailing_zeros() as usize;
        candidates &= candidates - 1;
        let c = (p & nb[u]).count_ones() as i32;
        if c > best_count {
            best_count = c;
            best = u;
        }
    }
    let mut todo = p & !nb[best];
    while todo != 0 {
        let v = todo.trailing_zeros() as usize;
        todo &= todo - 1;
        expand(r | bit(v), p & nb[v], x & nb[v], nb, out);
        p &= !bit(v);
        x |= bit(v);
    }
}

pub fn maximal_cliques(g: &EquivalenceGraph) -> Result<CliqueReport, CliqueError> {
    let masks = maximal_clique_masks(g)?;
    let mut cliques: Vec<Vec<String>> = masks
        .into_iter()
        .map(|m| {
            let mut names: Vec<String> =
                (0..g.len()).filter(|&i| m & bit(i) != 0).map(|i| g.vertices[i].clone()).collect();
            names.sort();
            names
        })
        .collect();
    cliques.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let count = cliques.len();
    let avg_size =
        if count == 0 { 0.0 } else { cliques.iter().map(Vec::len).sum::<usize>() as f64 / count as f64 };
    Ok(CliqueReport { alpha: g.alpha, cliques, count, avg_size })
}

/// `(count, average size)` columns.
pub fn clique_stats(r: &CliqueReport) -> (usize, f64) {
    (r.count, r.avg_size)
}

//! Exact nearest-neighbour sets and the nearest-neighbour graph.
//!
//! Two words are neighbours (`x ~ y`) when one is among the other's top-m
//! nearest words and the Jaccard similarity of their top-m sets is at least
//! `tau`. Distances are Euclidean; `S_m(x)` never contains `x` itself, and
//! distance ties are broken by ascending word index.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::{squared_distance, Scalar};

/// Default neighbourhood size for graph construction.
pub const DEFAULT_M: usize = 2;
/// Default Jaccard threshold for graph construction.
pub const DEFAULT_TAU: f64 = 0.5;

/// Query rows processed together; keeps a block of the matrix hot in cache.
const QUERY_BLOCK: usize = 64;

/// Top-m neighbour lists for every word.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourSets<T: Scalar> {
    m: usize,
    sets: Vec<Vec<usize>>,
    distances: Vec<Vec<T>>,
}

impl<T: Scalar> NeighbourSets<T> {
    /// Requested neighbourhood size (lists hold `min(m, n - 1)` entries).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Neighbours of word `i`, nearest first.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    /// Euclidean distances matching [`Self::neighbours`].
    pub fn distances(&self, i: usize) -> &[T] {
        &self.distances[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.sets[i].contains(&j)
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }
}

#[inline]
fn by_distance_then_index<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .expect("distances are finite")
        .then(a.1.cmp(&b.1))
}

/// Picks the `k` smallest `(squared distance, index)` pairs, sorted.
fn select_smallest<T: Scalar>(mut cand: Vec<(T, usize)>, k: usize) -> Vec<(T, usize)> {
    if k < cand.len() {
        if k > 0 {
            cand.select_nth_unstable_by(k - 1, by_distance_then_index);
        }
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_index);
    cand
}

/// Ranks every row of `set` against `query`, skipping `exclude`, and returns
/// the `k` nearest as `(index, euclidean distance)`.
pub fn nearest_to<T: Scalar>(
    set: &EmbeddingSet<T>,
    query: &[T],
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, T)> {
    let cand: Vec<(T, usize)> = set
        .rows()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(j, row)| (squared_distance(query, row), j))
        .collect();
    select_smallest(cand, k)
        .into_iter()
        .map(|(d2, j)| (j, d2.sqrt()))
        .collect()
}

/// Exact top-`m` Euclidean neighbours of every word (brute force).
///
/// Work is split into blocks of query rows and distributed over the rayon
/// pool; each row's result depends only on the data, never on scheduling.
pub fn knn<T: Scalar>(set: &EmbeddingSet<T>, m: usize) -> Result<NeighbourSets<T>> {
    let n = set.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "nearest neighbours need at least 2 words, got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::param("m must be >= 1"));
    }
    let k = m.min(n - 1);

    let blocks: Vec<Vec<Vec<(T, usize)>>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(QUERY_BLOCK)
        .map(|block| {
            let mut cands: Vec<Vec<(T, usize)>> =
                block.iter().map(|_| Vec::with_capacity(n - 1)).collect();
            for (j, row_j) in set.rows().enumerate() {
                for (slot, &i) in block.iter().enumerate() {
                    if i != j {
                        cands[slot].push((squared_distance(set.row(i), row_j), j));
                    }
                }
            }
            cands.into_iter().map(|c| select_smallest(c, k)).collect()
        })
        .collect();

    let mut sets = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for row in blocks.into_iter().flatten() {
        sets.push(row.iter().map(|&(_, j)| j).collect());
        distances.push(row.iter().map(|&(d2, _)| d2.sqrt()).collect());
    }
    Ok(NeighbourSets { m, sets, distances })
}

/// `|a ∩ b| / |a ∪ b|` for two index sets (duplicates within a set are ignored).
pub fn jaccard(a: &[usize], b: &[usize]) -> Result<f64> {
    let mut a: Vec<usize> = a.to_vec();
    let mut b: Vec<usize> = b.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    if a.is_empty() && b.is_empty() {
        return Err(Error::param("Jaccard similarity of two empty sets is undefined"));
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Graph parameters recorded alongside the edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub m: usize,
    pub tau: f64,
}

/// Undirected nearest-neighbour graph over word indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourGraph {
    n: usize,
    params: GraphParams,
    /// Sorted, deduplicated pairs with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighbourGraph {
    /// Builds a graph from an explicit edge list. Pairs are normalised to
    /// `(min, max)`; self-loops and out-of-range indices are rejected.
    pub fn from_edges(
        n: usize,
        params: GraphParams,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut norm = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::param(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::param(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &norm {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            n,
            params,
            edges: norm,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.binary_search(&(a, b)).is_ok()
    }

    /// Serialisable view with token names.
    pub fn report<T: Scalar>(&self, set: &EmbeddingSet<T>) -> GraphReport {
        GraphReport {
            n: self.n,
            m: self.params.m,
            tau: self.params.tau,
            num_edges: self.edges.len(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            tokens: set.words().to_vec(),
        }
    }
}

/// JSON form of a [`NeighbourGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub num_edges: usize,
    pub edges: Vec<[usize; 2]>,
    pub tokens: Vec<String>,
}

impl GraphReport {
    pub fn to_graph(&self) -> Result<NeighbourGraph> {
        if self.tokens.len() != self.n {
            return Err(Error::Mismatch(format!(
                "graph report lists {} tokens for n = {}",
                self.tokens.len(),
                self.n
            )));
        }
        NeighbourGraph::from_edges(
            self.n,
            GraphParams {
                m: self.m,
                tau: self.tau,
            },
            self.edges.iter().map(|e| (e[0], e[1])),
        )
    }
}

/// Builds the graph from precomputed top-m sets.
pub fn graph_from_neighbours<T: Scalar>(sets: &NeighbourSets<T>, tau: f64) -> Result<NeighbourGraph> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::param(format!("tau must lie in [0, 1], got {tau}")));
    }
    let mut edges = Vec::new();
    for i in 0..sets.len() {
        for &j in sets.neighbours(i) {
            if jaccard(sets.neighbours(i), sets.neighbours(j))? >= tau {
                edges.push((i, j));
            }
        }
    }
    NeighbourGraph::from_edges(sets.len(), GraphParams { m: sets.m(), tau }, edges)
}

/// Largest Jaccard overlap an edge can have with neighbour sets of size `k`.
///
/// An edge needs one word inside the other's set, and no word is in its own
/// set, so the best case shares `k - 1` words out of `k + 1`. Any `tau` above
/// this value yields a graph without edges (for `k = 2` the bound is 1/3).
pub fn max_edge_jaccard(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (k - 1) as f64 / (k + 1) as f64
}

/// Nearest-neighbour graph: computes `S_m` once and links every pair
/// satisfying both the membership and the Jaccard condition.
pub fn build_graph<T: Scalar>(set: &EmbeddingSet<T>, m: usize, tau: f64) -> Result<NeighbourGraph> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::param(format!("tau must lie in [0, 1], got {tau}")));
    }
    let sets = knn(set, m)?;
    let bound = max_edge_jaccard(m.min(set.len().saturating_sub(1)));
    if set.len() > 1 && tau > bound {
        log::warn!(
            "tau = {tau} exceeds {bound:.4}, the largest Jaccard overlap an edge can have at m = {m}; \
             the graph will have no edges and NADP will add no noise"
        );
    }
    graph_from_neighbours(&sets, tau)
}

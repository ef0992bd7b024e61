//! Factorisation of the neighbour graph into connected components and the
//! per-component (local) sensitivities.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::neighbours::NeighbourGraph;
use crate::scalar::{euclidean, Scalar};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets holding `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Connected components in canonical form: members ascending, components
/// ordered by their smallest member.
pub fn connected_components(graph: &NeighbourGraph) -> Vec<Vec<usize>> {
    let n = graph.n();
    let mut dsu = DisjointSets::new(n);
    for &(a, b) in graph.edges() {
        dsu.union(a, b);
    }
    // Vertices are visited in ascending order, so the first vertex seen for
    // each root is that component's minimum.
    let mut slot_of_root = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = dsu.find(v);
        if slot_of_root[r] == usize::MAX {
            slot_of_root[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot_of_root[r]].push(v);
    }
    comps
}

/// Components together with their local sensitivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPartition {
    pub components: Vec<Vec<usize>>,
    /// Component id of each word.
    pub assignment: Vec<usize>,
    /// Largest edge length inside each component (0 for singletons).
    pub local_sensitivities: Vec<f64>,
    pub global_sensitivity: f64,
    /// Multi-word components whose edges all have length 0.
    pub degenerate_components: Vec<usize>,
}

impl ComponentPartition {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn num_words(&self) -> usize {
        self.assignment.len()
    }

    pub fn component_of(&self, word: usize) -> usize {
        self.assignment[word]
    }

    pub fn sensitivity_of_word(&self, word: usize) -> f64 {
        self.local_sensitivities[self.assignment[word]]
    }

    /// Component size -> number of components of that size.
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for c in &self.components {
            *h.entry(c.len()).or_insert(0) += 1;
        }
        h
    }

    /// Checks the partition invariants against the graph.
    pub fn validate(&self, graph: &NeighbourGraph) -> Result<()> {
        let n = graph.n();
        if self.assignment.len() != n {
            return Err(Error::Mismatch(format!(
                "partition covers {} words, graph has {n}",
                self.assignment.len()
            )));
        }
        let mut seen = vec![false; n];
        for (cid, comp) in self.components.iter().enumerate() {
            if comp.is_empty() {
                return Err(Error::Mismatch(format!("component {cid} is empty")));
            }
            for &v in comp {
                if v >= n || seen[v] {
                    return Err(Error::Mismatch(format!("vertex {v} repeated or out of range")));
                }
                seen[v] = true;
                if self.assignment[v] != cid {
                    return Err(Error::Mismatch(format!("vertex {v} assignment disagrees")));
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Mismatch("partition does not cover every vertex".into()));
        }
        for &(a, b) in graph.edges() {
            if self.assignment[a] != self.assignment[b] {
                return Err(Error::Mismatch(format!("edge ({a}, {b}) crosses components")));
            }
        }
        Ok(())
    }

    /// Longest shortest path (in hops) over all components, estimated by a
    /// double BFS sweep per component. Exact on trees, a lower bound otherwise.
    pub fn max_chain_length(&self, graph: &NeighbourGraph) -> usize {
        let mut dist = vec![usize::MAX; graph.n()];
        let mut best = 0;
        for comp in &self.components {
            if comp.len() < 2 {
                continue;
            }
            let (far, _) = bfs_farthest(graph, comp[0], &mut dist);
            for &v in comp {
                dist[v] = usize::MAX;
            }
            let (_, ecc) = bfs_farthest(graph, far, &mut dist);
            for &v in comp {
                dist[v] = usize::MAX;
            }
            best = best.max(ecc);
        }
        best
    }

    /// Serialisable summary with token names.
    pub fn report<T: Scalar>(&self, graph: &NeighbourGraph, set: &EmbeddingSet<T>) -> ComponentsReport {
        ComponentsReport {
            n: self.num_words(),
            k: self.num_components(),
            m: graph.params().m,
            tau: graph.params().tau,
            global_sensitivity: self.global_sensitivity,
            size_histogram: self.size_histogram(),
            max_chain_length: self.max_chain_length(graph),
            degenerate_components: self.degenerate_components.clone(),
            components: self
                .components
                .iter()
                .zip(&self.local_sensitivities)
                .enumerate()
                .map(|(id, (members, &s))| ComponentEntry {
                    id,
                    size: members.len(),
                    local_sensitivity: s,
                    members: members.clone(),
                    tokens: members.iter().map(|&i| set.word(i).to_string()).collect(),
                })
                .collect(),
        }
    }
}

fn bfs_farthest(graph: &NeighbourGraph, start: usize, dist: &mut [usize]) -> (usize, usize) {
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    let (mut far, mut far_d) = (start, 0);
    while let Some(v) = queue.pop_front() {
        for &w in graph.neighbours(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                if dist[w] > far_d {
                    far = w;
                    far_d = dist[w];
                }
                queue.push_back(w);
            }
        }
    }
    (far, far_d)
}

/// Attaches local sensitivities to a component list.
///
/// `Δ_i` is the largest Euclidean length of an edge inside component `i`.
/// Pairs that are not neighbours do not count, even when they share a
/// component. Singletons get 0 through the reflexive relation `x ~ x`.
pub fn sensitivities<T: Scalar>(
    components: Vec<Vec<usize>>,
    graph: &NeighbourGraph,
    set: &EmbeddingSet<T>,
) -> Result<ComponentPartition> {
    if set.len() != graph.n() {
        return Err(Error::Mismatch(format!(
            "graph has {} vertices, embedding set has {} words",
            graph.n(),
            set.len()
        )));
    }
    let mut assignment = vec![usize::MAX; graph.n()];
    for (cid, comp) in components.iter().enumerate() {
        for &v in comp {
            if v >= assignment.len() {
                return Err(Error::Mismatch(format!("vertex {v} out of range")));
            }
            assignment[v] = cid;
        }
    }
    let mut local = vec![0.0f64; components.len()];
    let mut partition = ComponentPartition {
        components,
        assignment,
        local_sensitivities: Vec::new(),
        global_sensitivity: 0.0,
        degenerate_components: Vec::new(),
    };
    partition.validate(graph)?;

    for &(a, b) in graph.edges() {
        let cid = partition.assignment[a];
        let len = euclidean(set.row(a), set.row(b)).as_f64();
        if len > local[cid] {
            local[cid] = len;
        }
    }
    for (cid, comp) in partition.components.iter().enumerate() {
        if comp.len() > 1 && local[cid] == 0.0 {
            log::warn!(
                "component {cid} has {} words but zero sensitivity (duplicate vectors); it receives no noise",
                comp.len()
            );
            partition.degenerate_components.push(cid);
        }
    }
    partition.global_sensitivity = local.iter().copied().fold(0.0, f64::max);
    partition.local_sensitivities = local;
    Ok(partition)
}

/// Components plus sensitivities in one call.
pub fn partition<T: Scalar>(graph: &NeighbourGraph, set: &EmbeddingSet<T>) -> Result<ComponentPartition> {
    sensitivities(connected_components(graph), graph, set)
}

/// JSON form of a [`ComponentPartition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub tau: f64,
    pub global_sensitivity: f64,
    pub size_histogram: BTreeMap<usize, usize>,
    pub max_chain_length: usize,
    pub degenerate_components: Vec<usize>,
    pub components: Vec<ComponentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub id: usize,
    pub size: usize,
    pub local_sensitivity: f64,
    pub members: Vec<usize>,
    pub tokens: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbours::GraphParams;

    const P: GraphParams = GraphParams { m: 2, tau: 0.5 };

    #[test]
    fn triangle_is_one_component() {
        let g = NeighbourGraph::from_edges(3, P, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(connected_components(&g), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn disjoint_edges_give_two_components() {
        let g = NeighbourGraph::from_edges(4, P, [(2, 3), (0, 1)]).unwrap();
        assert_eq!(connected_components(&g), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn canonical_order() {
        let g = NeighbourGraph::from_edges(6, P, [(5, 1), (3, 4)]).unwrap();
        assert_eq!(
            connected_components(&g),
            vec![vec![0], vec![1, 5], vec![2], vec![3, 4]]
        );
    }

    fn line(xs: &[f64]) -> EmbeddingSet<f64> {
        EmbeddingSet::from_anonymous_rows(xs.iter().map(|&x| vec![x, 0.0]).collect()).unwrap()
    }

    #[test]
    fn singleton_has_zero_sensitivity() {
        let s = line(&[0.0, 3.0, 50.0]);
        let g = NeighbourGraph::from_edges(3, P, [(0, 1)]).unwrap();
        let p = partition(&g, &s).unwrap();
        assert_eq!(p.components, vec![vec![0, 1], vec![2]]);
        assert_eq!(p.local_sensitivities, vec![3.0, 0.0]);
        assert_eq!(p.global_sensitivity, 3.0);
        assert!(p.degenerate_components.is_empty());
    }

    #[test]
    fn path_uses_edge_lengths_not_diameter() {
        let s = line(&[0.0, 1.0, 3.0]);
        let g = NeighbourGraph::from_edges(3, P, [(0, 1), (1, 2)]).unwrap();
        let p = partition(&g, &s).unwrap();
        assert_eq!(p.local_sensitivities, vec![2.0]);
    }

    #[test]
    fn duplicate_vectors_flagged_degenerate() {
        let s = line(&[1.0, 1.0, 9.0]);
        let g = NeighbourGraph::from_edges(3, P, [(0, 1)]).unwrap();
        let p = partition(&g, &s).unwrap();
        assert_eq!(p.local_sensitivities, vec![0.0, 0.0]);
        assert_eq!(p.degenerate_components, vec![0]);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let s = line(&[0.0, 1.0]);
        let g = NeighbourGraph::from_edges(3, P, [(0, 1)]).unwrap();
        assert!(partition(&g, &s).is_err());

        let s = line(&[0.0, 1.0, 2.0]);
        let g = NeighbourGraph::from_edges(3, P, [(0, 1)]).unwrap();
        // Splits an edge across two components.
        assert!(sensitivities(vec![vec![0], vec![1], vec![2]], &g, &s).is_err());
        // Misses a vertex.
        assert!(sensitivities(vec![vec![0, 1]], &g, &s).is_err());
    }

    #[test]
    fn chain_length_of_path() {
        let s = line(&[0.0, 1.0, 2.0, 3.0, 10.0]);
        let g = NeighbourGraph::from_edges(5, P, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let p = partition(&g, &s).unwrap();
        assert_eq!(p.max_chain_length(&g), 3);
        let r = p.report(&g, &s);
        assert_eq!(r.k, 2);
        assert_eq!(r.size_histogram.get(&4), Some(&1));
        assert_eq!(r.components[1].tokens, vec!["w4".to_string()]);
    }
}

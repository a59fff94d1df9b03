//! Undirected node-labelled graphs, the unit of training and evaluation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which synthetic task a graph belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTag {
    PathFinding,
    PrefixSum,
    Distance,
}

impl TaskTag {
    pub const ALL: [TaskTag; 3] = [TaskTag::PathFinding, TaskTag::PrefixSum, TaskTag::Distance];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskTag::PathFinding => "path_finding",
            TaskTag::PrefixSum => "prefix_sum",
            TaskTag::Distance => "distance",
        }
    }

    /// Width of the per-node input features.
    pub fn in_dim(self) -> usize {
        match self {
            TaskTag::PathFinding | TaskTag::Distance => 1,
            TaskTag::PrefixSum => 2,
        }
    }
}

impl fmt::Display for TaskTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "path_finding" | "pathfinding" | "path" => Ok(TaskTag::PathFinding),
            "prefix_sum" | "prefixsum" | "prefix" => Ok(TaskTag::PrefixSum),
            "distance" => Ok(TaskTag::Distance),
            other => Err(Error::usage(format!("unknown task '{other}'"))),
        }
    }
}

/// A simple undirected graph with node features and binary node labels.
///
/// Edges are stored normalized (`u < v`) and sorted. A CSR adjacency with
/// ascending neighbor lists is built once at construction; slot `e` of the
/// CSR arrays is the directed edge `receiver(e) <- neighbor(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Matrix,
    labels: Vec<u8>,
    task: TaskTag,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Validates and builds a graph. Connectivity is not checked here; see
    /// [`Graph::check_connected`].
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Matrix,
        labels: Vec<u8>,
        task: TaskTag,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::usage("graph must have at least one node"));
        }
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::usage(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::usage(format!("self-loop on node {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::usage(format!("duplicate edge {:?}", w[0])));
        }
        if features.rows() != num_nodes {
            return Err(Error::usage(format!(
                "features have {} rows, graph has {num_nodes} nodes",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::usage(format!(
                "labels have length {}, graph has {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::usage(format!("label {bad} is not in {{0, 1}}")));
        }

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &normalized {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut targets = vec![0; offsets[num_nodes]];
        for &(u, v) in &normalized {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..num_nodes {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }

        Ok(Graph {
            num_nodes,
            edges: normalized,
            features,
            labels,
            task,
            offsets,
            targets,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn task(&self) -> TaskTag {
        self.task
    }

    /// Replaces the labels, keeping structure and features.
    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.num_nodes || labels.iter().any(|&l| l > 1) {
            return Err(Error::usage("labels must be binary and one per node"));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        if v >= self.num_nodes {
            return Err(Error::usage(format!(
                "node {v} out of range for {} nodes",
                self.num_nodes
            )));
        }
        Ok(self.neighbors_unchecked(v))
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// CSR offsets: the directed edges into `v` occupy `offsets[v]..offsets[v+1]`.
    #[inline]
    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// CSR neighbor array aligned with [`Graph::csr_offsets`].
    #[inline]
    pub fn csr_neighbors(&self) -> &[usize] {
        &self.targets
    }

    /// Number of directed edges (twice the undirected edge count).
    pub fn num_directed_edges(&self) -> usize {
        self.targets.len()
    }

    fn bfs(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes];
        let mut queue = VecDeque::new();
        dist[s] = Some(0);
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &w in self.neighbors_unchecked(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    pub fn check_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Structural("graph is not connected".into()))
        }
    }

    /// Hop distances from `s` to every node.
    pub fn bfs_distances(&self, s: usize) -> Result<Vec<usize>> {
        if s >= self.num_nodes {
            return Err(Error::usage(format!(
                "source {s} out of range for {} nodes",
                self.num_nodes
            )));
        }
        self.bfs(s)
            .into_iter()
            .enumerate()
            .map(|(v, d)| {
                d.ok_or_else(|| {
                    Error::Structural(format!("node {v} is unreachable from {s}"))
                })
            })
            .collect()
    }

    /// Longest shortest-path hop count over all node pairs.
    pub fn diameter(&self) -> Result<usize> {
        let mut best = 0;
        for s in 0..self.num_nodes {
            let d = self.bfs_distances(s)?;
            best = best.max(d.into_iter().max().unwrap_or(0));
        }
        Ok(best)
    }

    /// Relabels node `v` as `p[v]`, carrying features and labels along.
    pub fn permute(&self, p: &[usize]) -> Result<Graph> {
        let n = self.num_nodes;
        if p.len() != n {
            return Err(Error::usage(format!(
                "permutation has length {}, graph has {n} nodes",
                p.len()
            )));
        }
        let mut seen = vec![false; n];
        for &x in p {
            if x >= n || seen[x] {
                return Err(Error::usage("permutation is not a bijection"));
            }
            seen[x] = true;
        }
        let mut inverse = vec![0; n];
        for (v, &pv) in p.iter().enumerate() {
            inverse[pv] = v;
        }
        let features = self.features.select_rows(&inverse);
        let labels = inverse.iter().map(|&v| self.labels[v]).collect();
        Graph::new(
            n,
            self.edges.iter().map(|&(u, v)| (p[u], p[v])),
            features,
            labels,
            self.task,
        )
    }

    /// Number of nodes whose flag column `col` is set.
    pub fn flag_count(&self, col: usize) -> usize {
        (0..self.num_nodes)
            .filter(|&v| self.features.get(v, col) != 0.0)
            .count()
    }
}

/// Inverse of a permutation given as `p[v] = new index of v`.
pub fn invert_permutation(p: &[usize]) -> Vec<usize> {
    let mut inverse = vec![0; p.len()];
    for (v, &pv) in p.iter().enumerate() {
        inverse[pv] = v;
    }
    inverse
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn plain(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(
            n,
            edges.iter().copied(),
            Matrix::zeros(n, 1),
            vec![0; n],
            TaskTag::Distance,
        )
        .unwrap()
    }

    #[test]
    fn neighbors_of_path_and_star() {
        let path = plain(3, &[(0, 1), (1, 2)]);
        assert_eq!(path.neighbors(1).unwrap(), &[0, 2]);
        let star = plain(5, &[(0, 3), (0, 1), (4, 0), (2, 0)]);
        assert_eq!(star.neighbors(0).unwrap(), &[1, 2, 3, 4]);
        assert!(matches!(star.neighbors(5), Err(Error::Usage(_))));
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        let feats = || Matrix::zeros(3, 1);
        assert!(Graph::new(3, [(0, 0)], feats(), vec![0; 3], TaskTag::Distance).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)], feats(), vec![0; 3], TaskTag::Distance).is_err());
        assert!(Graph::new(3, [(0, 3)], feats(), vec![0; 3], TaskTag::Distance).is_err());
        assert!(Graph::new(3, [(0, 1)], feats(), vec![0; 2], TaskTag::Distance).is_err());
        assert!(Graph::new(3, [(0, 1)], feats(), vec![0, 2, 0], TaskTag::Distance).is_err());
    }

    #[test]
    fn bfs_and_diameter_on_small_shapes() {
        let path = plain(3, &[(0, 1), (1, 2)]);
        assert_eq!(path.bfs_distances(0).unwrap(), vec![0, 1, 2]);
        let star = plain(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(star.bfs_distances(0).unwrap(), vec![0, 1, 1, 1, 1]);
        assert_eq!(plain(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).diameter().unwrap(), 5);
        let k4 = plain(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(k4.diameter().unwrap(), 1);
    }

    #[test]
    fn disconnected_graph_is_a_structural_error() {
        let g = plain(4, &[(0, 1), (2, 3)]);
        assert!(!g.is_connected());
        assert!(matches!(g.bfs_distances(0), Err(Error::Structural(_))));
        assert!(matches!(g.diameter(), Err(Error::Structural(_))));
    }

    #[test]
    fn permute_identity_reversal_and_errors() {
        let g = plain(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g.permute(&[0, 1, 2, 3]).unwrap(), g);
        let r = g.permute(&[3, 2, 1, 0]).unwrap();
        assert_eq!(r.edges(), g.edges());
        assert!(g.permute(&[0, 0, 1, 2]).is_err());
        assert!(g.permute(&[0, 1, 2]).is_err());
    }
}

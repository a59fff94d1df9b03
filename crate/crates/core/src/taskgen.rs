//! Synthetic task generators with exact labels.
//!
//! * Path finding: a random tree with two marked nodes; a node is positive
//!   when it lies on the tree path between them (endpoints included).
//! * Prefix sum: a path graph carrying one bit per node and a marked start
//!   endpoint; a node is positive when the bits from the start up to and
//!   including itself have odd parity.
//! * Distance: a sparse graph with large diameter and a marked start node;
//!   a node is positive when its hop distance to the start is odd.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, TaskTag};
use crate::matrix::Matrix;

/// Attempts at drawing a distance-task graph before giving up.
pub const DISTANCE_RETRIES: usize = 20;
/// Largest path-position gap bridged by a distance-task shortcut edge.
pub const DISTANCE_SHORTCUT_SPAN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub task: TaskTag,
    pub num_graphs: usize,
    pub graph_size: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.graph_size < 3 {
            return Err(Error::usage(format!(
                "graph_size must be at least 3, got {}",
                self.graph_size
            )));
        }
        if self.num_graphs == 0 {
            return Err(Error::usage("num_graphs must be at least 1"));
        }
        Ok(())
    }
}

/// Generates `num_graphs` graphs from one seeded stream.
pub fn generate(config: &GeneratorConfig) -> Result<Vec<Graph>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.num_graphs)
        .map(|_| gen_task(config.task, config.graph_size, &mut rng))
        .collect()
}

pub fn gen_task<R: Rng + ?Sized>(task: TaskTag, n: usize, rng: &mut R) -> Result<Graph> {
    match task {
        TaskTag::PathFinding => gen_path_finding(n, rng),
        TaskTag::PrefixSum => gen_prefix_sum(n, rng),
        TaskTag::Distance => gen_distance(n, rng),
    }
}

/// Random tree edges: node `i` attaches to a uniform earlier node, then all
/// labels are shuffled so that no index is structurally special.
pub fn random_tree_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut relabel: Vec<usize> = (0..n).collect();
    relabel.shuffle(rng);
    (1..n)
        .map(|i| {
            let parent = rng.gen_range(0..i);
            (relabel[parent], relabel[i])
        })
        .collect()
}

/// A random tree with all-zero features and labels (path-finding schema).
pub fn gen_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::usage(format!("tree needs at least 2 nodes, got {n}")));
    }
    Graph::new(
        n,
        random_tree_edges(n, rng),
        Matrix::zeros(n, 1),
        vec![0; n],
        TaskTag::PathFinding,
    )
}

/// Labels nodes on the unique path between `a` and `b` in a tree.
pub fn tree_path_labels(tree: &Graph, a: usize, b: usize) -> Result<Vec<u8>> {
    let n = tree.num_nodes();
    if a >= n || b >= n {
        return Err(Error::usage("marked node out of range"));
    }
    let mut parent = vec![usize::MAX; n];
    let mut stack = vec![a];
    parent[a] = a;
    while let Some(u) = stack.pop() {
        for &w in tree.neighbors_unchecked(u) {
            if parent[w] == usize::MAX {
                parent[w] = u;
                stack.push(w);
            }
        }
    }
    if parent[b] == usize::MAX {
        return Err(Error::Structural("marked nodes are disconnected".into()));
    }
    let mut labels = vec![0u8; n];
    let mut v = b;
    labels[v] = 1;
    while v != a {
        v = parent[v];
        labels[v] = 1;
    }
    Ok(labels)
}

/// Builds a path-finding instance on a given tree with the given marks.
pub fn path_finding_instance(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    marks: (usize, usize),
) -> Result<Graph> {
    if marks.0 == marks.1 {
        return Err(Error::usage("marked nodes must be distinct"));
    }
    let edges: Vec<_> = edges.into_iter().collect();
    if edges.len() + 1 != n {
        return Err(Error::usage("a tree on n nodes has n-1 edges"));
    }
    let mut features = Matrix::zeros(n, 1);
    if marks.0 >= n || marks.1 >= n {
        return Err(Error::usage("marked node out of range"));
    }
    features.set(marks.0, 0, 1.0);
    features.set(marks.1, 0, 1.0);
    let unlabeled = Graph::new(n, edges, features, vec![0; n], TaskTag::PathFinding)?;
    unlabeled.check_connected()?;
    let labels = tree_path_labels(&unlabeled, marks.0, marks.1)?;
    unlabeled.with_labels(labels)
}

pub fn gen_path_finding<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Graph> {
    if n < 3 {
        return Err(Error::usage(format!("path finding needs n >= 3, got {n}")));
    }
    let edges = random_tree_edges(n, rng);
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    path_finding_instance(n, edges, (a, b))
}

/// Inclusive running parity: `out[i] = (bits[0] + ... + bits[i]) mod 2`.
pub fn oracle_prefix_sum(bits: &[u8]) -> Vec<u8> {
    let mut parity = 0u8;
    bits.iter()
        .map(|&b| {
            parity ^= b & 1;
            parity
        })
        .collect()
}

/// Path `0 - 1 - ... - n-1` carrying `bits` in node order, with the start flag on
/// node 0 or, when `start_at_end`, on node n-1 (parities then run backwards).
pub fn prefix_sum_instance(bits: &[u8], start_at_end: bool) -> Result<Graph> {
    let n = bits.len();
    if n < 2 {
        return Err(Error::usage("prefix sum needs at least 2 bits"));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::usage("bits must be 0 or 1"));
    }
    let mut features = Matrix::zeros(n, 2);
    for (v, &b) in bits.iter().enumerate() {
        features.set(v, 0, f64::from(b));
    }
    let labels = if start_at_end {
        let reversed: Vec<u8> = bits.iter().rev().copied().collect();
        let mut l = oracle_prefix_sum(&reversed);
        l.reverse();
        features.set(n - 1, 1, 1.0);
        l
    } else {
        features.set(0, 1, 1.0);
        oracle_prefix_sum(bits)
    };
    Graph::new(n, (1..n).map(|v| (v - 1, v)), features, labels, TaskTag::PrefixSum)
}

pub fn gen_prefix_sum<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::usage(format!("prefix sum needs n >= 2, got {n}")));
    }
    let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1u8)).collect();
    let start_at_end = rng.gen_bool(0.5);
    prefix_sum_instance(&bits, start_at_end)
}

/// Distance-task instance on given edges with a marked start node.
pub fn distance_instance(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    start: usize,
) -> Result<Graph> {
    if start >= n {
        return Err(Error::usage("start node out of range"));
    }
    let mut features = Matrix::zeros(n, 1);
    features.set(start, 0, 1.0);
    let g = Graph::new(n, edges, features, vec![0; n], TaskTag::Distance)?;
    let labels = g
        .bfs_distances(start)?
        .into_iter()
        .map(|d| (d % 2) as u8)
        .collect();
    g.with_labels(labels)
}

/// Random path over shuffled nodes plus `n / 5` short-range shortcut edges.
fn distance_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    let mut used: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    let wanted = n / 5;
    let mut added = 0;
    let mut attempts = 0;
    while added < wanted && attempts < 100 * (wanted + 1) && n > 2 {
        attempts += 1;
        let i = rng.gen_range(0..n);
        let gap = rng.gen_range(2..=DISTANCE_SHORTCUT_SPAN);
        if i + gap >= n {
            continue;
        }
        let (u, v) = (order[i], order[i + gap]);
        if used.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
            added += 1;
        }
    }
    edges
}

pub fn gen_distance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Graph> {
    if n < 3 {
        return Err(Error::usage(format!("distance needs n >= 3, got {n}")));
    }
    for _ in 0..DISTANCE_RETRIES {
        let edges = distance_edges(n, rng);
        let start = rng.gen_range(0..n);
        let g = distance_instance(n, edges, start)?;
        if 4 * g.diameter()? >= n {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no distance graph with diameter >= {n}/4 after {DISTANCE_RETRIES} attempts"
    )))
}

/// Recomputes labels from structure and features alone.
pub fn oracle_labels(g: &Graph) -> Result<Vec<u8>> {
    let marked = |col: usize| -> Vec<usize> {
        (0..g.num_nodes())
            .filter(|&v| g.features().get(v, col) != 0.0)
            .collect()
    };
    match g.task() {
        TaskTag::PathFinding => {
            let marks = marked(0);
            if marks.len() != 2 {
                return Err(Error::Structural(format!(
                    "path finding needs 2 marked nodes, found {}",
                    marks.len()
                )));
            }
            tree_path_labels(g, marks[0], marks[1])
        }
        TaskTag::PrefixSum => {
            let starts = marked(1);
            if starts.len() != 1 {
                return Err(Error::Structural("prefix sum needs one start node".into()));
            }
            let start = starts[0];
            if g.degree(start) > 1 {
                return Err(Error::Structural("prefix sum start is not an endpoint".into()));
            }
            let order = g.bfs_distances(start)?;
            let mut by_position = vec![usize::MAX; g.num_nodes()];
            for (v, &d) in order.iter().enumerate() {
                by_position[d] = v;
            }
            if by_position.contains(&usize::MAX) {
                return Err(Error::Structural("prefix sum graph is not a path".into()));
            }
            let bits: Vec<u8> = by_position
                .iter()
                .map(|&v| u8::from(g.features().get(v, 0) != 0.0))
                .collect();
            let parities = oracle_prefix_sum(&bits);
            let mut labels = vec![0; g.num_nodes()];
            for (pos, &v) in by_position.iter().enumerate() {
                labels[v] = parities[pos];
            }
            Ok(labels)
        }
        TaskTag::Distance => {
            let starts = marked(0);
            if starts.len() != 1 {
                return Err(Error::Structural("distance needs one start node".into()));
            }
            Ok(g.bfs_distances(starts[0])?
                .into_iter()
                .map(|d| (d % 2) as u8)
                .collect())
        }
    }
}

/// Splits off the first `round(len * train_fraction)` graphs for training.
pub fn split_dataset(graphs: &[Graph], train_fraction: f64) -> Result<(Vec<Graph>, Vec<Graph>)> {
    if graphs.is_empty() {
        return Err(Error::usage("cannot split an empty dataset"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::usage(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let cut = ((graphs.len() as f64 * train_fraction).round() as usize).clamp(1, graphs.len());
    Ok((graphs[..cut].to_vec(), graphs[cut..].to_vec()))
}

/// Inverse-frequency class weights `total / (2 * count_c)`.
pub fn class_weights(graphs: &[Graph]) -> Result<[f64; 2]> {
    let mut counts = [0usize; 2];
    for g in graphs {
        for &l in g.labels() {
            counts[usize::from(l)] += 1;
        }
    }
    if counts.contains(&0) {
        return Err(Error::usage(format!(
            "both classes must be present, counts are {counts:?}"
        )));
    }
    let total = (counts[0] + counts[1]) as f64;
    Ok([
        total / (2.0 * counts[0] as f64),
        total / (2.0 * counts[1] as f64),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn two_node_tree_is_one_edge() {
        let t = gen_tree(2, &mut rng(0)).unwrap();
        assert_eq!(t.edges(), &[(0, 1)]);
        assert!(gen_tree(1, &mut rng(0)).is_err());
    }

    #[test]
    fn trees_are_connected_and_acyclic() {
        let mut r = rng(1);
        for n in 2..40 {
            let t = gen_tree(n, &mut r).unwrap();
            assert_eq!(t.edges().len(), n - 1);
            assert!(t.is_connected());
        }
    }

    #[test]
    fn every_node_index_is_sometimes_internal() {
        let mut r = rng(2);
        let mut internal = [false; 10];
        for _ in 0..1000 {
            let t = gen_tree(10, &mut r).unwrap();
            for (v, seen) in internal.iter_mut().enumerate() {
                *seen |= t.degree(v) >= 2;
            }
        }
        assert!(internal.iter().all(|&x| x));
    }

    #[test]
    fn path_finding_hand_cases() {
        let path = path_finding_instance(5, [(0, 1), (1, 2), (2, 3), (3, 4)], (1, 3)).unwrap();
        assert_eq!(path.labels(), &[0, 1, 1, 1, 0]);
        let star = path_finding_instance(5, [(0, 1), (0, 2), (0, 3), (0, 4)], (2, 4)).unwrap();
        assert_eq!(star.labels(), &[1, 0, 1, 0, 1]);
        assert!(path_finding_instance(3, [(0, 1), (1, 2)], (1, 1)).is_err());
    }

    #[test]
    fn prefix_parity_examples() {
        assert_eq!(oracle_prefix_sum(&[1, 0, 1, 1]), vec![1, 1, 0, 1]);
        assert_eq!(oracle_prefix_sum(&[0, 0, 0]), vec![0, 0, 0]);
        assert_eq!(oracle_prefix_sum(&[1, 1, 1, 1, 1, 1]), vec![1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn prefix_sum_instances() {
        assert_eq!(prefix_sum_instance(&[1, 0], false).unwrap().labels(), &[1, 1]);
        assert_eq!(prefix_sum_instance(&[0; 7], true).unwrap().labels(), &[0; 7]);
        let back = prefix_sum_instance(&[1, 0, 0, 1], true).unwrap();
        assert_eq!(back.labels(), &[0, 1, 1, 1]);
        assert_eq!(back.flag_count(1), 1);
        assert_eq!(back.features().get(3, 1), 1.0);
    }

    #[test]
    fn flipping_a_bit_flips_everything_downstream() {
        let mut r = rng(3);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..10).map(|_| r.gen_range(0..=1u8)).collect();
            let base = oracle_prefix_sum(&bits);
            for i in 0..10 {
                let mut flipped = bits.clone();
                flipped[i] ^= 1;
                let out = oracle_prefix_sum(&flipped);
                for j in 0..10 {
                    assert_eq!(out[j] != base[j], j >= i);
                }
            }
        }
    }

    #[test]
    fn distance_small_cases() {
        let g = gen_distance(3, &mut rng(4)).unwrap();
        assert_eq!(g.edges().len(), 2, "n=3 has no shortcuts");
        let fixed = distance_instance(3, [(0, 1), (1, 2)], 0).unwrap();
        assert_eq!(fixed.labels(), &[0, 1, 0]);
        let mut r = rng(5);
        for n in [3, 10, 50, 200] {
            let g = gen_distance(n, &mut r).unwrap();
            let start = (0..n).find(|&v| g.features().get(v, 0) == 1.0).unwrap();
            assert_eq!(g.labels()[start], 0);
            assert!(g.edges().len() <= 2 * n);
            assert!(4 * g.diameter().unwrap() >= n);
        }
    }

    #[test]
    fn split_sizes() {
        let gs = generate(&GeneratorConfig {
            task: TaskTag::PrefixSum,
            num_graphs: 200,
            graph_size: 10,
            seed: 0,
        })
        .unwrap();
        let (train, val) = split_dataset(&gs, 0.8).unwrap();
        assert_eq!((train.len(), val.len()), (160, 40));
        let (train, val) = split_dataset(&gs[..10], 0.8).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
        assert!(split_dataset(&[], 0.8).is_err());
        assert!(split_dataset(&gs, 1.0).is_err());
    }

    #[test]
    fn class_weight_values() {
        let balanced = distance_instance(4, [(0, 1), (1, 2), (2, 3)], 0).unwrap();
        assert_eq!(class_weights(&[balanced]).unwrap(), [1.0, 1.0]);
        // 874 negatives and 126 positives in aggregate.
        let mut labels = vec![0u8; 1000];
        labels[..126].fill(1);
        let g = Graph::new(
            1000,
            (1..1000).map(|v| (v - 1, v)),
            Matrix::zeros(1000, 1),
            labels,
            TaskTag::PathFinding,
        )
        .unwrap();
        let w = class_weights(&[g]).unwrap();
        assert!((w[0] - 1000.0 / 1748.0).abs() < 1e-12);
        assert!((w[0] - 0.572).abs() < 1e-3);
        assert!((w[1] - 3.968).abs() < 1e-3);
        let zeros = distance_instance(3, [(0, 1), (1, 2)], 1).unwrap();
        let all_zero = zeros.with_labels(vec![0; 3]).unwrap();
        assert!(class_weights(&[all_zero]).is_err());
    }

    #[test]
    fn generator_config_validation() {
        let bad = GeneratorConfig {
            task: TaskTag::Distance,
            num_graphs: 0,
            graph_size: 10,
            seed: 0,
        };
        assert!(generate(&bad).is_err());
        assert!(generate(&GeneratorConfig { num_graphs: 1, graph_size: 2, ..bad }).is_err());
    }
}

//! Density-based clustering: core distances, mutual reachability, a
//! minimum spanning tree, the condensed single-linkage hierarchy, and
//! excess-of-mass cluster extraction. Points in no stable cluster get the
//! noise label -1.

use rayon::prelude::*;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

/// One label per document; cluster labels are dense `0..num_clusters`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub num_clusters: usize,
}

impl ClusterAssignment {
    pub fn all_noise(rows: usize) -> Self {
        Self {
            labels: vec![NOISE; rows],
            num_clusters: 0,
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_clusters];
        for &label in &self.labels {
            if label >= 0 {
                sizes[label as usize] += 1;
            }
        }
        sizes
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// Distances collapse to zero for exact duplicates; cap the density scale
/// instead of letting lambda run to infinity and poison the stability sums.
const MIN_DISTANCE: f64 = 1e-12;

pub fn cluster_density(
    x: &EmbeddingMatrix,
    min_cluster_size: usize,
    min_samples: usize,
) -> Result<ClusterAssignment> {
    let n = x.rows();
    if n < 1 {
        return Err(Error::Contract(
            "cluster_density requires at least one row".into(),
        ));
    }
    if min_cluster_size < 2 {
        return Err(Error::Contract(format!(
            "min_cluster_size must be >= 2, got {min_cluster_size}"
        )));
    }
    if min_samples < 1 || min_samples > min_cluster_size {
        return Err(Error::Contract(format!(
            "min_samples must be in 1..=min_cluster_size, got {min_samples}"
        )));
    }
    if n < min_cluster_size {
        return Ok(ClusterAssignment::all_noise(n));
    }

    let core = core_distances(x, min_samples);
    let edges = mutual_reachability_mst(x, &core);
    let linkage = single_linkage(&edges, n);
    let condensed = condense(&linkage, n, min_cluster_size);
    let winners = extract_eom(&condensed);

    if winners.is_empty() {
        // The hierarchy never produced a stable sub-cluster: the data is one
        // cluster (e.g. all points identical). Everything joins cluster 0.
        return Ok(ClusterAssignment {
            labels: vec![0; n],
            num_clusters: 1,
        });
    }

    let mut labels = vec![NOISE; n];
    for (dense_id, &cluster) in winners.iter().enumerate() {
        for point in condensed.subtree_points(cluster) {
            labels[point] = dense_id as i32;
        }
    }
    Ok(ClusterAssignment {
        labels,
        num_clusters: winners.len(),
    })
}

fn euclid(x: &EmbeddingMatrix, a: usize, b: usize) -> f64 {
    x.row(a)
        .iter()
        .zip(x.row(b))
        .map(|(p, q)| {
            let d = f64::from(*p) - f64::from(*q);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance from each point to its `min_samples`-th nearest other point
/// (clamped to the farthest one on tiny inputs).
fn core_distances(x: &EmbeddingMatrix, min_samples: usize) -> Vec<f64> {
    let n = x.rows();
    if n == 1 {
        return vec![0.0];
    }
    let k = min_samples.min(n - 1) - 1;
    (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n - 1),
            |buf, i| {
                buf.clear();
                buf.extend((0..n).filter(|&j| j != i).map(|j| euclid(x, i, j)));
                *buf.select_nth_unstable_by(k, f64::total_cmp).1
            },
        )
        .collect()
}

/// Prim's MST over the implicit complete graph of mutual reachability
/// distances, edges returned sorted by (distance, endpoints).
fn mutual_reachability_mst(x: &EmbeddingMatrix, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = x.rows();
    let mut in_tree = vec![false; n];
    // Per point: best known (mutual reachability distance, tree endpoint).
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); n];
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0usize;

    for _ in 1..n {
        in_tree[current] = true;
        let current_core = core[current];
        best.par_iter_mut().enumerate().for_each(|(i, slot)| {
            if in_tree[i] {
                return;
            }
            let mrd = euclid(x, current, i).max(current_core).max(core[i]);
            if mrd < slot.0 {
                *slot = (mrd, current);
            }
        });
        let (next, _) = best
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !in_tree[*i])
            .map(|(i, slot)| (i, slot.0))
            .reduce(
                || (usize::MAX, f64::INFINITY),
                |a, b| {
                    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        edges.push((best[next].1, next, best[next].0));
        current = next;
    }

    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    edges
}

struct LinkageNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Union-find agglomeration: merge `m` creates tree node id `n + m`.
fn single_linkage(edges: &[(usize, usize, f64)], n: usize) -> Vec<LinkageNode> {
    let total = 2 * n - 1;
    let mut parent: Vec<usize> = (0..total).collect();
    let mut sizes: Vec<usize> = vec![1; total];
    let mut nodes: Vec<LinkageNode> = Vec::with_capacity(n - 1);

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for &(a, b, distance) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let new_id = n + nodes.len();
        let size = sizes[ra] + sizes[rb];
        sizes[new_id] = size;
        parent[ra] = new_id;
        parent[rb] = new_id;
        nodes.push(LinkageNode {
            left: ra,
            right: rb,
            distance,
            size,
        });
    }
    nodes
}

/// The condensed hierarchy: clusters of at least `min_cluster_size` points,
/// each point recorded with the density at which it left its cluster.
struct CondensedTree {
    /// Per cluster: (parent cluster id, birth lambda, size at birth).
    clusters: Vec<(usize, f64, usize)>,
    children: Vec<Vec<usize>>,
    /// Per point: (owning cluster id, fall-out lambda).
    points: Vec<(usize, f64)>,
}

impl CondensedTree {
    /// All points attached to `cluster` or any of its descendants.
    fn subtree_points(&self, cluster: usize) -> Vec<usize> {
        let mut members = Vec::new();
        let mut queue = vec![cluster];
        while let Some(c) = queue.pop() {
            queue.extend(self.children[c].iter().copied());
            members.extend(
                self.points
                    .iter()
                    .enumerate()
                    .filter(|(_, (owner, _))| *owner == c)
                    .map(|(p, _)| p),
            );
        }
        members
    }
}

fn condense(linkage: &[LinkageNode], n: usize, min_cluster_size: usize) -> CondensedTree {
    let subtree_size = |node: usize| -> usize {
        if node < n {
            1
        } else {
            linkage[node - n].size
        }
    };

    let mut tree = CondensedTree {
        clusters: vec![(0, 0.0, n)],
        children: vec![Vec::new()],
        points: vec![(usize::MAX, 0.0); n],
    };

    // Attach every point under `node` to `cluster` at density `lambda`.
    let attach_subtree = |tree: &mut CondensedTree, node: usize, cluster: usize, lambda: f64| {
        let mut queue = vec![node];
        while let Some(id) = queue.pop() {
            if id < n {
                tree.points[id] = (cluster, lambda);
            } else {
                let entry = &linkage[id - n];
                queue.push(entry.left);
                queue.push(entry.right);
            }
        }
    };

    if linkage.is_empty() {
        // Single point: it belongs to the root cluster.
        if n == 1 {
            tree.points[0] = (0, 0.0);
        }
        return tree;
    }

    let root = n + linkage.len() - 1;
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    while let Some((node, cluster)) = stack.pop() {
        let entry = &linkage[node - n];
        let lambda = 1.0 / entry.distance.max(MIN_DISTANCE);
        let (left, right) = (entry.left, entry.right);
        let left_big = subtree_size(left) >= min_cluster_size;
        let right_big = subtree_size(right) >= min_cluster_size;
        match (left_big, right_big) {
            (true, true) => {
                for child in [left, right] {
                    let child_id = tree.clusters.len();
                    tree.clusters.push((cluster, lambda, subtree_size(child)));
                    tree.children.push(Vec::new());
                    tree.children[cluster].push(child_id);
                    stack.push((child, child_id));
                }
            }
            (false, false) => {
                attach_subtree(&mut tree, left, cluster, lambda);
                attach_subtree(&mut tree, right, cluster, lambda);
            }
            (false, true) => {
                attach_subtree(&mut tree, left, cluster, lambda);
                stack.push((right, cluster));
            }
            (true, false) => {
                attach_subtree(&mut tree, right, cluster, lambda);
                stack.push((left, cluster));
            }
        }
    }
    tree
}

/// Excess-of-mass selection over non-root clusters: a cluster wins when its
/// own stability strictly exceeds the combined stability of its child
/// clusters; winning deselects all descendants.
fn extract_eom(tree: &CondensedTree) -> Vec<usize> {
    let m = tree.clusters.len();
    let mut stability = vec![0.0f64; m];
    for &(owner, lambda) in &tree.points {
        if owner != usize::MAX {
            stability[owner] += lambda - tree.clusters[owner].1;
        }
    }
    for c in 1..m {
        let (parent, birth, size) = tree.clusters[c];
        stability[parent] += (birth - tree.clusters[parent].1) * size as f64;
    }

    let mut selected = vec![false; m];
    for c in (1..m).rev() {
        let child_sum: f64 = tree.children[c].iter().map(|&ch| stability[ch]).sum();
        if stability[c] > child_sum {
            selected[c] = true;
            let mut queue: Vec<usize> = tree.children[c].clone();
            while let Some(d) = queue.pop() {
                selected[d] = false;
                queue.extend(tree.children[d].iter().copied());
            }
        } else {
            stability[c] = child_sum;
        }
    }

    (1..m).filter(|&c| selected[c]).collect()
}

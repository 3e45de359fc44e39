//! k-nearest-neighbor regression with leave-one-out selection of k.
//!
//! Neighbor order is the lexicographic order on (squared Euclidean
//! distance, point index), so results are deterministic even with tied or
//! duplicate points, and the kd-tree and brute-force strategies return
//! identical neighbor lists. Both strategies compute distances with the
//! same accumulation order, which makes exact cross-checks possible.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;

/// Feature dimensions up to this build a kd-tree; above it, brute force
/// wins because tree pruning fades with dimension.
pub const DEFAULT_DIM_THRESHOLD: usize = 12;

/// Tree leaves hold up to this many points.
const LEAF_SIZE: usize = 24;

/// Past this fraction of all points, a query degenerates to a full scan
/// with selection; traversal cannot prune that many neighbors away.
const SCAN_FRACTION: usize = 16;

/// Heap-based scanning stops paying off past this k.
const HEAP_SCAN_MAX_K: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexStrategy {
    Tree,
    Brute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    dist_sq: f64,
    idx: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Cand {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Squared Euclidean distance, fixed left-to-right accumulation.
#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Like [`dist_sq`] but bails out once the partial sum exceeds `bound`.
/// The returned value is only meaningful for rejection: partial sums never
/// shrink, so a result `> bound` proves the true distance is too. Exit is
/// on strict excess, so exact ties still get their full distance.
#[inline]
fn dist_sq_pruned(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
        if s > bound {
            return s;
        }
    }
    s
}

enum Node {
    /// Left child is the next node in preorder; `right` is explicit.
    Split { dim: u32, value: f64, right: u32 },
    Leaf { start: u32, end: u32 },
}

struct KdTree {
    nodes: Vec<Node>,
    ids: Vec<u32>,
}

impl KdTree {
    fn build(points: &Matrix) -> KdTree {
        let n = points.rows();
        let mut ids: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        Self::build_rec(points, &mut ids, 0, n, &mut nodes);
        KdTree { nodes, ids }
    }

    fn build_rec(points: &Matrix, ids: &mut [u32], base: usize, len_total: usize, nodes: &mut Vec<Node>) {
        let _ = len_total;
        let len = ids.len();
        if len <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                start: base as u32,
                end: (base + len) as u32,
            });
            return;
        }
        // Split on the dimension with the largest spread.
        let dims = points.cols();
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..dims {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &id in ids.iter() {
                let v = points.get(id as usize, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let spread = hi - lo;
            if spread > best_spread {
                best_spread = spread;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // All points identical; any order works.
            nodes.push(Node::Leaf {
                start: base as u32,
                end: (base + len) as u32,
            });
            return;
        }
        let mid = len / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            points
                .get(a as usize, best_dim)
                .total_cmp(&points.get(b as usize, best_dim))
                .then(a.cmp(&b))
        });
        let split_value = points.get(ids[mid] as usize, best_dim);
        let node_idx = nodes.len();
        nodes.push(Node::Split {
            dim: best_dim as u32,
            value: split_value,
            right: 0, // patched after the left subtree is laid out
        });
        let (left_ids, right_ids) = ids.split_at_mut(mid);
        Self::build_rec(points, left_ids, base, len_total, nodes);
        let right_root = nodes.len() as u32;
        if let Node::Split { right, .. } = &mut nodes[node_idx] {
            *right = right_root;
        }
        Self::build_rec(points, right_ids, base + mid, len_total, nodes);
    }

    fn search(&self, points: &Matrix, node: usize, query: &[f64], k: usize, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.ids[start as usize..end as usize] {
                    consider(points, id, query, k, heap);
                }
            }
            Node::Split { dim, value, right } => {
                let diff = query[dim as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.search(points, near, query, k, heap);
                // The far side can still hold an equal-distance, lower-index
                // candidate when the plane distance ties the current worst.
                let plane = diff * diff;
                if heap.len() < k || plane <= heap.peek().unwrap().dist_sq {
                    self.search(points, far, query, k, heap);
                }
            }
        }
    }
}

#[inline]
fn consider(points: &Matrix, id: u32, query: &[f64], k: usize, heap: &mut BinaryHeap<Cand>) {
    let row = points.row(id as usize);
    if heap.len() < k {
        heap.push(Cand {
            dist_sq: dist_sq(query, row),
            idx: id,
        });
        return;
    }
    let worst = *heap.peek().unwrap();
    let d = dist_sq_pruned(query, row, worst.dist_sq);
    let cand = Cand { dist_sq: d, idx: id };
    if cand < worst {
        *heap.peek_mut().unwrap() = cand;
    }
}

/// Preprocessed point set for repeated nearest-neighbor queries.
pub struct NeighborIndex {
    points: Matrix,
    strategy: IndexStrategy,
    tree: Option<KdTree>,
}

/// Build a neighbor index over the rows of `points`. A kd-tree is used when
/// the dimension is at most `dim_threshold`, brute force otherwise; the two
/// return identical neighbor lists.
pub fn knn_index(points: Matrix, dim_threshold: usize) -> NeighborIndex {
    let strategy = if points.cols() <= dim_threshold {
        IndexStrategy::Tree
    } else {
        IndexStrategy::Brute
    };
    let tree = match strategy {
        IndexStrategy::Tree => Some(KdTree::build(&points)),
        IndexStrategy::Brute => None,
    };
    NeighborIndex {
        points,
        strategy,
        tree,
    }
}

thread_local! {
    static SCAN_SCRATCH: RefCell<Vec<Cand>> = const { RefCell::new(Vec::new()) };
}

impl NeighborIndex {
    #[inline]
    pub fn n_points(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.points.cols()
    }

    pub fn strategy(&self) -> IndexStrategy {
        self.strategy
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// The k nearest rows to `query` as `(squared distance, row index)`,
    /// sorted ascending with ties broken by lower row index. A row equal to
    /// the query point comes first (distance zero, lowest index among
    /// duplicates).
    pub fn neighbors(&self, query: &[f64], k: usize) -> Result<Vec<(f64, usize)>> {
        let n = self.n_points();
        if k == 0 || k > n {
            return Err(Error::KOutOfRange { k, n });
        }
        if query.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: query.len(),
            });
        }
        Ok(self
            .query_cands(query, k)
            .into_iter()
            .map(|c| (c.dist_sq, c.idx as usize))
            .collect())
    }

    fn query_cands(&self, query: &[f64], k: usize) -> Vec<Cand> {
        let n = self.n_points();
        debug_assert!(k >= 1 && k <= n);
        let scan_all = k * SCAN_FRACTION >= n;
        match (self.strategy, scan_all) {
            (_, true) => self.select_scan(query, k),
            (IndexStrategy::Tree, false) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                self.tree
                    .as_ref()
                    .expect("tree strategy always builds a tree")
                    .search(&self.points, 0, query, k, &mut heap);
                drain_sorted(heap)
            }
            (IndexStrategy::Brute, false) => {
                if k <= HEAP_SCAN_MAX_K {
                    self.heap_scan(query, k)
                } else {
                    self.select_scan(query, k)
                }
            }
        }
    }

    fn heap_scan(&self, query: &[f64], k: usize) -> Vec<Cand> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        for id in 0..self.n_points() as u32 {
            consider(&self.points, id, query, k, &mut heap);
        }
        drain_sorted(heap)
    }

    fn select_scan(&self, query: &[f64], k: usize) -> Vec<Cand> {
        let n = self.n_points();
        SCAN_SCRATCH.with(|cell| {
            let mut all = cell.borrow_mut();
            all.clear();
            all.extend((0..n as u32).map(|id| Cand {
                dist_sq: dist_sq(query, self.points.row(id as usize)),
                idx: id,
            }));
            if k < n {
                all.select_nth_unstable(k - 1);
            }
            let mut out = all[..k].to_vec();
            out.sort_unstable();
            out
        })
    }

    /// The `m` nearest neighbors of point `i`, excluding `i` itself, in
    /// distance order.
    pub fn neighbors_excluding(&self, i: usize, m: usize) -> Result<Vec<usize>> {
        let n = self.n_points();
        if i >= n {
            return Err(Error::IndexOutOfRange { col: i, cols: n });
        }
        if m > n - 1 {
            return Err(Error::KOutOfRange { k: m, n: n - 1 });
        }
        let mut out = vec![0u32; m];
        self.fill_neighbors_excluding(i, &mut out);
        Ok(out.into_iter().map(|v| v as usize).collect())
    }

    /// `out.len()` nearest neighbors of point `i` excluding `i`.
    fn fill_neighbors_excluding(&self, i: usize, out: &mut [u32]) {
        let m = out.len();
        if m == 0 {
            return;
        }
        let cands = self.query_cands(self.points.row(i), (m + 1).min(self.n_points()));
        let mut t = 0;
        for c in cands {
            if c.idx as usize != i && t < m {
                out[t] = c.idx;
                t += 1;
            }
        }
        debug_assert_eq!(t, m);
    }

    /// Neighbor lists for every point, excluding the point itself:
    /// row `i` holds the `m` nearest other points in distance order.
    /// Rows are computed independently and written by index, so the table
    /// is identical for any thread count.
    pub fn neighbor_table(&self, m: usize) -> Result<NeighborTable> {
        let n = self.n_points();
        if m > n.saturating_sub(1) {
            return Err(Error::KOutOfRange {
                k: m,
                n: n.saturating_sub(1),
            });
        }
        let mut data = vec![0u32; n * m];
        if m > 0 {
            par::for_each_chunk(&mut data, m, |i, row| self.fill_neighbors_excluding(i, row));
        }
        Ok(NeighborTable { data, m, n })
    }
}

fn drain_sorted(heap: BinaryHeap<Cand>) -> Vec<Cand> {
    let mut v = heap.into_vec();
    v.sort_unstable();
    v
}

/// Per-point nearest-neighbor lists (self excluded), `n` rows of `m`.
pub struct NeighborTable {
    data: Vec<u32>,
    m: usize,
    n: usize,
}

impl NeighborTable {
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Leave-one-out selection of the neighborhood size.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    /// Chosen k, counting the point's own response; smallest k wins ties.
    pub k_star: usize,
    /// `loo_curve[k]` is the LOO error of predicting each response from its
    /// k nearest other points, for k = 0..k_max-1; `loo_curve[0]` is the
    /// error of predicting zero.
    pub loo_curve: Vec<f64>,
}

/// Leave-one-out cross-validation over k = 1..=k_max.
///
/// `k_star` minimizes `loo_curve[k - 1]`; prediction with `k_star` then
/// averages the point's own response with its `k_star - 1` nearest others,
/// matching [`knn_predict_in_sample`].
pub fn knn_select_k(index: &NeighborIndex, y: &[f64], k_max: usize) -> Result<KSelection> {
    let n = index.n_points();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: n,
        });
    }
    if n < 2 {
        return Err(Error::TooFewUnits { got: n, min: 2 });
    }
    if k_max == 0 {
        return Err(Error::KOutOfRange { k: 0, n });
    }
    if k_max > n {
        return Err(Error::KMaxTooLarge { k_max, n });
    }
    let table = index.neighbor_table(k_max - 1)?;
    Ok(select_k_from_table(&table, y, k_max))
}

/// LOO curve and argmin from a precomputed neighbor table.
///
/// The running neighbor-response sum is reused from k to k+1, and each
/// LOO(k) accumulates over points in index order, so the curve is
/// bit-identical to a direct recomputation with left-to-right summation.
pub(crate) fn select_k_from_table(table: &NeighborTable, y: &[f64], k_max: usize) -> KSelection {
    let n = y.len();
    let mut curve = vec![0.0; k_max];
    curve[0] = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for (i, &yi) in y.iter().enumerate() {
        let row = table.row(i);
        let mut s = 0.0;
        for (t, &idx) in row.iter().take(k_max - 1).enumerate() {
            s += y[idx as usize];
            let resid = yi - s / (t + 1) as f64;
            curve[t + 1] += resid * resid;
        }
    }
    for v in curve[1..].iter_mut() {
        *v /= n as f64;
    }
    let mut k_star = 1;
    let mut best = curve[0];
    for k in 2..=k_max {
        if curve[k - 1] < best {
            best = curve[k - 1];
            k_star = k;
        }
    }
    KSelection { k_star, loo_curve: curve }
}

/// In-sample kNN prediction: each point's own response averaged with its
/// k-1 nearest other responses.
pub fn knn_predict_in_sample(index: &NeighborIndex, y: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = index.n_points();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: n,
        });
    }
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let table = index.neighbor_table(k - 1)?;
    Ok(predict_from_table(&table, y, k))
}

pub(crate) fn predict_from_table(table: &NeighborTable, y: &[f64], k: usize) -> Vec<f64> {
    let kf = k as f64;
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let mut s = yi;
            for &idx in &table.row(i)[..k - 1] {
                s += y[idx as usize];
            }
            s / kf
        })
        .collect()
}

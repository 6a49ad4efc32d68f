//! kd-tree, k-nearest-neighbor graph and per-point adaptive radii.
//!
//! All queries order candidates by `(squared distance, index)`, so results are
//! deterministic and equal to a brute-force scan even in the presence of ties.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{CoreError, Result};
use crate::linalg::dist2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist: f64,
}

#[inline]
fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, Copy)]
struct Node {
    point: usize,
    axis: usize,
}

/// Static kd-tree over a flat coordinate buffer. Nodes are laid out
/// implicitly: the node of a subrange `[lo, hi)` sits at its midpoint.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    dim: usize,
    coords: &'a [f64],
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(coords: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let n = coords.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = vec![Node { point: 0, axis: 0 }; n];
        Self::build(coords, dim, &mut order, &mut nodes, 0);
        Self { dim, coords, nodes }
    }

    fn build(coords: &[f64], dim: usize, idx: &mut [usize], nodes: &mut [Node], offset: usize) {
        if idx.is_empty() {
            return;
        }
        // split on the axis of largest spread
        let mut axis = 0;
        let mut best = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in idx.iter() {
                let c = coords[i * dim + a];
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > best {
                best = hi - lo;
                axis = a;
            }
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            coords[a * dim + axis].total_cmp(&coords[b * dim + axis]).then(a.cmp(&b))
        });
        nodes[offset + mid] = Node { point: idx[mid], axis };
        let (left, rest) = idx.split_at_mut(mid);
        let right = &mut rest[1..];
        Self::build(coords, dim, left, nodes, offset);
        Self::build(coords, dim, right, nodes, offset + mid + 1);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` nearest points to `query`, ascending, excluding `skip`.
    pub fn knn(&self, query: &[f64], k: usize, skip: Option<usize>) -> Vec<Neighbor> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, self.nodes.len(), query, k, skip, &mut best);
        }
        best.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                dist: libm::sqrt(d2),
            })
            .collect()
    }

    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        query: &[f64],
        k: usize,
        skip: Option<usize>,
        best: &mut Vec<(f64, usize)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.nodes[mid];
        if skip != Some(node.point) {
            let cand = (dist2(query, self.point(node.point)), node.point);
            if best.len() < k || key_cmp(cand, best[best.len() - 1]) == Ordering::Less {
                let pos = best
                    .binary_search_by(|probe| key_cmp(*probe, cand))
                    .unwrap_or_else(|p| p);
                best.insert(pos, cand);
                best.truncate(k);
            }
        }
        let diff = query[node.axis] - self.coords[node.point * self.dim + node.axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, query, k, skip, best);
        // equal plane distance is still explored so index ties resolve exactly
        if best.len() < k || diff * diff <= best[best.len() - 1].0 {
            self.knn_rec(far.0, far.1, query, k, skip, best);
        }
    }

    /// All points strictly within `radius` of `query`, ascending, excluding `skip`.
    pub fn within(&self, query: &[f64], radius: f64, skip: Option<usize>) -> Vec<Neighbor> {
        let mut out = Vec::new();
        self.within_rec(0, self.nodes.len(), query, radius * radius, skip, &mut out);
        out.sort_by(|a, b| key_cmp(*a, *b));
        out.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                dist: libm::sqrt(d2),
            })
            .collect()
    }

    fn within_rec(&self, lo: usize, hi: usize, query: &[f64], r2: f64, skip: Option<usize>, out: &mut Vec<(f64, usize)>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.nodes[mid];
        if skip != Some(node.point) {
            let d2 = dist2(query, self.point(node.point));
            if d2 < r2 {
                out.push((d2, node.point));
            }
        }
        let diff = query[node.axis] - self.coords[node.point * self.dim + node.axis];
        if diff < 0.0 || diff * diff < r2 {
            self.within_rec(lo, mid, query, r2, skip, out);
        }
        if diff >= 0.0 || diff * diff < r2 {
            self.within_rec(mid + 1, hi, query, r2, skip, out);
        }
    }
}

/// Neighbor counts for curvature, tangent regression and mass estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborCounts {
    pub k_eps: usize,
    pub k_sigma: usize,
    pub k_delta: usize,
}

impl NeighborCounts {
    /// One extra neighbor is kept so the radius cut can sit between the
    /// k-th and (k+1)-th distance.
    pub fn k_max(&self) -> usize {
        self.k_eps.max(self.k_sigma).max(self.k_delta) + 1
    }
}

/// Radius placing the cut halfway between the `k`-th and `(k+1)`-th
/// neighbor distance (1-based). `tie` is set when those distances coincide,
/// in which case fewer than `k` neighbors lie strictly inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveRadius {
    pub radius: f64,
    pub tie: bool,
}

pub fn adaptive_radius(list: &[Neighbor], k: usize) -> Result<AdaptiveRadius> {
    if k == 0 || list.len() < k + 1 {
        return Err(CoreError::NotEnoughNeighbors {
            index: 0,
            available: list.len(),
            required: k + 1,
        });
    }
    let (dk, dk1) = (list[k - 1].dist, list[k].dist);
    Ok(AdaptiveRadius {
        radius: 0.5 * (dk + dk1),
        tie: dk == dk1,
    })
}

/// Radius of a ball holding `k` points counting the center itself, so
/// `k - 1` neighbors. This is the counting used by the mass and regression
/// estimators; the curvature radius counts `k` neighbors besides the center.
pub fn ball_radius(list: &[Neighbor], k: usize) -> Result<f64> {
    match k {
        0 => Err(CoreError::Config("neighbor counts must be >= 1".into())),
        1 => list.first().map(|nb| 0.5 * nb.dist).ok_or(CoreError::NotEnoughNeighbors {
            index: 0,
            available: 0,
            required: 1,
        }),
        _ => adaptive_radius(list, k - 1).map(|r| r.radius),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RadiusMode {
    Adaptive(NeighborCounts),
    Fixed(f64),
}

/// Cached neighbor lists plus the per-point radii `eps_i`, `sigma_i`,
/// `delta_i`. Lists are sorted by `(distance, index)` and exclude the point
/// itself.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    mode: RadiusMode,
    dim: usize,
    offsets: Vec<usize>,
    entries: Vec<Neighbor>,
    pub eps: Vec<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    /// Points whose curvature radius hit a distance tie.
    pub eps_ties: Vec<bool>,
    pub built_at_step: usize,
}

impl NeighborGraph {
    /// Exact k-NN graph with adaptive radii.
    pub fn build(positions: &[f64], dim: usize, counts: NeighborCounts, step: usize) -> Result<Self> {
        let n = positions.len() / dim;
        let k_max = counts.k_max();
        if counts.k_eps == 0 || counts.k_sigma == 0 || counts.k_delta == 0 {
            return Err(CoreError::Config("neighbor counts must be >= 1".into()));
        }
        if n < 2 || k_max >= n {
            return Err(CoreError::Config(alloc::format!(
                "k_max = {k_max} needs at least {} points, cloud has {n}",
                k_max + 1
            )));
        }
        let tree = KdTree::new(positions, dim);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut entries = Vec::with_capacity(n * k_max);
        offsets.push(0);
        for i in 0..n {
            entries.extend(tree.knn(&positions[i * dim..(i + 1) * dim], k_max, Some(i)));
            offsets.push(entries.len());
        }
        let mut g = Self {
            mode: RadiusMode::Adaptive(counts),
            dim,
            offsets,
            entries,
            eps: vec![0.0; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            eps_ties: vec![false; n],
            built_at_step: step,
        };
        g.update_radii()?;
        Ok(g)
    }

    /// All neighbors strictly within a single global radius; every point gets
    /// `eps_i = sigma_i = delta_i = radius`.
    pub fn build_fixed_radius(positions: &[f64], dim: usize, radius: f64, step: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(CoreError::Config("radius must be positive".into()));
        }
        let n = positions.len() / dim;
        let tree = KdTree::new(positions, dim);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for i in 0..n {
            entries.extend(tree.within(&positions[i * dim..(i + 1) * dim], radius, Some(i)));
            offsets.push(entries.len());
        }
        Ok(Self {
            mode: RadiusMode::Fixed(radius),
            dim,
            offsets,
            entries,
            eps: vec![radius; n],
            sigma: vec![radius; n],
            delta: vec![radius; n],
            eps_ties: vec![false; n],
            built_at_step: step,
        })
    }

    fn update_radii(&mut self) -> Result<()> {
        let RadiusMode::Adaptive(counts) = self.mode else {
            return Ok(());
        };
        for i in 0..self.len() {
            let list = &self.entries[self.offsets[i]..self.offsets[i + 1]];
            let remap = |e: CoreError| match e {
                CoreError::NotEnoughNeighbors {
                    available, required, ..
                } => CoreError::NotEnoughNeighbors {
                    index: i,
                    available,
                    required,
                },
                other => other,
            };
            let eps = adaptive_radius(list, counts.k_eps).map_err(remap)?;
            self.eps[i] = eps.radius;
            self.eps_ties[i] = eps.tie;
            self.sigma[i] = ball_radius(list, counts.k_sigma).map_err(remap)?;
            self.delta[i] = ball_radius(list, counts.k_delta).map_err(remap)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> Option<NeighborCounts> {
        match self.mode {
            RadiusMode::Adaptive(c) => Some(c),
            RadiusMode::Fixed(_) => None,
        }
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Recompute edge lengths from current positions and re-sort each list,
    /// keeping the adjacency itself frozen.
    pub fn refresh_distances(&mut self, positions: &[f64]) -> Result<()> {
        let dim = self.dim;
        for i in 0..self.len() {
            let xi = &positions[i * dim..(i + 1) * dim];
            let list = &mut self.entries[self.offsets[i]..self.offsets[i + 1]];
            for nb in list.iter_mut() {
                nb.dist = libm::sqrt(dist2(xi, &positions[nb.index * dim..(nb.index + 1) * dim]));
            }
            list.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.index.cmp(&b.index)));
        }
        self.update_radii()
    }

    /// Rebuild when `step - built_at_step >= rebuild_every`, otherwise refresh
    /// distances along cached edges. Returns whether a rebuild happened.
    pub fn maybe_rebuild(&mut self, positions: &[f64], step: usize, rebuild_every: usize) -> Result<bool> {
        let every = rebuild_every.max(1);
        if step.saturating_sub(self.built_at_step) >= every {
            *self = match self.mode {
                RadiusMode::Adaptive(c) => Self::build(positions, self.dim, c, step)?,
                RadiusMode::Fixed(r) => Self::build_fixed_radius(positions, self.dim, r, step)?,
            };
            Ok(true)
        } else {
            self.refresh_distances(positions)?;
            Ok(false)
        }
    }

    /// Neighbors strictly inside `eps_i`.
    pub fn eps_stencil(&self, i: usize) -> impl Iterator<Item = &Neighbor> {
        let eps = self.eps[i];
        self.neighbors(i).iter().filter(move |nb| nb.dist < eps)
    }

    /// Connected components of the undirected graph with an edge `i - j`
    /// whenever `j` is in the eps-stencil of `i`.
    pub fn component_count(&self) -> usize {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for i in 0..n {
            for nb in self.eps_stencil(i) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, nb.index));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                    components -= 1;
                }
            }
        }
        components
    }

    /// Smallest cached edge length.
    pub fn min_pair_distance(&self) -> f64 {
        self.entries.iter().map(|nb| nb.dist).fold(f64::INFINITY, f64::min)
    }
}

/// Reference k-NN by full scan, ordered like the tree.
pub fn brute_force_knn(positions: &[f64], dim: usize, i: usize, k: usize) -> Vec<Neighbor> {
    let xi = &positions[i * dim..(i + 1) * dim];
    let mut all: Vec<(f64, usize)> = (0..positions.len() / dim)
        .filter(|&j| j != i)
        .map(|j| (dist2(xi, &positions[j * dim..(j + 1) * dim]), j))
        .collect();
    all.sort_by(|a, b| key_cmp(*a, *b));
    all.truncate(k);
    all.into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            dist: libm::sqrt(d2),
        })
        .collect()
}

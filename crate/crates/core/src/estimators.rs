//! Masses, tangent planes and the approximate mean curvature, all computed
//! from positions and a neighbor graph.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::kernels::{unit_ball_volume, unit_sphere_area, ExpKernel, KernelPair};
use crate::linalg::{dist, symmetric_eigen};
use crate::neighbors::NeighborGraph;
use crate::varifold::{project_into, PointCloudVarifold, ProjectorKind};

/// Profile `lambda` of the mass estimator
/// `m_i = C_lambda delta_i^d / sum_j lambda(|x_j - x_i| / delta_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassProfile {
    /// `lambda = 1` on `(-1, 1)`; `C_lambda` is the volume of the unit d-ball.
    #[default]
    Indicator,
    /// `lambda(s) = exp(1 / (s^2 - 1))`.
    Smooth,
}

impl MassProfile {
    pub fn lambda(self, s: f64) -> f64 {
        match self {
            MassProfile::Indicator => {
                if libm::fabs(s) < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            MassProfile::Smooth => ExpKernel::new(1).rho(s),
        }
    }

    /// `C_lambda = sigma_{d-1} * int_0^1 lambda(s) s^{d-1} ds`.
    pub fn normalization(self, d: usize) -> f64 {
        match self {
            MassProfile::Indicator => unit_ball_volume(d),
            MassProfile::Smooth => {
                // composite Simpson; the integrand is C-infinity and flat at 1
                let intervals = 4096;
                let h = 1.0 / intervals as f64;
                let f = |s: f64| self.lambda(s) * libm::pow(s, (d - 1) as f64);
                let mut acc = f(0.0) + f(1.0);
                for k in 1..intervals {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * f(k as f64 * h);
                }
                unit_sphere_area(d) * acc * h / 3.0
            }
        }
    }
}

/// `m_i = C_lambda delta_i^d / sum_j lambda(|x_j - x_i| / delta_i)`, the sum
/// including `j = i`.
pub fn estimate_masses(v: &PointCloudVarifold, graph: &NeighborGraph, profile: MassProfile) -> Result<Vec<f64>> {
    let d = v.intrinsic_dim();
    let c = profile.normalization(d);
    (0..v.len())
        .map(|i| {
            let delta = graph.delta[i];
            let count = profile.lambda(0.0)
                + graph
                    .neighbors(i)
                    .iter()
                    .map(|nb| profile.lambda(nb.dist / delta))
                    .sum::<f64>();
            if !(count > 0.0) {
                return Err(CoreError::DegenerateStencil { index: i });
            }
            Ok(c * libm::pow(delta, d as f64) / count)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TangentEstimate {
    /// `N` frames of `d x n`, row-orthonormal.
    pub frames: Vec<f64>,
    /// `N x n` covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Points whose covariance had rank below `d`; their previous frame was kept.
    pub degenerate: Vec<usize>,
}

/// Weighted local PCA. The barycenter is the plain mean over the sigma-ball
/// (self included); the covariance uses `zeta(|x_j - x_i| / sigma_i)`
/// weights. The top-`d` eigenvectors span the tangent plane.
pub fn estimate_tangents<Z: Fn(f64) -> f64>(
    v: &PointCloudVarifold,
    graph: &NeighborGraph,
    zeta: Z,
    previous: Option<&[f64]>,
) -> Result<TangentEstimate> {
    let (n, d) = (v.ambient_dim(), v.intrinsic_dim());
    let mut frames = vec![0.0; v.len() * d * n];
    let mut eigenvalues = vec![0.0; v.len() * n];
    let mut degenerate = Vec::new();
    let mut bar = vec![0.0; n];
    let mut cov = vec![0.0; n * n];
    for i in 0..v.len() {
        let sigma = graph.sigma[i];
        let ball = || {
            core::iter::once((i, 0.0)).chain(
                graph
                    .neighbors(i)
                    .iter()
                    .filter(move |nb| nb.dist < sigma)
                    .map(|nb| (nb.index, nb.dist)),
            )
        };
        bar.iter_mut().for_each(|b| *b = 0.0);
        let mut count = 0usize;
        for (j, _) in ball() {
            for (b, x) in bar.iter_mut().zip(v.point(j)) {
                *b += x;
            }
            count += 1;
        }
        bar.iter_mut().for_each(|b| *b /= count as f64);
        cov.iter_mut().for_each(|c| *c = 0.0);
        for (j, r) in ball() {
            let w = zeta(r / sigma);
            if w == 0.0 {
                continue;
            }
            let x = v.point(j);
            for a in 0..n {
                let da = x[a] - bar[a];
                for b in a..n {
                    cov[a * n + b] += w * da * (x[b] - bar[b]);
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                cov[a * n + b] = cov[b * n + a];
            }
        }
        let (vals, vecs) = symmetric_eigen(&cov, n);
        eigenvalues[i * n..(i + 1) * n].copy_from_slice(&vals);
        let trace: f64 = vals.iter().sum();
        let frame = &mut frames[i * d * n..(i + 1) * d * n];
        if !(trace > 0.0) || vals[d - 1] <= 1e-12 * trace {
            degenerate.push(i);
            match previous {
                Some(prev) => frame.copy_from_slice(&prev[i * d * n..(i + 1) * d * n]),
                None => return Err(CoreError::DegenerateTangent { index: i, dim: d }),
            }
        } else {
            frame.copy_from_slice(&vecs[..d * n]);
        }
    }
    Ok(TangentEstimate {
        frames,
        eigenvalues,
        degenerate,
    })
}

/// Per-point approximate mean curvature.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub ambient_dim: usize,
    /// `N x n` vectors `H_i`.
    pub vectors: Vec<f64>,
    /// Raw `sum_l m_l xi(|x_l - x_i| / eps_i)`.
    pub denominators: Vec<f64>,
    /// Set where the denominator vanished (isolated point); `H_i = 0` there.
    pub degenerate: Vec<bool>,
}

impl CurvatureField {
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        crate::linalg::norm(self.vector(i))
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.denominators.len()).map(|i| self.magnitude(i)).fold(0.0, f64::max)
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&b| b).count()
    }
}

/// One edge of the curvature stencil of point `i`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StencilEdge {
    pub j: usize,
    /// `-(d/n) m_j rho'(r / eps_i) / r >= 0`
    pub weight: f64,
}

/// Numerator weights and the mass density `mu_i` of row `i`, evaluated at
/// `positions` (which may differ from `v.positions` in the implicit scheme).
/// Neighbors at distance 0 are dropped since `rho'(0) = 0`.
pub(crate) fn stencil_row<K: KernelPair>(
    v: &PointCloudVarifold,
    positions: &[f64],
    graph: &NeighborGraph,
    kernels: &K,
    i: usize,
    edges: &mut Vec<StencilEdge>,
) -> f64 {
    let n = v.ambient_dim();
    let ratio = v.intrinsic_dim() as f64 / n as f64;
    let eps = graph.eps[i];
    let xi = &positions[i * n..(i + 1) * n];
    edges.clear();
    let mut mu = v.masses[i] * kernels.xi(0.0);
    for nb in graph.neighbors(i) {
        let j = nb.index;
        let r = dist(xi, &positions[j * n..(j + 1) * n]);
        if !(r < eps) {
            continue;
        }
        let s = r / eps;
        mu += v.masses[j] * kernels.xi(s);
        if r > 0.0 {
            let weight = -ratio * v.masses[j] * kernels.rho_prime(s) / r;
            if weight != 0.0 {
                edges.push(StencilEdge { j, weight });
            }
        }
    }
    mu
}

/// `H_i = -(d/n)(1/eps_i) sum_{j != i} m_j rho'(r_ij/eps_i) Pi_ij((x_j-x_i)/r_ij)
///        / sum_l m_l xi(r_il/eps_i)`
/// over the neighbors strictly inside `eps_i`.
pub fn approximate_curvature<K: KernelPair>(
    v: &PointCloudVarifold,
    graph: &NeighborGraph,
    kernels: &K,
    kind: ProjectorKind,
) -> Result<CurvatureField> {
    let n = v.ambient_dim();
    if kernels.ambient_dim() != n {
        return Err(CoreError::Dimension {
            expected: n,
            got: kernels.ambient_dim(),
        });
    }
    let len = v.len();
    let mut vectors = vec![0.0; len * n];
    let mut denominators = vec![0.0; len];
    let mut degenerate = vec![false; len];
    let mut edges = Vec::new();
    let mut diff = [0.0; 8];
    let mut proj = [0.0; 8];
    for i in 0..len {
        let mu = stencil_row(v, &v.positions, graph, kernels, i, &mut edges);
        denominators[i] = mu;
        if !(mu > 0.0) {
            degenerate[i] = true;
            continue;
        }
        let h = &mut vectors[i * n..(i + 1) * n];
        let xi = v.point(i);
        for e in &edges {
            let xj = v.point(e.j);
            for k in 0..n {
                diff[k] = xj[k] - xi[k];
            }
            project_into(kind, v.frame(i), v.frame(e.j), &diff[..n], &mut proj[..n]);
            for k in 0..n {
                h[k] += e.weight * proj[k];
            }
        }
        let scale = 1.0 / (graph.eps[i] * mu);
        h.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(CurvatureField {
        ambient_dim: n,
        vectors,
        denominators,
        degenerate,
    })
}

/// Overwrite masses and tangents of `v` from its positions. Points with a
/// rank-deficient covariance keep their previous frame. Returns the indices
/// of those points.
pub fn refresh_geometry<K: KernelPair>(
    v: &mut PointCloudVarifold,
    graph: &NeighborGraph,
    kernels: &K,
    profile: MassProfile,
    estimate_frames: bool,
) -> Result<Vec<usize>> {
    v.masses = estimate_masses(v, graph, profile)?;
    if !estimate_frames {
        return Ok(Vec::new());
    }
    let est = estimate_tangents(v, graph, |s| kernels.xi(s), Some(&v.tangents))?;
    v.tangents = est.frames;
    Ok(est.degenerate)
}

//! Time stepping.
//!
//! Both schemes solve, row by row,
//! `x_i^{k+1} = x_i^k + (tau/eps_i) sum_j omega_ij Pi_ij (x_j^{k+1} - x_i^{k+1})`
//! with `omega_ij = -(d/n) m_j rho'(r_ij/eps_i) / (r_ij mu_i)`. The
//! semi-implicit scheme evaluates `omega` at step `k`; the implicit scheme
//! re-evaluates it at the unknown positions by Picard iteration.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{CoreError, Result};
use crate::estimators::{approximate_curvature, refresh_geometry, stencil_row, CurvatureField, MassProfile};
use crate::kernels::KernelPair;
use crate::linalg::{dist, dot, invert, mat_vec};
use crate::neighbors::{NeighborCounts, NeighborGraph};
use crate::varifold::{project_into, projector_matrix, PointCloudVarifold, ProjectorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    SemiImplicit,
    Implicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SemiImplicit => "semi-implicit",
            Scheme::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi-implicit" => Ok(Scheme::SemiImplicit),
            "implicit" => Ok(Scheme::Implicit),
            _ => Err(CoreError::Config(alloc::format!(
                "unknown scheme `{s}` (expected semi-implicit or implicit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub tau: f64,
    pub projector: ProjectorKind,
    pub counts: NeighborCounts,
    pub rebuild_every: usize,
    pub scheme: Scheme,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub implicit_fp_tol: f64,
    pub implicit_fp_max_iter: usize,
    pub mass_profile: MassProfile,
    /// When false the tangents present on the input cloud are kept forever.
    pub estimate_tangents: bool,
}

impl FlowConfig {
    pub fn new(tau: f64, projector: ProjectorKind, counts: NeighborCounts) -> Self {
        Self {
            tau,
            projector,
            counts,
            rebuild_every: 1,
            scheme: Scheme::SemiImplicit,
            solver_tol: 1e-10,
            solver_max_iter: 10_000,
            implicit_fp_tol: 1e-10,
            implicit_fp_max_iter: 50,
            mass_profile: MassProfile::Indicator,
            estimate_tangents: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CoreError::Config(what.into()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive and finite");
        }
        let c = self.counts;
        if c.k_eps == 0 || c.k_sigma == 0 || c.k_delta == 0 {
            return bad("neighbor counts must be at least 1");
        }
        if self.rebuild_every == 0 {
            return bad("rebuild_every must be at least 1");
        }
        if !(self.solver_tol > 0.0) || !(self.implicit_fp_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.solver_max_iter == 0 || self.implicit_fp_max_iter == 0 {
            return bad("iteration limits must be at least 1");
        }
        Ok(())
    }
}

/// Row-normalized linear system `(I - (tau/eps_i) M^{-1} L) X = X^k`, which is
/// `M - (tau/eps) L` with block row `i` divided by `mu_i`. Pinned rows are
/// identity rows.
#[derive(Debug, Clone)]
pub struct StepSystem {
    dim: usize,
    pub pinned: Vec<bool>,
    /// `mu_i = sum_l m_l xi(|x_l - x_i| / eps_i)`
    pub mu: Vec<f64>,
    pub eps: Vec<f64>,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<f64>,
}

impl StepSystem {
    /// Assemble with weights evaluated at `positions` and projectors from the
    /// frames of `v`.
    pub fn assemble<K: KernelPair>(
        v: &PointCloudVarifold,
        positions: &[f64],
        graph: &NeighborGraph,
        kernels: &K,
        kind: ProjectorKind,
        tau: f64,
    ) -> Result<Self> {
        let n = v.ambient_dim();
        let nn = n * n;
        let len = v.len();
        let mut sys = StepSystem {
            dim: n,
            pinned: v.pinned.clone(),
            mu: vec![0.0; len],
            eps: graph.eps.clone(),
            diag: vec![0.0; len * nn],
            offsets: Vec::with_capacity(len + 1),
            cols: Vec::new(),
            blocks: Vec::new(),
        };
        sys.offsets.push(0);
        let mut edges = Vec::new();
        let mut p = vec![0.0; nn];
        for i in 0..len {
            let diag = &mut sys.diag[i * nn..(i + 1) * nn];
            for r in 0..n {
                diag[r * n + r] = 1.0;
            }
            let mu = stencil_row(v, positions, graph, kernels, i, &mut edges);
            sys.mu[i] = mu;
            if !v.pinned[i] {
                if !(mu > 0.0) {
                    return Err(CoreError::DegenerateStencil { index: i });
                }
                let alpha = tau / (graph.eps[i] * mu);
                for e in &edges {
                    projector_matrix(kind, v.frame(i), v.frame(e.j), n, &mut p);
                    let w = alpha * e.weight;
                    for k in 0..nn {
                        diag[k] += w * p[k];
                    }
                    sys.cols.push(e.j);
                    sys.blocks.extend(p.iter().map(|x| -w * x));
                }
            }
            sys.offsets.push(sys.cols.len());
        }
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal_block(&self, i: usize) -> &[f64] {
        let nn = self.dim * self.dim;
        &self.diag[i * nn..(i + 1) * nn]
    }

    /// Off-diagonal blocks of row `i` as `(j, n x n block)`.
    pub fn row_blocks(&self, i: usize) -> impl Iterator<Item = (usize, &[f64])> {
        let nn = self.dim * self.dim;
        (self.offsets[i]..self.offsets[i + 1]).map(move |e| (self.cols[e], &self.blocks[e * nn..(e + 1) * nn]))
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    /// `out = A x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut tmp = vec![0.0; n];
        for i in 0..self.len() {
            let o = &mut out[i * n..(i + 1) * n];
            mat_vec(self.diagonal_block(i), &x[i * n..(i + 1) * n], o);
            for (j, b) in self.row_blocks(i) {
                mat_vec(b, &x[j * n..(j + 1) * n], &mut tmp);
                for k in 0..n {
                    o[k] += tmp[k];
                }
            }
        }
    }

    /// `||A||_inf`, the largest absolute scalar row sum.
    pub fn inf_norm(&self) -> f64 {
        let n = self.dim;
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for r in 0..n {
                let mut s: f64 = self.diagonal_block(i)[r * n..(r + 1) * n].iter().map(|x| libm::fabs(*x)).sum();
                for (_, b) in self.row_blocks(i) {
                    s += b[r * n..(r + 1) * n].iter().map(|x| libm::fabs(*x)).sum::<f64>();
                }
                best = best.max(s);
            }
        }
        best
    }

    /// `min_r (|A_rr| - sum_{c != r} |A_rc|)` over all scalar rows.
    pub fn dominance_margin(&self) -> f64 {
        let n = self.dim;
        let mut margin = f64::INFINITY;
        for i in 0..self.len() {
            let d = self.diagonal_block(i);
            for r in 0..n {
                let mut m = libm::fabs(d[r * n + r]);
                for c in 0..n {
                    if c != r {
                        m -= libm::fabs(d[r * n + c]);
                    }
                }
                for (_, b) in self.row_blocks(i) {
                    m -= b[r * n..(r + 1) * n].iter().map(|x| libm::fabs(*x)).sum::<f64>();
                }
                margin = margin.min(m);
            }
        }
        margin
    }

    /// Dominance margin of the equivalent system `Q A Q^T`, where `Q` is
    /// block diagonal with `Q_i` an orthonormal basis adapted to `P_i`
    /// (tangent rows first, then a completion of the normal space).
    pub fn frame_dominance_margin(&self, v: &PointCloudVarifold) -> f64 {
        let n = self.dim;
        let nn = n * n;
        let bases: Vec<Vec<f64>> = (0..self.len()).map(|i| adapted_basis(v.frame(i), n)).collect();
        let mut t = vec![0.0; nn];
        let mut margin = f64::INFINITY;
        for i in 0..self.len() {
            let mut row = vec![0.0; n];
            conjugate(&bases[i], self.diagonal_block(i), &bases[i], n, &mut t);
            for r in 0..n {
                row[r] = libm::fabs(t[r * n + r]);
                for c in 0..n {
                    if c != r {
                        row[r] -= libm::fabs(t[r * n + c]);
                    }
                }
            }
            for (j, b) in self.row_blocks(i) {
                conjugate(&bases[i], b, &bases[j], n, &mut t);
                for r in 0..n {
                    row[r] -= t[r * n..(r + 1) * n].iter().map(|x| libm::fabs(*x)).sum::<f64>();
                }
            }
            margin = row.iter().fold(margin, |a, &b| a.min(b));
        }
        margin
    }
}

/// `out = qi * a * qj^T`
fn conjugate(qi: &[f64], a: &[f64], qj: &[f64], n: usize, out: &mut [f64]) {
    for r in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                let aqj: f64 = (0..n).map(|l| a[k * n + l] * qj[c * n + l]).sum();
                s += qi[r * n + k] * aqj;
            }
            out[r * n + c] = s;
        }
    }
}

/// Orthonormal basis of `R^n` whose first rows are `frame`, completed by
/// Gram-Schmidt against the standard basis.
pub fn adapted_basis(frame: &[f64], n: usize) -> Vec<f64> {
    let mut rows: Vec<f64> = frame.to_vec();
    let mut cand = vec![0.0; n];
    let mut e = 0;
    while rows.len() < n * n && e < n {
        cand.iter_mut().for_each(|x| *x = 0.0);
        cand[e] = 1.0;
        e += 1;
        for r in rows.chunks_exact(n) {
            let c = dot(&cand, r);
            for k in 0..n {
                cand[k] -= c * r[k];
            }
        }
        let len = crate::linalg::norm(&cand);
        if len > 1e-6 {
            rows.extend(cand.iter().map(|x| x / len));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||A x - b||_inf / ||b||_inf` (absolute when `b = 0`)
    pub residual: f64,
}

/// Solve `A x = b` starting from `x` until `||A x - b||_inf / ||b||_inf <= tol`,
/// or until the normwise backward error
/// `||A x - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)` reaches rounding
/// level (`BACKWARD_FLOOR`), whichever comes first. The second test only
/// matters for badly scaled rows from collapsed clusters, where the relative
/// residual cannot get below `tol` in double precision.
///
/// Block Gauss-Seidel sweeps run first. Once they stall (residual reduction
/// per sweep worse than `GS_STALL`, or more than `GS_MAX_SWEEPS` sweeps),
/// restarted GMRES with a block-Jacobi right preconditioner takes over from
/// the current iterate. Every sweep and every Krylov iteration counts
/// towards `max_iter`.
pub fn solve_system(sys: &StepSystem, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveReport> {
    let n = sys.dim;
    let nn = n * n;
    let len = sys.len();
    let mut inv = vec![0.0; len * nn];
    for i in 0..len {
        let blk = invert(sys.diagonal_block(i), n).ok_or(CoreError::DegenerateStencil { index: i })?;
        inv[i * nn..(i + 1) * nn].copy_from_slice(&blk);
    }
    let bnorm = inf_norm(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let anorm = sys.inf_norm();
    let done = |res: f64, x: &[f64]| res <= tol || res * scale <= BACKWARD_FLOOR * (anorm * inf_norm(x) + bnorm);
    let mut ax = vec![0.0; b.len()];
    let mut res = inf_residual(sys, b, x, &mut ax) / scale;
    let mut acc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut iterations = 0;
    let mut sweeps = 0;
    while !done(res, x) && iterations < max_iter && res.is_finite() {
        if sweeps >= GS_MAX_SWEEPS {
            break;
        }
        for i in 0..len {
            acc.copy_from_slice(&b[i * n..(i + 1) * n]);
            for (j, blk) in sys.row_blocks(i) {
                mat_vec(blk, &x[j * n..(j + 1) * n], &mut tmp);
                for k in 0..n {
                    acc[k] -= tmp[k];
                }
            }
            mat_vec(&inv[i * nn..(i + 1) * nn], &acc, &mut x[i * n..(i + 1) * n]);
        }
        iterations += 1;
        sweeps += 1;
        let next = inf_residual(sys, b, x, &mut ax) / scale;
        let stalled = sweeps >= GS_MIN_SWEEPS && !(next <= GS_STALL * res);
        res = next;
        if stalled {
            break;
        }
    }
    if !res.is_finite() {
        // Gauss-Seidel blew up; restart the Krylov phase from the right-hand side.
        x.copy_from_slice(b);
        res = inf_residual(sys, b, x, &mut ax) / scale;
    }
    while !done(res, x) && iterations < max_iter {
        let target = (tol * scale).max(BACKWARD_FLOOR * (anorm * inf_norm(x) + bnorm));
        let (used, r) = gmres_cycle(sys, &inv, b, x, target, max_iter - iterations);
        iterations += used;
        res = r / scale;
        if used == 0 || !res.is_finite() {
            break;
        }
    }
    if !done(res, x) {
        return Err(CoreError::SolverDiverged {
            iterations,
            residual: res,
        });
    }
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite { index: k / n });
    }
    Ok(SolveReport {
        iterations,
        residual: res,
    })
}

const BACKWARD_FLOOR: f64 = 1e-14;
const GS_MIN_SWEEPS: usize = 10;
const GS_MAX_SWEEPS: usize = 200;
const GS_STALL: f64 = 0.8;
const GMRES_RESTART: usize = 40;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(libm::fabs(*x)))
}

fn inf_residual(sys: &StepSystem, b: &[f64], x: &[f64], ax: &mut [f64]) -> f64 {
    sys.apply(x, ax);
    ax.iter().zip(b).fold(0.0f64, |a, (p, q)| a.max(libm::fabs(p - q)))
}

fn block_precondition(inv: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    let nn = n * n;
    for (i, (o, vi)) in out.chunks_exact_mut(n).zip(v.chunks_exact(n)).enumerate() {
        mat_vec(&inv[i * nn..(i + 1) * nn], vi, o);
    }
}

/// One restart cycle of right-preconditioned GMRES. Updates `x` and returns
/// the iterations used and the final absolute infinity-norm residual.
fn gmres_cycle(sys: &StepSystem, inv: &[f64], b: &[f64], x: &mut [f64], tol_abs: f64, budget: usize) -> (usize, f64) {
    let size = b.len();
    let m = GMRES_RESTART.min(budget);
    let mut ax = vec![0.0; size];
    sys.apply(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let beta = libm::sqrt(dot(&r, &r));
    if beta == 0.0 || m == 0 {
        return (0, r.iter().fold(0.0f64, |a, v| a.max(libm::fabs(*v))));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(r.iter().map(|v| v / beta).collect());
    let mut h = vec![0.0; (m + 1) * m];
    let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
    let mut g = vec![0.0; m + 1];
    g[0] = beta;
    let mut z = vec![0.0; size];
    let mut w = vec![0.0; size];
    let mut k = 0;
    while k < m {
        block_precondition(inv, sys.dim, &basis[k], &mut z);
        sys.apply(&z, &mut w);
        for (j, q) in basis.iter().enumerate() {
            let hj = dot(&w, q);
            h[j * m + k] = hj;
            for (a, c) in w.iter_mut().zip(q) {
                *a -= hj * c;
            }
        }
        let hn = libm::sqrt(dot(&w, &w));
        h[(k + 1) * m + k] = hn;
        for j in 0..k {
            let (a, c) = (h[j * m + k], h[(j + 1) * m + k]);
            h[j * m + k] = cs[j] * a + sn[j] * c;
            h[(j + 1) * m + k] = -sn[j] * a + cs[j] * c;
        }
        let (a, c) = (h[k * m + k], h[(k + 1) * m + k]);
        let d = libm::hypot(a, c);
        if d == 0.0 {
            break;
        }
        cs[k] = a / d;
        sn[k] = c / d;
        h[k * m + k] = d;
        h[(k + 1) * m + k] = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] *= cs[k];
        k += 1;
        // The 2-norm bounds the infinity norm.
        if libm::fabs(g[k]) <= 0.5 * tol_abs || hn == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[i * m + j] * y[j];
        }
        y[i] = s / h[i * m + i];
    }
    let mut u = vec![0.0; size];
    for (yi, q) in y.iter().zip(&basis) {
        for (a, c) in u.iter_mut().zip(q) {
            *a += yi * c;
        }
    }
    block_precondition(inv, sys.dim, &u, &mut z);
    for (a, c) in x.iter_mut().zip(&z) {
        *a += c;
    }
    (k, inf_residual(sys, b, x, &mut ax))
}

/// Outcome of one linear or nonlinear position update.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub positions: Vec<f64>,
    pub solver_iterations: usize,
    pub residual: f64,
    pub fixed_point_iterations: usize,
    /// Max position change per Picard iteration (implicit scheme only).
    pub fixed_point_trace: Vec<f64>,
    /// Dominance margins of every system assembled during the step.
    pub dominance_margin: f64,
    pub frame_dominance_margin: f64,
}

/// One semi-implicit step. `v` must carry masses and tangents for its
/// current positions; the returned positions are `X^{k+1}`.
pub fn step_semi_implicit<K: KernelPair>(
    v: &PointCloudVarifold,
    graph: &NeighborGraph,
    kernels: &K,
    cfg: &FlowConfig,
) -> Result<StepSolution> {
    let sys = StepSystem::assemble(v, &v.positions, graph, kernels, cfg.projector, cfg.tau)?;
    let mut x = v.positions.clone();
    let rep = solve_system(&sys, &v.positions, &mut x, cfg.solver_tol, cfg.solver_max_iter)?;
    Ok(StepSolution {
        positions: x,
        solver_iterations: rep.iterations,
        residual: rep.residual,
        fixed_point_iterations: 1,
        fixed_point_trace: Vec::new(),
        dominance_margin: sys.dominance_margin(),
        frame_dominance_margin: sys.frame_dominance_margin(v),
    })
}

/// One implicit step by Picard iteration: weights (including `mu_i`) are
/// evaluated at the current iterate, projectors, masses and `eps_i` stay at
/// step `k`. The first iterate is the semi-implicit step.
pub fn step_implicit<K: KernelPair>(
    v: &PointCloudVarifold,
    graph: &NeighborGraph,
    kernels: &K,
    cfg: &FlowConfig,
) -> Result<StepSolution> {
    let mut iterate = v.positions.clone();
    let mut trace = Vec::new();
    let mut solver_iterations = 0;
    let mut margin = f64::INFINITY;
    let mut frame_margin = f64::INFINITY;
    for _ in 0..cfg.implicit_fp_max_iter {
        let sys = StepSystem::assemble(v, &iterate, graph, kernels, cfg.projector, cfg.tau)?;
        margin = margin.min(sys.dominance_margin());
        frame_margin = frame_margin.min(sys.frame_dominance_margin(v));
        let mut next = iterate.clone();
        let rep = solve_system(&sys, &v.positions, &mut next, cfg.solver_tol, cfg.solver_max_iter)?;
        solver_iterations += rep.iterations;
        let change = next
            .iter()
            .zip(&iterate)
            .fold(0.0f64, |a, (p, q)| a.max(libm::fabs(p - q)));
        trace.push(change);
        iterate = next;
        if change <= cfg.implicit_fp_tol {
            return Ok(StepSolution {
                positions: iterate,
                solver_iterations,
                residual: rep.residual,
                fixed_point_iterations: trace.len(),
                fixed_point_trace: trace,
                dominance_margin: margin,
                frame_dominance_margin: frame_margin,
            });
        }
    }
    Err(CoreError::FixedPointDiverged {
        iterations: trace.len(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereDiagnostic {
    /// `R^{k+1} = max_i |x_i^{k+1} - z|`
    pub radius: f64,
    /// `c^k`; `+inf` when no argmax point has a neighbor inside its radius.
    pub constant: f64,
    pub empty: bool,
}

/// `c^k = min Pi_ij^k (x_i - x_j) . (x_i - z) / |x_i - x_j|^2` over the points
/// `i` realizing `R^{k+1}` and all `j` with `0 < |x_i - x_j| < eps_i`,
/// positions taken at step `k+1`, frames and radii at step `k`.
pub fn sphere_diagnostic(
    v: &PointCloudVarifold,
    graph: &NeighborGraph,
    next: &[f64],
    kind: ProjectorKind,
    z: &[f64],
) -> SphereDiagnostic {
    let n = v.ambient_dim();
    let pt = |i: usize| &next[i * n..(i + 1) * n];
    let radii: Vec<f64> = (0..v.len()).map(|i| dist(pt(i), z)).collect();
    let radius = radii.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut constant = f64::INFINITY;
    let mut diff = [0.0; 8];
    let mut to_z = [0.0; 8];
    let mut proj = [0.0; 8];
    for i in (0..v.len()).filter(|&i| radii[i] >= radius * (1.0 - 1e-12)) {
        for k in 0..n {
            to_z[k] = pt(i)[k] - z[k];
        }
        for j in 0..v.len() {
            let r = dist(pt(i), pt(j));
            if j == i || !(r > 0.0 && r < graph.eps[i]) {
                continue;
            }
            for k in 0..n {
                diff[k] = pt(i)[k] - pt(j)[k];
            }
            project_into(kind, v.frame(i), v.frame(j), &diff[..n], &mut proj[..n]);
            constant = constant.min(dot(&proj[..n], &to_z[..n]) / (r * r));
        }
    }
    SphereDiagnostic {
        radius,
        empty: constant == f64::INFINITY,
        constant,
    }
}

/// True iff `max_i x_i . nu <= mu + 1e-9` for every recorded step. The first
/// entry must already satisfy the bound.
pub fn planar_barrier_check<'a, I>(history: I, dim: usize, nu: &[f64], mu: f64) -> Result<bool>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    const TOL: f64 = 1e-9;
    let mut first = true;
    let mut holds = true;
    for positions in history {
        let max = positions
            .chunks_exact(dim)
            .map(|x| dot(x, nu))
            .fold(f64::NEG_INFINITY, f64::max);
        if first && max > mu {
            return Err(CoreError::BarrierPrecondition { max, mu });
        }
        first = false;
        holds &= max <= mu + TOL;
    }
    Ok(holds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub enclosing_radius: Option<f64>,
    pub sphere_constant: Option<f64>,
    pub min_pair_distance: f64,
    pub max_curvature: f64,
    pub degenerate_count: usize,
    pub solver_iterations: usize,
    pub residual: f64,
    pub fixed_point_iterations: usize,
    pub dominance_margin: f64,
    pub frame_dominance_margin: f64,
    pub rebuilt: bool,
    pub total_mass: f64,
    pub components: usize,
}

/// A cloud, its neighbor graph and the flow parameters. `state` always
/// carries masses and tangents consistent with its positions.
#[derive(Debug, Clone)]
pub struct Flow<K> {
    pub state: PointCloudVarifold,
    pub graph: NeighborGraph,
    pub kernels: K,
    pub config: FlowConfig,
    pub step: usize,
    last_degenerate: usize,
}

impl<K: KernelPair> Flow<K> {
    /// Build the graph and estimate masses (and tangents unless disabled).
    pub fn new(mut state: PointCloudVarifold, kernels: K, config: FlowConfig) -> Result<Self> {
        config.validate()?;
        if kernels.ambient_dim() != state.ambient_dim() {
            return Err(CoreError::Dimension {
                expected: state.ambient_dim(),
                got: kernels.ambient_dim(),
            });
        }
        let graph = NeighborGraph::build(&state.positions, state.ambient_dim(), config.counts, 0)?;
        let deg = refresh_geometry(&mut state, &graph, &kernels, config.mass_profile, config.estimate_tangents)?;
        Ok(Self {
            state,
            graph,
            kernels,
            config,
            step: 0,
            last_degenerate: deg.len(),
        })
    }

    /// `t = step * tau`
    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.tau
    }

    pub fn curvature(&self) -> Result<CurvatureField> {
        approximate_curvature(&self.state, &self.graph, &self.kernels, self.config.projector)
    }

    /// Diagnostics of the current state without stepping.
    pub fn snapshot_diagnostics(&self, center: Option<&[f64]>) -> Result<StepDiagnostics> {
        let h = self.curvature()?;
        let n = self.state.ambient_dim();
        Ok(StepDiagnostics {
            step: self.step,
            time: self.time(),
            enclosing_radius: center.map(|z| {
                self.state
                    .positions
                    .chunks_exact(n)
                    .map(|x| dist(x, z))
                    .fold(0.0, f64::max)
            }),
            sphere_constant: None,
            min_pair_distance: self.graph.min_pair_distance(),
            max_curvature: h.max_magnitude(),
            degenerate_count: h.degenerate_count() + self.last_degenerate,
            solver_iterations: 0,
            residual: 0.0,
            fixed_point_iterations: 0,
            dominance_margin: f64::INFINITY,
            frame_dominance_margin: f64::INFINITY,
            rebuilt: false,
            total_mass: self.state.total_mass(),
            components: self.graph.component_count(),
        })
    }

    /// Advance one step: solve for `X^{k+1}`, refresh or rebuild the graph,
    /// then re-estimate masses and tangents.
    pub fn step(&mut self, center: Option<&[f64]>) -> Result<StepDiagnostics> {
        let sol = match self.config.scheme {
            Scheme::SemiImplicit => step_semi_implicit(&self.state, &self.graph, &self.kernels, &self.config)?,
            Scheme::Implicit => step_implicit(&self.state, &self.graph, &self.kernels, &self.config)?,
        };
        let sphere =
            center.map(|z| sphere_diagnostic(&self.state, &self.graph, &sol.positions, self.config.projector, z));
        self.state.positions = sol.positions;
        self.step += 1;
        let rebuilt = self
            .graph
            .maybe_rebuild(&self.state.positions, self.step, self.config.rebuild_every)?;
        let deg = refresh_geometry(
            &mut self.state,
            &self.graph,
            &self.kernels,
            self.config.mass_profile,
            self.config.estimate_tangents,
        )?;
        self.last_degenerate = deg.len();
        let mut diag = self.snapshot_diagnostics(center)?;
        diag.enclosing_radius = sphere.as_ref().map(|s| s.radius);
        diag.sphere_constant = sphere.map(|s| s.constant);
        diag.solver_iterations = sol.solver_iterations;
        diag.residual = sol.residual;
        diag.fixed_point_iterations = sol.fixed_point_iterations;
        diag.dominance_margin = sol.dominance_margin;
        diag.frame_dominance_margin = sol.frame_dominance_margin;
        diag.rebuilt = rebuilt;
        Ok(diag)
    }
}

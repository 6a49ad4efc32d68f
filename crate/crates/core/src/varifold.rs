//! Point cloud varifold state and the projection operators used by the
//! curvature estimator.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{CoreError, Result};
use crate::linalg::dot;

/// `V = sum_i m_i delta_(x_i, P_i)`.
///
/// Positions, masses and tangent frames are stored flat: point `i` owns
/// `positions[i*n..(i+1)*n]` and the `d x n` row-orthonormal frame
/// `tangents[i*d*n..(i+1)*d*n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudVarifold {
    ambient_dim: usize,
    intrinsic_dim: usize,
    pub positions: Vec<f64>,
    pub masses: Vec<f64>,
    pub tangents: Vec<f64>,
    pub pinned: Vec<bool>,
}

/// A violated invariant reported by [`PointCloudVarifold::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub rule: &'static str,
    pub detail: String,
}

impl PointCloudVarifold {
    /// Cloud with unit masses and the canonical frame `(e_1, ..., e_d)` at
    /// every point; estimators overwrite both.
    pub fn from_positions(
        ambient_dim: usize,
        intrinsic_dim: usize,
        positions: Vec<f64>,
        pinned: Option<Vec<bool>>,
    ) -> Result<Self> {
        if intrinsic_dim == 0 || intrinsic_dim >= ambient_dim {
            return Err(CoreError::Config(alloc::format!(
                "need 1 <= d < n, got d = {intrinsic_dim}, n = {ambient_dim}"
            )));
        }
        if positions.len() % ambient_dim != 0 {
            return Err(CoreError::Dimension {
                expected: ambient_dim,
                got: positions.len() % ambient_dim,
            });
        }
        let len = positions.len() / ambient_dim;
        let pinned = pinned.unwrap_or_else(|| vec![false; len]);
        if pinned.len() != len {
            return Err(CoreError::Dimension {
                expected: len,
                got: pinned.len(),
            });
        }
        let mut frame = vec![0.0; intrinsic_dim * ambient_dim];
        for r in 0..intrinsic_dim {
            frame[r * ambient_dim + r] = 1.0;
        }
        let tangents = frame.iter().copied().cycle().take(len * frame.len()).collect();
        Ok(Self {
            ambient_dim,
            intrinsic_dim,
            positions,
            masses: vec![1.0; len],
            tangents,
            pinned,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        let sz = self.intrinsic_dim * self.ambient_dim;
        &self.tangents[i * sz..(i + 1) * sz]
    }

    pub fn set_frame(&mut self, i: usize, frame: &[f64]) {
        let sz = self.intrinsic_dim * self.ambient_dim;
        self.tangents[i * sz..(i + 1) * sz].copy_from_slice(frame);
    }

    /// `||V||(R^n) = sum_i m_i`.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Every broken invariant; an empty list means the cloud is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let (n, d) = (self.ambient_dim, self.intrinsic_dim);
        let mut out = Vec::new();
        for i in 0..self.len() {
            if !(self.masses[i] > 0.0) || !self.masses[i].is_finite() {
                out.push(Violation {
                    index: i,
                    rule: "m_i > 0",
                    detail: alloc::format!("mass {}", self.masses[i]),
                });
            }
            if self.point(i).iter().any(|x| !x.is_finite()) {
                out.push(Violation {
                    index: i,
                    rule: "finite position",
                    detail: alloc::format!("{:?}", self.point(i)),
                });
            }
            let f = self.frame(i);
            let mut worst: f64 = 0.0;
            for a in 0..d {
                for b in 0..d {
                    let g = dot(&f[a * n..(a + 1) * n], &f[b * n..(b + 1) * n]);
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max(libm::fabs(g - target));
                }
            }
            if !(worst <= 1e-10) {
                out.push(Violation {
                    index: i,
                    rule: "frame orthonormal",
                    detail: alloc::format!("max |F F^T - I| = {worst:e}"),
                });
            }
        }
        if self.pinned.len() != self.len() {
            out.push(Violation {
                index: self.len(),
                rule: "pin mask length",
                detail: alloc::format!("{} flags for {} points", self.pinned.len(), self.len()),
            });
        }
        out
    }
}

/// The six variants of `Pi_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectorKind {
    /// `Pi_{P_j}`
    TangentJ,
    /// `-2 Pi_{P_j^perp}`
    NormalJNeg,
    /// `2 Id`
    TwoId,
    /// `Pi_{P_i^perp} o Pi_{P_j}`
    NormalITangentJ,
    /// `-2 Pi_{P_i^perp} o Pi_{P_j^perp}`
    NormalINormalJNeg,
    /// `2 Pi_{P_i^perp}`
    NormalI,
}

impl ProjectorKind {
    pub const ALL: [ProjectorKind; 6] = [
        ProjectorKind::TangentJ,
        ProjectorKind::NormalJNeg,
        ProjectorKind::TwoId,
        ProjectorKind::NormalITangentJ,
        ProjectorKind::NormalINormalJNeg,
        ProjectorKind::NormalI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectorKind::TangentJ => "tangent-j",
            ProjectorKind::NormalJNeg => "normal-j-neg",
            ProjectorKind::TwoId => "two-id",
            ProjectorKind::NormalITangentJ => "normal-i-tangent-j",
            ProjectorKind::NormalINormalJNeg => "normal-i-normal-j-neg",
            ProjectorKind::NormalI => "normal-i",
        }
    }

    /// Whether the operator reads `P_i` / `P_j`.
    pub fn uses_frames(self) -> bool {
        self != ProjectorKind::TwoId
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectorKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        ProjectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CoreError::Input(alloc::format!("unknown projector '{s}'")))
    }
}

/// `out = Pi_P v = F^T (F v)` for a `d x n` orthonormal frame `F`.
#[inline]
pub fn tangent_part(frame: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for row in frame.chunks_exact(n) {
        let c = dot(row, v);
        for (o, r) in out.iter_mut().zip(row) {
            *o += c * r;
        }
    }
}

/// `Pi_ij v` without dimension checks; `out` must have length `n`.
pub fn project_into(kind: ProjectorKind, frame_i: &[f64], frame_j: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    // n <= 3 in practice; 8 covers anything sensible without allocating
    let mut buf = [0.0; 8];
    debug_assert!(n <= buf.len());
    let tmp = &mut buf[..n];
    match kind {
        ProjectorKind::TwoId => {
            for (o, x) in out.iter_mut().zip(v) {
                *o = 2.0 * x;
            }
        }
        ProjectorKind::TangentJ => tangent_part(frame_j, v, out),
        ProjectorKind::NormalJNeg => {
            tangent_part(frame_j, v, tmp);
            for k in 0..n {
                out[k] = -2.0 * (v[k] - tmp[k]);
            }
        }
        ProjectorKind::NormalI => {
            tangent_part(frame_i, v, tmp);
            for k in 0..n {
                out[k] = 2.0 * (v[k] - tmp[k]);
            }
        }
        ProjectorKind::NormalITangentJ => {
            let mut w = [0.0; 8];
            tangent_part(frame_j, v, &mut w[..n]);
            tangent_part(frame_i, &w[..n], tmp);
            for k in 0..n {
                out[k] = w[k] - tmp[k];
            }
        }
        ProjectorKind::NormalINormalJNeg => {
            let mut w = [0.0; 8];
            tangent_part(frame_j, v, &mut w[..n]);
            for k in 0..n {
                w[k] = v[k] - w[k];
            }
            tangent_part(frame_i, &w[..n], tmp);
            for k in 0..n {
                out[k] = -2.0 * (w[k] - tmp[k]);
            }
        }
    }
}

/// `Pi_ij v` with frames given as `d x n` row-orthonormal bases.
pub fn project(kind: ProjectorKind, frame_i: &[f64], frame_j: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if n == 0 || n > 8 {
        return Err(CoreError::Input(alloc::format!("unsupported ambient dimension {n}")));
    }
    for f in [frame_i, frame_j] {
        if f.is_empty() || f.len() % n != 0 {
            return Err(CoreError::Dimension {
                expected: n,
                got: f.len(),
            });
        }
    }
    if frame_i.len() != frame_j.len() {
        return Err(CoreError::Dimension {
            expected: frame_i.len(),
            got: frame_j.len(),
        });
    }
    let mut out = vec![0.0; n];
    project_into(kind, frame_i, frame_j, v, &mut out);
    Ok(out)
}

/// The `n x n` matrix of `Pi_ij` (row-major), built column by column.
pub fn projector_matrix(kind: ProjectorKind, frame_i: &[f64], frame_j: &[f64], n: usize, out: &mut [f64]) {
    let mut e = [0.0; 8];
    let mut col = [0.0; 8];
    for c in 0..n {
        e[..n].iter_mut().for_each(|x| *x = 0.0);
        e[c] = 1.0;
        project_into(kind, frame_i, frame_j, &e[..n], &mut col[..n]);
        for r in 0..n {
            out[r * n + c] = col[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec;

    const E1: [f64; 2] = [1.0, 0.0];

    #[test]
    fn two_id_scales() {
        let p = project(ProjectorKind::TwoId, &E1, &E1, &[3.0, 4.0]).unwrap();
        assert_eq!(p, vec![6.0, 8.0]);
    }

    #[test]
    fn normal_i_drops_tangent() {
        let p = project(ProjectorKind::NormalI, &E1, &[0.0, 1.0], &[5.0, -2.0]).unwrap();
        assert_eq!(p, vec![0.0, -4.0]);
    }

    #[test]
    fn tangent_j_diagonal() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let p = project(ProjectorKind::TangentJ, &E1, &[s, s], &[1.0, 0.0]).unwrap();
        // brute force: u u^T v with u = (1,1)/sqrt2
        let u = [s, s];
        let brute = [u[0] * u[0], u[1] * u[0]];
        assert!((p[0] - brute[0]).abs() < 1e-15 && (p[1] - brute[1]).abs() < 1e-15);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(project(ProjectorKind::NormalI, &[1.0, 0.0, 0.0], &E1, &[1.0, 0.0]).is_err());
        assert!(project(ProjectorKind::NormalI, &E1, &E1, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn projector_names_roundtrip() {
        for k in ProjectorKind::ALL {
            assert_eq!(k.name().parse::<ProjectorKind>().unwrap(), k);
        }
        assert!("sideways".parse::<ProjectorKind>().is_err());
    }

    #[test]
    fn validate_reports() {
        let mut v = PointCloudVarifold::from_positions(2, 1, vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0], None).unwrap();
        assert!(v.validate().is_empty());
        v.masses[1] = 0.0;
        let r = v.validate();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].index, r[0].rule), (1, "m_i > 0"));

        let mut w = PointCloudVarifold::from_positions(3, 2, vec![0.0; 6], None).unwrap();
        w.set_frame(0, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let r = w.validate();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].index, r[0].rule), (0, "frame orthonormal"));

        w.positions[5] = f64::NAN;
        assert!(w.validate().iter().any(|x| x.index == 1 && x.rule == "finite position"));
    }

    #[test]
    fn total_mass_sums() {
        let mut v = PointCloudVarifold::from_positions(2, 1, vec![0.0; 6], None).unwrap();
        v.masses = vec![1.0, 2.0, 3.0];
        assert_eq!(v.total_mass(), 6.0);
        let e = PointCloudVarifold::from_positions(2, 1, vec![], None).unwrap();
        assert_eq!(e.total_mass(), 0.0);
    }

    fn unit(theta: f64) -> [f64; 2] {
        [libm::cos(theta), libm::sin(theta)]
    }

    fn sphere_frame(a: f64, b: f64) -> [f64; 6] {
        // orthonormal 2-frame in R^3 spanning the tangent plane of the unit
        // sphere at spherical angles (a, b)
        let t1 = [-libm::sin(a), libm::cos(a), 0.0];
        let t2 = [libm::cos(a) * libm::cos(b), libm::sin(a) * libm::cos(b), -libm::sin(b)];
        [t1[0], t1[1], t1[2], t2[0], t2[1], t2[2]]
    }

    proptest! {
        #[test]
        fn projector_algebra_2d(ti in 0.0f64..6.3, tj in 0.0f64..6.3, vx in -5.0f64..5.0, vy in -5.0f64..5.0) {
            let (fi, fj, v) = (unit(ti), unit(tj), [vx, vy]);
            let mut p = [0.0; 2];
            let mut pp = [0.0; 2];
            tangent_part(&fj, &v, &mut p);
            tangent_part(&fj, &p, &mut pp);
            let scale = 1.0 + vx.abs() + vy.abs();
            for k in 0..2 {
                prop_assert!((pp[k] - p[k]).abs() <= 1e-12 * scale);
            }
            let t = project(ProjectorKind::TangentJ, &fi, &fj, &v).unwrap();
            let nneg = project(ProjectorKind::NormalJNeg, &fi, &fj, &v).unwrap();
            let two = project(ProjectorKind::TwoId, &fi, &fj, &v).unwrap();
            for k in 0..2 {
                // 2v = 2 Pi_P v + 2 Pi_P^perp v = 2t - nneg
                prop_assert!((two[k] - (2.0 * t[k] - nneg[k])).abs() <= 1e-12 * scale);
            }
            let vn = libm::sqrt(vx * vx + vy * vy);
            for kind in ProjectorKind::ALL {
                let w = project(kind, &fi, &fj, &v).unwrap();
                prop_assert!(libm::sqrt(w[0] * w[0] + w[1] * w[1]) <= 2.0 * vn * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn projector_norm_bound_3d(a in 0.0f64..6.3, b in 0.0f64..3.1, c in 0.0f64..6.3, e in 0.0f64..3.1,
                                   v in proptest::array::uniform3(-3.0f64..3.0)) {
            let fi = sphere_frame(a, b);
            let fj = sphere_frame(c, e);
            let vn = libm::sqrt(dot(&v, &v));
            for kind in ProjectorKind::ALL {
                let w = project(kind, &fi, &fj, &v).unwrap();
                prop_assert!(libm::sqrt(dot(&w, &w)) <= 2.0 * vn * (1.0 + 1e-12) + 1e-15);
            }
            let mut m = [0.0; 9];
            projector_matrix(ProjectorKind::NormalITangentJ, &fi, &fj, 3, &mut m);
            let direct = project(ProjectorKind::NormalITangentJ, &fi, &fj, &v).unwrap();
            let mut via = [0.0; 3];
            crate::linalg::mat_vec(&m, &v, &mut via);
            for k in 0..3 {
                prop_assert!((via[k] - direct[k]).abs() < 1e-12);
            }
        }
    }
}

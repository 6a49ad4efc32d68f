use proptest::prelude::*;
use varimotion_core::estimators::approximate_curvature;
use varimotion_core::flow::{Flow, StepSystem};
use varimotion_core::varifold::project;
use varimotion_core::{
    ExpKernel, FlowConfig, NeighborCounts, NeighborGraph, PinRule, PointCloudVarifold, ProjectorKind, ShapeKind,
    ShapeSpec,
};

const COUNTS: NeighborCounts = NeighborCounts {
    k_eps: 9,
    k_sigma: 9,
    k_delta: 5,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Orthonormal 2-frame in R^3 from two generic vectors.
fn frame3(a: [f64; 3], b: [f64; 3]) -> Option<Vec<f64>> {
    let na = norm(&a);
    if na < 1e-3 {
        return None;
    }
    let u = a.map(|x| x / na);
    let c: f64 = u.iter().zip(&b).map(|(x, y)| x * y).sum();
    let w = [b[0] - c * u[0], b[1] - c * u[1], b[2] - c * u[2]];
    let nw = norm(&w);
    if nw < 1e-3 {
        return None;
    }
    Some(vec![u[0], u[1], u[2], w[0] / nw, w[1] / nw, w[2] / nw])
}

/// Closed curve `r(t) = 1 + a cos(3t)` sampled counterclockwise at sorted
/// angles `base + jitter`.
fn wobbly_curve(n: usize, a: f64, jitter: &[f64]) -> Vec<f64> {
    (0..n)
        .flat_map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + 0.4 * jitter[i]) / n as f64;
            let r = 1.0 + a * (3.0 * t).cos();
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn curve_flow(pos: Vec<f64>, kind: ProjectorKind) -> Flow<ExpKernel> {
    let v = PointCloudVarifold::from_positions(2, 1, pos, None).unwrap();
    Flow::new(v, ExpKernel::new(2), FlowConfig::new(1e-3, kind, COUNTS)).unwrap()
}

fn curve_args() -> impl Strategy<Value = (usize, f64, Vec<f64>)> {
    (40usize..120, 0.0f64..0.15).prop_flat_map(|(n, a)| (Just(n), Just(a), prop::collection::vec(-1.0f64..1.0, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_algebra_3d(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        c in prop::array::uniform3(-1.0f64..1.0),
        e in prop::array::uniform3(-1.0f64..1.0),
        v in prop::array::uniform3(-4.0f64..4.0),
    ) {
        let (Some(fi), Some(fj)) = (frame3(a, b), frame3(c, e)) else { return Ok(()) };
        let t = project(ProjectorKind::TangentJ, &fi, &fj, &v).unwrap();
        let tt = project(ProjectorKind::TangentJ, &fi, &fj, &t).unwrap();
        let m = project(ProjectorKind::NormalJNeg, &fi, &fj, &v).unwrap();
        let two = project(ProjectorKind::TwoId, &fi, &fj, &v).unwrap();
        for k in 0..3 {
            prop_assert!((tt[k] - t[k]).abs() <= 1e-12);
            // 2v = 2 Pi_Pj v + 2 Pi_Pj^perp v
            prop_assert!((2.0 * t[k] - m[k] - two[k]).abs() <= 1e-12);
        }
        for kind in ProjectorKind::ALL {
            let p = project(kind, &fi, &fj, &v).unwrap();
            prop_assert!(norm(&p) <= 2.0 * norm(&v) * (1.0 + 1e-12), "{kind}");
        }
    }

    #[test]
    fn eps_ball_holds_k_eps_neighbors(pts in prop::collection::vec(-1.0f64..1.0, 60..240)) {
        let pos = pts[..pts.len() / 3 * 3].to_vec();
        let g = NeighborGraph::build(&pos, 3, COUNTS, 0).unwrap();
        for i in 0..g.len() {
            if !g.eps_ties[i] {
                prop_assert_eq!(g.eps_stencil(i).count(), COUNTS.k_eps);
            }
            // sigma and delta balls count the center itself
            prop_assert_eq!(g.neighbors(i).iter().filter(|nb| nb.dist < g.sigma[i]).count(), COUNTS.k_sigma - 1);
        }
    }

    #[test]
    fn cached_distances_are_fresh(
        pts in prop::collection::vec(-1.0f64..1.0, 60),
        shift in prop::collection::vec(-0.05f64..0.05, 60),
    ) {
        let mut g = NeighborGraph::build(&pts, 2, COUNTS, 0).unwrap();
        let moved: Vec<f64> = pts.iter().zip(&shift).map(|(p, s)| p + s).collect();
        g.refresh_distances(&moved).unwrap();
        for i in 0..g.len() {
            for nb in g.neighbors(i) {
                let j = nb.index;
                let d = ((moved[2 * i] - moved[2 * j]).powi(2) + (moved[2 * i + 1] - moved[2 * j + 1]).powi(2)).sqrt();
                prop_assert!((nb.dist - d).abs() <= 1e-15 * (1.0 + d));
            }
        }
    }

    #[test]
    fn curvature_is_rigid_motion_equivariant((n, a, jitter) in curve_args(), phi in 0.0f64..6.3, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let pos = wobbly_curve(n, a, &jitter);
        let (c, s) = (phi.cos(), phi.sin());
        let moved: Vec<f64> = pos
            .chunks_exact(2)
            .flat_map(|p| [c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy])
            .collect();
        for kind in [ProjectorKind::NormalI, ProjectorKind::TwoId, ProjectorKind::NormalITangentJ] {
            let h = curve_flow(pos.clone(), kind).curvature().unwrap();
            let hm = curve_flow(moved.clone(), kind).curvature().unwrap();
            for i in 0..n {
                let (u, w) = (h.vector(i), hm.vector(i));
                prop_assert!((c * u[0] - s * u[1] - w[0]).abs() <= 1e-10, "{kind} at {i}");
                prop_assert!((s * u[0] + c * u[1] - w[1]).abs() <= 1e-10, "{kind} at {i}");
            }
        }
    }

    #[test]
    fn curvature_scales_inversely((n, a, jitter) in curve_args(), scale in 0.05f64..20.0) {
        let pos = wobbly_curve(n, a, &jitter);
        let scaled: Vec<f64> = pos.iter().map(|x| x * scale).collect();
        let h = curve_flow(pos, ProjectorKind::NormalI).curvature().unwrap();
        let hs = curve_flow(scaled, ProjectorKind::NormalI).curvature().unwrap();
        for i in 0..n {
            let expect = h.magnitude(i) / scale;
            prop_assert!((hs.magnitude(i) - expect).abs() <= 1e-8 * expect.max(1e-12));
        }
    }

    #[test]
    fn convex_curve_curvature_points_inward((n, a, jitter) in curve_args()) {
        // r = 1 + a cos 3t stays convex for a < 1/10
        let a = a.min(0.09);
        let pos = wobbly_curve(n, a, &jitter);
        let (cx, cy) = pos.chunks_exact(2).fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        let (cx, cy) = (cx / n as f64, cy / n as f64);
        let flow = curve_flow(pos, ProjectorKind::NormalI);
        let h = flow.curvature().unwrap();
        for i in 0..n {
            let x = flow.state.point(i);
            let hv = h.vector(i);
            prop_assert!(hv[0] * (x[0] - cx) + hv[1] * (x[1] - cy) < 0.0, "point {i}");
        }
    }

    #[test]
    fn pinned_points_never_move(
        (n, a, jitter) in curve_args(),
        pins in prop::collection::vec(any::<bool>(), 120),
        kind in prop::sample::select(ProjectorKind::ALL.to_vec()),
    ) {
        let pos = wobbly_curve(n, a, &jitter);
        let v = PointCloudVarifold::from_positions(2, 1, pos.clone(), Some(pins[..n].to_vec())).unwrap();
        let mut flow = Flow::new(v, ExpKernel::new(2), FlowConfig::new(2e-4, kind, COUNTS)).unwrap();
        for _ in 0..3 {
            flow.step(None).unwrap();
        }
        for i in (0..n).filter(|&i| pins[i]) {
            prop_assert_eq!(flow.state.point(i), &pos[2 * i..2 * i + 2]);
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical((n, a, jitter) in curve_args()) {
        let pos = wobbly_curve(n, a, &jitter);
        let mut f1 = curve_flow(pos.clone(), ProjectorKind::NormalI);
        let mut f2 = curve_flow(pos, ProjectorKind::NormalI);
        for _ in 0..4 {
            let (d1, d2) = (f1.step(None).unwrap(), f2.step(None).unwrap());
            prop_assert_eq!(d1, d2);
        }
        prop_assert_eq!(&f1.state, &f2.state);
    }

    #[test]
    fn two_id_systems_are_diagonally_dominant(
        pts in prop::collection::vec(-1.0f64..1.0, 40..200),
        tau in 1e-5f64..1.0,
    ) {
        let pos = pts[..pts.len() / 2 * 2].to_vec();
        let v = PointCloudVarifold::from_positions(2, 1, pos, None).unwrap();
        let flow = Flow::new(v, ExpKernel::new(2), FlowConfig::new(tau, ProjectorKind::TwoId, COUNTS)).unwrap();
        let sys = StepSystem::assemble(&flow.state, &flow.state.positions, &flow.graph, &flow.kernels, ProjectorKind::TwoId, tau).unwrap();
        prop_assert!(sys.dominance_margin() > 0.0);
        let h = approximate_curvature(&flow.state, &flow.graph, &flow.kernels, ProjectorKind::TwoId).unwrap();
        prop_assert!(h.vectors.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn steiner_square_pins_four_corners(n in 8usize..600) {
        let v = ShapeSpec::new(ShapeKind::SquareSteiner { side: 1.0 }, n).generate().unwrap();
        prop_assert_eq!(v.pinned.iter().filter(|&&p| p).count(), 4);
    }

    #[test]
    fn solid_edges_are_pinned(n in 20usize..3000) {
        for (kind, edges, corners) in [
            (ShapeKind::TetrahedronFaces { side: 1.0 }, 6, 4),
            (ShapeKind::CubeFaces { side: 1.0 }, 12, 8),
        ] {
            let faces = if corners == 4 { 2.0 } else { 6.0 };
            let spec = ShapeSpec::new(kind, n);
            prop_assert_eq!(spec.pin, PinRule::EdgesAndCorners);
            let v = spec.generate().unwrap();
            let m = (((v.len() - 2) as f64 / faces).sqrt()).round() as usize;
            prop_assert_eq!(v.pinned.iter().filter(|&&p| p).count(), edges * (m - 1) + corners);
        }
    }
}

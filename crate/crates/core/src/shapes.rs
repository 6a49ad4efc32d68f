//! Initial configurations and seeded noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::varifold::PointCloudVarifold;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Circle of radius `radius` centered at the origin.
    Circle { radius: f64 },
    /// `r(t) = scale (1 + amplitude sin(6t + pi/2))`.
    Flower { scale: f64, amplitude: f64 },
    /// Two circles of radius `radius`, centers `(+-offset, 0)`.
    DoubleCircle { radius: f64, offset: f64 },
    /// Three circles of radius `radius`, centers at distance `offset` from
    /// the origin at 90, 210 and 330 degrees.
    TripleCircle { radius: f64, offset: f64 },
    /// Perimeter of `[0, side]^2`.
    SquareSteiner { side: f64 },
    /// Half-lines from the origin at the given angles (degrees). Points sit
    /// at `(k + 1/2) spacing` along each branch; `n` counts all branches.
    Junction { angles_deg: Vec<f64>, spacing: f64 },
    /// Faces of the tetrahedron with corners `0, e1, e2, e3`, scaled by `side`.
    TetrahedronFaces { side: f64 },
    /// Faces of `[0, side]^3`.
    CubeFaces { side: f64 },
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Circle { .. } => "circle",
            ShapeKind::Flower { .. } => "flower",
            ShapeKind::DoubleCircle { .. } => "double-circle",
            ShapeKind::TripleCircle { .. } => "triple-circle",
            ShapeKind::SquareSteiner { .. } => "square-steiner",
            ShapeKind::Junction { .. } => "junction",
            ShapeKind::TetrahedronFaces { .. } => "tetrahedron",
            ShapeKind::CubeFaces { .. } => "cube",
        }
    }

    /// The named shape with its default geometry.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "circle" => ShapeKind::Circle { radius: 0.5 },
            "flower" => ShapeKind::Flower {
                scale: 0.5,
                amplitude: 0.4,
            },
            "double-circle" => ShapeKind::DoubleCircle {
                radius: 0.5,
                offset: 0.3,
            },
            "triple-circle" => ShapeKind::TripleCircle {
                radius: 0.5,
                offset: 0.3,
            },
            "square-steiner" => ShapeKind::SquareSteiner { side: 1.0 },
            "junction" => ShapeKind::Junction {
                angles_deg: vec![0.0, 120.0, 240.0],
                spacing: 0.01,
            },
            "tetrahedron" => ShapeKind::TetrahedronFaces { side: 1.0 },
            "cube" => ShapeKind::CubeFaces { side: 1.0 },
            _ => {
                return Err(CoreError::Config(format!(
                    "unknown shape `{name}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub const NAMES: [&'static str; 8] = [
        "circle",
        "flower",
        "double-circle",
        "triple-circle",
        "square-steiner",
        "junction",
        "tetrahedron",
        "cube",
    ];

    pub fn ambient_dim(&self) -> usize {
        match self {
            ShapeKind::TetrahedronFaces { .. } | ShapeKind::CubeFaces { .. } => 3,
            _ => 2,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.ambient_dim() - 1
    }

    pub fn default_pin(&self) -> PinRule {
        match self {
            ShapeKind::SquareSteiner { .. } => PinRule::Corners,
            ShapeKind::TetrahedronFaces { .. } | ShapeKind::CubeFaces { .. } => PinRule::EdgesAndCorners,
            _ => PinRule::None,
        }
    }

    /// Natural center used for radius diagnostics.
    pub fn center(&self) -> Vec<f64> {
        match *self {
            ShapeKind::SquareSteiner { side } => vec![side / 2.0; 2],
            ShapeKind::TetrahedronFaces { side } => vec![side / 4.0; 3],
            ShapeKind::CubeFaces { side } => vec![side / 2.0; 3],
            _ => vec![0.0; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PinRule {
    #[default]
    None,
    Corners,
    EdgesAndCorners,
}

impl PinRule {
    pub fn name(self) -> &'static str {
        match self {
            PinRule::None => "none",
            PinRule::Corners => "corners",
            PinRule::EdgesAndCorners => "edges+corners",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PinRule::None),
            "corners" => Ok(PinRule::Corners),
            "edges+corners" => Ok(PinRule::EdgesAndCorners),
            _ => Err(CoreError::Config(format!(
                "unknown pin rule `{s}` (expected none, corners or edges+corners)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub n: usize,
    pub pin: PinRule,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, n: usize) -> Self {
        let pin = kind.default_pin();
        Self { kind, n, pin }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(format!("{}: {m}", self.kind.name())));
        if self.n < 4 {
            return bad("n must be at least 4");
        }
        let positive = match &self.kind {
            ShapeKind::Circle { radius } => *radius > 0.0,
            ShapeKind::Flower { scale, amplitude } => *scale > 0.0 && *amplitude >= 0.0 && *amplitude < 1.0,
            ShapeKind::DoubleCircle { radius, offset } | ShapeKind::TripleCircle { radius, offset } => {
                *radius > 0.0 && *offset >= 0.0
            }
            ShapeKind::SquareSteiner { side }
            | ShapeKind::TetrahedronFaces { side }
            | ShapeKind::CubeFaces { side } => *side > 0.0,
            ShapeKind::Junction { angles_deg, spacing } => {
                if angles_deg.is_empty() {
                    return bad("junction needs at least one branch");
                }
                *spacing > 0.0 && angles_deg.iter().all(|a| a.is_finite())
            }
        };
        if !positive {
            return bad("geometry parameters must be positive");
        }
        let pin_ok = match (&self.kind, self.pin) {
            (_, PinRule::None) => true,
            (ShapeKind::SquareSteiner { .. }, PinRule::Corners) => true,
            (ShapeKind::TetrahedronFaces { .. } | ShapeKind::CubeFaces { .. }, _) => true,
            _ => false,
        };
        if !pin_ok {
            return bad(&format!("pin rule {} does not apply", self.pin.name()));
        }
        Ok(())
    }

    /// The point count actually generated: the nearest count compatible with
    /// the sampling layout.
    pub fn feasible_n(&self) -> usize {
        let n = self.n;
        match &self.kind {
            ShapeKind::DoubleCircle { .. } => round_to_multiple(n, 2),
            ShapeKind::TripleCircle { .. } => round_to_multiple(n, 3),
            ShapeKind::SquareSteiner { .. } => round_to_multiple(n, 4),
            ShapeKind::Junction { angles_deg, .. } => round_to_multiple(n, angles_deg.len()),
            ShapeKind::TetrahedronFaces { .. } => 2 * tetra_grid(n) * tetra_grid(n) + 2,
            ShapeKind::CubeFaces { .. } => 6 * cube_grid(n) * cube_grid(n) + 2,
            _ => n,
        }
    }

    /// Positions and pin mask. Masses are set to 1 and frames to the first
    /// coordinate axes, except for junctions which carry their exact
    /// tangents and masses equal to the spacing.
    pub fn generate(&self) -> Result<PointCloudVarifold> {
        self.validate()?;
        let n = self.feasible_n();
        let mut pins = vec![false; n];
        let positions = match self.kind {
            ShapeKind::Circle { radius } => closed_curve(n, |_| radius),
            ShapeKind::Flower { scale, amplitude } => {
                closed_curve(n, |t| scale * (1.0 + amplitude * libm::sin(6.0 * t + PI / 2.0)))
            }
            ShapeKind::DoubleCircle { radius, offset } => {
                circles(n, radius, &[[-offset, 0.0], [offset, 0.0]])
            }
            ShapeKind::TripleCircle { radius, offset } => {
                let c: Vec<[f64; 2]> = [90.0f64, 210.0, 330.0]
                    .iter()
                    .map(|a| {
                        let a = a.to_radians();
                        [offset * libm::cos(a), offset * libm::sin(a)]
                    })
                    .collect();
                circles(n, radius, &c)
            }
            ShapeKind::SquareSteiner { side } => {
                if self.pin == PinRule::Corners {
                    for k in 0..4 {
                        pins[k * n / 4] = true;
                    }
                }
                square(n, side)
            }
            ShapeKind::Junction {
                ref angles_deg,
                spacing,
            } => return junction(angles_deg, n / angles_deg.len(), spacing),
            ShapeKind::TetrahedronFaces { side } => {
                let (p, edge, corner) = tetrahedron(tetra_grid(self.n), side);
                for (i, pin) in pins.iter_mut().enumerate() {
                    *pin = match self.pin {
                        PinRule::EdgesAndCorners => edge[i],
                        PinRule::Corners => corner[i],
                        PinRule::None => false,
                    };
                }
                p
            }
            ShapeKind::CubeFaces { side } => {
                let (p, edge, corner) = cube(cube_grid(self.n), side);
                for (i, pin) in pins.iter_mut().enumerate() {
                    *pin = match self.pin {
                        PinRule::EdgesAndCorners => edge[i],
                        PinRule::Corners => corner[i],
                        PinRule::None => false,
                    };
                }
                p
            }
        };
        let d = self.kind.intrinsic_dim();
        PointCloudVarifold::from_positions(self.kind.ambient_dim(), d, positions, Some(pins))
    }
}

fn round_to_multiple(n: usize, k: usize) -> usize {
    let down = n / k * k;
    if down == 0 {
        k
    } else if n - down <= down + k - n {
        down
    } else {
        down + k
    }
}

/// Grid resolution `m` whose count `c(m)` is nearest to `n`.
fn nearest_grid(n: usize, count: impl Fn(usize) -> usize) -> usize {
    let mut m = 1;
    while count(m + 1) <= n {
        m += 1;
    }
    if count(m + 1) - n < n.saturating_sub(count(m)) {
        m + 1
    } else {
        m
    }
}

fn tetra_grid(n: usize) -> usize {
    nearest_grid(n, |m| 2 * m * m + 2)
}

fn cube_grid(n: usize) -> usize {
    nearest_grid(n, |m| 6 * m * m + 2)
}

/// `x_i = x(2 i pi / n)` for a polar curve `r(t)`.
fn closed_curve(n: usize, r: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n)
        .flat_map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let rt = r(t);
            [rt * libm::cos(t), rt * libm::sin(t)]
        })
        .collect()
}

fn circles(n: usize, radius: f64, centers: &[[f64; 2]]) -> Vec<f64> {
    let per = n / centers.len();
    centers
        .iter()
        .flat_map(|c| {
            closed_curve(per, |_| radius)
                .chunks_exact(2)
                .flat_map(|p| [p[0] + c[0], p[1] + c[1]])
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Counterclockwise from the corner `(0, 0)` with arc-length spacing `4 side / n`.
fn square(n: usize, side: f64) -> Vec<f64> {
    let per = n / 4;
    let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        for i in 0..per {
            let s = i as f64 / per as f64;
            out.push(a[0] + s * (b[0] - a[0]));
            out.push(a[1] + s * (b[1] - a[1]));
        }
    }
    out
}

/// Half-lines with exact tangents and masses equal to the spacing.
pub fn junction(angles_deg: &[f64], per_branch: usize, spacing: f64) -> Result<PointCloudVarifold> {
    let mut pos = Vec::with_capacity(2 * per_branch * angles_deg.len());
    let mut frames = Vec::with_capacity(pos.capacity());
    for a in angles_deg {
        let a = a.to_radians();
        let u = [libm::cos(a), libm::sin(a)];
        for k in 0..per_branch {
            let t = (k as f64 + 0.5) * spacing;
            pos.extend([t * u[0], t * u[1]]);
            frames.extend(u);
        }
    }
    let mut v = PointCloudVarifold::from_positions(2, 1, pos, None)?;
    v.tangents = frames;
    v.masses = vec![spacing; v.len()];
    Ok(v)
}

type Surface = (Vec<f64>, Vec<bool>, Vec<bool>);

/// Integer barycentric grid on the four faces of the tetrahedron with
/// corners `0, e1, e2, e3`; `2 m^2 + 2` points. Edge points have at most two
/// nonzero weights.
fn tetrahedron(m: usize, side: f64) -> Surface {
    let (mut p, mut edge, mut corner) = (Vec::new(), Vec::new(), Vec::new());
    for b in 0..=m {
        for c in 0..=m - b {
            for e in 0..=m - b - c {
                let a = m - b - c - e;
                let zeros = [a, b, c, e].iter().filter(|&&w| w == 0).count();
                if zeros == 0 {
                    continue;
                }
                p.extend([b, c, e].map(|w| side * w as f64 / m as f64));
                edge.push(zeros >= 2);
                corner.push(zeros == 3);
            }
        }
    }
    (p, edge, corner)
}

/// Integer grid on the faces of `[0, side]^3`; `6 m^2 + 2` points.
fn cube(m: usize, side: f64) -> Surface {
    let (mut p, mut edge, mut corner) = (Vec::new(), Vec::new(), Vec::new());
    let on = |w: usize| w == 0 || w == m;
    for i in 0..=m {
        for j in 0..=m {
            for k in 0..=m {
                let hits = [i, j, k].iter().filter(|&&w| on(w)).count();
                if hits == 0 {
                    continue;
                }
                p.extend([i, j, k].map(|w| side * w as f64 / m as f64));
                edge.push(hits >= 2);
                corner.push(hits == 3);
            }
        }
    }
    (p, edge, corner)
}

/// I.i.d. `N(0, std^2)` offsets on every coordinate of every unpinned point,
/// drawn in index order from ChaCha8 seeded with `seed`.
pub fn add_noise(v: &mut PointCloudVarifold, std: f64, seed: u64) -> Result<()> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(CoreError::Config(format!("noise std must be nonnegative, got {std}")));
    }
    if std == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std).map_err(|e| CoreError::Config(format!("{e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = v.ambient_dim();
    for i in 0..v.len() {
        if v.pinned[i] {
            continue;
        }
        for x in &mut v.positions[i * n..(i + 1) * n] {
            *x += normal.sample(&mut rng);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_point_circle() {
        let v = ShapeSpec::new(ShapeKind::Circle { radius: 0.5 }, 4).generate().unwrap();
        let expect = [[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]];
        for (i, e) in expect.iter().enumerate() {
            assert!((v.point(i)[0] - e[0]).abs() < 1e-16);
            assert!((v.point(i)[1] - e[1]).abs() < 1e-16);
        }
    }

    #[test]
    fn flower_point_at_quarter_pi() {
        // t = pi/4 is index 1 of 8; sin(3pi/2 + pi/2) = 0 so r = 0.5
        let spec = ShapeSpec::new(ShapeKind::from_name("flower").unwrap(), 8);
        let v = spec.generate().unwrap();
        let p = v.point(1);
        let c = 0.5 * core::f64::consts::FRAC_1_SQRT_2;
        assert!((p[0] - c).abs() < 1e-15 && (p[1] - c).abs() < 1e-15);
        // t = 0: r = 0.5 * 1.4
        assert!((v.point(0)[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn square_corners_pinned() {
        let spec = ShapeSpec::new(ShapeKind::SquareSteiner { side: 1.0 }, 301);
        assert_eq!(spec.feasible_n(), 300);
        let v = spec.generate().unwrap();
        assert_eq!(v.len(), 300);
        let pinned: Vec<usize> = (0..300).filter(|&i| v.pinned[i]).collect();
        assert_eq!(pinned, [0, 75, 150, 225]);
        assert_eq!(v.point(75), &[1.0, 0.0]);
        assert_eq!(v.point(150), &[1.0, 1.0]);
        assert_eq!(v.point(225), &[0.0, 1.0]);
    }

    #[test]
    fn surface_counts() {
        assert_eq!(ShapeSpec::new(ShapeKind::TetrahedronFaces { side: 1.0 }, 6052).feasible_n(), 6052);
        assert_eq!(ShapeSpec::new(ShapeKind::TetrahedronFaces { side: 1.0 }, 1500).feasible_n(), 1460);
        assert_eq!(ShapeSpec::new(ShapeKind::CubeFaces { side: 1.0 }, 18600).feasible_n(), 18818);
        let v = ShapeSpec::new(ShapeKind::TetrahedronFaces { side: 1.0 }, 6052).generate().unwrap();
        assert_eq!(v.len(), 6052);
        assert_eq!(v.pinned.iter().filter(|&&p| p).count(), 6 * 55 - 2);
        let v = ShapeSpec::new(ShapeKind::CubeFaces { side: 1.0 }, 200).generate().unwrap();
        let m = 6;
        assert_eq!(v.len(), 6 * m * m + 2);
        assert_eq!(v.pinned.iter().filter(|&&p| p).count(), 12 * m - 4);
    }

    #[test]
    fn tetrahedron_points_on_faces() {
        let v = ShapeSpec::new(ShapeKind::TetrahedronFaces { side: 1.0 }, 100).generate().unwrap();
        for i in 0..v.len() {
            let p = v.point(i);
            let on_slant = (p[0] + p[1] + p[2] - 1.0).abs() < 1e-12;
            assert!(on_slant || p.contains(&0.0));
            assert!(p.iter().all(|&x| x >= 0.0) && p.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn junction_fixture() {
        let v = junction(&[0.0, 120.0, 240.0], 5, 0.1).unwrap();
        assert_eq!(v.len(), 15);
        assert!((v.point(0)[0] - 0.05).abs() < 1e-16);
        assert!(v.validate().is_empty());
        assert!(v.masses.iter().all(|&m| m == 0.1));
    }

    #[test]
    fn invalid_specs() {
        assert!(ShapeSpec::new(ShapeKind::Circle { radius: 0.5 }, 3).generate().is_err());
        assert!(ShapeSpec::new(ShapeKind::Circle { radius: -1.0 }, 10).generate().is_err());
        let mut s = ShapeSpec::new(ShapeKind::Circle { radius: 0.5 }, 10);
        s.pin = PinRule::Corners;
        assert!(s.validate().is_err());
        assert!(ShapeKind::from_name("torus").is_err());
        for name in ShapeKind::NAMES {
            assert_eq!(ShapeKind::from_name(name).unwrap().name(), name);
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut v = ShapeSpec::new(ShapeKind::Circle { radius: 0.5 }, 50).generate().unwrap();
        let before = v.positions.clone();
        add_noise(&mut v, 0.0, 7).unwrap();
        assert_eq!(v.positions, before);
        assert!(add_noise(&mut v, -1.0, 7).is_err());
    }

    #[test]
    fn noise_is_reproducible_and_skips_pins() {
        let spec = ShapeSpec::new(ShapeKind::SquareSteiner { side: 1.0 }, 40);
        let mut a = spec.generate().unwrap();
        let mut b = spec.generate().unwrap();
        add_noise(&mut a, 0.0125, 42).unwrap();
        add_noise(&mut b, 0.0125, 42).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.point(10), &[1.0, 0.0]);
        let mut c = spec.generate().unwrap();
        add_noise(&mut c, 0.0125, 43).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn noise_variance() {
        let mut v = ShapeSpec::new(ShapeKind::Circle { radius: 0.5 }, 10_000).generate().unwrap();
        let before = v.positions.clone();
        let std = 0.0125;
        add_noise(&mut v, std, 1).unwrap();
        let offs: Vec<f64> = v.positions.iter().zip(&before).map(|(a, b)| a - b).collect();
        let mean = offs.iter().sum::<f64>() / offs.len() as f64;
        let var = offs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (offs.len() - 1) as f64;
        assert!((var / (std * std) - 1.0).abs() < 0.05, "{var}");
    }

    proptest! {
        #[test]
        fn closed_curves_on_analytic_curve(n in 4usize..500, r in 0.1f64..3.0) {
            let v = ShapeSpec::new(ShapeKind::Circle { radius: r }, n).generate().unwrap();
            for i in 0..v.len() {
                prop_assert!((libm::hypot(v.point(i)[0], v.point(i)[1]) - r).abs() < 1e-12);
            }
            let spec = ShapeSpec::new(ShapeKind::DoubleCircle { radius: r, offset: 0.3 }, n);
            let v = spec.generate().unwrap();
            prop_assert_eq!(v.len(), spec.feasible_n());
            prop_assert!(v.len() % 2 == 0);
            for i in 0..v.len() {
                let c = if i < v.len() / 2 { -0.3 } else { 0.3 };
                prop_assert!((libm::hypot(v.point(i)[0] - c, v.point(i)[1]) - r).abs() < 1e-12);
            }
        }

        #[test]
        fn feasible_n_is_nearest(n in 4usize..20_000) {
            let spec = ShapeSpec::new(ShapeKind::CubeFaces { side: 1.0 }, n);
            let got = spec.feasible_n();
            let m = cube_grid(n);
            for other in [m.saturating_sub(1).max(1), m + 1] {
                let c = 6 * other * other + 2;
                prop_assert!((got as i64 - n as i64).abs() <= (c as i64 - n as i64).abs());
            }
        }
    }
}

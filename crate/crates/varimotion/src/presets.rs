//! Named parameter sets for the standard experiments.

use varimotion_core::shapes::ShapeKind;
use varimotion_core::{FlowConfig, MassProfile, NeighborCounts, PinRule, ProjectorKind, ShapeSpec};

use crate::config::{RunConfig, RunLength};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> RunConfig,
}

impl Preset {
    pub fn config(&self) -> RunConfig {
        let mut cfg = (self.build)();
        cfg.name = self.name.to_string();
        cfg
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "circle400",
        summary: "circle R0 = 0.5, N = 400, k = (15, 17, 3), tau = 0.0005, to T = 0.1",
        build: || curve("circle", 400, (15, 17, 3), 0.0005, RunLength::Time(0.1), 20),
    },
    Preset {
        name: "flower400",
        summary: "six-petal flower r0 = 0.4, N = 400, k = (25, 19, 7), tau = 0.0025, to T = 0.05",
        build: || curve("flower", 400, (25, 19, 7), 0.0025, RunLength::Time(0.05), 4),
    },
    Preset {
        name: "double-circle1000",
        summary: "two crossing circles, N = 1000, k = (31, 15, 7), tau = 1/4000, to T = 0.11",
        build: || curve("double-circle", 1000, (31, 15, 7), 1.0 / 4000.0, RunLength::Time(0.11), 40),
    },
    Preset {
        name: "triple-circle1200",
        summary: "three crossing circles, N = 1200, k = (31, 15, 7), tau = 1/2400, to T = 0.5",
        build: || curve("triple-circle", 1200, (31, 15, 7), 1.0 / 2400.0, RunLength::Time(0.5), 240),
    },
    Preset {
        name: "steiner300",
        summary: "unit square with pinned corners, N = 300, k = (41, 15, 7), smooth mass profile, tau = 1/1200, rebuild 25, to T = 1",
        build: || {
            let mut c = curve("square-steiner", 300, (41, 15, 7), 1.0 / 1200.0, RunLength::Time(1.0), 120);
            c.flow.rebuild_every = 25;
            c.flow.mass_profile = MassProfile::Smooth;
            c.shape.pin = PinRule::Corners;
            c
        },
    },
    Preset {
        name: "tetra6052",
        summary: "tetrahedron faces with pinned edges, N = 6052, k = (26, 23, 17), tau = 0.005, rebuild 2, 97 steps",
        build: || {
            let mut c = curve("tetrahedron", 6052, (26, 23, 17), 0.005, RunLength::Steps(97), 12);
            c.flow.rebuild_every = 2;
            c
        },
    },
    Preset {
        name: "cube18600",
        summary: "cube faces with pinned edges, N = 18600, k = (21, 23, 9), tau = 0.01, rebuild 50, 2701 steps",
        build: || {
            let mut c = curve("cube", 18600, (21, 23, 9), 0.01, RunLength::Steps(2701), 400);
            c.flow.rebuild_every = 50;
            c
        },
    },
];

fn curve(
    shape: &str,
    n: usize,
    (k_eps, k_sigma, k_delta): (usize, usize, usize),
    tau: f64,
    length: RunLength,
    snapshot_every: usize,
) -> RunConfig {
    let kind = ShapeKind::from_name(shape).expect("preset shape names are valid");
    let counts = NeighborCounts {
        k_eps,
        k_sigma,
        k_delta,
    };
    RunConfig {
        name: String::new(),
        shape: ShapeSpec::new(kind, n),
        flow: FlowConfig::new(tau, ProjectorKind::NormalI, counts),
        noise_std: 0.0,
        seed: 0,
        length,
        snapshot_every,
        out: "out".into(),
        input: None,
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle400_parameters() {
        let c = find("circle400").unwrap().config();
        assert_eq!(c.shape.n, 400);
        assert_eq!(c.flow.counts, NeighborCounts { k_eps: 15, k_sigma: 17, k_delta: 3 });
        assert_eq!(c.flow.tau, 0.0005);
        assert_eq!(c.flow.projector, ProjectorKind::NormalI);
        assert_eq!(c.steps().unwrap(), 200);
    }

    #[test]
    fn steiner300_parameters() {
        let c = find("steiner300").unwrap().config();
        assert_eq!(c.shape.n, 300);
        assert_eq!(c.flow.counts.k_eps, 41);
        assert_eq!(c.flow.counts.k_sigma, 15);
        assert_eq!(c.flow.counts.k_delta, 7);
        assert_eq!(c.flow.mass_profile, MassProfile::Smooth);
        assert_eq!(c.flow.tau, 1.0 / 1200.0);
        assert_eq!(c.flow.rebuild_every, 25);
        assert_eq!(c.shape.pin, PinRule::Corners);
        assert_eq!(c.steps().unwrap(), 1200);
    }

    #[test]
    fn all_presets_validate() {
        for p in PRESETS {
            let c = p.config();
            c.validate().unwrap();
            assert_eq!(c.name, p.name);
        }
        assert_eq!(find("tetra6052").unwrap().config().steps().unwrap(), 97);
        assert_eq!(find("triple-circle1200").unwrap().config().steps().unwrap(), 1200);
        assert_eq!(find("double-circle1000").unwrap().config().steps().unwrap(), 440);
        assert!(find("sphere").is_none());
    }
}

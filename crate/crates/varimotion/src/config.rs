//! Run configuration: TOML file, preset expansion and command-line overrides.
//!
//! Every source is first read into a [`ConfigFile`] whose fields are all
//! optional. Layers are merged (later wins) on top of a preset, then
//! resolved and validated into a [`RunConfig`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use varimotion_core::shapes::ShapeKind;
use varimotion_core::{FlowConfig, MassProfile, NeighborCounts, PinRule, ProjectorKind, Scheme, ShapeSpec};

use crate::presets;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    Steps(usize),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub shape: ShapeSpec,
    pub flow: FlowConfig,
    pub noise_std: f64,
    pub seed: u64,
    pub length: RunLength,
    pub snapshot_every: usize,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
}

impl RunConfig {
    /// Step count; a final time is rounded to the nearest whole step.
    pub fn steps(&self) -> Result<usize, ConfigError> {
        match self.length {
            RunLength::Steps(k) => Ok(k),
            RunLength::Time(t) => {
                let k = (t / self.flow.tau).round();
                if (k * self.flow.tau - t).abs() > 1e-9 * t.max(1.0) {
                    return Err(ConfigError::new(
                        "run.time",
                        format!("{t} is not a whole number of steps of tau = {}", self.flow.tau),
                    ));
                }
                Ok(k as usize)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.flow;
        if !(f.tau > 0.0 && f.tau.is_finite()) {
            return Err(ConfigError::new("flow.tau", "must be positive"));
        }
        for (key, k) in [
            ("flow.k_eps", f.counts.k_eps),
            ("flow.k_sigma", f.counts.k_sigma),
            ("flow.k_delta", f.counts.k_delta),
            ("flow.rebuild_every", f.rebuild_every),
            ("flow.solver_max_iter", f.solver_max_iter),
            ("flow.implicit_fp_max_iter", f.implicit_fp_max_iter),
            ("run.snapshot_every", self.snapshot_every),
        ] {
            if k == 0 {
                return Err(ConfigError::new(key, "must be at least 1"));
            }
        }
        for (key, t) in [
            ("flow.solver_tol", f.solver_tol),
            ("flow.implicit_fp_tol", f.implicit_fp_tol),
        ] {
            if !(t > 0.0) {
                return Err(ConfigError::new(key, "must be positive"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(ConfigError::new("noise.std", "must be nonnegative"));
        }
        if let RunLength::Time(t) = self.length {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::new("run.time", "must be nonnegative"));
            }
        }
        self.shape
            .validate()
            .map_err(|e| ConfigError::new("shape", e.to_string()))?;
        let k_max = f.counts.k_max();
        if self.input.is_none() && k_max >= self.shape.feasible_n() {
            return Err(ConfigError::new(
                "flow",
                format!(
                    "max(k_eps, k_sigma, k_delta) + 1 = {k_max} needs more than {} points",
                    self.shape.feasible_n()
                ),
            ));
        }
        self.steps().map(|_| ())
    }

    /// Fully populated file form, used to echo the configuration.
    pub fn echo(&self) -> ConfigFile {
        let (radius, scale, amplitude, offset, side, angles_deg, spacing) = match &self.shape.kind {
            ShapeKind::Circle { radius } => (Some(*radius), None, None, None, None, None, None),
            ShapeKind::Flower { scale, amplitude } => (None, Some(*scale), Some(*amplitude), None, None, None, None),
            ShapeKind::DoubleCircle { radius, offset } | ShapeKind::TripleCircle { radius, offset } => {
                (Some(*radius), None, None, Some(*offset), None, None, None)
            }
            ShapeKind::SquareSteiner { side }
            | ShapeKind::TetrahedronFaces { side }
            | ShapeKind::CubeFaces { side } => (None, None, None, None, Some(*side), None, None),
            ShapeKind::Junction { angles_deg, spacing } => {
                (None, None, None, None, None, Some(angles_deg.clone()), Some(*spacing))
            }
        };
        let (steps, time) = match self.length {
            RunLength::Steps(k) => (Some(k), None),
            RunLength::Time(t) => (None, Some(t)),
        };
        ConfigFile {
            preset: None,
            shape: ShapeFile {
                kind: Some(self.shape.kind.name().into()),
                n: Some(self.shape.n),
                pin: Some(self.shape.pin.name().into()),
                radius,
                scale,
                amplitude,
                offset,
                side,
                angles_deg,
                spacing,
            },
            flow: FlowFile {
                tau: Some(self.flow.tau),
                projector: Some(self.flow.projector.name().into()),
                scheme: Some(self.flow.scheme.name().into()),
                k_eps: Some(self.flow.counts.k_eps),
                k_sigma: Some(self.flow.counts.k_sigma),
                k_delta: Some(self.flow.counts.k_delta),
                rebuild_every: Some(self.flow.rebuild_every),
                solver_tol: Some(self.flow.solver_tol),
                solver_max_iter: Some(self.flow.solver_max_iter),
                implicit_fp_tol: Some(self.flow.implicit_fp_tol),
                implicit_fp_max_iter: Some(self.flow.implicit_fp_max_iter),
                mass_profile: Some(mass_profile_name(self.flow.mass_profile).into()),
                estimate_tangents: Some(self.flow.estimate_tangents),
            },
            noise: NoiseFile {
                std: Some(self.noise_std),
                seed: Some(self.seed),
            },
            run: RunFile {
                steps,
                time,
                snapshot_every: Some(self.snapshot_every),
                out: Some(self.out.clone()),
                input: self.input.clone(),
            },
        }
    }
}

fn mass_profile_name(p: MassProfile) -> &'static str {
    match p {
        MassProfile::Indicator => "indicator",
        MassProfile::Smooth => "smooth",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub shape: ShapeFile,
    #[serde(default)]
    pub flow: FlowFile,
    #[serde(default)]
    pub noise: NoiseFile,
    #[serde(default)]
    pub run: RunFile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeFile {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub pin: Option<String>,
    pub radius: Option<f64>,
    pub scale: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub side: Option<f64>,
    pub angles_deg: Option<Vec<f64>>,
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFile {
    pub tau: Option<f64>,
    pub projector: Option<String>,
    pub scheme: Option<String>,
    pub k_eps: Option<usize>,
    pub k_sigma: Option<usize>,
    pub k_delta: Option<usize>,
    pub rebuild_every: Option<usize>,
    pub solver_tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub implicit_fp_tol: Option<f64>,
    pub implicit_fp_max_iter: Option<usize>,
    pub mass_profile: Option<String>,
    pub estimate_tangents: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub std: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub steps: Option<usize>,
    pub time: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($field:ident),*) => {
        $( if $over.$field.is_some() { $base.$field = $over.$field; } )*
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `over` replace those in `self`. Setting either run
    /// length replaces both, so a later layer can switch steps for time.
    pub fn merge(mut self, over: ConfigFile) -> ConfigFile {
        overlay!(self, over; preset);
        overlay!(self.shape, over.shape; kind, n, pin, radius, scale, amplitude, offset, side, angles_deg, spacing);
        overlay!(self.flow, over.flow; tau, projector, scheme, k_eps, k_sigma, k_delta, rebuild_every,
            solver_tol, solver_max_iter, implicit_fp_tol, implicit_fp_max_iter, mass_profile, estimate_tangents);
        overlay!(self.noise, over.noise; std, seed);
        if over.run.steps.is_some() || over.run.time.is_some() {
            self.run.steps = over.run.steps;
            self.run.time = over.run.time;
        }
        overlay!(self.run, over.run; snapshot_every, out, input);
        self
    }

    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        if self.run.steps.is_some() && self.run.time.is_some() {
            return Err(ConfigError::new("run", "steps and time are mutually exclusive"));
        }
        let mut cfg = match &self.preset {
            Some(name) => presets::find(name)
                .ok_or_else(|| {
                    ConfigError::new(
                        "preset",
                        format!("unknown preset `{name}` (expected one of {})", presets::names().join(", ")),
                    )
                })?
                .config(),
            None => {
                let kind = self
                    .shape
                    .kind
                    .as_deref()
                    .ok_or_else(|| ConfigError::new("shape.kind", "required when no preset is given"))?;
                let kind = ShapeKind::from_name(kind).map_err(|e| ConfigError::new("shape.kind", e.to_string()))?;
                let counts = NeighborCounts {
                    k_eps: 15,
                    k_sigma: 17,
                    k_delta: 3,
                };
                if self.run.steps.is_none() && self.run.time.is_none() {
                    return Err(ConfigError::new("run", "one of steps or time is required"));
                }
                RunConfig {
                    name: "custom".into(),
                    shape: ShapeSpec::new(kind, 400),
                    flow: FlowConfig::new(0.0005, ProjectorKind::NormalI, counts),
                    noise_std: 0.0,
                    seed: 0,
                    length: RunLength::Steps(0),
                    snapshot_every: 10,
                    out: "out".into(),
                    input: None,
                }
            }
        };
        self.apply_shape(&mut cfg)?;
        self.apply_flow(&mut cfg)?;
        if let Some(s) = self.noise.std {
            cfg.noise_std = s;
        }
        if let Some(s) = self.noise.seed {
            cfg.seed = s;
        }
        match (self.run.steps, self.run.time) {
            (Some(k), None) => cfg.length = RunLength::Steps(k),
            (None, Some(t)) => cfg.length = RunLength::Time(t),
            _ => {}
        }
        if let Some(k) = self.run.snapshot_every {
            cfg.snapshot_every = k;
        }
        if let Some(o) = self.run.out {
            cfg.out = o;
        }
        if self.run.input.is_some() {
            cfg.input = self.run.input;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_shape(&self, cfg: &mut RunConfig) -> Result<(), ConfigError> {
        let s = &self.shape;
        if let Some(name) = &s.kind {
            if name != cfg.shape.kind.name() {
                let kind = ShapeKind::from_name(name).map_err(|e| ConfigError::new("shape.kind", e.to_string()))?;
                cfg.shape = ShapeSpec::new(kind, cfg.shape.n);
            }
        }
        if let Some(n) = s.n {
            cfg.shape.n = n;
        }
        if let Some(p) = &s.pin {
            cfg.shape.pin = PinRule::from_name(p).map_err(|e| ConfigError::new("shape.pin", e.to_string()))?;
        }
        let kind_name = cfg.shape.kind.name();
        let misplaced = |key: &str| {
            ConfigError::new(
                format!("shape.{key}"),
                format!("not a parameter of shape `{kind_name}`"),
            )
        };
        macro_rules! set {
            ($field:ident, $target:expr) => {
                if let Some(v) = s.$field.clone() {
                    match $target {
                        Some(slot) => *slot = v,
                        None => return Err(misplaced(stringify!($field))),
                    }
                }
            };
        }
        let kind = &mut cfg.shape.kind;
        set!(radius, match kind {
            ShapeKind::Circle { radius }
            | ShapeKind::DoubleCircle { radius, .. }
            | ShapeKind::TripleCircle { radius, .. } => Some(radius),
            _ => None,
        });
        set!(scale, match kind {
            ShapeKind::Flower { scale, .. } => Some(scale),
            _ => None,
        });
        set!(amplitude, match kind {
            ShapeKind::Flower { amplitude, .. } => Some(amplitude),
            _ => None,
        });
        set!(offset, match kind {
            ShapeKind::DoubleCircle { offset, .. } | ShapeKind::TripleCircle { offset, .. } => Some(offset),
            _ => None,
        });
        set!(side, match kind {
            ShapeKind::SquareSteiner { side }
            | ShapeKind::TetrahedronFaces { side }
            | ShapeKind::CubeFaces { side } => Some(side),
            _ => None,
        });
        set!(angles_deg, match kind {
            ShapeKind::Junction { angles_deg, .. } => Some(angles_deg),
            _ => None,
        });
        set!(spacing, match kind {
            ShapeKind::Junction { spacing, .. } => Some(spacing),
            _ => None,
        });
        Ok(())
    }

    fn apply_flow(&self, cfg: &mut RunConfig) -> Result<(), ConfigError> {
        let f = &self.flow;
        let flow = &mut cfg.flow;
        if let Some(t) = f.tau {
            flow.tau = t;
        }
        if let Some(p) = &f.projector {
            flow.projector = p.parse().map_err(|e: varimotion_core::CoreError| {
                ConfigError::new("flow.projector", e.to_string())
            })?;
        }
        if let Some(s) = &f.scheme {
            flow.scheme = s
                .parse::<Scheme>()
                .map_err(|e| ConfigError::new("flow.scheme", e.to_string()))?;
        }
        if let Some(m) = &f.mass_profile {
            flow.mass_profile = match m.as_str() {
                "indicator" => MassProfile::Indicator,
                "smooth" => MassProfile::Smooth,
                _ => {
                    return Err(ConfigError::new(
                        "flow.mass_profile",
                        format!("unknown profile `{m}` (expected indicator or smooth)"),
                    ))
                }
            };
        }
        for (slot, v) in [
            (&mut flow.counts.k_eps, f.k_eps),
            (&mut flow.counts.k_sigma, f.k_sigma),
            (&mut flow.counts.k_delta, f.k_delta),
            (&mut flow.rebuild_every, f.rebuild_every),
            (&mut flow.solver_max_iter, f.solver_max_iter),
            (&mut flow.implicit_fp_max_iter, f.implicit_fp_max_iter),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(t) = f.solver_tol {
            flow.solver_tol = t;
        }
        if let Some(t) = f.implicit_fp_tol {
            flow.implicit_fp_tol = t;
        }
        if let Some(b) = f.estimate_tangents {
            flow.estimate_tangents = b;
        }
        Ok(())
    }
}

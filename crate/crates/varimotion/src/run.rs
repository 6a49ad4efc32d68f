//! The run loop and its artifacts.
//!
//! An output directory receives `config.toml` (the resolved configuration),
//! `metrics.csv` (one row per step, including step 0), `summary.json`, and
//! snapshots `snap_<step>.txt` (plus `snap_<step>.ply` in three dimensions)
//! every `snapshot_every` steps and at the last step.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use varimotion_core::flow::Flow;
use varimotion_core::metrics::circle_error;
use varimotion_core::shapes::{add_noise, ShapeKind};
use varimotion_core::{ExpKernel, PointCloudVarifold, StepDiagnostics};

use crate::config::{ConfigFile, RunConfig};
use crate::io;

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub step: usize,
    pub t: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub e: Option<f64>,
    #[serde(rename = "maxH")]
    pub max_h: f64,
    pub total_mass: f64,
    pub min_pair_dist: f64,
    pub components: usize,
    pub solver_iters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ConfigFile,
    pub requested_n: usize,
    pub n: usize,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub final_metrics: Option<MetricsRow>,
    pub wall_time_s: f64,
    pub failed_step: Option<usize>,
    pub failure: Option<String>,
    pub min_dominance_margin: f64,
    pub min_frame_dominance_margin: f64,
    pub max_solver_iterations: usize,
    pub max_degenerate: usize,
}

pub struct RunOutcome {
    pub rows: Vec<MetricsRow>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub summary: Summary,
    /// Final state, or the last good state on failure.
    pub flow: Option<Flow<ExpKernel>>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.summary.failure.is_none()
    }
}

/// Initial cloud: loaded from `input`, or generated from the shape, then
/// perturbed by the configured noise.
pub fn initial_cloud(cfg: &RunConfig) -> anyhow::Result<PointCloudVarifold> {
    let mut v = match &cfg.input {
        Some(path) => io::load_cloud(path).with_context(|| format!("loading {}", path.display()))?,
        None => cfg.shape.generate().context("generating the initial cloud")?,
    };
    add_noise(&mut v, cfg.noise_std, cfg.seed).context("adding noise")?;
    Ok(v)
}

fn center(cfg: &RunConfig, dim: usize) -> Vec<f64> {
    let c = cfg.shape.kind.center();
    if c.len() == dim {
        c
    } else {
        vec![0.0; dim]
    }
}

fn row(cfg: &RunConfig, d: &StepDiagnostics, positions: &[f64], z: &[f64]) -> MetricsRow {
    let dim = z.len();
    let radius = positions
        .chunks_exact(dim)
        .map(|x| x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let e = match (&cfg.shape.kind, &cfg.input) {
        (ShapeKind::Circle { radius: r0 }, None) => circle_error(positions, dim, z, d.time, *r0).ok(),
        _ => None,
    };
    MetricsRow {
        step: d.step,
        t: d.time,
        radius,
        e,
        max_h: d.max_curvature,
        total_mass: d.total_mass,
        min_pair_dist: d.min_pair_distance,
        components: d.components,
        solver_iters: d.solver_iterations,
        residual: d.residual,
    }
}

struct Sink {
    dir: PathBuf,
    csv: csv::Writer<fs::File>,
}

impl Sink {
    fn open(dir: &Path, cfg: &RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let echo = toml::to_string(&cfg.echo()).context("serializing config")?;
        fs::write(dir.join("config.toml"), echo).context("writing config.toml")?;
        let csv = csv::Writer::from_path(dir.join("metrics.csv")).context("opening metrics.csv")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
        })
    }

    fn row(&mut self, r: &MetricsRow) -> anyhow::Result<()> {
        self.csv.serialize(r).context("writing metrics.csv")?;
        self.csv.flush()?;
        Ok(())
    }

    fn snapshot(&self, flow: &Flow<ExpKernel>) -> anyhow::Result<()> {
        let stem = format!("snap_{:06}", flow.step);
        let path = self.dir.join(format!("{stem}.txt"));
        io::write_snapshot(&path, &flow.state, flow.step, flow.time())
            .with_context(|| format!("writing {}", path.display()))?;
        if flow.state.ambient_dim() == 3 && flow.state.intrinsic_dim() == 2 {
            let h = flow.curvature()?;
            let path = self.dir.join(format!("{stem}.ply"));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            io::write_ply(std::io::BufWriter::new(file), &flow.state, &h)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn summary(&self, s: &Summary) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(s)?;
        fs::write(self.dir.join("summary.json"), text + "\n").context("writing summary.json")?;
        Ok(())
    }
}

/// Execute a run. With `write` set, artifacts go to `cfg.out`.
///
/// A failing step does not make this return `Err`; it is recorded in the
/// summary and the outcome holds the last good state. `Err` is reserved for
/// setup and I/O failures.
pub fn run(cfg: &RunConfig, write: bool) -> anyhow::Result<RunOutcome> {
    run_with(cfg, write, |_| {})
}

/// As [`run`], calling `progress` after every step.
pub fn run_with(cfg: &RunConfig, write: bool, mut progress: impl FnMut(&MetricsRow)) -> anyhow::Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let steps = cfg.steps()?;
    let mut sink = if write { Some(Sink::open(&cfg.out, cfg)?) } else { None };
    let v = initial_cloud(cfg)?;
    let n = v.len();
    let z = center(cfg, v.ambient_dim());
    let kernels = ExpKernel::new(v.ambient_dim());

    let mut summary = Summary {
        config: cfg.echo(),
        requested_n: cfg.shape.n,
        n,
        steps_requested: steps,
        steps_completed: 0,
        final_metrics: None,
        wall_time_s: 0.0,
        failed_step: None,
        failure: None,
        min_dominance_margin: f64::INFINITY,
        min_frame_dominance_margin: f64::INFINITY,
        max_solver_iterations: 0,
        max_degenerate: 0,
    };
    let mut rows = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps + 1);

    let mut flow = match Flow::new(v, kernels, cfg.flow.clone()) {
        Ok(f) => f,
        Err(e) => {
            summary.failed_step = Some(0);
            summary.failure = Some(format!("initial estimation: {e}"));
            summary.wall_time_s = start.elapsed().as_secs_f64();
            if let Some(s) = &sink {
                s.summary(&summary)?;
            }
            return Ok(RunOutcome {
                rows,
                diagnostics,
                summary,
                flow: None,
            });
        }
    };

    let d0 = flow.snapshot_diagnostics(Some(&z))?;
    let r0 = row(cfg, &d0, &flow.state.positions, &z);
    summary.max_degenerate = d0.degenerate_count;
    if let Some(s) = &mut sink {
        s.row(&r0)?;
        s.snapshot(&flow)?;
    }
    progress(&r0);
    rows.push(r0);
    diagnostics.push(d0);

    for k in 1..=steps {
        let d = match flow.step(Some(&z)) {
            Ok(d) => d,
            Err(e) => {
                summary.failed_step = Some(k);
                summary.failure = Some(e.to_string());
                break;
            }
        };
        let r = row(cfg, &d, &flow.state.positions, &z);
        summary.steps_completed = k;
        summary.min_dominance_margin = summary.min_dominance_margin.min(d.dominance_margin);
        summary.min_frame_dominance_margin = summary.min_frame_dominance_margin.min(d.frame_dominance_margin);
        summary.max_solver_iterations = summary.max_solver_iterations.max(d.solver_iterations);
        summary.max_degenerate = summary.max_degenerate.max(d.degenerate_count);
        if let Some(s) = &mut sink {
            s.row(&r)?;
            if k % cfg.snapshot_every == 0 || k == steps {
                s.snapshot(&flow)?;
            }
        }
        progress(&r);
        rows.push(r);
        diagnostics.push(d);
    }

    if let Some(s) = &sink {
        if summary.failure.is_some() && summary.steps_completed % cfg.snapshot_every != 0 {
            s.snapshot(&flow)?;
        }
    }
    summary.final_metrics = rows.last().cloned();
    summary.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(s) = &sink {
        s.summary(&summary)?;
    }
    Ok(RunOutcome {
        rows,
        diagnostics,
        summary,
        flow: Some(flow),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunLength;
    use crate::presets;

    fn small_circle() -> RunConfig {
        let mut cfg = presets::find("circle400").unwrap().config();
        cfg.shape.n = 100;
        cfg.length = RunLength::Steps(4);
        cfg.snapshot_every = 3;
        cfg
    }

    #[test]
    fn rows_and_error_column() {
        let out = run(&small_circle(), false).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.rows.len(), 5);
        assert_eq!(out.rows[0].step, 0);
        assert_eq!(out.rows[4].t, 4.0 * 0.0005);
        assert!(out.rows.iter().all(|r| r.e.is_some() && r.components == 1));
        assert!(out.rows[0].e.unwrap() < 1e-12);
        assert_eq!(out.rows[0].solver_iters, 0);
        assert!(out.rows[1].solver_iters > 0);
    }

    #[test]
    fn artifacts_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_circle();
        cfg.out = dir.path().join("run");
        let out = run(&cfg, true).unwrap();
        assert!(out.succeeded());
        let csv = fs::read_to_string(cfg.out.join("metrics.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,t,R,e,maxH,total_mass,min_pair_dist,components,solver_iters,residual"
        );
        assert_eq!(lines.count(), 5);
        for k in [0, 3, 4] {
            assert!(cfg.out.join(format!("snap_{k:06}.txt")).exists(), "step {k}");
        }
        assert!(!cfg.out.join("snap_000001.txt").exists());
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(cfg.out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["steps_completed"], 4);
        assert_eq!(summary["config"]["flow"]["k_eps"], 15);
        assert!(summary["failure"].is_null());
        let echo = ConfigFile::load(&cfg.out.join("config.toml")).unwrap().resolve().unwrap();
        assert_eq!(echo.flow, cfg.flow);
    }

    #[test]
    fn non_circle_leaves_error_blank() {
        let mut cfg = presets::find("steiner300").unwrap().config();
        cfg.shape.n = 120;
        cfg.flow.counts.k_eps = 15;
        cfg.length = RunLength::Steps(1);
        let dir = tempfile::tempdir().unwrap();
        cfg.out = dir.path().to_path_buf();
        run(&cfg, true).unwrap();
        let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let first = csv.lines().nth(1).unwrap();
        assert_eq!(first.split(',').nth(3), Some(""));
    }

    #[test]
    fn failure_is_recorded() {
        let mut cfg = small_circle();
        cfg.flow.solver_max_iter = 1;
        cfg.flow.solver_tol = 1e-15;
        let out = run(&cfg, false).unwrap();
        assert!(!out.succeeded());
        assert_eq!(out.summary.failed_step, Some(1));
        assert_eq!(out.rows.len(), 1);
        assert!(out.summary.failure.as_ref().unwrap().contains("did not converge"));
    }
}

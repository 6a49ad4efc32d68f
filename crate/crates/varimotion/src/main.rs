use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use varimotion::config::{ConfigFile, FlowFile, NoiseFile, RunFile, ShapeFile};
use varimotion::presets;

#[derive(Parser)]
#[command(name = "varimotion", version, about = "Mean curvature motion of point cloud varifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow and write snapshots, metrics.csv and summary.json
    Run(RunArgs),
    /// List the built-in presets
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// none, corners or edges+corners
    #[arg(long)]
    pin: Option<String>,
    #[arg(long)]
    k_eps: Option<usize>,
    #[arg(long)]
    k_sigma: Option<usize>,
    #[arg(long)]
    k_delta: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, conflicts_with = "time")]
    steps: Option<usize>,
    /// Final time; must be a whole number of steps
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    projector: Option<String>,
    /// semi-implicit or implicit
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    rebuild_every: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Initial cloud: a snapshot or XYZ file
    #[arg(long)]
    input: Option<PathBuf>,
    /// Print one line per step
    #[arg(long, short)]
    verbose: bool,
}

impl RunArgs {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            preset: self.preset.clone(),
            shape: ShapeFile {
                kind: self.shape.clone(),
                n: self.n,
                pin: self.pin.clone(),
                ..Default::default()
            },
            flow: FlowFile {
                tau: self.tau,
                projector: self.projector.clone(),
                scheme: self.scheme.clone(),
                k_eps: self.k_eps,
                k_sigma: self.k_sigma,
                k_delta: self.k_delta,
                rebuild_every: self.rebuild_every,
                ..Default::default()
            },
            noise: NoiseFile {
                std: self.noise_std,
                seed: self.seed,
            },
            run: RunFile {
                steps: self.steps,
                time: self.time,
                snapshot_every: self.snapshot_every,
                out: self.out.clone(),
                input: self.input.clone(),
            },
        }
    }
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = file.merge(args.overrides()).resolve()?;
    let steps = cfg.steps()?;
    let feasible = cfg.shape.feasible_n();
    if cfg.input.is_none() && feasible != cfg.shape.n {
        eprintln!("note: {} points requested, {feasible} generated", cfg.shape.n);
    }
    eprintln!(
        "{}: {} steps of tau = {} into {}",
        cfg.name,
        steps,
        cfg.flow.tau,
        cfg.out.display()
    );
    let verbose = args.verbose;
    let out = varimotion::run_with(&cfg, true, |r| {
        if verbose {
            eprintln!(
                "step {:>6} t={:.6} R={:.6} maxH={:.4} mass={:.6} iters={}",
                r.step, r.t, r.radius, r.max_h, r.total_mass, r.solver_iters
            );
        }
    })
    .context("run failed")?;
    let s = &out.summary;
    if let Some(r) = &s.final_metrics {
        let e = r.e.map(|e| format!(" e={e:.6}")).unwrap_or_default();
        eprintln!(
            "done: step {} t={} R={:.6}{e} mass={:.6} components={} in {:.2}s",
            r.step, r.t, r.radius, r.total_mass, r.components, s.wall_time_s
        );
    }
    if let (Some(step), Some(msg)) = (s.failed_step, &s.failure) {
        eprintln!("error: step {step} failed: {msg}");
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in presets::PRESETS {
                println!("{:<18} {}", p.name, p.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use impcop_core::hierarchy::DependenceMode;
use impcop_core::models::CallCounter;
use impcop_core::pipeline::{self, GridConfig, RunConfig, TruthSpec};
use impcop_core::{CopulaSpec, Error, Result};

/// Imprecise probabilities from small data: multimodel inference over
/// marginals and copulas, and single-pass propagation through a model.
#[derive(Parser)]
#[command(name = "impcop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic data from a truth model.
    Simulate(SimulateArgs),
    /// Infer marginal and copula posteriors and assemble the ensemble.
    Infer(InferArgs),
    /// Full pipeline: inference, one model run and the CDF band.
    Propagate(RunArgs),
    /// Recompute a CDF band for a new ensemble from a stored run.
    Reweight(ReweightArgs),
    /// Summarize an output directory and verify its manifest.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Frank copula on the unit square.
    Frank,
    /// Five constituent properties with two Frank pairs.
    Composite,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config whose `truth` section defines the model.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    preset: Option<Preset>,
    /// Copula parameter of the preset (default 3 for frank, -10 for composite).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(short = 'n', long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Flags that override config fields.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Propagation sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    n_td: Option<usize>,
    #[arg(long)]
    n_tc: Option<usize>,
    /// Plausibility threshold of both inference stages.
    #[arg(long)]
    threshold: Option<f64>,
    /// copula, independence or gaussian_rho=<rho>.
    #[arg(long, value_parser = parse_dependence)]
    dependence: Option<DependenceMode>,
    #[arg(long)]
    lhs: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Copula recovery study over these data sizes, using the config's
    /// unit-square truth instead of a data file.
    #[arg(long, value_delimiter = ',')]
    study_sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
}

#[derive(Args)]
struct ReweightArgs {
    /// Directory of a previous `propagate` run.
    #[arg(long)]
    run: PathBuf,
    /// Ensemble JSON to reweight to.
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    /// Grid range; the stored band's grid is reused when absent.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long)]
    keep_members: bool,
}

fn parse_dependence(s: &str) -> std::result::Result<DependenceMode, String> {
    match s {
        "copula" => Ok(DependenceMode::Copula),
        "independence" => Ok(DependenceMode::Independence),
        _ => s
            .strip_prefix("gaussian_rho=")
            .and_then(|r| r.parse().ok())
            .map(DependenceMode::GaussianRho)
            .ok_or_else(|| format!("expected copula, independence or gaussian_rho=<rho>, got {s:?}")),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    let o = &args.overrides;
    if let Some(d) = &o.data {
        cfg.data = Some(d.clone());
    } else if let Some(d) = cfg.data.clone().filter(|d| d.is_relative()) {
        let base = args.config.parent().unwrap_or(Path::new("."));
        cfg.data = Some(base.join(d));
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(d) = &o.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(n) = o.samples {
        cfg.propagation_samples = n;
    }
    if let Some(n) = o.n_td {
        cfg.n_td = n;
    }
    if let Some(n) = o.n_tc {
        cfg.n_tc = n;
    }
    if let Some(t) = o.threshold {
        cfg.marginal_inference.threshold = t;
        cfg.copula_inference.threshold = t;
    }
    if let Some(d) = o.dependence {
        cfg.dependence = d;
    }
    if o.lhs {
        cfg.lhs = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let truth = match (args.preset, &args.config) {
        (Some(Preset::Frank), _) => TruthSpec::unit_square(CopulaSpec::new(
            impcop_core::CopulaFamily::Frank,
            &[args.theta.unwrap_or(3.0)],
        )?),
        (Some(Preset::Composite), _) => TruthSpec::composite(args.theta.unwrap_or(-10.0))?,
        (None, Some(path)) => RunConfig::load(path)?
            .truth
            .ok_or_else(|| Error::Input("config has no truth section".into()))?,
        (None, None) => unreachable!("clap requires one"),
    };
    let d = pipeline::run_simulate(&truth, args.samples, args.seed, &args.output)?;
    println!("wrote {} rows of {} to {}", d.len(), d.names.join(","), args.output.display());
    Ok(())
}

fn infer(args: InferArgs) -> Result<()> {
    let cfg = load_config(&args.run)?;
    if args.study_sizes.is_empty() {
        let dir = pipeline::run_infer(&cfg)?;
        print!("{}", pipeline::report(&dir)?);
        return Ok(());
    }
    let truth = cfg
        .truth
        .as_ref()
        .ok_or_else(|| Error::Input("a recovery study needs a truth section".into()))?;
    let rows = pipeline::recovery_study(
        truth,
        &cfg.copula_candidates,
        &cfg.copula_inference,
        &args.study_sizes,
        args.replicates,
        cfg.seed,
    )?;
    pipeline::write_recovery(&cfg.output_dir, &rows)?;
    println!("{:>6}  {:<12} median probability", "n", "model");
    for (n, m, p) in pipeline::recovery_medians(&rows) {
        println!("{n:>6}  {m:<12} {p:.4}");
    }
    Ok(())
}

fn propagate(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Input("config names no model".into()))?;
    let g = CallCounter::new(model.build());
    let dir = pipeline::run_pipeline(&cfg, &g)?;
    log::info!("{} model evaluations", g.calls());
    print!("{}", pipeline::report(&dir)?);
    Ok(())
}

fn reweight(args: ReweightArgs) -> Result<()> {
    let grid = GridConfig {
        points: args.points,
        range: args.range.map(|r| [r[0], r[1]]),
    };
    let band = pipeline::run_reweight(&args.run, &args.ensemble, &args.output_dir, &grid, args.keep_members)?;
    println!(
        "band over {} candidates on {} grid points, mean width {:.4}, no model evaluations",
        band.n_candidates,
        band.grid.len(),
        band.mean_width()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Infer(a) => infer(a),
        Command::Propagate(a) => propagate(a),
        Command::Reweight(a) => reweight(a),
        Command::Report { dir } => pipeline::report(&dir).map(|s| print!("{s}")),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

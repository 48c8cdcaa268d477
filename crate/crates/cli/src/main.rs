//! Command-line front end: train, evaluate, compare optimizers, and dump
//! sampled data or reference solutions as CSV.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinn_lab::harness::{self, RunConfig};
use pinn_lab::network::{param_count, MlpConfig, Params};
use pinn_lab::optim::{LrSchedule, OptimizerKind};
use pinn_lab::oracle::{self, OracleMethod};
use pinn_lab::report;
use pinn_lab::sampler::{self, SamplingMethod};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pinn-cli",
    about = "Physics-informed training laboratory for the viscous Burgers equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one optimizer; writes loss.csv, loss.svg, checkpoint.txt
    Train(RunArgs),
    /// Evaluate a checkpoint: surface/snapshot CSVs, SVG plots, error report
    Evaluate(EvaluateArgs),
    /// Train all four optimizers on one shared training set; writes compare.csv
    Compare(RunArgs),
    /// Write a sampled training set as CSV
    SampleDump(SampleDumpArgs),
    /// Write a reference solution grid as CSV
    OracleDump(OracleDumpArgs),
}

/// Knobs shared by `train` and `compare`. Every flag can also come from a
/// `key=value` config file; explicit flags win.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// adam | adamax | rmsprop | diffgrad
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial-condition point count
    #[arg(long)]
    n0: Option<usize>,
    /// Boundary point count
    #[arg(long)]
    nb: Option<usize>,
    /// Collocation point count
    #[arg(long)]
    nf: Option<usize>,
    /// uniform | lhs
    #[arg(long)]
    sampling: Option<String>,
    /// Piecewise-constant learning rate: "epoch:rate,epoch:rate,..."
    #[arg(long)]
    schedule: Option<String>,
    /// Report times, e.g. "0.25,0.5,0.75,1.0"
    #[arg(long)]
    snapshots: Option<String>,
    /// Evaluation grid as NTxNX, e.g. "100x256"
    #[arg(long)]
    grid: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file supplying any of the above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Force single-threaded execution for fair wall-clock numbers
    #[arg(long)]
    timing_mode: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    snapshots: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleDumpArgs {
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long)]
    nf: Option<usize>,
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleDumpArgs {
    /// colehopf | crank_nicolson
    #[arg(long)]
    method: String,
    /// Grid as NTxNX (crank_nicolson: interval counts, floor 1024x512)
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 128)]
    quad_order: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Compare(args) => run_compare(args),
        Command::SampleDump(args) => run_sample_dump(args),
        Command::OracleDump(args) => run_oracle_dump(args),
    }
}

/// `key=value` lines; `#` comments and blank lines ignored.
fn read_config_file(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value, got {line:?}", path.display(), i + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (nt, nx) = s.split_once(['x', 'X']).context("grid must look like NTxNX, e.g. 100x256")?;
    Ok((nt.trim().parse().context("grid NT")?, nx.trim().parse().context("grid NX")?))
}

fn parse_snapshots(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad snapshot time {p:?}")))
        .collect()
}

/// CLI flag if given, else config-file key, else the default carried in.
fn pick<T, E: std::fmt::Display>(
    flag: Option<T>,
    file: Option<&String>,
    parse: impl Fn(&str) -> Result<T, E>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file {
        Some(raw) => match parse(raw) {
            Ok(v) => Ok(v),
            Err(e) => bail!("config key {key}={raw:?}: {e}"),
        },
        None => Ok(default),
    }
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => HashMap::new(),
    };
    let defaults = RunConfig::default();

    let optimizer_raw = args.optimizer.clone().or_else(|| file.get("optimizer").cloned());
    let optimizer = match optimizer_raw {
        Some(raw) => raw.parse::<OptimizerKind>().map_err(|e| anyhow::anyhow!(e))?,
        None => defaults.optimizer,
    };
    let sampling_raw = args.sampling.clone().or_else(|| file.get("sampling").cloned());
    let sampling = match sampling_raw {
        Some(raw) => raw.parse::<SamplingMethod>()?,
        None => defaults.sampling,
    };
    let schedule_raw = args.schedule.clone().or_else(|| file.get("schedule").cloned());
    let schedule = match schedule_raw {
        Some(raw) => raw.parse::<LrSchedule>()?,
        None => defaults.schedule,
    };
    let snapshots_raw = args.snapshots.clone().or_else(|| file.get("snapshots").cloned());
    let snapshot_times = match snapshots_raw {
        Some(raw) => parse_snapshots(&raw)?,
        None => defaults.snapshot_times,
    };
    let grid_raw = args.grid.clone().or_else(|| file.get("grid").cloned());
    let (eval_nt, eval_nx) = match grid_raw {
        Some(raw) => parse_grid(&raw)?,
        None => (defaults.eval_nt, defaults.eval_nx),
    };

    let epochs = pick(args.epochs, file.get("epochs"), str::parse, "epochs", defaults.epochs)?;
    let seed = pick(args.seed, file.get("seed"), str::parse, "seed", defaults.seed)?;
    let n0 = pick(args.n0, file.get("n0"), str::parse, "n0", defaults.n0)?;
    let nb = pick(args.nb, file.get("nb"), str::parse, "nb", defaults.nb)?;
    let nf = pick(args.nf, file.get("nf"), str::parse, "nf", defaults.nf)?;
    let out_dir = pick(
        args.out.clone(),
        file.get("out"),
        |s| Ok::<_, std::convert::Infallible>(PathBuf::from(s)),
        "out",
        defaults.out_dir.clone(),
    )?;
    let timing_mode = if args.timing_mode {
        true
    } else {
        pick(None, file.get("timing-mode"), str::parse, "timing-mode", false)?
    };

    Ok(RunConfig {
        optimizer,
        epochs,
        seed,
        n0,
        nb,
        nf,
        sampling,
        schedule,
        snapshot_times,
        eval_nt,
        eval_nx,
        out_dir,
        timing_mode,
        ..defaults
    })
}

fn run_train(args: RunArgs) -> Result<()> {
    let config = build_run_config(&args)?;
    let outcome = harness::train(&config)?;
    println!(
        "trained {} for {} epochs in {:.1} s",
        config.optimizer.name(),
        outcome.records.len(),
        outcome.wall_seconds
    );
    println!("final loss {:.6e}", outcome.final_loss.total);
    if let Some(abort) = &outcome.abort {
        println!("ABORTED: {abort}");
    }
    println!("artifacts in {}", config.out_dir.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let (header, values) = report::read_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let network = MlpConfig::with_widths(&header.layer_widths);
    if values.len() != param_count(&network) {
        bail!(
            "checkpoint holds {} weights but widths {:?} need {}",
            values.len(),
            header.layer_widths,
            param_count(&network)
        );
    }
    let run_args = RunArgs {
        snapshots: args.snapshots,
        grid: args.grid,
        out: args.out,
        config: args.config,
        ..RunArgs::default()
    };
    let mut config = build_run_config(&run_args)?;
    config.network = network;
    config.seed = header.seed;
    let params = Params { values };
    let summary = harness::evaluate(&params, &config)?;
    println!("relative L2 error {:.6e}", summary.rel_l2);
    println!("initial-condition max misfit {:.6e}", summary.ic_max_err);
    for (t, slope) in &summary.snapshot_max_slope {
        println!("t={t}: steepest |du/dx| = {slope:.2}");
    }
    println!("artifacts in {}", config.out_dir.display());
    Ok(())
}

fn run_compare(args: RunArgs) -> Result<()> {
    let config = build_run_config(&args)?;
    let outcome = harness::compare(&config)?;
    println!("training set hash {:016x}", outcome.training_set_hash);
    println!("{}", report::COMPARE_HEADER);
    for row in &outcome.rows {
        println!(
            "{},{:.6e},{:.6e},{:.2},{}",
            row.optimizer, row.final_loss, row.rel_l2, row.seconds, row.epochs
        );
    }
    println!("table in {}", config.out_dir.join("compare.csv").display());
    Ok(())
}

fn run_sample_dump(args: SampleDumpArgs) -> Result<()> {
    let method = match args.sampling {
        Some(raw) => raw.parse::<SamplingMethod>()?,
        None => SamplingMethod::Uniform,
    };
    let (n0, nb, nf) = (args.n0.unwrap_or(50), args.nb.unwrap_or(50), args.nf.unwrap_or(10000));
    let seed = args.seed.unwrap_or(0);
    let set = sampler::sample(method, seed, n0, nb, nf);
    let mut csv = String::from("family,t,x,target\n");
    for p in &set.x0 {
        writeln!(csv, "initial,0,{},{}", p.x, p.u0)?;
    }
    for p in &set.xb {
        writeln!(csv, "boundary,{},{},{}", p.t, p.x, p.target)?;
    }
    for p in &set.xr {
        writeln!(csv, "collocation,{},{},", p.t, p.x)?;
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, csv)?;
    println!(
        "wrote {} ({} initial, {} boundary, {} collocation; content hash {:016x})",
        args.out.display(),
        set.x0.len(),
        set.xb.len(),
        set.xr.len(),
        set.content_hash()
    );
    Ok(())
}

fn run_oracle_dump(args: OracleDumpArgs) -> Result<()> {
    let method = args.method.parse::<OracleMethod>().map_err(|e| anyhow::anyhow!(e))?;
    let (nt, nx) = parse_grid(&args.grid)?;
    let nu = pinn_lab::physics::nu();
    let grid = match method {
        OracleMethod::ColeHopf => {
            let ts: Vec<f64> = (0..=nt).map(|i| i as f64 / nt as f64).collect();
            let xs: Vec<f64> = (0..=nx).map(|j| -1.0 + 2.0 * j as f64 / nx as f64).collect();
            oracle::reference_colehopf_grid(&ts, &xs, nu, args.quad_order)?
        }
        OracleMethod::CrankNicolson => oracle::reference_crank_nicolson(nx, nt, nu)?,
    };
    let mut csv = String::from("t,x,u\n");
    for (i, &t) in grid.t_values.iter().enumerate() {
        for (j, &x) in grid.x_values.iter().enumerate() {
            writeln!(csv, "{t},{x},{}", grid.value(i, j))?;
        }
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, csv)?;
    println!(
        "wrote {} ({} x {} values, method {})",
        args.out.display(),
        grid.t_values.len(),
        grid.x_values.len(),
        method
    );
    Ok(())
}

//! Experiment driver: full-batch training runs, model evaluation against
//! the reference solvers, and the four-optimizer comparison table.
//!
//! A run is deterministic in its seed: the sampled data, initialization,
//! and every loss value reproduce bitwise; only wall-clock columns vary.

use crate::network::{self, forward_dual, forward_value, MlpConfig, NetworkError, Params};
use crate::optim::{HyperParams, LrSchedule, Optimizer, OptimizerKind};
use crate::oracle::{reference_colehopf, reference_crank_nicolson, relative_l2_error, OracleError};
use crate::physics::{initial_condition, BurgersProblem, LossBreakdown, LossEvaluator, PhysicsError};
use crate::report::{
    self, CheckpointHeader, CompareRow, EpochRecord, LineSeries, ReportError, SnapshotRow,
};
use crate::sampler::{sample, SamplingMethod, TrainingSet};
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Network(NetworkError),
    Physics(PhysicsError),
    Oracle(OracleError),
    Report(ReportError),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(msg) => write!(f, "bad run configuration: {msg}"),
            HarnessError::Network(e) => write!(f, "{e}"),
            HarnessError::Physics(e) => write!(f, "{e}"),
            HarnessError::Oracle(e) => write!(f, "{e}"),
            HarnessError::Report(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<NetworkError> for HarnessError {
    fn from(e: NetworkError) -> Self {
        HarnessError::Network(e)
    }
}

impl From<PhysicsError> for HarnessError {
    fn from(e: PhysicsError) -> Self {
        HarnessError::Physics(e)
    }
}

impl From<OracleError> for HarnessError {
    fn from(e: OracleError) -> Self {
        HarnessError::Oracle(e)
    }
}

impl From<ReportError> for HarnessError {
    fn from(e: ReportError) -> Self {
        HarnessError::Report(e)
    }
}

/// Everything a run needs. `Default` mirrors the benchmark setup: 50/50
/// initial/boundary points, 10000 collocation points, the staged learning
/// rates, 5000 epochs, a 100 x 256 evaluation grid, and a 2048 x 4096
/// finite-difference reference.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub optimizer: OptimizerKind,
    pub hyper: HyperParams,
    pub epochs: u64,
    pub seed: u64,
    pub n0: usize,
    pub nb: usize,
    pub nf: usize,
    pub sampling: SamplingMethod,
    pub schedule: LrSchedule,
    pub snapshot_times: Vec<f64>,
    pub eval_nt: usize,
    pub eval_nx: usize,
    pub ref_nx: usize,
    pub ref_nt: usize,
    pub quad_order: usize,
    pub network: MlpConfig,
    pub out_dir: PathBuf,
    /// 0 keeps the ambient rayon pool; timing mode forces 1.
    pub threads: usize,
    pub timing_mode: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            optimizer: OptimizerKind::DiffGrad,
            hyper: HyperParams::default(),
            epochs: 5000,
            seed: 0,
            n0: 50,
            nb: 50,
            nf: 10000,
            sampling: SamplingMethod::Uniform,
            schedule: LrSchedule::default(),
            snapshot_times: vec![0.25, 0.5, 0.75, 1.0],
            eval_nt: 100,
            eval_nx: 256,
            ref_nx: 2048,
            ref_nt: 4096,
            quad_order: 128,
            network: MlpConfig::default(),
            out_dir: PathBuf::from("out"),
            threads: 0,
            timing_mode: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.n0 == 0 || self.nb == 0 || self.nf == 0 {
            return fail(format!("point counts must be positive (n0={} nb={} nf={})", self.n0, self.nb, self.nf));
        }
        if self.snapshot_times.is_empty() {
            return fail("at least one snapshot time is required".into());
        }
        for &t in &self.snapshot_times {
            if !(t > 0.0 && t <= 1.0) {
                return fail(format!("snapshot time {t} outside (0, 1]"));
            }
        }
        if self.eval_nt < 2 || self.eval_nx < 2 {
            return fail(format!("evaluation grid {}x{} too small", self.eval_nt, self.eval_nx));
        }
        if self.quad_order < 8 {
            return fail(format!("quadrature order {} below 8", self.quad_order));
        }
        self.network.validate().map_err(HarnessError::Network)
    }

    fn effective_threads(&self) -> usize {
        if self.timing_mode {
            1
        } else {
            self.threads
        }
    }
}

/// Why a training loop stopped before its epoch budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Abort {
    /// The loss turned non-finite; parameters were rolled back to the last
    /// state with a finite loss.
    NonFiniteLoss { epoch: u64 },
    /// The optimizer refused the update (non-finite gradient); parameters
    /// keep the last accepted state.
    RefusedStep { epoch: u64, detail: String },
}

impl Abort {
    /// Number of optimizer steps reflected in the surviving parameters.
    fn steps_kept(&self) -> u64 {
        match self {
            Abort::NonFiniteLoss { epoch } => epoch.saturating_sub(1),
            Abort::RefusedStep { epoch, .. } => *epoch,
        }
    }
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Abort::NonFiniteLoss { epoch } => {
                write!(f, "loss became non-finite at epoch {epoch}; rolled back one step")
            }
            Abort::RefusedStep { epoch, detail } => {
                write!(f, "optimizer refused the update at epoch {epoch}: {detail}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Params,
    pub records: Vec<EpochRecord>,
    /// Loss of the surviving parameters, evaluated once after the loop.
    pub final_loss: LossBreakdown,
    pub abort: Option<Abort>,
    /// Wall-clock of the training loop only (no sampling, no I/O).
    pub wall_seconds: f64,
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    if threads == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// The full-batch optimization loop on pre-sampled data. Pure compute: no
/// files are touched.
pub fn train_with_data(config: &RunConfig, data: &TrainingSet) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    let problem = BurgersProblem::default();
    let evaluator = LossEvaluator::new(&config.network, &problem)?;
    with_pool(config.effective_threads(), || -> Result<TrainOutcome, HarnessError> {
        let mut params = network::init(&config.network, config.seed)?;
        let mut opt = Optimizer::new(config.optimizer, config.hyper, params.values.len());
        let mut records = Vec::with_capacity(config.epochs as usize);
        let mut abort = None;
        let mut previous: Option<Vec<f64>> = None;
        let start = Instant::now();
        for epoch in 0..config.epochs {
            let lr = config.schedule.lr_at(epoch);
            let (bd, grad) = evaluator.loss_gradient(&params, data)?;
            if !bd.is_finite() {
                if let Some(values) = previous.take() {
                    params.values = values;
                }
                abort = Some(Abort::NonFiniteLoss { epoch });
                break;
            }
            records.push(EpochRecord {
                epoch,
                total: bd.total,
                phi_r: bd.phi_r,
                phi_0: bd.phi_0,
                phi_b: bd.phi_b,
                lr,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            previous = Some(params.values.clone());
            if let Err(e) = opt.apply(&mut params.values, &grad, lr) {
                abort = Some(Abort::RefusedStep { epoch, detail: e.to_string() });
                break;
            }
        }
        let wall_seconds = start.elapsed().as_secs_f64();
        let final_loss = evaluator.loss(&params, data)?;
        Ok(TrainOutcome { params, records, final_loss, abort, wall_seconds })
    })?
}

/// Samples data, trains, and writes loss.csv, loss.svg, checkpoint.txt
/// (and diagnostic.txt after an abort) into the output directory.
pub fn train(config: &RunConfig) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    let data = sample(config.sampling, config.seed, config.n0, config.nb, config.nf);
    let outcome = train_with_data(config, &data)?;
    write_train_artifacts(config, &outcome)?;
    Ok(outcome)
}

fn write_train_artifacts(config: &RunConfig, outcome: &TrainOutcome) -> Result<(), HarnessError> {
    fs::create_dir_all(&config.out_dir).map_err(ReportError::Io)?;
    report::write_loss_csv(&config.out_dir.join("loss.csv"), &outcome.records)?;

    let steps = match &outcome.abort {
        Some(abort) => abort.steps_kept(),
        None => config.epochs,
    };
    let header = CheckpointHeader {
        layer_widths: config.network.layer_widths.clone(),
        seed: config.seed,
        epoch: steps,
        format: report::CHECKPOINT_FORMAT,
    };
    report::write_checkpoint(&config.out_dir.join("checkpoint.txt"), &header, &outcome.params.values)?;

    if let Some(abort) = &outcome.abort {
        fs::write(
            config.out_dir.join("diagnostic.txt"),
            format!("{abort}\ncheckpoint.txt holds the last good parameters ({steps} steps)\n"),
        )
        .map_err(ReportError::Io)?;
    }

    if !outcome.records.is_empty() {
        let log_curve = |pick: fn(&EpochRecord) -> f64| -> Vec<(f64, f64)> {
            outcome
                .records
                .iter()
                .map(|r| (r.epoch as f64, pick(r).max(1e-16).log10()))
                .collect()
        };
        let series = vec![
            LineSeries { label: "total".into(), points: log_curve(|r| r.total) },
            LineSeries { label: "residual".into(), points: log_curve(|r| r.phi_r) },
            LineSeries { label: "initial".into(), points: log_curve(|r| r.phi_0) },
            LineSeries { label: "boundary".into(), points: log_curve(|r| r.phi_b) },
        ];
        report::svg_line_plot(
            &config.out_dir.join("loss.svg"),
            &format!("{} training loss", config.optimizer.name()),
            "epoch",
            "log10 loss",
            &series,
        )?;
    }
    Ok(())
}

/// Evaluation artifacts and summary metrics for trained parameters.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    /// Relative L2 error against the finite-difference reference over the
    /// whole evaluation grid.
    pub rel_l2: f64,
    /// Worst initial-condition misfit along the t = 0 row.
    pub ic_max_err: f64,
    /// (snapshot time, steepest |du/dx| of the model on the grid).
    pub snapshot_max_slope: Vec<(f64, f64)>,
    pub metrics: Vec<(String, f64)>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn snapshot_file(t: f64, ext: &str) -> String {
    format!("snapshot_t{t}.{ext}")
}

/// Writes surface.csv/.svg, one snapshot CSV/SVG per requested time, and
/// error_report.csv; returns the headline numbers.
pub fn evaluate(params: &Params, config: &RunConfig) -> Result<EvalSummary, HarnessError> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(ReportError::Io)?;
    let problem = BurgersProblem::default();
    let ts = linspace(problem.t_range.0, problem.t_range.1, config.eval_nt);
    let xs = linspace(problem.x_range.0, problem.x_range.1, config.eval_nx);

    let mut surface_rows = Vec::with_capacity(ts.len() * xs.len());
    let mut pred = Vec::with_capacity(ts.len() * xs.len());
    for &t in &ts {
        for &x in &xs {
            let u = forward_value(params, &config.network, t, x)?;
            surface_rows.push((t, x, u));
            pred.push(u);
        }
    }
    report::write_surface_csv(&config.out_dir.join("surface.csv"), &surface_rows)?;
    report::svg_heatmap(&config.out_dir.join("surface.svg"), "model field u(t, x)", &ts, &xs, &pred)?;

    let reference = reference_crank_nicolson(config.ref_nx, config.ref_nt, problem.nu)?;
    let refv: Vec<f64> =
        ts.iter().flat_map(|&t| xs.iter().map(|&x| reference.sample(t, x)).collect::<Vec<_>>()).collect();
    let rel_l2 = relative_l2_error(&pred, &refv)?;

    let ic_max_err = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| (pred[j] - initial_condition(x)).abs())
        .fold(0.0f64, f64::max);

    let mut metrics = vec![("rel_l2".to_string(), rel_l2), ("ic_max_err".to_string(), ic_max_err)];
    let mut snapshot_max_slope = Vec::new();
    for &t in &config.snapshot_times {
        let mut rows = Vec::with_capacity(xs.len());
        let mut max_slope = 0.0f64;
        for &x in &xs {
            let u = forward_dual(params, &config.network, t, x)?;
            let u_ref = reference_colehopf(t, x, problem.nu, config.quad_order)?;
            rows.push(SnapshotRow {
                x,
                u_pred: u.val,
                u_ref,
                abs_err: (u.val - u_ref).abs(),
            });
            max_slope = max_slope.max(u.dx.abs());
        }
        report::write_snapshot_csv(&config.out_dir.join(snapshot_file(t, "csv")), &rows)?;
        let series = vec![
            LineSeries { label: "model".into(), points: rows.iter().map(|r| (r.x, r.u_pred)).collect() },
            LineSeries { label: "reference".into(), points: rows.iter().map(|r| (r.x, r.u_ref)).collect() },
        ];
        report::svg_line_plot(
            &config.out_dir.join(snapshot_file(t, "svg")),
            &format!("u(t = {t}, x)"),
            "x",
            "u",
            &series,
        )?;
        metrics.push((format!("max_slope_t{t}"), max_slope));
        snapshot_max_slope.push((t, max_slope));
    }
    report::write_error_report(&config.out_dir.join("error_report.csv"), &metrics)?;
    Ok(EvalSummary { rel_l2, ic_max_err, snapshot_max_slope, metrics })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    /// Content hash of the single TrainingSet shared by all four runs.
    pub training_set_hash: u64,
}

/// Trains all four optimizers on one shared TrainingSet (sequentially, so
/// wall-clock numbers are comparable), evaluates each, and writes
/// compare.csv plus per-optimizer artifact directories.
pub fn compare(config: &RunConfig) -> Result<CompareOutcome, HarnessError> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(ReportError::Io)?;
    let data = sample(config.sampling, config.seed, config.n0, config.nb, config.nf);
    let training_set_hash = data.content_hash();

    let mut rows = Vec::with_capacity(OptimizerKind::ALL.len());
    for kind in OptimizerKind::ALL {
        let mut sub = config.clone();
        sub.optimizer = kind;
        sub.out_dir = config.out_dir.join(kind.name());
        let row = match run_one_comparison(&sub, &data) {
            Ok(row) => row,
            Err(e) => {
                eprintln!("comparison run {} failed: {e}", kind.name());
                CompareRow {
                    optimizer: kind.name().to_string(),
                    final_loss: f64::NAN,
                    rel_l2: f64::NAN,
                    seconds: f64::NAN,
                    epochs: 0,
                }
            }
        };
        rows.push(row);
    }
    report::write_compare_csv(&config.out_dir.join("compare.csv"), &rows)?;
    Ok(CompareOutcome { rows, training_set_hash })
}

fn run_one_comparison(config: &RunConfig, data: &TrainingSet) -> Result<CompareRow, HarnessError> {
    let outcome = train_with_data(config, data)?;
    write_train_artifacts(config, &outcome)?;
    let summary = evaluate(&outcome.params, config)?;
    Ok(CompareRow {
        optimizer: config.optimizer.name().to_string(),
        final_loss: outcome.final_loss.total,
        rel_l2: summary.rel_l2,
        seconds: outcome.wall_seconds,
        epochs: outcome.records.len() as u64,
    })
}

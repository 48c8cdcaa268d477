//! First-order optimizers over a flat parameter vector, plus the piecewise
//! learning-rate schedule.
//!
//! All four rules share the same calling convention: `apply` consumes one
//! gradient, advances the internal step counter, and updates parameters in
//! place. The gradient is validated before anything is touched, so a refused
//! step leaves parameters and optimizer state bitwise unchanged.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    Adamax,
    RmsProp,
    DiffGrad,
}

impl OptimizerKind {
    /// Canonical report order.
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Adam,
        OptimizerKind::Adamax,
        OptimizerKind::RmsProp,
        OptimizerKind::DiffGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adamax => "adamax",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::DiffGrad => "diffgrad",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = OptimError;

    fn from_str(s: &str) -> Result<Self, OptimError> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamax" => Ok(OptimizerKind::Adamax),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "diffgrad" => Ok(OptimizerKind::DiffGrad),
            other => Err(OptimError::UnknownOptimizer(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// First-moment decay (adam, adamax, diffgrad).
    pub beta1: f64,
    /// Second-moment / infinity-norm decay (adam, adamax, diffgrad).
    pub beta2: f64,
    /// Denominator fuzz.
    pub epsilon: f64,
    /// Squared-gradient decay (rmsprop only).
    pub rho: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, rho: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimError {
    ShapeMismatch { expected: usize, got: usize },
    /// Refused step: gradient entry `index` is NaN or infinite.
    NonFiniteGradient { index: usize },
    BadLearningRate(f64),
    BadSchedule(String),
    UnknownOptimizer(String),
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::ShapeMismatch { expected, got } => {
                write!(f, "gradient has {got} entries, optimizer was built for {expected}")
            }
            OptimError::NonFiniteGradient { index } => {
                write!(f, "non-finite gradient at parameter {index}; step refused")
            }
            OptimError::BadLearningRate(lr) => write!(f, "learning rate {lr} is not usable"),
            OptimError::BadSchedule(msg) => write!(f, "bad learning-rate schedule: {msg}"),
            OptimError::UnknownOptimizer(name) => {
                write!(f, "unknown optimizer {name:?} (expected adam, adamax, rmsprop, or diffgrad)")
            }
        }
    }
}

impl std::error::Error for OptimError {}

/// Largest f64 strictly below 1. When exp(-|dg|) underflows to zero the
/// logistic friction would hit exactly 1; clamping here keeps it inside
/// [0.5, 1) for every input.
const XI_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Gradient-difference friction used by diffgrad: a logistic in
/// |g_prev - g|, so a stationary gradient damps the step to one half and a
/// rapidly changing gradient lets it through almost untouched.
pub fn diffgrad_friction(g_prev: f64, g: f64) -> f64 {
    let xi = 1.0 / (1.0 + (-(g_prev - g).abs()).exp());
    if xi >= 1.0 {
        XI_MAX
    } else {
        xi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub hyper: HyperParams,
    /// First moment (unused by rmsprop).
    m: Vec<f64>,
    /// Second moment, infinity norm for adamax, squared-gradient average for
    /// rmsprop.
    v: Vec<f64>,
    /// Previous gradient (diffgrad only), zero before the first step.
    g_prev: Vec<f64>,
    step: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, hyper: HyperParams, n_params: usize) -> Self {
        let uses_m = kind != OptimizerKind::RmsProp;
        Optimizer {
            kind,
            hyper,
            m: if uses_m { vec![0.0; n_params] } else { Vec::new() },
            v: vec![0.0; n_params],
            g_prev: if kind == OptimizerKind::DiffGrad { vec![0.0; n_params] } else { Vec::new() },
            step: 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.v.len()
    }

    /// Steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One optimizer step in place. On any error nothing — parameters, the
    /// moments, the step counter — has been modified.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), OptimError> {
        let n = self.v.len();
        if params.len() != n || grad.len() != n {
            return Err(OptimError::ShapeMismatch {
                expected: n,
                got: if grad.len() != n { grad.len() } else { params.len() },
            });
        }
        if !(lr.is_finite() && lr > 0.0) {
            return Err(OptimError::BadLearningRate(lr));
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteGradient { index });
        }

        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let HyperParams { beta1, beta2, epsilon, rho } = self.hyper;

        match self.kind {
            OptimizerKind::Adam => {
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for i in 0..n {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
            OptimizerKind::Adamax => {
                let bc1 = 1.0 - beta1.powi(t);
                for i in 0..n {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = (beta2 * self.v[i]).max(g.abs());
                    params[i] -= (lr / bc1) * self.m[i] / (self.v[i] + epsilon);
                }
            }
            OptimizerKind::RmsProp => {
                for i in 0..n {
                    let g = grad[i];
                    self.v[i] = rho * self.v[i] + (1.0 - rho) * g * g;
                    params[i] -= lr * g / (self.v[i].sqrt() + epsilon);
                }
            }
            OptimizerKind::DiffGrad => {
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for i in 0..n {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let xi = diffgrad_friction(self.g_prev[i], g);
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * xi * m_hat / (v_hat.sqrt() + epsilon);
                    self.g_prev[i] = g;
                }
            }
        }
        Ok(())
    }
}

/// Piecewise-constant learning rate: `pieces` maps a starting epoch to the
/// rate used from that epoch on. The first piece must start at epoch 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pieces: Vec<(u64, f64)>,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::new(vec![(0, 0.01), (1000, 0.001), (3000, 0.0005)]).expect("valid default")
    }
}

impl LrSchedule {
    pub fn new(pieces: Vec<(u64, f64)>) -> Result<Self, OptimError> {
        if pieces.is_empty() {
            return Err(OptimError::BadSchedule("schedule has no pieces".into()));
        }
        if pieces[0].0 != 0 {
            return Err(OptimError::BadSchedule(format!(
                "first piece must start at epoch 0, starts at {}",
                pieces[0].0
            )));
        }
        for w in pieces.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(OptimError::BadSchedule(format!(
                    "piece starts must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(at, rate)) = pieces.iter().find(|(_, r)| !(r.is_finite() && *r > 0.0)) {
            return Err(OptimError::BadSchedule(format!(
                "rate {rate} at epoch {at} must be finite and positive"
            )));
        }
        Ok(LrSchedule { pieces })
    }

    pub fn constant(rate: f64) -> Result<Self, OptimError> {
        LrSchedule::new(vec![(0, rate)])
    }

    /// Rate in force at `epoch`: the last piece whose start is <= epoch.
    pub fn lr_at(&self, epoch: u64) -> f64 {
        self.pieces
            .iter()
            .rev()
            .find(|&&(start, _)| start <= epoch)
            .map(|&(_, rate)| rate)
            .expect("validated schedule starts at 0")
    }

    pub fn pieces(&self) -> &[(u64, f64)] {
        &self.pieces
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (start, rate)) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{start}:{rate}")?;
        }
        Ok(())
    }
}

impl FromStr for LrSchedule {
    type Err = OptimError;

    /// Parses "start:rate,start:rate,..." e.g. "0:0.01,1000:0.001".
    fn from_str(s: &str) -> Result<Self, OptimError> {
        let mut pieces = Vec::new();
        for part in s.split(',') {
            let (start, rate) = part
                .split_once(':')
                .ok_or_else(|| OptimError::BadSchedule(format!("piece {part:?} is not start:rate")))?;
            let start: u64 = start
                .trim()
                .parse()
                .map_err(|_| OptimError::BadSchedule(format!("bad epoch in {part:?}")))?;
            let rate: f64 = rate
                .trim()
                .parse()
                .map_err(|_| OptimError::BadSchedule(format!("bad rate in {part:?}")))?;
            pieces.push((start, rate));
        }
        LrSchedule::new(pieces)
    }
}

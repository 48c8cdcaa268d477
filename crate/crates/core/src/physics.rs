//! Problem definition and physics-informed loss for viscous Burgers flow
//! on (t, x) in (0, 1] x (-1, 1):
//!
//!   du/dt + u du/dx = nu d2u/dx2,   nu = 0.01 / pi
//!   u(0, x) = -sin(pi x),           u(t, -1) = u(t, 1) = 0
//!
//! The training loss is a sum of three mean-square terms: the equation
//! residual at collocation points, the initial-condition error, and the
//! boundary error. `loss` and `loss_gradient` run the same code path, so
//! their loss breakdowns agree bitwise; the gradient comes from a reverse
//! sweep with derivative-carrying adjoints.
//!
//! Work is split into fixed 128-point chunks processed in a fixed order
//! (initial, boundary, collocation), sequentially within each chunk, with
//! chunk results combined in chunk order. Thread count therefore changes
//! only scheduling, never any floating-point summation order: results are
//! bitwise identical from 1 thread to N.
//!
//! Two interchangeable execution backends produce bitwise-identical output:
//! the general recorded tape (reference) and a layer-structured batched
//! engine (default, several times faster). A test in this module pins their
//! agreement.

use crate::autodiff::{AdError, Dual2, NodeId, TapeProgram, TapeState};
use crate::dense::{DenseEvaluator, DenseState, BATCH};
use crate::network::{self, MlpConfig, NetworkError, Params};
use crate::sampler::TrainingSet;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;

/// Viscosity.
pub fn nu() -> f64 {
    0.01 / PI
}

/// Initial profile u(0, x) = -sin(pi x).
pub fn initial_condition(x: f64) -> f64 {
    -(PI * x).sin()
}

/// The boundary-value problem being solved.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersProblem {
    pub nu: f64,
    /// Time range; open at the left end (t = 0 belongs to the initial set).
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
}

impl Default for BurgersProblem {
    fn default() -> Self {
        BurgersProblem { nu: nu(), t_range: (0.0, 1.0), x_range: (-1.0, 1.0) }
    }
}

impl BurgersProblem {
    pub fn initial(&self, x: f64) -> f64 {
        initial_condition(x)
    }

    pub fn boundary(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
}

/// Equation residual assembled from a derivative-carrying network output:
/// r = du/dt + u du/dx - nu d2u/dx2, evaluated in this exact order.
pub fn residual_from(u: Dual2, nu: f64) -> f64 {
    let mul1 = u.val * u.dx;
    let mul2 = nu * u.dxx;
    u.dt + mul1 - mul2
}

/// Residual of the network at one interior point (no gradient machinery).
pub fn residual(
    params: &Params,
    config: &MlpConfig,
    problem: &BurgersProblem,
    t: f64,
    x: f64,
) -> Result<f64, NetworkError> {
    let u = network::forward_dual(params, config, t, x)?;
    Ok(residual_from(u, problem.nu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// phi_r + phi_0 + phi_b, summed in that order.
    pub total: f64,
    /// Mean squared equation residual over collocation points.
    pub phi_r: f64,
    /// Mean squared initial-condition error.
    pub phi_0: f64,
    /// Mean squared boundary error.
    pub phi_b: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.phi_r.is_finite()
            && self.phi_0.is_finite()
            && self.phi_b.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhysicsError {
    Network(NetworkError),
    Ad(AdError),
    /// The named loss term has no points to average over.
    EmptyFamily(&'static str),
}

impl fmt::Display for PhysicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhysicsError::Network(e) => write!(f, "network error: {e}"),
            PhysicsError::Ad(e) => write!(f, "autodiff error: {e}"),
            PhysicsError::EmptyFamily(name) => {
                write!(f, "training set has no {name} points; every loss term needs at least one")
            }
        }
    }
}

impl std::error::Error for PhysicsError {}

impl From<NetworkError> for PhysicsError {
    fn from(e: NetworkError) -> Self {
        PhysicsError::Network(e)
    }
}

impl From<AdError> for PhysicsError {
    fn from(e: AdError) -> Self {
        PhysicsError::Ad(e)
    }
}

/// Points per work chunk. Fixed so the summation tree does not depend on
/// thread count.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Initial,
    Boundary,
    Collocation,
}

/// Execution engine selector; both produce bitwise-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Replay and sweep the recorded general tape. Reference implementation.
    Tape,
    /// Layer-structured batched kernels; same arithmetic, same order.
    #[default]
    Dense,
}

/// Reusable loss/gradient engine for one network architecture. Records the
/// network once; evaluations replay it per point with fresh inputs and
/// parameters.
pub struct LossEvaluator {
    program: TapeProgram,
    proto: TapeState,
    u_node: NodeId,
    dense: DenseEvaluator,
    backend: Backend,
    nu: f64,
}

enum Worker {
    Tape(TapeState),
    Dense(DenseState),
}

impl LossEvaluator {
    pub fn new(config: &MlpConfig, problem: &BurgersProblem) -> Result<Self, PhysicsError> {
        let zeros = Params { values: vec![0.0; network::param_count(config)] };
        let (tape, _t, _x, u_node) = network::record(&zeros, config)?;
        let (program, proto) = tape.into_parts();
        let dense = DenseEvaluator::new(config)?;
        Ok(LossEvaluator { program, proto, u_node, dense, backend: Backend::default(), nu: problem.nu })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn param_count(&self) -> usize {
        self.program.param_count()
    }

    /// Loss breakdown only. Bitwise identical to the breakdown returned by
    /// `loss_gradient` for the same inputs.
    pub fn loss(&self, params: &Params, data: &TrainingSet) -> Result<LossBreakdown, PhysicsError> {
        Ok(self.compute(params, data, false)?.0)
    }

    /// Loss breakdown plus d(total)/d(theta).
    pub fn loss_gradient(
        &self,
        params: &Params,
        data: &TrainingSet,
    ) -> Result<(LossBreakdown, Vec<f64>), PhysicsError> {
        let (breakdown, grad) = self.compute(params, data, true)?;
        Ok((breakdown, grad.expect("gradient requested")))
    }

    fn compute(
        &self,
        params: &Params,
        data: &TrainingSet,
        with_grad: bool,
    ) -> Result<(LossBreakdown, Option<Vec<f64>>), PhysicsError> {
        let n_params = self.program.param_count();
        if params.values.len() != n_params {
            return Err(NetworkError::ShapeMismatch {
                expected: n_params,
                got: params.values.len(),
            }
            .into());
        }
        if data.x0.is_empty() {
            return Err(PhysicsError::EmptyFamily("initial"));
        }
        if data.xb.is_empty() {
            return Err(PhysicsError::EmptyFamily("boundary"));
        }
        if data.xr.is_empty() {
            return Err(PhysicsError::EmptyFamily("collocation"));
        }

        let mut chunks: Vec<(Family, usize, usize)> = Vec::new();
        push_chunks(&mut chunks, Family::Initial, data.x0.len());
        push_chunks(&mut chunks, Family::Boundary, data.xb.len());
        push_chunks(&mut chunks, Family::Collocation, data.xr.len());

        struct ChunkOut {
            family: Family,
            sq_sum: f64,
            grad: Option<Vec<f64>>,
        }

        let results: Result<Vec<ChunkOut>, PhysicsError> = chunks
            .par_iter()
            .map_init(
                || match self.backend {
                    Backend::Tape => {
                        let mut st = self.proto.clone();
                        self.program.set_params(&mut st, &params.values);
                        Worker::Tape(st)
                    }
                    Backend::Dense => Worker::Dense(self.dense.make_state()),
                },
                |worker, &(family, start, len)| {
                    let (sq_sum, grad) = match worker {
                        Worker::Tape(st) => self.chunk_tape(st, params, data, family, start, len, with_grad)?,
                        Worker::Dense(st) => self.chunk_dense(st, params, data, family, start, len, with_grad),
                    };
                    Ok(ChunkOut { family, sq_sum, grad })
                },
            )
            .collect();
        let results = results?;

        let (mut sum_r, mut sum_0, mut sum_b) = (0.0, 0.0, 0.0);
        let mut grad = if with_grad { Some(vec![0.0; n_params]) } else { None };
        for out in results {
            match out.family {
                Family::Initial => sum_0 += out.sq_sum,
                Family::Boundary => sum_b += out.sq_sum,
                Family::Collocation => sum_r += out.sq_sum,
            }
            if let (Some(total), Some(part)) = (grad.as_mut(), out.grad.as_ref()) {
                for (t, p) in total.iter_mut().zip(part) {
                    *t += p;
                }
            }
        }
        let phi_r = sum_r / data.xr.len() as f64;
        let phi_0 = sum_0 / data.x0.len() as f64;
        let phi_b = sum_b / data.xb.len() as f64;
        let total = phi_r + phi_0 + phi_b;
        Ok((LossBreakdown { total, phi_r, phi_0, phi_b }, grad))
    }

    /// Squared term and output-adjoint seed for one point, given the
    /// network output there. The 1/N factor rides in the seed.
    fn point_term(&self, family: Family, data: &TrainingSet, i: usize, u: Dual2) -> (f64, Dual2) {
        match family {
            Family::Initial => {
                let e = u.val - data.x0[i].u0;
                (e * e, Dual2 { val: 2.0 * e / data.x0.len() as f64, ..Dual2::ZERO })
            }
            Family::Boundary => {
                let e = u.val - data.xb[i].target;
                (e * e, Dual2 { val: 2.0 * e / data.xb.len() as f64, ..Dual2::ZERO })
            }
            Family::Collocation => {
                let r = residual_from(u, self.nu);
                let c = 2.0 * r / data.xr.len() as f64;
                let seed = Dual2 { val: c * u.dx, dx: c * u.val, dt: c, dxx: -c * self.nu };
                (r * r, seed)
            }
        }
    }

    fn point_coords(family: Family, data: &TrainingSet, i: usize) -> (f64, f64) {
        match family {
            Family::Initial => (0.0, data.x0[i].x),
            Family::Boundary => (data.xb[i].t, data.xb[i].x),
            Family::Collocation => (data.xr[i].t, data.xr[i].x),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn chunk_tape(
        &self,
        st: &mut TapeState,
        params: &Params,
        data: &TrainingSet,
        family: Family,
        start: usize,
        len: usize,
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>), PhysicsError> {
        let mut sq_sum = 0.0;
        for i in start..start + len {
            let (t, x) = Self::point_coords(family, data, i);
            self.program.set_inputs(st, t, x);
            self.program.replay(st)?;
            let u = self.program.value(st, self.u_node);
            let (sq, seed) = self.point_term(family, data, i, u);
            sq_sum += sq;
            if with_grad {
                self.program.sweep(st, &[(self.u_node, seed)]);
            }
        }
        let grad = with_grad.then(|| {
            let mut g = vec![0.0; params.values.len()];
            self.program.param_gradient_into(st, &mut g);
            self.program.clear_leaf_adjoints(st);
            g
        });
        Ok((sq_sum, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn chunk_dense(
        &self,
        st: &mut DenseState,
        params: &Params,
        data: &TrainingSet,
        family: Family,
        start: usize,
        len: usize,
        with_grad: bool,
    ) -> (f64, Option<Vec<f64>>) {
        let mut sq_sum = 0.0;
        let mut i = start;
        while i < start + len {
            let active = BATCH.min(start + len - i);
            let mut tb = [0.0; BATCH];
            let mut xb = [0.0; BATCH];
            for b in 0..active {
                let (t, x) = Self::point_coords(family, data, i + b);
                tb[b] = t;
                xb[b] = x;
            }
            let u = self.dense.forward(st, &params.values, &tb, &xb);
            let mut seeds = [Dual2::ZERO; BATCH];
            for b in 0..active {
                let (sq, seed) = self.point_term(family, data, i + b, u[b]);
                sq_sum += sq;
                seeds[b] = seed;
            }
            if with_grad {
                self.dense.backward(st, &params.values, &seeds, active);
            }
            i += active;
        }
        let grad = with_grad.then(|| {
            let g = st.grad.clone();
            st.reset_grad();
            g
        });
        (sq_sum, grad)
    }
}

fn push_chunks(out: &mut Vec<(Family, usize, usize)>, family: Family, len: usize) {
    let mut start = 0;
    while start < len {
        let l = CHUNK.min(len - start);
        out.push((family, start, l));
        start += l;
    }
}

/// One-shot loss for callers without a cached evaluator.
pub fn loss(
    params: &Params,
    config: &MlpConfig,
    problem: &BurgersProblem,
    data: &TrainingSet,
) -> Result<LossBreakdown, PhysicsError> {
    LossEvaluator::new(config, problem)?.loss(params, data)
}

/// One-shot loss and gradient.
pub fn loss_gradient(
    params: &Params,
    config: &MlpConfig,
    problem: &BurgersProblem,
    data: &TrainingSet,
) -> Result<(LossBreakdown, Vec<f64>), PhysicsError> {
    LossEvaluator::new(config, problem)?.loss_gradient(params, data)
}

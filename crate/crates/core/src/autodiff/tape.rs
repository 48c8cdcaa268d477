//! Recorded computation tape over [`Dual2`] scalars.
//!
//! Forward mode (in x and t) rides inside every node value; reverse mode runs
//! over the recorded ops afterwards. Because each node is a 4-component
//! truncated Taylor value, the reverse sweep propagates 4-component adjoints:
//! `adj[n]` holds the derivative of the seeded output scalar with respect to
//! each component of node `n`. Parameters enter as leaves with zero
//! derivative seeds, so a parameter gradient is just the `val` component of
//! its leaf adjoint. One sweep therefore yields d(output)/d(theta) for an
//! output scalar assembled from any mix of val/dx/dt/dxx components — exactly
//! what the Burgers residual loss needs.
//!
//! Layout: all leaves (params, inputs, constants) occupy slots `0..n_leaves`,
//! recorded ops follow in creation order, which is already topological. A
//! program can be replayed against fresh leaf values without re-recording;
//! replay + sweep touch no allocations, so one tape serves every collocation
//! point of a training epoch. Concurrent use means one [`TapeState`] per
//! worker sharing a [`TapeProgram`].

use super::dual::Dual2;
use std::fmt;

/// Handle to a node on a specific tape. Only meaningful for the tape that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// The closed set of ops a tape can record. Anything else simply cannot be
/// expressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    Tanh,
    Sin,
    Exp,
}

impl AdOp {
    fn arity(self) -> usize {
        match self {
            AdOp::Add | AdOp::Sub | AdOp::Mul | AdOp::Div => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdError {
    /// Division where the denominator value is exactly zero.
    DivisionByZero { node: u32 },
    /// Node handle does not belong to this tape.
    UnknownNode { node: u32 },
    /// apply() called with the wrong number of arguments.
    ArityMismatch { op: &'static str, expected: usize, got: usize },
    /// Leaves must all be created before the first op is recorded.
    LeafAfterOps,
}

impl fmt::Display for AdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdError::DivisionByZero { node } => write!(f, "division by zero at node {node}"),
            AdError::UnknownNode { node } => write!(f, "node {node} is not on this tape"),
            AdError::ArityMismatch { op, expected, got } => {
                write!(f, "op {op} expects {expected} args, got {got}")
            }
            AdError::LeafAfterOps => write!(f, "leaves must be created before any op is recorded"),
        }
    }
}

impl std::error::Error for AdError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputVar {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LeafKind {
    /// Trainable parameter; derivative components are structurally zero.
    Param,
    /// Plain constant; derivative components are structurally zero.
    Const,
    /// Seeded input (x or t); carries a derivative seed.
    Input,
}

/// One recorded op. `C`-suffixed variants are record-time specializations of
/// Add/Mul for a param/const operand (whose dx/dt/dxx are structurally zero);
/// they compute the same values and exist only to keep the hot loops lean.
#[derive(Debug, Clone, Copy)]
enum Op {
    Add(u32, u32),
    AddC(u32, u32), // (node, const-like leaf)
    Sub(u32, u32),
    Mul(u32, u32),
    MulC(u32, u32), // (node, const-like leaf)
    Div(u32, u32),
    Neg(u32),
    Scale(u32, f64),
    Tanh(u32),
    Sin(u32),
    Exp(u32),
}

/// Immutable structure of a recorded computation: ops, leaf bookkeeping and
/// the parameter-leaf index map. Shareable across worker states.
#[derive(Debug, Clone)]
pub struct TapeProgram {
    ops: Vec<Op>,
    leaf_kinds: Vec<LeafKind>,
    /// param index -> leaf slot
    param_slots: Vec<u32>,
    input_x: Option<u32>,
    input_t: Option<u32>,
}

/// Mutable evaluation buffers for one worker: node values and node adjoints.
///
/// Invariant: outside of a running sweep, every non-leaf adjoint slot is
/// zero (the sweep restores slots as it consumes them), so states can be
/// reused point after point without a clearing pass.
#[derive(Debug, Clone)]
pub struct TapeState {
    values: Vec<Dual2>,
    adj: Vec<Dual2>,
}

impl TapeProgram {
    fn n_leaves(&self) -> usize {
        self.leaf_kinds.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_leaves() + self.ops.len()
    }

    pub fn param_count(&self) -> usize {
        self.param_slots.len()
    }

    /// Write fresh input values (with their derivative seeds) into a state.
    pub fn set_inputs(&self, st: &mut TapeState, t: f64, x: f64) {
        if let Some(i) = self.input_t {
            st.values[i as usize] = Dual2::seed_t(t);
        }
        if let Some(i) = self.input_x {
            st.values[i as usize] = Dual2::seed_x(x);
        }
    }

    /// Write fresh parameter values into a state's leaf slots.
    pub fn set_params(&self, st: &mut TapeState, params: &[f64]) {
        assert_eq!(params.len(), self.param_slots.len(), "parameter count mismatch");
        for (i, &slot) in self.param_slots.iter().enumerate() {
            st.values[slot as usize] = Dual2::constant(params[i]);
        }
    }

    /// Recompute every op node from the current leaf values.
    pub fn replay(&self, st: &mut TapeState) -> Result<(), AdError> {
        let nl = self.n_leaves();
        for (i, op) in self.ops.iter().enumerate() {
            st.values[nl + i] = eval_op(*op, &st.values, (nl + i) as u32)?;
        }
        Ok(())
    }

    pub fn value(&self, st: &TapeState, id: NodeId) -> Dual2 {
        st.values[id.idx()]
    }

    /// Reverse sweep: scatter `seeds` (adjoints of output-scalar components)
    /// and accumulate into leaf adjoints. Op adjoints are re-zeroed as they
    /// are consumed, leaf adjoints accumulate across calls until
    /// [`TapeProgram::clear_leaf_adjoints`].
    pub fn sweep(&self, st: &mut TapeState, seeds: &[(NodeId, Dual2)]) {
        for &(id, s) in seeds {
            st.adj[id.idx()] += s;
        }
        let nl = self.n_leaves();
        let values = &st.values;
        let adj = &mut st.adj;
        for (i, op) in self.ops.iter().enumerate().rev() {
            let slot = nl + i;
            let lambda = adj[slot];
            adj[slot] = Dual2::ZERO;
            scatter(*op, lambda, values[slot], values, adj);
        }
    }

    /// Read `d(output)/d(param_i)` out of the accumulated leaf adjoints.
    pub fn param_gradient_into(&self, st: &TapeState, out: &mut [f64]) {
        assert_eq!(out.len(), self.param_slots.len());
        for (g, &slot) in out.iter_mut().zip(&self.param_slots) {
            *g = st.adj[slot as usize].val;
        }
    }

    pub fn clear_leaf_adjoints(&self, st: &mut TapeState) {
        for a in &mut st.adj[..self.n_leaves()] {
            *a = Dual2::ZERO;
        }
    }

    fn check_node(&self, id: NodeId, len: usize) -> Result<(), AdError> {
        if id.idx() < len {
            Ok(())
        } else {
            Err(AdError::UnknownNode { node: id.0 })
        }
    }
}

#[inline]
fn eval_op(op: Op, v: &[Dual2], at: u32) -> Result<Dual2, AdError> {
    Ok(match op {
        Op::Add(a, b) => v[a as usize] + v[b as usize],
        Op::AddC(a, c) => {
            let mut r = v[a as usize];
            r.val += v[c as usize].val;
            r
        }
        Op::Sub(a, b) => v[a as usize] - v[b as usize],
        Op::Mul(a, b) => v[a as usize] * v[b as usize],
        Op::MulC(a, c) => v[a as usize].scale(v[c as usize].val),
        Op::Div(a, b) => {
            let den = v[b as usize];
            if den.val == 0.0 {
                return Err(AdError::DivisionByZero { node: at });
            }
            v[a as usize] / den
        }
        Op::Neg(a) => -v[a as usize],
        Op::Scale(a, c) => v[a as usize].scale(c),
        Op::Tanh(a) => v[a as usize].tanh(),
        Op::Sin(a) => v[a as usize].sin(),
        Op::Exp(a) => v[a as usize].exp(),
    })
}

/// Adjoint contribution to one factor of a product, i.e. M(other)^T * lambda
/// where M(other) is "multiply by other" in the truncated Taylor algebra.
#[inline]
fn mul_pullback(lambda: Dual2, other: Dual2) -> Dual2 {
    Dual2 {
        val: other.val * lambda.val + other.dx * lambda.dx + other.dt * lambda.dt + other.dxx * lambda.dxx,
        dx: other.val * lambda.dx + 2.0 * other.dx * lambda.dxx,
        dt: other.val * lambda.dt,
        dxx: other.val * lambda.dxx,
    }
}

/// Adjoint contribution through a smooth unary op with derivatives d1..d3 at
/// the argument `a`.
#[inline]
pub(crate) fn unary_pullback(lambda: Dual2, a: Dual2, d1: f64, d2: f64, d3: f64) -> Dual2 {
    Dual2 {
        val: d1 * lambda.val
            + d2 * a.dx * lambda.dx
            + d2 * a.dt * lambda.dt
            + (d3 * a.dx * a.dx + d2 * a.dxx) * lambda.dxx,
        dx: d1 * lambda.dx + 2.0 * d2 * a.dx * lambda.dxx,
        dt: d1 * lambda.dt,
        dxx: d1 * lambda.dxx,
    }
}

/// Adjoint through tanh, with the derivative table rebuilt from the stored
/// output value (cheaper and better conditioned than re-evaluating tanh).
#[inline]
pub(crate) fn tanh_pullback(lambda: Dual2, pre: Dual2, out_val: f64) -> Dual2 {
    let th = out_val;
    let d1 = 1.0 - th * th;
    let d2 = -2.0 * th * d1;
    let d3 = -2.0 * (d1 * d1 + th * d2);
    unary_pullback(lambda, pre, d1, d2, d3)
}

/// Sensitivity of a scalar to the constant factor of a product: the full
/// contraction of the other operand with the adjoint.
#[inline]
pub(crate) fn dot4(a: Dual2, lambda: Dual2) -> f64 {
    a.val * lambda.val + a.dx * lambda.dx + a.dt * lambda.dt + a.dxx * lambda.dxx
}

#[inline]
fn scatter(op: Op, lambda: Dual2, out: Dual2, v: &[Dual2], adj: &mut [Dual2]) {
    match op {
        Op::Add(a, b) => {
            adj[a as usize] += lambda;
            adj[b as usize] += lambda;
        }
        Op::AddC(a, c) => {
            adj[a as usize] += lambda;
            adj[c as usize].val += lambda.val;
        }
        Op::Sub(a, b) => {
            adj[a as usize] += lambda;
            adj[b as usize] += -lambda;
        }
        Op::Mul(a, b) => {
            let ca = mul_pullback(lambda, v[b as usize]);
            let cb = mul_pullback(lambda, v[a as usize]);
            adj[a as usize] += ca;
            adj[b as usize] += cb;
        }
        Op::MulC(a, c) => {
            let cval = v[c as usize].val;
            let av = v[a as usize];
            adj[a as usize] += lambda.scale(cval);
            adj[c as usize].val += dot4(av, lambda);
        }
        Op::Div(a, b) => {
            // h = a * recip(b): pull through the product, then through recip.
            let g = v[b as usize];
            let w = g.recip();
            let ca = mul_pullback(lambda, w);
            let lw = mul_pullback(lambda, v[a as usize]);
            let g0 = g.val;
            let d1 = -1.0 / (g0 * g0);
            let d2 = 2.0 / (g0 * g0 * g0);
            let d3 = -6.0 / (g0 * g0 * g0 * g0);
            let cb = unary_pullback(lw, g, d1, d2, d3);
            adj[a as usize] += ca;
            adj[b as usize] += cb;
        }
        Op::Neg(a) => adj[a as usize] += -lambda,
        Op::Scale(a, c) => adj[a as usize] += lambda.scale(c),
        Op::Tanh(a) => {
            adj[a as usize] += tanh_pullback(lambda, v[a as usize], out.val);
        }
        Op::Sin(a) => {
            let av = v[a as usize];
            let s = out.val;
            let c = av.val.cos();
            adj[a as usize] += unary_pullback(lambda, av, c, -s, -c);
        }
        Op::Exp(a) => {
            let e = out.val;
            adj[a as usize] += unary_pullback(lambda, v[a as usize], e, e, e);
        }
    }
}

/// Single-threaded tape: a program plus its own evaluation state, with the
/// recording API. Heavy callers split it with [`Tape::into_parts`] and run
/// one state per worker.
#[derive(Debug, Clone)]
pub struct Tape {
    program: TapeProgram,
    state: TapeState,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            program: TapeProgram {
                ops: Vec::new(),
                leaf_kinds: Vec::new(),
                param_slots: Vec::new(),
                input_x: None,
                input_t: None,
            },
            state: TapeState { values: Vec::new(), adj: Vec::new() },
        }
    }

    fn push_leaf(&mut self, kind: LeafKind, value: Dual2) -> Result<NodeId, AdError> {
        if !self.program.ops.is_empty() {
            return Err(AdError::LeafAfterOps);
        }
        let id = self.program.leaf_kinds.len() as u32;
        self.program.leaf_kinds.push(kind);
        self.state.values.push(value);
        self.state.adj.push(Dual2::ZERO);
        Ok(NodeId(id))
    }

    /// Register trainable parameter number `index`. Parameters must be
    /// registered densely in order starting at 0.
    pub fn lift_param(&mut self, index: usize, value: f64) -> Result<NodeId, AdError> {
        assert_eq!(index, self.program.param_slots.len(), "params must be registered in order");
        let id = self.push_leaf(LeafKind::Param, Dual2::constant(value))?;
        self.program.param_slots.push(id.0);
        Ok(id)
    }

    /// Register the x or t input with its derivative seed.
    pub fn lift_input(&mut self, var: InputVar, value: f64) -> Result<NodeId, AdError> {
        let seed = match var {
            InputVar::X => Dual2::seed_x(value),
            InputVar::T => Dual2::seed_t(value),
        };
        let id = self.push_leaf(LeafKind::Input, seed)?;
        match var {
            InputVar::X => self.program.input_x = Some(id.0),
            InputVar::T => self.program.input_t = Some(id.0),
        }
        Ok(id)
    }

    pub fn lift_const(&mut self, c: f64) -> Result<NodeId, AdError> {
        self.push_leaf(LeafKind::Const, Dual2::constant(c))
    }

    fn is_const_like(&self, id: NodeId) -> bool {
        self.program
            .leaf_kinds
            .get(id.idx())
            .is_some_and(|k| matches!(k, LeafKind::Param | LeafKind::Const))
    }

    fn push_op(&mut self, op: Op) -> Result<NodeId, AdError> {
        let id = self.state.values.len() as u32;
        let value = eval_op(op, &self.state.values, id)?;
        self.program.ops.push(op);
        self.state.values.push(value);
        self.state.adj.push(Dual2::ZERO);
        Ok(NodeId(id))
    }

    fn check(&self, id: NodeId) -> Result<(), AdError> {
        self.program.check_node(id, self.state.values.len())
    }

    /// Record one op from the closed set and return its node. The returned
    /// value is available via [`Tape::value`].
    pub fn apply(&mut self, op: AdOp, args: &[NodeId]) -> Result<NodeId, AdError> {
        let name = match op {
            AdOp::Add => "add",
            AdOp::Sub => "sub",
            AdOp::Mul => "mul",
            AdOp::Div => "div",
            AdOp::Neg => "neg",
            AdOp::Scale(_) => "scale",
            AdOp::Tanh => "tanh",
            AdOp::Sin => "sin",
            AdOp::Exp => "exp",
        };
        if args.len() != op.arity() {
            return Err(AdError::ArityMismatch { op: name, expected: op.arity(), got: args.len() });
        }
        for &a in args {
            self.check(a)?;
        }
        match op {
            AdOp::Add => self.add(args[0], args[1]),
            AdOp::Sub => self.sub(args[0], args[1]),
            AdOp::Mul => self.mul(args[0], args[1]),
            AdOp::Div => self.div(args[0], args[1]),
            AdOp::Neg => self.push_op(Op::Neg(args[0].0)),
            AdOp::Scale(c) => self.push_op(Op::Scale(args[0].0, c)),
            AdOp::Tanh => self.push_op(Op::Tanh(args[0].0)),
            AdOp::Sin => self.push_op(Op::Sin(args[0].0)),
            AdOp::Exp => self.push_op(Op::Exp(args[0].0)),
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        self.check(a)?;
        self.check(b)?;
        if self.is_const_like(b) {
            self.push_op(Op::AddC(a.0, b.0))
        } else if self.is_const_like(a) {
            self.push_op(Op::AddC(b.0, a.0))
        } else {
            self.push_op(Op::Add(a.0, b.0))
        }
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        self.check(a)?;
        self.check(b)?;
        self.push_op(Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        self.check(a)?;
        self.check(b)?;
        if self.is_const_like(b) {
            self.push_op(Op::MulC(a.0, b.0))
        } else if self.is_const_like(a) {
            self.push_op(Op::MulC(b.0, a.0))
        } else {
            self.push_op(Op::Mul(a.0, b.0))
        }
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AdError> {
        self.check(a)?;
        self.check(b)?;
        self.push_op(Op::Div(a.0, b.0))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, AdError> {
        self.apply(AdOp::Scale(c), &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, AdError> {
        self.apply(AdOp::Tanh, &[a])
    }

    pub fn value(&self, id: NodeId) -> Dual2 {
        self.state.values[id.idx()]
    }

    pub fn param_count(&self) -> usize {
        self.program.param_count()
    }

    /// Leaf node of parameter `index`, if registered.
    pub fn param_node(&self, index: usize) -> Option<NodeId> {
        self.program.param_slots.get(index).map(|&s| NodeId(s))
    }

    /// Gradient of an output scalar with respect to all registered
    /// parameters. The output scalar is described by `seeds`: for each node
    /// it touches, the derivative of the output with respect to that node's
    /// (val, dx, dt, dxx) components. The tape is left unchanged and
    /// reusable.
    pub fn backward(&mut self, seeds: &[(NodeId, Dual2)]) -> Result<Vec<f64>, AdError> {
        for &(id, _) in seeds {
            self.check(id)?;
        }
        self.program.sweep(&mut self.state, seeds);
        let mut grad = vec![0.0; self.program.param_count()];
        self.program.param_gradient_into(&self.state, &mut grad);
        self.program.clear_leaf_adjoints(&mut self.state);
        Ok(grad)
    }

    /// Convenience: gradient of `value(id).val`.
    pub fn backward_value(&mut self, id: NodeId) -> Result<Vec<f64>, AdError> {
        self.backward(&[(id, Dual2 { val: 1.0, dx: 0.0, dt: 0.0, dxx: 0.0 })])
    }

    /// Split into a shareable program and a reusable evaluation state.
    pub fn into_parts(self) -> (TapeProgram, TapeState) {
        (self.program, self.state)
    }
}

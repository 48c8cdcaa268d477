//! Scalar backends for writing a computation once and running it as a plain
//! f64 evaluation, a derivative-carrying [`Dual2`] evaluation, or a tape
//! recording. All three execute the same operation sequence, so their value
//! components agree bit for bit.

use super::dual::Dual2;
use super::tape::{InputVar, NodeId, Tape};

pub trait Algebra {
    type Value: Copy;

    /// Called once, before anything else, with the full parameter vector.
    fn register_params(&mut self, params: &[f64]);
    /// Handle for parameter `index` (must be registered).
    fn param(&mut self, index: usize, value: f64) -> Self::Value;
    /// Lift a constant. Must precede any arithmetic when recording.
    fn constant(&mut self, c: f64) -> Self::Value;

    fn add(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn sub(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn mul(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn scale(&mut self, a: Self::Value, c: f64) -> Self::Value;
    fn tanh(&mut self, a: Self::Value) -> Self::Value;

    /// `Some(false)` if a non-finite value is visible at this backend.
    fn finite(&self, a: Self::Value) -> Option<bool>;
}

/// Plain f64 evaluation.
pub struct ValueAlg;

impl Algebra for ValueAlg {
    type Value = f64;

    fn register_params(&mut self, _params: &[f64]) {}
    fn param(&mut self, _index: usize, value: f64) -> f64 {
        value
    }
    fn constant(&mut self, c: f64) -> f64 {
        c
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
    fn tanh(&mut self, a: f64) -> f64 {
        a.tanh()
    }
    fn finite(&self, a: f64) -> Option<bool> {
        Some(a.is_finite())
    }
}

/// Forward-mode evaluation carrying x/t derivatives, no tape.
pub struct DualAlg;

impl Algebra for DualAlg {
    type Value = Dual2;

    fn register_params(&mut self, _params: &[f64]) {}
    fn param(&mut self, _index: usize, value: f64) -> Dual2 {
        Dual2::constant(value)
    }
    fn constant(&mut self, c: f64) -> Dual2 {
        Dual2::constant(c)
    }
    fn add(&mut self, a: Dual2, b: Dual2) -> Dual2 {
        a + b
    }
    fn sub(&mut self, a: Dual2, b: Dual2) -> Dual2 {
        a - b
    }
    fn mul(&mut self, a: Dual2, b: Dual2) -> Dual2 {
        a * b
    }
    fn scale(&mut self, a: Dual2, c: f64) -> Dual2 {
        a.scale(c)
    }
    fn tanh(&mut self, a: Dual2) -> Dual2 {
        a.tanh()
    }
    fn finite(&self, a: Dual2) -> Option<bool> {
        Some(a.is_finite())
    }
}

/// Recording backend. Infallible by construction: the network uses no
/// division, and leaf/op ordering is owned by the generic forward.
pub struct TapeAlg<'a> {
    pub tape: &'a mut Tape,
}

impl TapeAlg<'_> {
    pub fn lift_input(&mut self, var: InputVar, value: f64) -> NodeId {
        self.tape.lift_input(var, value).expect("inputs must be lifted before ops")
    }
}

impl Algebra for TapeAlg<'_> {
    type Value = NodeId;

    fn register_params(&mut self, params: &[f64]) {
        for (i, &v) in params.iter().enumerate() {
            self.tape.lift_param(i, v).expect("params must be registered before ops");
        }
    }
    fn param(&mut self, index: usize, _value: f64) -> NodeId {
        self.tape.param_node(index).expect("parameter not registered")
    }
    fn constant(&mut self, c: f64) -> NodeId {
        self.tape.lift_const(c).expect("constants must be lifted before ops")
    }
    fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.tape.add(a, b).expect("add cannot fail on valid nodes")
    }
    fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.tape.sub(a, b).expect("sub cannot fail on valid nodes")
    }
    fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.tape.mul(a, b).expect("mul cannot fail on valid nodes")
    }
    fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.tape.scale(a, c).expect("scale cannot fail on valid nodes")
    }
    fn tanh(&mut self, a: NodeId) -> NodeId {
        self.tape.tanh(a).expect("tanh cannot fail on valid nodes")
    }
    fn finite(&self, _a: NodeId) -> Option<bool> {
        None
    }
}

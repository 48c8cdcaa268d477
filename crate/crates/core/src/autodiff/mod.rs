//! Scalar automatic differentiation: forward mode over (val, dx, dt, dxx)
//! with a recorded tape and a reverse sweep for exact parameter gradients.

mod algebra;
mod dual;
mod tape;

pub use algebra::{Algebra, DualAlg, TapeAlg, ValueAlg};
pub use dual::Dual2;
pub use tape::{AdError, AdOp, InputVar, NodeId, Tape, TapeProgram, TapeState};

pub(crate) use tape::{dot4, tanh_pullback};

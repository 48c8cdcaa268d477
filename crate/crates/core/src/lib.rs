//! A self-contained training laboratory for physics-informed neural networks
//! on the 1-D viscous Burgers equation,
//!
//! ```text
//!     u_t + u u_x - (0.01/pi) u_xx = 0,   t in (0,1], x in (-1,1),
//!     u(0,x) = -sin(pi x),                u(t,-1) = u(t,1) = 0,
//! ```
//!
//! built around a from-scratch scalar autodiff engine ([`autodiff`]) that
//! carries value / du/dx / du/dt / d2u/dx2 forward through a recorded tape and
//! pulls exact parameter gradients back through it. Four first-order
//! optimizers (Adam, Adamax, RMSprop, DiffGrad) share one harness so their
//! training behaviour can be compared on identical data, and two independent
//! reference solvers ([`oracle`]) provide the exact solution for error
//! reporting.

pub mod autodiff;
pub mod dense;
pub mod harness;
pub mod network;
pub mod optim;
pub mod oracle;
pub mod physics;
pub mod report;
pub mod sampler;

//! Reference solutions of the Burgers problem, independent of the network
//! stack, used to measure prediction error.
//!
//! Two mutually cross-checking methods:
//!
//! * `reference_colehopf` — the closed-form quotient of heat-kernel
//!   integrals obtained through the Cole–Hopf substitution, evaluated
//!   pointwise with Gauss–Hermite quadrature. With u(0, x) = -sin(pi x) the
//!   transformed initial state is exp(-cos(pi y) / (2 pi nu)) up to a
//!   constant factor that cancels in the quotient, giving
//!
//!       u(t, x) = sum_i w_i (s h_i / t) exp(E_i - E_max)
//!               / sum_i w_i exp(E_i - E_max),
//!
//!   with s = sqrt(4 nu t), y_i = x - s h_i, E_i = -cos(pi y_i) / (2 pi nu).
//!
//! * `reference_crank_nicolson` — a finite-difference march: Crank–Nicolson
//!   for the diffusion term, explicit lagged conservative convection
//!   (u^2 / 2)_x, Dirichlet walls, constant-matrix Thomas solves.

use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use crate::physics::initial_condition;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// Gauss–Hermite order below the supported floor of 8.
    QuadOrderTooSmall { order: usize },
    /// The Cole–Hopf denominator underflowed.
    DegenerateQuotient { t: f64, x: f64 },
    NegativeTime(f64),
    /// Finite-difference grid below the resolution floor (nx 512, nt 1024).
    GridTooCoarse { nx: usize, nt: usize },
    /// The march blew up; the grid needs refining.
    Unstable { max_abs: f64 },
    ZeroReferenceNorm,
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::QuadOrderTooSmall { order } => {
                write!(f, "quadrature order {order} is below the minimum of 8")
            }
            OracleError::DegenerateQuotient { t, x } => {
                write!(f, "quadrature quotient degenerated at (t, x) = ({t}, {x})")
            }
            OracleError::NegativeTime(t) => write!(f, "time {t} is negative"),
            OracleError::GridTooCoarse { nx, nt } => {
                write!(f, "grid {nx} x {nt} is below the 512 x 1024 resolution floor")
            }
            OracleError::Unstable { max_abs } => {
                write!(f, "solution reached |u| = {max_abs:.3}; refine the grid (larger nt)")
            }
            OracleError::ZeroReferenceNorm => {
                write!(f, "reference field has zero norm; relative error undefined")
            }
            OracleError::LengthMismatch { left, right } => {
                write!(f, "fields have different sizes ({left} vs {right})")
            }
        }
    }
}

impl std::error::Error for OracleError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleMethod {
    ColeHopf,
    CrankNicolson,
}

impl OracleMethod {
    pub fn name(self) -> &'static str {
        match self {
            OracleMethod::ColeHopf => "colehopf",
            OracleMethod::CrankNicolson => "crank_nicolson",
        }
    }
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "colehopf" => Ok(OracleMethod::ColeHopf),
            "crank_nicolson" | "cn" => Ok(OracleMethod::CrankNicolson),
            other => Err(format!("unknown oracle method {other:?} (colehopf or crank_nicolson)")),
        }
    }
}

/// Dense space-time field of a reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    pub t_values: Vec<f64>,
    pub x_values: Vec<f64>,
    /// Row-major: u[row * x_values.len() + col] = u(t_values[row], x_values[col]).
    pub u: Vec<f64>,
    pub method: OracleMethod,
}

impl ReferenceGrid {
    pub fn value(&self, ti: usize, xi: usize) -> f64 {
        self.u[ti * self.x_values.len() + xi]
    }

    pub fn row(&self, ti: usize) -> &[f64] {
        let w = self.x_values.len();
        &self.u[ti * w..(ti + 1) * w]
    }

    /// Bilinear interpolation, clamped to the grid's extent.
    pub fn sample(&self, t: f64, x: f64) -> f64 {
        let (ti, ft) = bracket(&self.t_values, t);
        let (xi, fx) = bracket(&self.x_values, x);
        let w = self.x_values.len();
        let u00 = self.u[ti * w + xi];
        let u01 = self.u[ti * w + xi + 1];
        let u10 = self.u[(ti + 1) * w + xi];
        let u11 = self.u[(ti + 1) * w + xi + 1];
        let top = u00 + (u01 - u00) * fx;
        let bot = u10 + (u11 - u10) * fx;
        top + (bot - top) * ft
    }
}

/// Index i and fraction f with knots[i] <= v <= knots[i+1]; clamps outside.
fn bracket(knots: &[f64], v: f64) -> (usize, f64) {
    let i = knots.partition_point(|&k| k <= v).saturating_sub(1).min(knots.len() - 2);
    let span = knots[i + 1] - knots[i];
    let f = ((v - knots[i]) / span).clamp(0.0, 1.0);
    (i, f)
}

/// Gauss–Hermite nodes and weights (weight function e^{-h^2}).
///
/// Nodes come from the Golub–Welsch eigenproblem: the symmetric tridiagonal
/// Jacobi matrix with zero diagonal and off-diagonal sqrt(k / 2) has the
/// nodes as eigenvalues. They are sorted ascending and symmetrized (the
/// rule is exactly symmetric; this removes eigensolver noise so odd
/// integrands cancel).
///
/// Weights deliberately do NOT use the eigenvector formula: first
/// eigenvector components are only absolutely accurate, so the extreme
/// weights (as small as e^{-x^2} ~ 1e-200) would be rounding noise — and
/// the solution quotient evaluated below is exquisitely sensitive to
/// relative errors in exactly those weights. Instead each weight uses the
/// Christoffel identity w = 1 / sum_k htilde_k(x)^2 over the orthonormal
/// polynomials, evaluated through the Gaussian-normalized recurrence
/// psi_k = htilde_k e^{-x^2/2} so every intermediate stays representable:
///
///     w = e^{-x^2} / sum_{k<n} psi_k(x)^2,
///     psi_{k+1} = x sqrt(2/(k+1)) psi_k - sqrt(k/(k+1)) psi_{k-1}.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = nalgebra::linalg::SymmetricEigen::new(m);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let h = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -h;
        nodes[j] = h;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let x = nodes[i];
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
        let mut sum = cur * cur;
        for k in 0..n - 1 {
            let kf = k as f64;
            let next = x * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            sum += cur * cur;
        }
        let w = (-x * x).exp() / sum;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gauss_hermite_cached(order: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(order).or_insert_with(|| Arc::new(gauss_hermite(order))).clone()
}

/// Closed-form solution via the Cole–Hopf quotient; see the module docs.
pub fn reference_colehopf(t: f64, x: f64, nu: f64, quad_order: usize) -> Result<f64, OracleError> {
    if quad_order < 8 {
        return Err(OracleError::QuadOrderTooSmall { order: quad_order });
    }
    if t < 0.0 {
        return Err(OracleError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(initial_condition(x));
    }
    let gh = gauss_hermite_cached(quad_order);
    let (nodes, weights) = (&gh.0, &gh.1);

    let s = (4.0 * nu * t).sqrt();
    let scale = 1.0 / (2.0 * PI * nu);
    let mut e_max = f64::NEG_INFINITY;
    let mut exponents = Vec::with_capacity(nodes.len());
    for &h in nodes {
        let y = x - s * h;
        let e = -(PI * y).cos() * scale;
        e_max = e_max.max(e);
        exponents.push(e);
    }
    // mirror nodes are summed as pairs so that at x = 0 (where the two
    // gains are bitwise equal and the integrand values exactly opposite)
    // the numerator cancels exactly, keeping the solution exactly odd
    let n = nodes.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let gi = weights[i] * (exponents[i] - e_max).exp();
        let gj = weights[j] * (exponents[j] - e_max).exp();
        num += gi * (s * nodes[i] / t) + gj * (s * nodes[j] / t);
        den += gi + gj;
    }
    if n % 2 == 1 {
        let m = n / 2;
        let gm = weights[m] * (exponents[m] - e_max).exp();
        num += gm * (s * nodes[m] / t);
        den += gm;
    }
    if den < 1e-300 {
        return Err(OracleError::DegenerateQuotient { t, x });
    }
    Ok(num / den)
}

/// Pointwise Cole–Hopf evaluation over a full grid (rows run over time).
pub fn reference_colehopf_grid(
    t_values: &[f64],
    x_values: &[f64],
    nu: f64,
    quad_order: usize,
) -> Result<ReferenceGrid, OracleError> {
    let rows: Result<Vec<Vec<f64>>, OracleError> = t_values
        .par_iter()
        .map(|&t| x_values.iter().map(|&x| reference_colehopf(t, x, nu, quad_order)).collect())
        .collect();
    let u = rows?.into_iter().flatten().collect();
    Ok(ReferenceGrid {
        t_values: t_values.to_vec(),
        x_values: x_values.to_vec(),
        u,
        method: OracleMethod::ColeHopf,
    })
}

/// Finite-difference march on (nt + 1) x (nx + 1) grid points covering
/// [0, 1] x [-1, 1]. The t = 0 row is the initial profile (walls forced to
/// their boundary value); every later row solves the constant tridiagonal
/// Crank–Nicolson system with the convection term lagged in conservative
/// form (u_{j+1}^2 - u_{j-1}^2) / (4 dx).
pub fn reference_crank_nicolson(nx: usize, nt: usize, nu: f64) -> Result<ReferenceGrid, OracleError> {
    if nx < 512 || nt < 1024 {
        return Err(OracleError::GridTooCoarse { nx, nt });
    }
    let x_values: Vec<f64> = (0..=nx).map(|j| -1.0 + 2.0 * j as f64 / nx as f64).collect();
    let t_values: Vec<f64> = (0..=nt).map(|n| n as f64 / nt as f64).collect();
    let dx = 2.0 / nx as f64;
    let dt = 1.0 / nt as f64;
    let lambda = nu * dt / (dx * dx);

    // Thomas factorization of the constant system: diagonal 1 + lambda,
    // off-diagonals -lambda / 2, interior size nx - 1.
    let a = -0.5 * lambda;
    let b = 1.0 + lambda;
    let m = nx - 1;
    let mut cp = vec![0.0; m];
    let mut inv = vec![0.0; m];
    inv[0] = 1.0 / b;
    cp[0] = a * inv[0];
    for k in 1..m {
        inv[k] = 1.0 / (b - a * cp[k - 1]);
        cp[k] = a * inv[k];
    }

    let width = nx + 1;
    let mut u = vec![0.0; (nt + 1) * width];
    for j in 1..nx {
        u[j] = initial_condition(x_values[j]);
    }

    let mut rhs = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for n in 0..nt {
        let (done, rest) = u.split_at_mut((n + 1) * width);
        let prev = &done[n * width..];
        let next = &mut rest[..width];
        for k in 0..m {
            let j = k + 1;
            let diff = prev[j + 1] - 2.0 * prev[j] + prev[j - 1];
            let conv = (prev[j + 1] * prev[j + 1] - prev[j - 1] * prev[j - 1]) / (4.0 * dx);
            rhs[k] = prev[j] + 0.5 * lambda * diff - dt * conv;
        }
        dp[0] = rhs[0] * inv[0];
        for k in 1..m {
            dp[k] = (rhs[k] - a * dp[k - 1]) * inv[k];
        }
        next[nx] = 0.0;
        next[0] = 0.0;
        next[m] = dp[m - 1];
        for k in (0..m - 1).rev() {
            next[k + 1] = dp[k] - cp[k] * next[k + 2];
        }
        let mut max_abs = 0.0f64;
        for &v in next.iter() {
            if !v.is_finite() {
                max_abs = f64::INFINITY;
                break;
            }
            max_abs = max_abs.max(v.abs());
        }
        if max_abs > 10.0 {
            return Err(OracleError::Unstable { max_abs });
        }
    }
    Ok(ReferenceGrid { t_values, x_values, u, method: OracleMethod::CrankNicolson })
}

/// Convergence estimate: the max-abs change of the solution at shared grid
/// points when both resolutions are doubled.
pub fn refinement_delta(nx: usize, nt: usize, nu: f64) -> Result<f64, OracleError> {
    let coarse = reference_crank_nicolson(nx, nt, nu)?;
    let fine = reference_crank_nicolson(2 * nx, 2 * nt, nu)?;
    let mut delta = 0.0f64;
    for n in 0..=nt {
        for j in 0..=nx {
            let d = (coarse.value(n, j) - fine.value(2 * n, 2 * j)).abs();
            delta = delta.max(d);
        }
    }
    Ok(delta)
}

/// L2 norm of (pred - reference) over the L2 norm of reference.
pub fn relative_l2_error(pred: &[f64], reference: &[f64]) -> Result<f64, OracleError> {
    if pred.len() != reference.len() {
        return Err(OracleError::LengthMismatch { left: pred.len(), right: reference.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(OracleError::ZeroReferenceNorm);
    }
    Ok((num / den).sqrt())
}

/// The probe set used for cross-oracle checks: the four report times and 64
/// evenly spaced positions with |x| <= 0.95 (quadrature conditioning
/// degrades right at the walls).
pub fn probe_points() -> (Vec<f64>, Vec<f64>) {
    let ts = vec![0.25, 0.5, 0.75, 1.0];
    let xs = (0..64).map(|i| -0.95 + 1.9 * i as f64 / 63.0).collect();
    (ts, xs)
}

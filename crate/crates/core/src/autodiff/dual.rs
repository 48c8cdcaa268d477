use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Truncated Taylor scalar: a value together with the three input
/// derivatives the Burgers residual needs, d/dx, d/dt and d2/dx2.
///
/// Algebraically this is arithmetic in R[ex,et]/(ex^3, et^2, ex*et): mixed
/// d2/dxdt and pure d2/dt2 terms are dropped, everything else is exact.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual2 {
    pub val: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
}

impl Dual2 {
    pub const ZERO: Dual2 = Dual2 { val: 0.0, dx: 0.0, dt: 0.0, dxx: 0.0 };

    /// Lift a constant: no dependence on x or t.
    pub fn constant(c: f64) -> Self {
        Dual2 { val: c, dx: 0.0, dt: 0.0, dxx: 0.0 }
    }

    /// Seed the spatial input: d/dx = 1, d2/dx2 = 0.
    pub fn seed_x(x: f64) -> Self {
        Dual2 { val: x, dx: 1.0, dt: 0.0, dxx: 0.0 }
    }

    /// Seed the temporal input: d/dt = 1.
    pub fn seed_t(t: f64) -> Self {
        Dual2 { val: t, dx: 0.0, dt: 1.0, dxx: 0.0 }
    }

    /// Multiply by a plain constant.
    pub fn scale(self, c: f64) -> Self {
        Dual2 { val: self.val * c, dx: self.dx * c, dt: self.dt * c, dxx: self.dxx * c }
    }

    /// Chain rule for a smooth unary f given f(val), f'(val), f''(val).
    #[inline]
    fn unary(self, f0: f64, d1: f64, d2: f64) -> Self {
        Dual2 {
            val: f0,
            dx: d1 * self.dx,
            dt: d1 * self.dt,
            dxx: d2 * self.dx * self.dx + d1 * self.dxx,
        }
    }

    pub fn tanh(self) -> Self {
        let th = self.val.tanh();
        let d1 = 1.0 - th * th;
        self.unary(th, d1, -2.0 * th * d1)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.unary(s, c, -s)
    }

    pub fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e, e)
    }

    /// 1/self. IEEE semantics at val = 0 (the tape layer turns that into an
    /// explicit error, plain Dual2 arithmetic does not).
    pub fn recip(self) -> Self {
        let w0 = 1.0 / self.val;
        let w0sq = w0 * w0;
        Dual2 {
            val: w0,
            dx: -self.dx * w0sq,
            dt: -self.dt * w0sq,
            dxx: -self.dxx * w0sq + 2.0 * self.dx * self.dx * w0sq * w0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.val.is_finite() && self.dx.is_finite() && self.dt.is_finite() && self.dxx.is_finite()
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        Dual2 { val: self.val + o.val, dx: self.dx + o.dx, dt: self.dt + o.dt, dxx: self.dxx + o.dxx }
    }
}

impl AddAssign for Dual2 {
    fn add_assign(&mut self, o: Dual2) {
        self.val += o.val;
        self.dx += o.dx;
        self.dt += o.dt;
        self.dxx += o.dxx;
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        Dual2 { val: self.val - o.val, dx: self.dx - o.dx, dt: self.dt - o.dt, dxx: self.dxx - o.dxx }
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 { val: -self.val, dx: -self.dx, dt: -self.dt, dxx: -self.dxx }
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        // (f*g)'' picks up the 2 f' g' cross term; mixed x/t terms are dropped
        // by construction, so dt stays first-order.
        Dual2 {
            val: self.val * o.val,
            dx: self.dx * o.val + self.val * o.dx,
            dt: self.dt * o.val + self.val * o.dt,
            dxx: self.dxx * o.val + 2.0 * self.dx * o.dx + self.val * o.dxx,
        }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, o: Dual2) -> Dual2 {
        // Quotient form: solve f = h*g component by component.
        let h0 = self.val / o.val;
        let h1 = (self.dx - h0 * o.dx) / o.val;
        let h2 = (self.dt - h0 * o.dt) / o.val;
        let h3 = (self.dxx - h0 * o.dxx - 2.0 * h1 * o.dx) / o.val;
        Dual2 { val: h0, dx: h1, dt: h2, dxx: h3 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn seeds_and_constant() {
        assert_eq!(Dual2::seed_x(0.3), Dual2 { val: 0.3, dx: 1.0, dt: 0.0, dxx: 0.0 });
        assert_eq!(Dual2::seed_t(0.7), Dual2 { val: 0.7, dx: 0.0, dt: 1.0, dxx: 0.0 });
        assert_eq!(Dual2::constant(2.0), Dual2 { val: 2.0, dx: 0.0, dt: 0.0, dxx: 0.0 });
    }

    #[test]
    fn tanh_at_zero() {
        let y = Dual2::seed_x(0.0).tanh();
        assert_eq!(y, Dual2 { val: 0.0, dx: 1.0, dt: 0.0, dxx: 0.0 });
    }

    #[test]
    fn sin_at_half_pi() {
        let y = Dual2::seed_x(PI / 2.0).sin();
        assert_abs_diff_eq!(y.val, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.dt, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.dxx, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn square_via_mul() {
        let x = Dual2::seed_x(3.0);
        let y = x * x;
        assert_eq!(y, Dual2 { val: 9.0, dx: 6.0, dt: 0.0, dxx: 2.0 });
    }

    #[test]
    fn second_derivative_of_sin_kx() {
        // u = sin(kx)  =>  u_xx = -k^2 sin(kx)
        for &k in &[1.0, PI] {
            for &x in &[-0.9, -0.25, 0.0, 0.4, 1.0] {
                let u = Dual2::seed_x(x).scale(k).sin();
                assert_abs_diff_eq!(u.dxx, -k * k * (k * x).sin(), epsilon = 1e-10);
                assert_abs_diff_eq!(u.dx, k * (k * x).cos(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn division_matches_hand_derivatives() {
        // h(x) = x / (2 + x): h' = 2/(2+x)^2, h'' = -4/(2+x)^3
        let x = Dual2::seed_x(1.0);
        let h = x / (Dual2::constant(2.0) + x);
        assert_abs_diff_eq!(h.val, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.dx, 2.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.dxx, -4.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn recip_is_consistent_with_div() {
        let x = Dual2 { val: 1.7, dx: 0.3, dt: -0.2, dxx: 0.9 };
        let a = Dual2::constant(1.0) / x;
        let b = x.recip();
        assert_abs_diff_eq!(a.val, b.val, epsilon = 1e-15);
        assert_abs_diff_eq!(a.dx, b.dx, epsilon = 1e-15);
        assert_abs_diff_eq!(a.dt, b.dt, epsilon = 1e-15);
        assert_abs_diff_eq!(a.dxx, b.dxx, epsilon = 1e-15);
    }

    /// Central finite differences on a composed expression; checks dx and dxx
    /// of the whole Dual2 chain against numeric truth.
    #[test]
    fn composed_expression_matches_finite_differences() {
        fn f(x: f64, t: f64) -> f64 {
            ((x * t).sin().exp() * x.tanh()) / (2.0 + x.tanh()) - t.exp()
        }
        fn fd(x: f64, t: f64) -> Dual2 {
            let xd = Dual2::seed_x(x);
            let td = Dual2::seed_t(t);
            ((xd * td).sin().exp() * xd.tanh()) / (Dual2::constant(2.0) + xd.tanh()) - td.exp()
        }
        let h = 1e-5;
        for &(x, t) in &[(0.4, 0.8), (-0.7, 0.2), (0.95, 1.0), (-0.1, 0.5)] {
            let d = fd(x, t);
            let ddx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let ddt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
            let ddxx = (f(x + h, t) - 2.0 * f(x, t) + f(x - h, t)) / (h * h);
            assert_abs_diff_eq!(d.val, f(x, t), epsilon = 1e-14);
            assert_abs_diff_eq!(d.dx, ddx, epsilon = 1e-8);
            assert_abs_diff_eq!(d.dt, ddt, epsilon = 1e-8);
            assert_abs_diff_eq!(d.dxx, ddxx, epsilon = 1e-5);
        }
    }
}

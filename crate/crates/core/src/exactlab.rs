//! Closed-form laboratory: Pinney superposition, the initial-value form,
//! the Ermakov-Lewis invariant, the third-order equation for `alpha^2`,
//! Mobius maps and the Riccati reduction.
//!
//! `hbar = m = 1` throughout. Times are complex so the same callables serve
//! the complex-time comparisons in [`crate::numeric`].

use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::C64;

/// Fundamental system of `eta'' + omega^2 eta = 0` with `u(0) = 1`,
/// `u'(0) = 0`, `v(0) = 0`, `v'(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorBasis {
    pub omega: C64,
}

pub fn oscillator_basis(omega: C64) -> OscillatorBasis {
    OscillatorBasis { omega }
}

impl OscillatorBasis {
    fn trivial(&self) -> bool {
        self.omega.is_zero()
    }

    /// `[u, u', u'']` at `t`.
    pub fn u(&self, t: C64) -> [C64; 3] {
        if self.trivial() {
            return [C64::new(1.0, 0.0), C64::zero(), C64::zero()];
        }
        let w = self.omega;
        let (c, s) = ((w * t).cos(), (w * t).sin());
        [c, -w * s, -w * w * c]
    }

    /// `[v, v', v'']` at `t`.
    pub fn v(&self, t: C64) -> [C64; 3] {
        if self.trivial() {
            return [t, C64::new(1.0, 0.0), C64::zero()];
        }
        let w = self.omega;
        let (c, s) = ((w * t).cos(), (w * t).sin());
        [s / w, c, -w * s]
    }

    pub fn wronskian(&self, t: C64) -> C64 {
        let (u, v) = (self.u(t), self.v(t));
        u[0] * v[1] - u[1] * v[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadFormParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Which sign convention for the Pinney constraint the parameters satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintVerdict {
    pub ac_minus_b2: f64,
    pub b2_minus_ac: f64,
    /// `1 / W^2`.
    pub target: f64,
    pub satisfies_ac_minus_b2: bool,
    pub satisfies_b2_minus_ac: bool,
    pub convention: String,
}

impl QuadFormParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        QuadFormParams { a, b, c }
    }

    pub fn constraint_verdict(&self, wronskian: f64) -> ConstraintVerdict {
        let target = 1.0 / (wronskian * wronskian);
        let ac = self.a * self.c - self.b * self.b;
        let tol = 1e-12 * target.abs().max(1.0);
        let sat_ac = (ac - target).abs() <= tol;
        let sat_b2 = (-ac - target).abs() <= tol;
        let convention = match (sat_ac, sat_b2) {
            (true, _) => "AC−B² convention",
            (false, true) => "B²−AC convention",
            (false, false) => "neither convention",
        };
        ConstraintVerdict {
            ac_minus_b2: ac,
            b2_minus_ac: -ac,
            target,
            satisfies_ac_minus_b2: sat_ac,
            satisfies_b2_minus_ac: sat_b2,
            convention: convention.to_string(),
        }
    }
}

/// `alpha(t) = sqrt(A u^2 + 2 B u v + C v^2)` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinneySolution {
    pub params: QuadFormParams,
    pub basis: OscillatorBasis,
}

impl PinneySolution {
    /// Quadratic form `Q = alpha^2` and its first two derivatives.
    pub fn quad(&self, t: C64) -> [C64; 3] {
        let (u, v) = (self.basis.u(t), self.basis.v(t));
        let QuadFormParams { a, b, c } = self.params;
        let q = a * u[0] * u[0] + 2.0 * b * u[0] * v[0] + c * v[0] * v[0];
        let dq = 2.0 * a * u[0] * u[1] + 2.0 * b * (u[1] * v[0] + u[0] * v[1]) + 2.0 * c * v[0] * v[1];
        let ddq = 2.0 * a * (u[1] * u[1] + u[0] * u[2])
            + 2.0 * b * (u[2] * v[0] + 2.0 * u[1] * v[1] + u[0] * v[2])
            + 2.0 * c * (v[1] * v[1] + v[0] * v[2]);
        [q, dq, ddq]
    }

    /// `[alpha, alpha', alpha'']`, principal square root.
    pub fn eval(&self, t: C64) -> [C64; 3] {
        let [q, dq, ddq] = self.quad(t);
        let a = q.sqrt();
        let da = dq / (2.0 * a);
        let dda = (ddq / 2.0 - da * da) / a;
        [a, da, dda]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(C64::new(t, 0.0))[0].re
    }

    /// `alpha'' + omega^2 alpha - alpha^{-3}`.
    pub fn ep_residual(&self, t: C64) -> C64 {
        let [a, _, dda] = self.eval(t);
        let w = self.basis.omega;
        dda + w * w * a - a.powi(-3)
    }
}

const DOMAIN_SAMPLES: usize = 2000;
const DOMAIN_TOL: f64 = 1e-12;

/// Builds the Pinney solution; with an interval, checks that the quadratic
/// form stays positive there (real-solution branch).
pub fn pinney_solution(
    params: QuadFormParams,
    basis: OscillatorBasis,
    interval: Option<(f64, f64)>,
) -> Result<PinneySolution> {
    let sol = PinneySolution { params, basis };
    if let Some((t0, t1)) = interval {
        let q = |t: f64| sol.quad(C64::new(t, 0.0))[0].re;
        let ts: Vec<f64> = (0..=DOMAIN_SAMPLES)
            .map(|i| t0 + (t1 - t0) * i as f64 / DOMAIN_SAMPLES as f64)
            .collect();
        for (i, &t) in ts.iter().enumerate() {
            if q(t) <= DOMAIN_TOL {
                return Err(Error::PinneyDomain { t });
            }
            // a double zero can hide between samples; refine local minima
            if i > 0 && i + 1 < ts.len() && q(t) <= q(ts[i - 1]) && q(t) <= q(ts[i + 1]) {
                let (mut lo, mut hi) = (ts[i - 1], ts[i + 1]);
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if q(m1) < q(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let tm = 0.5 * (lo + hi);
                if q(tm) <= DOMAIN_TOL {
                    return Err(Error::PinneyDomain { t: tm });
                }
            }
        }
    }
    Ok(sol)
}

/// Initial-value form of the Pinney solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CruzSolution {
    pub pinney: PinneySolution,
    pub sign: i8,
    /// `max(|alpha(0) - alpha0|, |alpha'(0) - alpha0'|)`.
    pub ic_mismatch: f64,
    /// False when the mismatch exceeds `1e-8` ("normalization mismatch").
    pub normalization_ok: bool,
}

/// `alpha^2 = (a1^2 + 1/a0^2) eta1^2 + a0^2 eta2^2 +- 2 a1 a0 eta1 eta2` with
/// `eta1 = v` and `eta2 = u`.
pub fn cruz_solution(alpha0: f64, dalpha0: f64, basis: OscillatorBasis, sign: i8) -> Result<CruzSolution> {
    if alpha0 == 0.0 {
        return Err(Error::Precondition("alpha0 must be nonzero".into()));
    }
    let s = if sign < 0 { -1.0 } else { 1.0 };
    let params = QuadFormParams::new(
        alpha0 * alpha0,
        s * dalpha0 * alpha0,
        dalpha0 * dalpha0 + 1.0 / (alpha0 * alpha0),
    );
    let pinney = PinneySolution { params, basis };
    let [a, da, _] = pinney.eval(C64::zero());
    let ic_mismatch = (a - alpha0).norm().max((da - dalpha0).norm());
    Ok(CruzSolution {
        pinney,
        sign: s as i8,
        ic_mismatch,
        normalization_ok: ic_mismatch <= 1e-8,
    })
}

/// `I = ((eta' alpha - eta alpha')^2 + (eta / alpha)^2) / 2`.
pub fn ermakov_invariant(eta: C64, deta: C64, alpha: C64, dalpha: C64) -> Result<C64> {
    if alpha.is_zero() {
        return Err(Error::SingularInput("alpha = 0 in invariant".into()));
    }
    let m = deta * alpha - eta * dalpha;
    let r = eta / alpha;
    Ok(0.5 * (m * m + r * r))
}

/// Ridders-Richardson extrapolation of a difference quotient `quot(h)`
/// whose error expands in even powers of `h`. Returns the estimate and its
/// error bound.
pub fn ridders<F: Fn(f64) -> C64>(quot: F, h0: f64) -> (C64, f64) {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 10;
    const SAFE: f64 = 2.0;
    let mut a = [[C64::zero(); NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = quot(h);
    let mut ans = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = quot(h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let errt = (a[j][i] - a[j - 1][i]).norm().max((a[j][i] - a[j - 1][i - 1]).norm());
            if errt <= err {
                err = errt;
                ans = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).norm() >= SAFE * err {
            break;
        }
    }
    (ans, err)
}

/// Numerical derivative of order 1, 2 or 3 along the real direction by
/// central differences with extrapolation.
pub fn numeric_derivative<F: Fn(f64) -> C64>(f: F, t: f64, order: u8) -> C64 {
    let quot = |h: f64| -> C64 {
        match order {
            1 => (f(t + h) - f(t - h)) / (2.0 * h),
            2 => (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
            3 => (f(t + 2.0 * h) - 2.0 * f(t + h) + 2.0 * f(t - h) - f(t - 2.0 * h)) / (2.0 * h * h * h),
            _ => panic!("derivative order {order} unsupported"),
        }
    };
    ridders(quot, 0.1).0
}

/// `x''' + 4 omega^2 x'` at `t` with numerical derivatives (constant omega).
pub fn third_order_residual<F: Fn(f64) -> C64>(x: F, omega: C64, t: f64) -> C64 {
    let d1 = numeric_derivative(&x, t, 1);
    let d3 = numeric_derivative(&x, t, 3);
    d3 + 4.0 * omega * omega * d1
}

/// Point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiemannPoint {
    Finite(C64),
    Infinity,
}

/// Homography `t -> (a t + b) / (c t + d)` with `ad - bc != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mobius {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() <= 1e-14 * (a * d).norm().max((b * c).norm()).max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateMobius);
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn apply(&self, t: RiemannPoint) -> RiemannPoint {
        match t {
            RiemannPoint::Infinity => {
                if self.c.is_zero() {
                    RiemannPoint::Infinity
                } else {
                    RiemannPoint::Finite(self.a / self.c)
                }
            }
            RiemannPoint::Finite(t) => {
                let den = self.c * t + self.d;
                if den.is_zero() {
                    RiemannPoint::Infinity
                } else {
                    RiemannPoint::Finite((self.a * t + self.b) / den)
                }
            }
        }
    }

    /// Matrix product `self * other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }
}

pub fn mobius_transform(t: C64, coeffs: [C64; 4]) -> Result<RiemannPoint> {
    let [a, b, c, d] = coeffs;
    Ok(Mobius::new(a, b, c, d)?.apply(RiemannPoint::Finite(t)))
}

/// `y = y_R + i y_I` with `y_I = 1/alpha^2`, `y_R = alpha'/alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiState {
    pub y_r: C64,
    pub y_i: C64,
    pub alpha: C64,
}

impl RiccatiState {
    pub fn from_width(alpha: C64, dalpha: C64) -> Result<Self> {
        if alpha.is_zero() {
            return Err(Error::SingularInput("alpha = 0 in Riccati state".into()));
        }
        Ok(RiccatiState {
            y_r: dalpha / alpha,
            y_i: 1.0 / (alpha * alpha),
            alpha,
        })
    }

    pub fn y(&self) -> C64 {
        self.y_r + C64::i() * self.y_i
    }
}

/// `y' + y^2 + omega^2` for the state built from `alpha`.
pub fn riccati_residual(alpha: C64, dalpha: C64, ddalpha: C64, omega: C64) -> Result<C64> {
    let st = RiccatiState::from_width(alpha, dalpha)?;
    let dy_r = ddalpha / alpha - dalpha * dalpha / (alpha * alpha);
    let dy_i = -2.0 * dalpha / (alpha * alpha * alpha);
    let y = st.y();
    Ok(dy_r + C64::i() * dy_i + y * y + omega * omega)
}

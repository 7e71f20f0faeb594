//! Coefficient fields used by the series engine.
//!
//! Two fields are supported: double-precision complex numbers and exact
//! Gaussian rationals (`p/q + i r/s` with arbitrary-size integers). Every
//! algorithm in [`crate::series`] is generic over [`Scalar`], so the same
//! recursion can be run in exact mode when all inputs are rational.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::rational::{BigRational, Ratio};
use num::{BigInt, Complex, One, Rational64, Signed, ToPrimitive, Zero};

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

/// Exact Gaussian rational.
pub type Exact = Complex<BigRational>;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_ratio(r: Rational64) -> Self;

    /// Exact conversion for `Exact` (binary fractions are rationals);
    /// `None` for non-finite input.
    fn from_c64(z: C64) -> Option<Self>;

    fn to_c64(&self) -> C64;

    /// Real rational; rounded in float mode.
    fn from_big(r: &BigRational) -> Self;

    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }

    /// Zero test used by the recursions: exact equality in exact mode,
    /// `|x| <= tol` in float mode.
    fn is_negligible(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() <= tol
        }
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_ratio(r: Rational64) -> Self {
        C64::new(*r.numer() as f64 / *r.denom() as f64, 0.0)
    }

    fn from_c64(z: C64) -> Option<Self> {
        (z.re.is_finite() && z.im.is_finite()).then_some(z)
    }

    fn to_c64(&self) -> C64 {
        *self
    }

    fn from_big(r: &BigRational) -> Self {
        C64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;

    fn from_ratio(r: Rational64) -> Self {
        Complex::new(
            BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            BigRational::zero(),
        )
    }

    fn from_c64(z: C64) -> Option<Self> {
        Some(Complex::new(
            BigRational::from_float(z.re)?,
            BigRational::from_float(z.im)?,
        ))
    }

    fn to_c64(&self) -> C64 {
        C64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    fn from_big(r: &BigRational) -> Self {
        Complex::new(r.clone(), BigRational::zero())
    }
}

pub fn big_ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn exact(re: BigRational, im: BigRational) -> Exact {
    Complex::new(re, im)
}

pub fn exact_from_ratio(r: Rational64) -> Exact {
    Exact::from_ratio(r)
}

/// Best rational approximation with denominator at most `max_den`
/// (continued fractions). Returns `None` when the approximation misses
/// `x` by more than `tol`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rational64> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut frac = x;
    let mut best: Option<Rational64> = None;
    for _ in 0..64 {
        let a = frac.floor();
        let ai = a as i64;
        let p2 = ai.checked_mul(p1).and_then(|v| v.checked_add(p0))?;
        let q2 = ai.checked_mul(q1).and_then(|v| v.checked_add(q0))?;
        if q2 > max_den {
            break;
        }
        best = Some(Ratio::new(p2, q2));
        if (p2 as f64 / q2 as f64 - x).abs() <= tol * 1e-3 {
            break;
        }
        let rem = frac - a;
        if rem.abs() < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let r = best?;
    let approx = *r.numer() as f64 / *r.denom() as f64;
    ((approx - x).abs() <= tol).then_some(r)
}

/// Snap a float complex to a Gaussian rational with small denominators.
pub fn snap_gaussian(z: C64, max_den: i64, tol: f64) -> Option<Exact> {
    let re = rationalize(z.re, max_den, tol)?;
    let im = rationalize(z.im, max_den, tol)?;
    Some(Complex::new(to_big(re), to_big(im)))
}

pub fn to_big(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Converts a small exact rational back to `Rational64` when it fits.
pub fn big_to_ratio64(r: &BigRational) -> Option<Rational64> {
    let n = r.numer().to_i64()?;
    let d = r.denom().to_i64()?;
    Some(Ratio::new(n, d))
}

/// `"-1/3"`-style rendering used in reports.
pub fn fmt_ratio(r: &Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn fmt_big(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn fmt_exact(z: &Exact) -> String {
    if z.im.is_zero() {
        fmt_big(&z.re)
    } else if z.re.is_zero() {
        format!("{}i", fmt_big(&z.im))
    } else {
        let sign = if z.im.is_negative() { "-" } else { "+" };
        format!("{}{}{}i", fmt_big(&z.re), sign, fmt_big(&z.im.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(-1.0 / 3.0, 1000, 1e-12), Some(Ratio::new(-1, 3)));
        assert_eq!(rationalize(0.5, 1000, 1e-12), Some(Ratio::new(1, 2)));
        assert_eq!(rationalize(4.0, 1000, 1e-12), Some(Ratio::from_integer(4)));
        assert_eq!(rationalize(std::f64::consts::PI, 100, 1e-9), None);
    }

    #[test]
    fn exact_conversion_is_lossless_for_binary_fractions() {
        let z = Exact::from_c64(C64::new(0.375, -2.0)).unwrap();
        assert_eq!(z.re, big_ratio(3, 8));
        assert_eq!(z.im, big_ratio(-2, 1));
        assert_eq!(z.to_c64(), C64::new(0.375, -2.0));
        assert!(Exact::from_c64(C64::new(f64::NAN, 0.0)).is_none());
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_exact(&snap_gaussian(C64::new(1.0, -1.0), 10, 1e-12).unwrap()), "1-1i");
        assert_eq!(fmt_ratio(&Ratio::new(-2, 945)), "-2/945");
    }
}

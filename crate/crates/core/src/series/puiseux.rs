use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::integer::lcm;
use num::Rational64;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, C64};

/// Truncated Puiseux series `sum_j c_j tau^{j/n}`.
///
/// Coefficients are known exactly for `j <= truncation`; everything above is
/// unknown. `n = 1` is an ordinary Laurent series. The first stored
/// coefficient is nonzero unless the series is zero through its truncation,
/// in which case no coefficients are stored and `min_index = truncation + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PuiseuxSeries<S> {
    n: u32,
    start: i64,
    coeffs: Vec<S>,
    trunc: i64,
}

impl<S: Scalar> PuiseuxSeries<S> {
    /// Series with coefficients `coeffs[i]` at index `start + i`, known
    /// through the last given index.
    pub fn new(n: u32, start: i64, coeffs: Vec<S>) -> Self {
        let trunc = start + coeffs.len() as i64 - 1;
        Self::with_truncation(n, start, coeffs, trunc)
    }

    /// Like [`new`](Self::new) but pads with zeros (or cuts) to `trunc`.
    pub fn with_truncation(n: u32, start: i64, mut coeffs: Vec<S>, trunc: i64) -> Self {
        assert!(n >= 1, "branch order must be positive");
        let len = (trunc - start + 1).max(0) as usize;
        coeffs.resize(len, S::zero());
        let mut s = PuiseuxSeries {
            n,
            start,
            coeffs,
            trunc,
        };
        s.trim();
        s
    }

    pub fn zero(n: u32, trunc: i64) -> Self {
        PuiseuxSeries {
            n,
            start: trunc + 1,
            coeffs: Vec::new(),
            trunc,
        }
    }

    /// `c tau^{j/n}` known through `trunc`.
    pub fn monomial(n: u32, j: i64, c: S, trunc: i64) -> Self {
        if j > trunc {
            return Self::zero(n, trunc);
        }
        Self::with_truncation(n, j, vec![c], trunc)
    }

    fn trim(&mut self) {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.start += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.start = self.trunc + 1;
        }
    }

    pub fn branch_order(&self) -> u32 {
        self.n
    }

    pub fn min_index(&self) -> i64 {
        self.start
    }

    pub fn truncation(&self) -> i64 {
        self.trunc
    }

    /// Leading exponent `min_index / n` as a rational.
    pub fn valuation(&self) -> Rational64 {
        Rational64::new(self.start, self.n as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Some(c_j)` when `j` is within the known range (zero below the
    /// leading term), `None` above the truncation.
    pub fn coeff(&self, j: i64) -> Option<S> {
        if j > self.trunc {
            None
        } else if j < self.start {
            Some(S::zero())
        } else {
            Some(self.coeffs[(j - self.start) as usize].clone())
        }
    }

    pub fn leading_coeff(&self) -> Option<&S> {
        self.coeffs.first()
    }

    /// Nonzero-or-zero terms `(j, c_j)` from the leading index to the truncation.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.start + i as i64, c))
    }

    /// Same series re-indexed with branch order `n * factor`.
    pub fn lift(&self, factor: u32) -> Self {
        if factor == 1 {
            return self.clone();
        }
        let f = factor as i64;
        let trunc = (self.trunc + 1) * f - 1;
        if self.is_zero() {
            return Self::zero(self.n * factor, trunc);
        }
        let start = self.start * f;
        let mut coeffs = vec![S::zero(); (trunc - start + 1) as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i * factor as usize] = c.clone();
        }
        Self::with_truncation(self.n * factor, start, coeffs, trunc)
    }

    fn unify(&self, other: &Self) -> (Self, Self) {
        let n = lcm(self.n, other.n);
        (self.lift(n / self.n), other.lift(n / other.n))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> PuiseuxSeries<T> {
        PuiseuxSeries::with_truncation(
            self.n,
            self.start,
            self.coeffs.iter().map(f).collect(),
            self.trunc,
        )
    }

    pub fn to_c64(&self) -> PuiseuxSeries<C64> {
        self.map(|c| c.to_c64())
    }

    pub fn scale(&self, k: &S) -> Self {
        self.map(|c| c.clone() * k.clone())
    }

    /// Adds the exactly known constant `c` (a `tau^0` term).
    pub fn add_constant(&self, c: &S) -> Self {
        if self.trunc < 0 || c.is_zero() {
            return self.clone();
        }
        let start = self.start.min(0);
        let mut coeffs = vec![S::zero(); (self.trunc - start + 1) as usize];
        for (j, v) in self.terms() {
            coeffs[(j - start) as usize] = v.clone();
        }
        let i0 = (-start) as usize;
        coeffs[i0] = coeffs[i0].clone() + c.clone();
        Self::with_truncation(self.n, start, coeffs, self.trunc)
    }

    fn add_impl(&self, other: &Self, sign: bool) -> Self {
        let (a, b) = self.unify(other);
        let trunc = a.trunc.min(b.trunc);
        let start = a.start.min(b.start).min(trunc + 1);
        let mut coeffs = vec![S::zero(); (trunc - start + 1).max(0) as usize];
        for (j, c) in a.terms().filter(|(j, _)| *j <= trunc) {
            let i = (j - start) as usize;
            coeffs[i] = coeffs[i].clone() + c.clone();
        }
        for (j, c) in b.terms().filter(|(j, _)| *j <= trunc) {
            let i = (j - start) as usize;
            coeffs[i] = if sign {
                coeffs[i].clone() + c.clone()
            } else {
                coeffs[i].clone() - c.clone()
            };
        }
        Self::with_truncation(a.n, start, coeffs, trunc)
    }

    pub fn mul_series(&self, other: &Self) -> Self {
        let (a, b) = self.unify(other);
        let trunc = (a.trunc + b.start).min(b.trunc + a.start);
        if a.is_zero() || b.is_zero() {
            return Self::zero(a.n, trunc);
        }
        let start = a.start + b.start;
        if start > trunc {
            return Self::zero(a.n, trunc);
        }
        let len = (trunc - start + 1) as usize;
        let mut coeffs = vec![S::zero(); len];
        for (i, ca) in a.coeffs.iter().enumerate().take(len) {
            if ca.is_zero() {
                continue;
            }
            for (k, cb) in b.coeffs.iter().enumerate().take(len - i) {
                coeffs[i + k] = coeffs[i + k].clone() + ca.clone() * cb.clone();
            }
        }
        Self::with_truncation(a.n, start, coeffs, trunc)
    }

    /// Multiplicative inverse by leading-term division.
    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroSeriesInversion);
        }
        let m = self.start;
        let rel = self.trunc - m;
        let lead = self.coeffs[0].clone();
        let inv_lead = S::one() / lead;
        let mut out: Vec<S> = Vec::with_capacity(rel as usize + 1);
        out.push(inv_lead.clone());
        for k in 1..=rel as usize {
            let mut acc = S::zero();
            for i in 1..=k {
                acc = acc + self.coeffs[i].clone() * out[k - i].clone();
            }
            out.push(-(acc * inv_lead.clone()));
        }
        Ok(Self::with_truncation(self.n, -m, out, -m + rel))
    }

    /// Integer power; negative exponents go through [`invert`](Self::invert).
    pub fn pow(&self, e: i32) -> Result<Self> {
        let base = if e < 0 { self.invert()? } else { self.clone() };
        if e == 0 {
            if self.is_zero() {
                return Err(Error::Precondition("0^0 is undefined".into()));
            }
            let rel = self.trunc - self.start;
            return Ok(Self::with_truncation(self.n, 0, vec![S::one()], rel));
        }
        let mut result: Option<Self> = None;
        let mut sq = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => sq.clone(),
                    Some(r) => r.mul_series(&sq),
                });
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul_series(&sq);
            }
        }
        Ok(result.expect("e != 0"))
    }

    /// `k`-th derivative in `tau`.
    pub fn differentiate(&self, k: u32) -> Self {
        let mut s = self.clone();
        let n = self.n as i64;
        for _ in 0..k {
            let coeffs = s
                .terms()
                .map(|(j, c)| c.clone() * S::from_ratio(Rational64::new(j, n)))
                .collect();
            s = Self::with_truncation(s.n, s.start - n, coeffs, s.trunc - n);
        }
        s
    }

    /// Evaluates the known part with a caller-chosen value of `tau^{1/n}`.
    pub fn eval_root(&self, root: C64) -> C64 {
        self.terms()
            .map(|(j, c)| c.to_c64() * root.powi(j as i32))
            .sum()
    }

    /// Evaluates at `tau` on branch `k` of `tau^{1/n}` (principal for `k = 0`).
    pub fn eval(&self, tau: C64, branch: u32) -> C64 {
        let n = self.n as f64;
        let arg = tau.arg() + 2.0 * std::f64::consts::PI * branch as f64;
        let root = C64::from_polar(tau.norm().powf(1.0 / n), arg / n);
        self.eval_root(root)
    }

    /// Largest coefficient magnitude among the known terms.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.magnitude())
            .fold(0.0, f64::max)
    }
}

impl<S: Scalar> Add for &PuiseuxSeries<S> {
    type Output = PuiseuxSeries<S>;
    fn add(self, rhs: Self) -> PuiseuxSeries<S> {
        self.add_impl(rhs, true)
    }
}

impl<S: Scalar> Sub for &PuiseuxSeries<S> {
    type Output = PuiseuxSeries<S>;
    fn sub(self, rhs: Self) -> PuiseuxSeries<S> {
        self.add_impl(rhs, false)
    }
}

impl<S: Scalar> Mul for &PuiseuxSeries<S> {
    type Output = PuiseuxSeries<S>;
    fn mul(self, rhs: Self) -> PuiseuxSeries<S> {
        self.mul_series(rhs)
    }
}

impl<S: Scalar> Neg for &PuiseuxSeries<S> {
    type Output = PuiseuxSeries<S>;
    fn neg(self) -> PuiseuxSeries<S> {
        self.map(|c| -c.clone())
    }
}

impl<S: Scalar> fmt::Display for PuiseuxSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let z = c.to_c64();
            let e = Rational64::new(j, self.n as i64);
            write!(f, "({}{:+}i)*tau^{}", z.re, z.im, crate::scalar::fmt_ratio(&e))?;
        }
        if first {
            f.write_str("0")?;
        }
        write!(f, " + O(tau^{})", crate::scalar::fmt_ratio(&Rational64::new(self.trunc + 1, self.n as i64)))
    }
}

/// Serializes as `{branch_order, truncation, terms: [[j, re, im], ...]}`.
impl<S: Scalar> Serialize for PuiseuxSeries<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        struct Terms<'a, S>(&'a PuiseuxSeries<S>);
        impl<S: Scalar> Serialize for Terms<'_, S> {
            fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.coeffs.len()))?;
                for (j, c) in self.0.terms() {
                    let z = c.to_c64();
                    seq.serialize_element(&(j, z.re, z.im))?;
                }
                seq.end()
            }
        }
        let mut st = serializer.serialize_struct("PuiseuxSeries", 3)?;
        st.serialize_field("branch_order", &self.n)?;
        st.serialize_field("truncation", &self.trunc)?;
        st.serialize_field("terms", &Terms(self))?;
        st.end()
    }
}

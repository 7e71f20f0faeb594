//! Dominant balances `y ~ a tau^p` of a differential polynomial.
//!
//! For a candidate exponent `p` every monomial contributes a leading power
//! `tau^e` with `e = sum_k d_k (p - k)`. A balance needs at least two
//! monomials sharing the minimal exponent `q`; the leading coefficient `a`
//! then solves
//!
//! ```text
//! sum_{j dominant} c_j a^{D_j} prod_k [p (p-1) ... (p-k+1)]^{d_k} = 0.
//! ```
//!
//! Resonances (Fuchs indices) come from linearizing the dominant part about
//! `a tau^p` with the perturbation `eps tau^{p+r}`.

use std::collections::BTreeSet;
use std::fmt;

use num::{One, Rational64, Signed, Zero};

use crate::error::{Error, Result};
use crate::ode::{DiffMonomial, DifferentialPolynomial};
use crate::roots::{horner, poly_roots, sort_roots};
use crate::scalar::{fmt_ratio, rationalize, snap_gaussian, Exact, Scalar, C64};

/// Search window for candidate exponents `p = m/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceOptions {
    pub n_max: u32,
    pub m_min: i64,
    pub m_max: i64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            n_max: 4,
            m_min: -6,
            m_max: 6,
        }
    }
}

/// A root of the resonance polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum Resonance {
    /// Verified exactly (exact mode) or to 1e-9 (float mode).
    Rational(Rational64),
    Complex(C64),
}

impl Resonance {
    pub fn value(&self) -> C64 {
        match self {
            Resonance::Rational(r) => C64::new(*r.numer() as f64 / *r.denom() as f64, 0.0),
            Resonance::Complex(z) => *z,
        }
    }

    pub fn as_rational(&self) -> Option<Rational64> {
        match self {
            Resonance::Rational(r) => Some(*r),
            Resonance::Complex(_) => None,
        }
    }
}

impl fmt::Display for Resonance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resonance::Rational(r) => f.write_str(&fmt_ratio(r)),
            Resonance::Complex(z) => write!(f, "{z}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceFamily {
    pub p: Rational64,
    /// Denominator of `p`; 1 means a pole (or zero), >1 an algebraic branch point.
    pub branch_order: u32,
    /// Lowest tau-exponent of `E` under the balance.
    pub q: Rational64,
    /// Ascending coefficients of the leading-order polynomial in `a`.
    pub leading_polynomial: Vec<C64>,
    /// Nonzero roots, deterministically ordered.
    pub leading_coeffs: Vec<C64>,
    pub dominant_monomials: Vec<usize>,
    pub consistent: bool,
    /// Resonances for the first leading coefficient (empty when inconsistent).
    pub resonances: Vec<Resonance>,
    pub note: Option<String>,
}

impl BalanceFamily {
    /// Human-readable leading-order equation, e.g. `-0.25*a^4 - 1 = 0`.
    pub fn leading_equation(&self) -> String {
        let mut parts = Vec::new();
        for (k, c) in self.leading_polynomial.iter().enumerate().rev() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            let coeff = if c.im == 0.0 {
                format!("{}", c.re)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            parts.push(match k {
                0 => coeff,
                1 => format!("{coeff}*a"),
                _ => format!("{coeff}*a^{k}"),
            });
        }
        if parts.is_empty() {
            "0 = 0".into()
        } else {
            format!("{} = 0", parts.join(" + ").replace("+ -", "- "))
        }
    }

    /// Gaussian-rational version of `leading_coeffs[idx]`, when the exact
    /// leading polynomial vanishes there exactly.
    pub fn exact_leading_coeff(&self, poly: &DifferentialPolynomial, idx: usize) -> Option<Exact> {
        let a = snap_gaussian(*self.leading_coeffs.get(idx)?, 1000, 1e-9)?;
        leading_value(poly, self, &a).ok()?.is_zero().then_some(a)
    }
}

/// Leading tau-exponent `sum_k d_k (p - k)` of `m` under `y ~ a tau^p`.
pub fn monomial_exponent(m: &DiffMonomial, p: Rational64) -> Rational64 {
    m.exponent_at(p)
}

/// `p (p - 1) ... (p - k + 1)`.
pub fn falling(p: Rational64, k: u8) -> Rational64 {
    (0..k as i64).fold(Rational64::one(), |acc, i| acc * (p - i))
}

/// `prod_k falling(p, k)^{d_k}`: the numeric factor of the monomial's
/// leading term.
fn leading_factor(m: &DiffMonomial, p: Rational64) -> Rational64 {
    m.degrees
        .iter()
        .fold(Rational64::one(), |acc, (&k, &d)| acc * falling(p, k).pow(d as i32))
}

fn is_nonneg_integer(p: Rational64) -> bool {
    p.is_integer() && !p.is_negative()
}

fn leading_polynomial(poly: &DifferentialPolynomial, p: Rational64, dominant: &[usize]) -> Vec<C64> {
    let top = dominant
        .iter()
        .map(|&j| poly.monomials[j].total_degree() as usize)
        .max()
        .unwrap_or(0);
    let mut coeffs = vec![C64::new(0.0, 0.0); top + 1];
    for &j in dominant {
        let m = &poly.monomials[j];
        coeffs[m.total_degree() as usize] += m.coeff * C64::from_ratio(leading_factor(m, p));
    }
    coeffs
}

/// Value of the leading-order polynomial at `a` in any coefficient field.
pub fn leading_value<S: Scalar>(poly: &DifferentialPolynomial, fam: &BalanceFamily, a: &S) -> Result<S> {
    let mut acc = S::zero();
    for &j in &fam.dominant_monomials {
        let m = &poly.monomials[j];
        let c = S::from_c64(m.coeff)
            .ok_or_else(|| Error::Precondition("non-finite coefficient".into()))?;
        acc = acc + c * S::from_ratio(leading_factor(m, fam.p)) * pow_u(a, m.total_degree());
    }
    Ok(acc)
}

pub(crate) fn pow_u<S: Scalar>(a: &S, e: u32) -> S {
    (0..e).fold(S::one(), |acc, _| acc * a.clone())
}

/// Enumerates candidate exponents in the window and returns every balance,
/// sorted by `p`. Non-negative integer exponents are skipped (analytic
/// behavior, where derivative factors vanish). Negative integer exponents
/// are always reported, even with a single dominant monomial.
pub fn find_balances(poly: &DifferentialPolynomial, opts: BalanceOptions) -> Vec<BalanceFamily> {
    let mut candidates = BTreeSet::new();
    for n in 1..=opts.n_max.max(1) as i64 {
        for m in opts.m_min..=opts.m_max {
            let p = Rational64::new(m, n);
            if !is_nonneg_integer(p) {
                candidates.insert(p);
            }
        }
    }

    let mut out = Vec::new();
    for p in candidates {
        let exps: Vec<Rational64> = poly.monomials.iter().map(|m| m.exponent_at(p)).collect();
        let Some(q) = exps.iter().min().copied() else { continue };
        let dominant: Vec<usize> = (0..exps.len()).filter(|&i| exps[i] == q).collect();
        let negative_integer = p.is_integer() && p.is_negative();
        if dominant.len() < 2 && !negative_integer {
            continue;
        }
        out.push(build_family(poly, p, q, dominant));
    }
    out
}

fn build_family(
    poly: &DifferentialPolynomial,
    p: Rational64,
    q: Rational64,
    dominant: Vec<usize>,
) -> BalanceFamily {
    let lead = leading_polynomial(poly, p, &dominant);
    let mut note = None;
    let identically_zero = lead.iter().all(|c| *c == C64::new(0.0, 0.0));
    let mut roots: Vec<C64> = if identically_zero {
        note = Some("leading-order equation vanishes identically".to_string());
        Vec::new()
    } else {
        poly_roots(&lead)
            .into_iter()
            .filter(|z| z.norm() > 1e-12)
            .collect()
    };
    sort_roots(&mut roots);
    if !identically_zero && roots.is_empty() {
        note = Some("leading-order equation has only the root a = 0".to_string());
    }
    let mut fam = BalanceFamily {
        p,
        branch_order: *p.denom() as u32,
        q,
        leading_polynomial: lead,
        consistent: !roots.is_empty(),
        leading_coeffs: roots,
        dominant_monomials: dominant,
        resonances: Vec::new(),
        note,
    };
    if fam.consistent {
        let res = match fam.exact_leading_coeff(poly, 0) {
            Some(a) => compute_resonances(poly, &fam, &a),
            None => compute_resonances(poly, &fam, &fam.leading_coeffs[0]),
        };
        match res {
            Ok(r) => fam.resonances = r,
            Err(e) => fam.note = Some(e.to_string()),
        }
    }
    fam
}

/// Ascending rational coefficients of `falling(p + r, k)` as a polynomial in `r`.
fn falling_shifted(p: Rational64, k: u8) -> Vec<Rational64> {
    let mut poly = vec![Rational64::one()];
    for i in 0..k as i64 {
        // multiply by (r + p - i)
        let c0 = p - i;
        let mut next = vec![Rational64::zero(); poly.len() + 1];
        for (j, &c) in poly.iter().enumerate() {
            next[j] += c * c0;
            next[j + 1] += c;
        }
        poly = next;
    }
    poly
}

/// Resonance polynomial `Q(r)` (ascending coefficients) for the family at
/// leading coefficient `a`.
pub fn resonance_polynomial<S: Scalar>(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    a: &S,
) -> Result<Vec<S>> {
    let p = fam.p;
    let mut q: Vec<S> = Vec::new();
    for &j in &fam.dominant_monomials {
        let m = &poly.monomials[j];
        let c = S::from_c64(m.coeff)
            .ok_or_else(|| Error::Precondition("non-finite coefficient".into()))?;
        let weight = c * S::from_ratio(leading_factor(m, p)) * pow_u(a, m.total_degree());
        // sum_k d_k falling(p + r, k) / falling(p, k)
        for (&k, &d) in &m.degrees {
            let scale = Rational64::from_integer(d as i64) / falling(p, k);
            for (i, coeff) in falling_shifted(p, k).into_iter().enumerate() {
                if q.len() <= i {
                    q.resize(i + 1, S::zero());
                }
                q[i] = q[i].clone() + weight.clone() * S::from_ratio(coeff * scale);
            }
        }
    }
    Ok(q)
}

/// Roots `r` of the resonance polynomial. `-1` always appears for an
/// autonomous equation (translation of the singular point).
pub fn compute_resonances<S: Scalar>(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    a: &S,
) -> Result<Vec<Resonance>> {
    if a.magnitude() == 0.0 {
        return Err(Error::Precondition("leading coefficient must be nonzero".into()));
    }
    let q = resonance_polynomial(poly, fam, a)?;
    let scale = q.iter().map(|c| c.magnitude()).fold(0.0_f64, f64::max);
    if scale == 0.0 || q.iter().all(|c| c.is_negligible(1e-13 * scale)) {
        return Err(Error::DegenerateFamily);
    }
    let qf: Vec<C64> = q.iter().map(|c| c.to_c64()).collect();
    let mut rationals = Vec::new();
    let mut complexes = Vec::new();
    for root in poly_roots(&qf) {
        let candidate = if root.im.abs() < 1e-7 {
            rationalize(root.re, 1000, 1e-6)
        } else {
            None
        };
        let verified = candidate.filter(|r| {
            let val = horner_s(&q, &S::from_ratio(*r));
            if S::EXACT {
                val.is_zero()
            } else {
                let rr = r.numer().abs() as f64 / *r.denom() as f64;
                let bound: f64 = qf
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.norm() * (1.0 + rr).powi(i as i32))
                    .sum();
                val.magnitude() <= 1e-9 * bound
            }
        });
        match verified {
            Some(r) => rationals.push(r),
            None => complexes.push(root),
        }
    }
    rationals.sort();
    complexes.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(rationals
        .into_iter()
        .map(Resonance::Rational)
        .chain(complexes.into_iter().map(Resonance::Complex))
        .collect())
}

fn horner_s<S: Scalar>(coeffs: &[S], x: &S) -> S {
    coeffs
        .iter()
        .rev()
        .fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
}

/// `|leading polynomial(a)|` in double precision.
pub fn leading_residual(fam: &BalanceFamily, a: C64) -> f64 {
    horner(&fam.leading_polynomial, a).norm()
}

/// Exponents of the monomials before clearing negative powers of `y`, i.e.
/// the cleared exponents shifted by `-clearing_multiplier * p`.
pub fn uncleared_exponents(poly: &DifferentialPolynomial, p: Rational64) -> Vec<Rational64> {
    let shift = p * poly.clearing_multiplier as i64;
    poly.monomials.iter().map(|m| m.exponent_at(p) - shift).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{ermakov_pinney, normalize, parse_ode, ParamEnv};

    fn poly(text: &str) -> DifferentialPolynomial {
        normalize(&parse_ode(text).unwrap(), &ParamEnv::default()).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn ermakov_pinney_single_branch_family() {
        let ep = ermakov_pinney(1.0);
        let fams = find_balances(&ep, BalanceOptions::default());
        let consistent: Vec<_> = fams.iter().filter(|f| f.consistent).collect();
        assert_eq!(consistent.len(), 1);
        let f = consistent[0];
        assert_eq!(f.p, r(1, 2));
        assert_eq!(f.branch_order, 2);
        assert_eq!(f.q, r(0, 1));
        assert_eq!(f.leading_coeffs.len(), 4);
        for a in &f.leading_coeffs {
            assert!((a.powu(4) + 4.0).norm() < 1e-10);
            assert!(leading_residual(f, *a) < 1e-10);
        }
        assert_eq!(f.leading_equation(), "-0.25*a^4 - 1 = 0");
    }

    #[test]
    fn ermakov_pinney_simple_pole_is_inconsistent() {
        let ep = ermakov_pinney(1.0);
        let fams = find_balances(&ep, BalanceOptions::default());
        let pole = fams.iter().find(|f| f.p == r(-1, 1)).expect("p = -1 reported");
        assert!(!pole.consistent);
        assert!(pole.leading_coeffs.is_empty());
        assert_eq!(pole.q, r(-6, 1));
        assert_eq!(pole.leading_equation(), "2*a^4 = 0");
        // uncleared form: (p - 2, p, -3p) = (-3, -1, 3)
        assert_eq!(
            uncleared_exponents(&ep, r(-1, 1)),
            vec![r(-3, 1), r(-1, 1), r(3, 1)]
        );
    }

    #[test]
    fn cubic_pole_family() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        assert!(f.consistent);
        assert_eq!(f.branch_order, 1);
        assert_eq!(f.leading_coeffs.len(), 2);
        let mut re: Vec<f64> = f.leading_coeffs.iter().map(|a| a.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
        // 2a - 2a^3
        assert!((f.leading_polynomial[1] - 2.0).norm() < 1e-15);
        assert!((f.leading_polynomial[3] + 2.0).norm() < 1e-15);
    }

    #[test]
    fn resonances_exact() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        let a = crate::scalar::exact_from_ratio(r(1, 1));
        let res = compute_resonances(&w, f, &a).unwrap();
        assert_eq!(res, vec![Resonance::Rational(r(-1, 1)), Resonance::Rational(r(4, 1))]);

        let ep = ermakov_pinney(1.0);
        let fams = find_balances(&ep, BalanceOptions::default());
        let f = fams.iter().find(|f| f.consistent).unwrap();
        for idx in 0..4 {
            let a = f.exact_leading_coeff(&ep, idx).expect("roots are Gaussian integers");
            let res = compute_resonances(&ep, f, &a).unwrap();
            assert_eq!(res, vec![Resonance::Rational(r(-1, 1)), Resonance::Rational(r(1, 1))]);
        }
        assert_eq!(f.resonances, vec![Resonance::Rational(r(-1, 1)), Resonance::Rational(r(1, 1))]);
    }

    #[test]
    fn resonance_polynomial_matches_hand_form() {
        // w'' - 2w^3, a = 1: r^2 - 3r - 4
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        let q = resonance_polynomial(&w, f, &C64::new(1.0, 0.0)).unwrap();
        let expect = [-4.0, -3.0, 1.0];
        for (c, e) in q.iter().zip(expect) {
            assert!((c - e).norm() < 1e-14, "{q:?}");
        }
    }

    #[test]
    fn float_mode_resonances_also_rational() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        let res = compute_resonances(&w, f, &C64::new(-1.0, 0.0)).unwrap();
        assert_eq!(res, vec![Resonance::Rational(r(-1, 1)), Resonance::Rational(r(4, 1))]);
    }

    #[test]
    fn first_order_riccati_family() {
        // w' + 1 + w^2: p = -1, -a + a^2 = 0, resonance {-1}
        let w = poly("y' + 1 + y^2");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        assert!(f.consistent);
        assert_eq!(f.leading_coeffs.len(), 1);
        assert!((f.leading_coeffs[0] - 1.0).norm() < 1e-14);
        assert_eq!(f.resonances, vec![Resonance::Rational(r(-1, 1))]);
    }

    #[test]
    fn zero_leading_coefficient_rejected() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let f = fams.iter().find(|f| f.p == r(-1, 1)).unwrap();
        assert!(compute_resonances(&w, f, &C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn exponent_bookkeeping() {
        let m = DiffMonomial::new(C64::new(1.0, 0.0), [(0, 3), (2, 1)]);
        assert_eq!(monomial_exponent(&m, r(1, 2)), r(0, 1));
        assert_eq!(falling(r(1, 2), 2), r(-1, 4));
        assert_eq!(falling(r(-1, 1), 2), r(2, 1));
        assert_eq!(falling(r(3, 1), 0), r(1, 1));
    }
}

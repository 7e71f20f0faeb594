//! Exact meromorphic candidates built from local Laurent data.
//!
//! Two shapes are tried for an autonomous equation whose solutions have a
//! single Laurent family with pole order `p`:
//!
//! * simply periodic:
//!   `w(z) = sum_{k=1..p} (-1)^{k-1} c_{-k} / (k-1)! d^{k-1}/dz^{k-1} [s cot(s z)] + h0`
//!   with `s^2 = L = pi^2 / T^2`;
//! * rational: the principal part plus a polynomial tail.
//!
//! Candidates are never trusted: [`verify_candidate`] expands them about the
//! pole in exact arithmetic and substitutes into the equation.

use num::{Rational64, Zero};

use crate::error::{Error, Result};
use crate::ode::DifferentialPolynomial;
use crate::roots::{horner, poly_roots};
use crate::scalar::{Exact, Scalar, C64};
use crate::series::{cot_coefficients, substitute, LocalSolution, PuiseuxSeries};

/// Residual coefficients below this magnitude count as zero.
pub const VERIFY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    SimplyPeriodic,
    Rational,
}

impl CandidateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateKind::SimplyPeriodic => "simply_periodic",
            CandidateKind::Rational => "rational",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormCandidate {
    pub kind: CandidateKind,
    /// `pole_part[k - 1] = c_{-k}`.
    pub pole_part: Vec<C64>,
    /// Period `T` (simply periodic only).
    pub period: Option<C64>,
    /// `L = pi^2 / T^2` (simply periodic only).
    pub l: Option<C64>,
    pub h0: C64,
    /// `tail[k] = c_k`, rational candidates only.
    pub tail: Vec<C64>,
    pub verified: bool,
    /// Max residual coefficient magnitude; NaN until verified.
    pub residual_norm: f64,
    /// First relative order with a nonzero residual coefficient.
    pub first_failing_order: Option<i64>,
}

impl ClosedFormCandidate {
    /// Simply periodic candidate from `L`; `T = pi / sqrt(L)` on the
    /// principal branch.
    pub fn periodic(pole_part: Vec<C64>, l: C64, h0: C64) -> Self {
        let period = std::f64::consts::PI / l.sqrt();
        ClosedFormCandidate {
            kind: CandidateKind::SimplyPeriodic,
            pole_part,
            period: Some(period),
            l: Some(l),
            h0,
            tail: Vec::new(),
            verified: false,
            residual_norm: f64::NAN,
            first_failing_order: None,
        }
    }

    /// Simply periodic candidate from the period.
    pub fn periodic_with_period(pole_part: Vec<C64>, period: C64, h0: C64) -> Self {
        let pi = std::f64::consts::PI;
        let mut c = Self::periodic(pole_part, C64::new(pi * pi, 0.0) / (period * period), h0);
        c.period = Some(period);
        c
    }

    pub fn rational(pole_part: Vec<C64>, tail: Vec<C64>) -> Self {
        ClosedFormCandidate {
            kind: CandidateKind::Rational,
            h0: tail.first().copied().unwrap_or_default(),
            pole_part,
            period: None,
            l: None,
            tail,
            verified: false,
            residual_norm: f64::NAN,
            first_failing_order: None,
        }
    }

    pub fn pole_order(&self) -> usize {
        self.pole_part.len()
    }

    /// Laurent expansion about the pole through `tau^{trunc}`.
    pub fn expansion<S: Scalar>(&self, trunc: i64) -> Result<PuiseuxSeries<S>> {
        let conv = |z: C64| {
            S::from_c64(z).ok_or_else(|| Error::Precondition("non-finite candidate parameter".into()))
        };
        let p = self.pole_order() as i64;
        match self.kind {
            CandidateKind::Rational => {
                let start = -p;
                let mut coeffs = vec![S::zero(); (trunc - start + 1).max(0) as usize];
                for (k, c) in self.pole_part.iter().enumerate() {
                    let idx = -(k as i64 + 1);
                    if idx <= trunc {
                        coeffs[(idx - start) as usize] = conv(*c)?;
                    }
                }
                for (k, c) in self.tail.iter().enumerate() {
                    if (k as i64) <= trunc {
                        coeffs[(k as i64 - start) as usize] = conv(*c)?;
                    }
                }
                Ok(PuiseuxSeries::with_truncation(1, start, coeffs, trunc))
            }
            CandidateKind::SimplyPeriodic => {
                let l = conv(self.l.ok_or_else(|| Error::Precondition("missing L".into()))?)?;
                // s cot(s z) through z^{trunc + p - 1}
                let g_trunc = trunc + p - 1;
                let count = ((g_trunc + 1) / 2 + 1).max(1) as usize;
                let b = cot_coefficients(count);
                let mut g = vec![S::zero(); (g_trunc + 2).max(0) as usize];
                let mut lpow = S::one();
                for (i, bi) in b.iter().enumerate() {
                    let idx = 2 * i as i64 - 1;
                    if idx <= g_trunc {
                        g[(idx + 1) as usize] = S::from_big(bi) * lpow.clone();
                    }
                    lpow = lpow * l.clone();
                }
                let g = PuiseuxSeries::with_truncation(1, -1, g, g_trunc);
                let mut acc = PuiseuxSeries::zero(1, trunc);
                let mut fact = 1i64;
                for (k, c) in self.pole_part.iter().enumerate() {
                    if k > 0 {
                        fact *= k as i64;
                    }
                    let sign = if k % 2 == 0 { 1 } else { -1 };
                    let w = conv(*c)? * S::from_ratio(Rational64::new(sign, fact));
                    let term = g.differentiate(k as u32).scale(&w);
                    acc = &acc + &term;
                }
                Ok(acc.add_constant(&conv(self.h0)?))
            }
        }
    }

    /// Value and derivatives `w, w', ..., w^{(count-1)}` at `z` measured
    /// from the pole.
    pub fn eval_derivs(&self, z: C64, count: usize) -> Vec<C64> {
        match self.kind {
            CandidateKind::Rational => (0..count)
                .map(|d| {
                    let mut acc = if d == 0 { self.h0 * 0.0 } else { C64::zero() };
                    for (k, c) in self.pole_part.iter().enumerate() {
                        let e = -(k as i64 + 1);
                        acc += c * falling_int(e, d) * z.powi((e - d as i64) as i32);
                    }
                    for (k, c) in self.tail.iter().enumerate() {
                        let e = k as i64;
                        let f = falling_int(e, d);
                        if f != 0.0 {
                            acc += c * f * z.powi((e - d as i64) as i32);
                        }
                    }
                    acc
                })
                .collect(),
            CandidateKind::SimplyPeriodic => {
                let s = self.l.unwrap_or_default().sqrt();
                let cot = (s * z).cos() / (s * z).sin();
                // polynomials in cot: D_0 = s*c, D_{m+1} = -s (1 + c^2) dD_m/dc
                let deriv = |p: &[C64]| -> Vec<C64> {
                    let mut dp: Vec<C64> = p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
                    if dp.is_empty() {
                        dp.push(C64::zero());
                    }
                    let mut out = vec![C64::zero(); dp.len() + 2];
                    for (i, c) in dp.iter().enumerate() {
                        out[i] += -s * c;
                        out[i + 2] += -s * c;
                    }
                    out
                };
                let p = self.pole_order();
                let mut ds: Vec<Vec<C64>> = vec![vec![C64::zero(), s]];
                while ds.len() < p + count {
                    let next = deriv(ds.last().expect("nonempty"));
                    ds.push(next);
                }
                (0..count)
                    .map(|d| {
                        let mut acc = if d == 0 { self.h0 } else { C64::zero() };
                        let mut fact = 1.0;
                        for (k, c) in self.pole_part.iter().enumerate() {
                            if k > 0 {
                                fact *= k as f64;
                            }
                            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                            acc += c * (sign / fact) * horner(&ds[k + d], cot);
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    /// Pointwise residual of `poly` on the candidate at distance `z` from
    /// the pole.
    pub fn ode_residual_at(&self, poly: &DifferentialPolynomial, z: C64) -> C64 {
        let derivs = self.eval_derivs(z, poly.order() as usize + 1);
        poly.eval(&derivs)
    }
}

fn falling_int(e: i64, d: usize) -> f64 {
    (0..d as i64).fold(1.0, |acc, i| acc * (e - i) as f64)
}

fn laurent_data(local: &LocalSolution<C64>) -> Result<(usize, Vec<C64>)> {
    let n = local.series.branch_order();
    if n != 1 {
        return Err(Error::NotLaurent(n));
    }
    let start = local.series.min_index();
    if start >= 0 {
        return Err(Error::Precondition("local data has no pole".into()));
    }
    let p = (-start) as usize;
    let pole_part = (1..=p as i64)
        .map(|k| local.series.coeff(-k).unwrap_or_default())
        .collect();
    Ok((p, pole_part))
}

/// Necessary condition for an elliptic solution: zero residue.
pub fn elliptic_admissible<S: Scalar>(local: &LocalSolution<S>) -> Result<bool> {
    let n = local.series.branch_order();
    if n != 1 {
        return Err(Error::NotLaurent(n));
    }
    let residue = local.series.coeff(-1).unwrap_or_else(S::zero);
    Ok(residue.is_negligible(1e-12))
}

/// Coefficient of `z^1` in the candidate's regular part as a polynomial in
/// `L` (ascending, constant term zero), and the `z^0` contribution.
fn matching_polynomials(pole_part: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let p = pole_part.len();
    let b: Vec<C64> = cot_coefficients(p / 2 + 2)
        .iter()
        .map(|r| Exact::new(r.clone(), Zero::zero()).to_c64())
        .collect();
    let mut lin = vec![C64::zero(); p / 2 + 2];
    let mut con = vec![C64::zero(); p / 2 + 2];
    for k in 1..=p {
        let c = pole_part[k - 1];
        if k % 2 == 1 {
            let m = k.div_ceil(2);
            lin[m] += c * k as f64 * b[m];
        } else {
            let m = k / 2;
            con[m] += -c * b[m];
        }
    }
    (lin, con)
}

/// Matches `T` (through `L`) and `h0` at the first two orders beyond the
/// principal part; later orders are left to verification.
pub fn build_periodic(local: &LocalSolution<C64>) -> Result<ClosedFormCandidate> {
    let (_, pole_part) = laurent_data(local).map_err(|e| match e {
        Error::NotLaurent(n) => Error::NoPeriodicCandidate(format!(
            "branch order {n}: local data is not a Laurent expansion"
        )),
        other => other,
    })?;
    let c0 = local
        .series
        .coeff(0)
        .ok_or_else(|| Error::NoPeriodicCandidate("local series too short".into()))?;
    let c1 = local
        .series
        .coeff(1)
        .ok_or_else(|| Error::NoPeriodicCandidate("local series too short".into()))?;
    let (lin, con) = matching_polynomials(&pole_part);
    let mut eq = lin.clone();
    eq[0] -= c1;
    let roots: Vec<C64> = poly_roots(&eq)
        .into_iter()
        .filter(|l| l.norm() > 1e-14)
        .collect();
    if roots.is_empty() {
        return Err(Error::NoPeriodicCandidate(
            "no finite period matches (z^1 coefficient ratio is zero or undefined)".into(),
        ));
    }
    let trunc = local.series.truncation();
    let mut best: Option<(f64, ClosedFormCandidate)> = None;
    for l in roots {
        let h0 = c0 - horner(&con, l);
        let cand = ClosedFormCandidate::periodic(pole_part.clone(), l, h0);
        let exp: PuiseuxSeries<C64> = cand.expansion(trunc)?;
        let mismatch = (2..=trunc)
            .map(|j| (exp.coeff(j).unwrap_or_default() - local.series.coeff(j).unwrap_or_default()).norm())
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(m, _)| mismatch < *m) {
            best = Some((mismatch, cand));
        }
    }
    Ok(best.expect("at least one root").1)
}

/// Principal part plus the first `m + 1` regular coefficients.
pub fn build_rational(local: &LocalSolution<C64>, m: usize) -> Result<ClosedFormCandidate> {
    let (_, pole_part) = laurent_data(local)?;
    let tail = (0..=m as i64)
        .map(|k| local.series.coeff(k).unwrap_or_default())
        .collect();
    Ok(ClosedFormCandidate::rational(pole_part, tail))
}

/// Expands the candidate about its pole in exact arithmetic, substitutes it,
/// and records the max residual coefficient over `K + 1` orders starting at
/// the balance order. Sets `verified` when that maximum is below
/// [`VERIFY_TOL`].
pub fn verify_candidate(cand: &mut ClosedFormCandidate, poly: &DifferentialPolynomial, k: usize) -> f64 {
    let result = (|| -> Result<(f64, Option<i64>)> {
        let p = Rational64::from_integer(-(cand.pole_order() as i64));
        let q = poly
            .monomials
            .iter()
            .map(|m| m.exponent_at(p))
            .min()
            .expect("nonempty polynomial")
            .to_integer();
        let need = q + k as i64;
        let mut trunc = k as i64 + 2;
        let residual = loop {
            let s: PuiseuxSeries<Exact> = cand.expansion(trunc)?;
            let r = substitute(poly, &s)?;
            if r.truncation() >= need {
                break r;
            }
            trunc += 4;
            if trunc > 20 * (k as i64 + 10) {
                return Err(Error::TruncationInsufficient {
                    have: r.truncation(),
                    need,
                });
            }
        };
        let mut max = 0.0_f64;
        let mut first = None;
        for j in 0..=k as i64 {
            let v = residual.coeff(q + j).unwrap_or_default().magnitude();
            if v > VERIFY_TOL && first.is_none() {
                first = Some(j);
            }
            max = max.max(v);
        }
        Ok((max, first))
    })();
    match result {
        Ok((norm, first)) => {
            cand.residual_norm = norm;
            cand.first_failing_order = first;
            cand.verified = norm < VERIFY_TOL;
        }
        Err(_) => {
            cand.residual_norm = f64::NAN;
            cand.first_failing_order = None;
            cand.verified = false;
        }
    }
    cand.residual_norm
}

/// Evaluation of the quartic-root period formula
/// `T = pi (c_{-1}/45)^{1/4} (c_3)^{-1/4}` against an independently
/// matched period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodComparison {
    /// Principal-branch value of the formula.
    pub claimed: C64,
    /// `claimed * i^k`, `k = 0..4`.
    pub branches: [C64; 4],
    pub matched: Option<C64>,
    pub consistent: bool,
    pub modulus_consistent: bool,
    pub matching_branch: Option<usize>,
}

/// Evaluates the claimed period formula on Laurent data and compares it
/// with the period found by [`build_periodic`].
pub fn claimed_period(local: &LocalSolution<C64>) -> Result<PeriodComparison> {
    let n = local.series.branch_order();
    if n != 1 {
        return Err(Error::NotLaurent(n));
    }
    let residue = local.series.coeff(-1).unwrap_or_default();
    if residue.norm() == 0.0 {
        return Err(Error::Precondition("residue c_{-1} is zero".into()));
    }
    let c3 = local
        .series
        .coeff(3)
        .ok_or_else(|| Error::Precondition("tau^3 coefficient unknown".into()))?;
    if c3.norm() == 0.0 {
        return Err(Error::Precondition("zero tau^3 coefficient".into()));
    }
    let pi = std::f64::consts::PI;
    let claimed = pi * (residue / 45.0).powf(0.25) / c3.powf(0.25);
    let i = C64::new(0.0, 1.0);
    let branches = [claimed, claimed * i, -claimed, -claimed * i];
    let matched = build_periodic(local).ok().and_then(|c| c.period);
    let close = |a: C64, b: C64| (a - b).norm() <= 1e-8 * b.norm().max(1.0);
    let (consistent, modulus_consistent, matching_branch) = match matched {
        Some(t) => (
            close(claimed, t),
            (claimed.norm() - t.norm()).abs() <= 1e-8 * t.norm().max(1.0),
            branches.iter().position(|b| close(*b, t)),
        ),
        None => (false, false, None),
    };
    Ok(PeriodComparison {
        claimed,
        branches,
        matched,
        consistent,
        modulus_consistent,
        matching_branch,
    })
}

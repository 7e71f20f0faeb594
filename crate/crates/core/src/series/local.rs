use std::collections::{BTreeMap, BTreeSet};

use num::{Rational64, Zero};

use super::PuiseuxSeries;
use crate::balance::{compute_resonances, leading_value, BalanceFamily, Resonance};
use crate::error::{Error, Result};
use crate::ode::DifferentialPolynomial;
use crate::scalar::{Scalar, C64};

/// Residual `E[s]` of the differential polynomial applied to `s`, exact
/// through the returned series' truncation.
pub fn substitute<S: Scalar>(poly: &DifferentialPolynomial, s: &PuiseuxSeries<S>) -> Result<PuiseuxSeries<S>> {
    let order = poly.order() as u32;
    let derivs: Vec<PuiseuxSeries<S>> = (0..=order).map(|k| s.differentiate(k)).collect();
    let mut powers: BTreeMap<(u8, u32), PuiseuxSeries<S>> = BTreeMap::new();
    let mut acc: Option<PuiseuxSeries<S>> = None;
    let mut constant = S::zero();
    for m in &poly.monomials {
        let c = S::from_c64(m.coeff)
            .ok_or_else(|| Error::Precondition("non-finite coefficient".into()))?;
        if m.is_constant() {
            constant = constant + c;
            continue;
        }
        let mut term: Option<PuiseuxSeries<S>> = None;
        for (&k, &d) in &m.degrees {
            let pw = match powers.get(&(k, d)) {
                Some(p) => p.clone(),
                None => {
                    let p = derivs[k as usize].pow(d as i32)?;
                    powers.insert((k, d), p.clone());
                    p
                }
            };
            term = Some(match term {
                None => pw,
                Some(t) => t.mul_series(&pw),
            });
        }
        let term = term.expect("non-constant monomial").scale(&c);
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    let base = acc.unwrap_or_else(|| PuiseuxSeries::zero(s.branch_order(), s.truncation()));
    Ok(base.add_constant(&constant))
}

/// [`substitute`] that insists the residual be known through index `need`.
pub fn substitute_through<S: Scalar>(
    poly: &DifferentialPolynomial,
    s: &PuiseuxSeries<S>,
    need: i64,
) -> Result<PuiseuxSeries<S>> {
    let r = substitute(poly, s)?;
    if r.truncation() < need {
        return Err(Error::TruncationInsufficient {
            have: r.truncation(),
            need,
        });
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compatibility {
    pub resonance: Rational64,
    /// Relative index `j = r n` in units of `tau^{1/n}`.
    pub index: i64,
    pub satisfied: bool,
    /// `|E_j|` at the resonant order.
    pub defect: f64,
}

/// Local expansion `y = sum_{j=0..K} c_j tau^{p + j/n}` about a movable
/// singularity.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution<S> {
    pub family: BalanceFamily,
    pub leading: S,
    pub series: PuiseuxSeries<S>,
    /// Relative index -> injected value.
    pub free_parameters: BTreeMap<i64, S>,
    pub compatibility: Vec<Compatibility>,
    pub order: usize,
    /// `E[series]`, known through `residual_start + order`.
    pub residual: PuiseuxSeries<S>,
    /// Absolute index of the balance order `q n` in the residual.
    pub residual_start: i64,
    /// `|E_0|`: zero for a genuine balance, the unbalanced defect for a
    /// forced expansion.
    pub leading_defect: f64,
}

impl<S: Scalar> LocalSolution<S> {
    /// `E` coefficients at relative orders `0..=order`.
    pub fn residual_coeffs(&self) -> Vec<(i64, S)> {
        (0..=self.order as i64)
            .map(|j| {
                let idx = self.residual_start + j;
                (j, self.residual.coeff(idx).unwrap_or_else(S::zero))
            })
            .collect()
    }

    /// Max `|E_j|` over relative orders `0..=order`, skipping unsatisfied
    /// compatibility orders (and the leading order of forced expansions).
    pub fn residual_norm(&self) -> f64 {
        let skip: BTreeSet<i64> = self
            .compatibility
            .iter()
            .filter(|c| !c.satisfied)
            .map(|c| c.index)
            .collect();
        self.residual_coeffs()
            .into_iter()
            .filter(|(j, _)| !skip.contains(j) && !(*j == 0 && self.leading_defect > 0.0))
            .map(|(_, c)| c.magnitude())
            .fold(0.0, f64::max)
    }

    /// Coefficient of `tau^{p + j/n}`.
    pub fn coeff(&self, j: usize) -> S {
        let idx = self.series_start() + j as i64;
        self.series.coeff(idx).unwrap_or_else(S::zero)
    }

    fn series_start(&self) -> i64 {
        *self.family.p.numer() * (self.family.branch_order as i64 / *self.family.p.denom())
    }

    /// Laurent coefficient of `tau^k` (integer `k`), for branch order 1.
    pub fn laurent_coeff(&self, k: i64) -> Option<S> {
        (self.series.branch_order() == 1).then(|| self.series.coeff(k).unwrap_or_else(S::zero))
    }

    pub fn to_c64(&self) -> LocalSolution<C64> {
        LocalSolution {
            family: self.family.clone(),
            leading: self.leading.to_c64(),
            series: self.series.to_c64(),
            free_parameters: self
                .free_parameters
                .iter()
                .map(|(k, v)| (*k, v.to_c64()))
                .collect(),
            compatibility: self.compatibility.clone(),
            order: self.order,
            residual: self.residual.to_c64(),
            residual_start: self.residual_start,
            leading_defect: self.leading_defect,
        }
    }
}

fn integer_index(r: Rational64, n: u32) -> Option<i64> {
    let scaled = r * n as i64;
    scaled.is_integer().then(|| scaled.to_integer())
}

/// Order-by-order solution of `E_j = 0` on a consistent family.
///
/// At a resonant order the supplied free value (default 0) is injected and
/// the compatibility condition `E_j = 0` is recorded.
pub fn solve_local_series<S: Scalar>(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    a: S,
    order: usize,
    free: &BTreeMap<i64, S>,
) -> Result<LocalSolution<S>> {
    if a.is_zero() {
        return Err(Error::BadLeadingCoefficient(0.0));
    }
    let lead = leading_value(poly, fam, &a)?;
    let lead_scale: f64 = fam
        .leading_polynomial
        .iter()
        .enumerate()
        .map(|(k, c)| c.norm() * a.magnitude().powi(k as i32))
        .sum();
    if !lead.is_negligible(1e-10 * lead_scale.max(1.0)) {
        return Err(Error::BadLeadingCoefficient(lead.magnitude()));
    }
    let n = fam.branch_order;
    let resonant: BTreeMap<i64, Rational64> = compute_resonances(poly, fam, &a)?
        .into_iter()
        .filter_map(|r| match r {
            Resonance::Rational(q) if q > Rational64::zero() => {
                integer_index(q, n).map(|j| (j, q))
            }
            _ => None,
        })
        .collect();
    for j in free.keys() {
        if !resonant.contains_key(j) {
            return Err(Error::Precondition(format!(
                "free value supplied at non-resonant index {j}"
            )));
        }
    }
    recurse(poly, fam, a, order, &resonant, free, false)
}

/// Order-by-order expansion that ignores an unsatisfiable leading order
/// (used to evaluate claimed Laurent data on an inconsistent family). Each
/// later order is solved for its coefficient; orders whose linear step
/// vanishes are treated like resonances with value 0.
pub fn solve_forced_series<S: Scalar>(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    a: S,
    order: usize,
) -> Result<LocalSolution<S>> {
    if a.is_zero() {
        return Err(Error::BadLeadingCoefficient(0.0));
    }
    recurse(poly, fam, a, order, &BTreeMap::new(), &BTreeMap::new(), true)
}

fn recurse<S: Scalar>(
    poly: &DifferentialPolynomial,
    fam: &BalanceFamily,
    a: S,
    order: usize,
    resonant: &BTreeMap<i64, Rational64>,
    free: &BTreeMap<i64, S>,
    forced: bool,
) -> Result<LocalSolution<S>> {
    let n = fam.branch_order;
    let start = integer_index(fam.p, n).expect("p has denominator n");
    let e_start = integer_index(fam.q, n).expect("q has denominator n");
    let mut coeffs = vec![a.clone()];
    let mut compatibility = Vec::new();
    let mut injected = BTreeMap::new();

    let residual_at = |coeffs: &[S], j: i64| -> Result<S> {
        let y = PuiseuxSeries::with_truncation(n, start, coeffs.to_vec(), start + j);
        let e = substitute_through(poly, &y, e_start + j)?;
        Ok(e.coeff(e_start + j).expect("checked truncation"))
    };

    let leading_defect = residual_at(&coeffs, 0)?.magnitude();

    for j in 1..=order as i64 {
        coeffs.push(S::zero());
        let e0 = residual_at(&coeffs, j)?;
        if let Some(&r) = resonant.get(&j) {
            let v = free.get(&j).cloned().unwrap_or_else(S::zero);
            let tol = 1e-9 * (1.0 + coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max));
            compatibility.push(Compatibility {
                resonance: r,
                index: j,
                satisfied: e0.is_negligible(tol),
                defect: e0.magnitude(),
            });
            injected.insert(j, v.clone());
            *coeffs.last_mut().expect("pushed") = v;
            continue;
        }
        *coeffs.last_mut().expect("pushed") = S::one();
        let e1 = residual_at(&coeffs, j)?;
        let slope = e1 - e0.clone();
        let tol = 1e-12 * (1.0 + e0.magnitude());
        if slope.is_negligible(tol) {
            if !forced {
                return Err(Error::SingularStep { index: j });
            }
            compatibility.push(Compatibility {
                resonance: Rational64::new(j, n as i64),
                index: j,
                satisfied: e0.is_negligible(1e-9),
                defect: e0.magnitude(),
            });
            injected.insert(j, S::zero());
            *coeffs.last_mut().expect("pushed") = S::zero();
            continue;
        }
        *coeffs.last_mut().expect("pushed") = -(e0 / slope);
    }

    let series = PuiseuxSeries::with_truncation(n, start, coeffs, start + order as i64);
    let residual = substitute_through(poly, &series, e_start + order as i64)?;
    Ok(LocalSolution {
        family: fam.clone(),
        leading: a,
        series,
        free_parameters: injected,
        compatibility,
        order,
        residual,
        residual_start: e_start,
        leading_defect: if forced { leading_defect } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{find_balances, BalanceOptions};
    use crate::ode::{ermakov_pinney, normalize, parse_ode, ParamEnv};
    use crate::scalar::{exact_from_ratio, Exact};

    fn poly(text: &str) -> DifferentialPolynomial {
        normalize(&parse_ode(text).unwrap(), &ParamEnv::default()).unwrap()
    }

    fn q(n: i64, d: i64) -> Exact {
        exact_from_ratio(Rational64::new(n, d))
    }

    #[test]
    fn cubic_on_inverse_tau_vanishes() {
        let w = poly("y'' - 2*y^3");
        let s = PuiseuxSeries::with_truncation(1, -1, vec![q(1, 1)], 8);
        let e = substitute(&w, &s).unwrap();
        assert!(e.is_zero());
        assert!(e.truncation() >= 0);
    }

    #[test]
    fn free_monomial_branch_is_exact() {
        let ep0 = ermakov_pinney(0.0);
        let a = Exact::new(q(1, 1).re, q(1, 1).re);
        let s = PuiseuxSeries::with_truncation(2, 1, vec![a], 14);
        let e = substitute(&ep0, &s).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn truncation_shortfall_is_reported() {
        let w = poly("y'' - 2*y^3");
        let s = PuiseuxSeries::with_truncation(1, -1, vec![q(1, 1)], 2);
        match substitute_through(&w, &s, 10) {
            Err(Error::TruncationInsufficient { need: 10, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn branch_series_omega_zero_is_monomial() {
        let ep0 = ermakov_pinney(0.0);
        let fams = find_balances(&ep0, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.consistent).unwrap();
        let a = fam.exact_leading_coeff(&ep0, 0).unwrap();
        let local = solve_local_series(&ep0, fam, a.clone(), 12, &BTreeMap::new()).unwrap();
        assert_eq!(local.series.coeff(1), Some(a));
        for j in 2..=13 {
            assert_eq!(local.series.coeff(j), Some(q(0, 1)), "index {j}");
        }
        assert_eq!(local.compatibility.len(), 1);
        assert!(local.compatibility[0].satisfied);
        assert_eq!(local.compatibility[0].index, 2);
    }

    #[test]
    fn branch_series_omega_one_residual() {
        let ep = ermakov_pinney(1.0);
        let fams = find_balances(&ep, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.consistent).unwrap();
        for idx in 0..4 {
            let a = fam.exact_leading_coeff(&ep, idx).unwrap();
            let exact = solve_local_series(&ep, fam, a, 12, &BTreeMap::new()).unwrap();
            assert_eq!(exact.residual_norm(), 0.0);
            assert!(exact.compatibility.iter().all(|c| c.satisfied));
            assert!(exact.series.terms().filter(|(j, c)| *j > 1 && !c.is_zero()).count() > 0);

            let af = fam.leading_coeffs[idx];
            let float = solve_local_series(&ep, fam, af, 12, &BTreeMap::new()).unwrap();
            assert!(float.residual_norm() < 1e-12, "{}", float.residual_norm());
            for j in 0..=12 {
                let d = exact.coeff(j).to_c64() - float.coeff(j);
                assert!(d.norm() < 1e-12, "coefficient {j}");
            }
        }
    }

    #[test]
    fn cubic_pole_series_is_exactly_inverse_tau() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.p == Rational64::from_integer(-1)).unwrap();
        let local = solve_local_series(&w, fam, q(1, 1), 10, &BTreeMap::new()).unwrap();
        assert_eq!(local.series.min_index(), -1);
        assert_eq!(local.series.terms().filter(|(_, c)| !c.is_zero()).count(), 1);
        assert_eq!(local.compatibility.len(), 1);
        assert_eq!(local.compatibility[0].resonance, Rational64::from_integer(4));
        assert!(local.compatibility[0].satisfied);
    }

    #[test]
    fn free_value_injection() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.p == Rational64::from_integer(-1)).unwrap();
        let free: BTreeMap<i64, Exact> = [(4, q(3, 1))].into_iter().collect();
        let local = solve_local_series(&w, fam, q(1, 1), 10, &free).unwrap();
        assert_eq!(local.laurent_coeff(3), Some(q(3, 1)));
        assert_eq!(local.residual_norm(), 0.0);
        let bad: BTreeMap<i64, Exact> = [(2, q(1, 1))].into_iter().collect();
        assert!(solve_local_series(&w, fam, q(1, 1), 10, &bad).is_err());
    }

    #[test]
    fn wrong_leading_coefficient_rejected() {
        let w = poly("y'' - 2*y^3");
        let fams = find_balances(&w, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.p == Rational64::from_integer(-1)).unwrap();
        assert!(matches!(
            solve_local_series(&w, fam, q(2, 1), 4, &BTreeMap::new()),
            Err(Error::BadLeadingCoefficient(_))
        ));
    }

    #[test]
    fn forced_expansion_on_inconsistent_pole() {
        let ep = ermakov_pinney(1.0);
        let fams = find_balances(&ep, BalanceOptions::default());
        let fam = fams.iter().find(|f| f.p == Rational64::from_integer(-1)).unwrap();
        let a = Exact::new(q(0, 1).re, q(1, 1).re);
        let forced = solve_forced_series(&ep, fam, a, 6).unwrap();
        assert_eq!(forced.leading_defect, 2.0);
        assert_eq!(forced.residual_norm(), 0.0);
    }
}

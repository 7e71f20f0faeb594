use std::collections::BTreeMap;
use std::fmt;

use num::{Rational64, Zero};
use serde::Serialize;

use super::dsl::OdeAst;
use super::ParamEnv;
use crate::error::{Error, Result};
use crate::scalar::C64;

/// One term `coeff * prod_k (y^(k))^(d_k)` of a differential polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMonomial {
    pub coeff: C64,
    /// Derivative order -> exponent; never stores zero exponents.
    pub degrees: BTreeMap<u8, u32>,
}

impl DiffMonomial {
    pub fn new(coeff: C64, degrees: impl IntoIterator<Item = (u8, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, d) in degrees {
            if d > 0 {
                *map.entry(k).or_insert(0) += d;
            }
        }
        DiffMonomial { coeff, degrees: map }
    }

    pub fn constant(coeff: C64) -> Self {
        DiffMonomial {
            coeff,
            degrees: BTreeMap::new(),
        }
    }

    /// Total degree `sum_k d_k` (the power of lambda under y -> lambda Y).
    pub fn total_degree(&self) -> u32 {
        self.degrees.values().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn max_order(&self) -> u8 {
        self.degrees.keys().next_back().copied().unwrap_or(0)
    }

    /// Leading tau-exponent `sum_k d_k (p - k)` of this monomial under
    /// `y ~ a tau^p`.
    pub fn exponent_at(&self, p: Rational64) -> Rational64 {
        self.degrees.iter().fold(Rational64::zero(), |acc, (&k, &d)| {
            acc + (p - Rational64::from_integer(k as i64)) * d as i64
        })
    }

    /// The `y`-only signature printed as `y^3*y''`; `1` for the constant.
    pub fn signature(&self) -> String {
        if self.degrees.is_empty() {
            return "1".into();
        }
        self.degrees
            .iter()
            .map(|(&k, &d)| {
                let base = format!("y{}", "'".repeat(k as usize));
                if d == 1 {
                    base
                } else {
                    format!("{base}^{d}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    fn sort_key(&self) -> (std::cmp::Reverse<u32>, Vec<(u8, u32)>) {
        (
            std::cmp::Reverse(self.total_degree()),
            self.degrees.iter().map(|(&k, &d)| (k, d)).collect(),
        )
    }
}

/// An ODE `E[y] = 0` with `E` polynomial in `y, y', y'', ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialPolynomial {
    pub monomials: Vec<DiffMonomial>,
    /// Power of `y` the source expression was multiplied by to clear
    /// negative powers of `y`.
    pub clearing_multiplier: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeminaCheck {
    pub holds: bool,
    pub top_degree: u32,
    pub top_monomials: Vec<usize>,
}

impl DifferentialPolynomial {
    /// Builds a polynomial from raw terms, merging like monomials and
    /// dropping zero coefficients. Fails if nothing survives.
    pub fn new(terms: impl IntoIterator<Item = DiffMonomial>) -> Result<Self> {
        Self::with_multiplier(terms, 0)
    }

    pub fn with_multiplier(
        terms: impl IntoIterator<Item = DiffMonomial>,
        clearing_multiplier: u32,
    ) -> Result<Self> {
        let mut merged: BTreeMap<Vec<(u8, u32)>, C64> = BTreeMap::new();
        for m in terms {
            let key: Vec<(u8, u32)> = m.degrees.iter().map(|(&k, &d)| (k, d)).collect();
            *merged.entry(key).or_insert(C64::new(0.0, 0.0)) += m.coeff;
        }
        let mut monomials: Vec<DiffMonomial> = merged
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|(k, c)| DiffMonomial::new(c, k))
            .collect();
        if monomials.is_empty() {
            return Err(Error::IdenticallyZero);
        }
        monomials.sort_by_key(|m| m.sort_key());
        Ok(DifferentialPolynomial {
            monomials,
            clearing_multiplier,
        })
    }

    /// Differential order of the equation.
    pub fn order(&self) -> u8 {
        self.monomials.iter().map(|m| m.max_order()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.monomials.iter().all(|m| m.is_constant())
    }

    /// Exactly one monomial of maximal total degree (hypothesis of the
    /// simply-periodic / rational construction theorem).
    pub fn demina_condition(&self) -> DeminaCheck {
        let top_degree = self
            .monomials
            .iter()
            .map(|m| m.total_degree())
            .max()
            .unwrap_or(0);
        let top_monomials: Vec<usize> = self
            .monomials
            .iter()
            .enumerate()
            .filter(|(_, m)| m.total_degree() == top_degree)
            .map(|(i, _)| i)
            .collect();
        DeminaCheck {
            holds: top_monomials.len() == 1,
            top_degree,
            top_monomials,
        }
    }

    /// Value of `E` at a point given `derivs[k] = y^(k)`.
    pub fn eval(&self, derivs: &[C64]) -> C64 {
        self.monomials
            .iter()
            .map(|m| {
                m.degrees.iter().fold(m.coeff, |acc, (&k, &d)| {
                    acc * derivs[k as usize].powu(d)
                })
            })
            .sum()
    }
}

pub fn check_demina_condition(poly: &DifferentialPolynomial) -> DeminaCheck {
    poly.demina_condition()
}

fn fmt_coeff(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for DifferentialPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.monomials.iter().enumerate() {
            let (neg, c) = if m.coeff.im == 0.0 && m.coeff.re < 0.0 {
                (true, -m.coeff)
            } else {
                (false, m.coeff)
            };
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let unit = c == C64::new(1.0, 0.0);
            if m.is_constant() {
                f.write_str(&fmt_coeff(c))?;
            } else if unit {
                f.write_str(&m.signature())?;
            } else {
                write!(f, "{}*{}", fmt_coeff(c), m.signature())?;
            }
        }
        Ok(())
    }
}

/// Signature with possibly negative exponents, used during expansion.
type Sig = Vec<(u8, i32)>;
type Expanded = BTreeMap<Sig, C64>;

fn sig_mul(a: &Sig, b: &Sig) -> Sig {
    let mut map: BTreeMap<u8, i32> = a.iter().copied().collect();
    for &(k, d) in b {
        *map.entry(k).or_insert(0) += d;
    }
    map.into_iter().filter(|(_, d)| *d != 0).collect()
}

fn ex_mul(a: &Expanded, b: &Expanded) -> Expanded {
    let mut out = Expanded::new();
    for (sa, ca) in a {
        for (sb, cb) in b {
            *out.entry(sig_mul(sa, sb)).or_insert(C64::new(0.0, 0.0)) += ca * cb;
        }
    }
    prune(out)
}

fn prune(e: Expanded) -> Expanded {
    e.into_iter().filter(|(_, c)| *c != C64::new(0.0, 0.0)).collect()
}

fn expand(ast: &OdeAst, env: &ParamEnv) -> Result<Expanded> {
    let single = |sig: Sig, c: C64| -> Expanded { prune(std::iter::once((sig, c)).collect()) };
    Ok(match ast {
        OdeAst::Const(c) => single(vec![], *c),
        OdeAst::Param(name) => single(
            vec![],
            env.get(name).ok_or_else(|| Error::UnboundParameter(name.clone()))?,
        ),
        OdeAst::Y(k) => single(vec![(*k, 1)], C64::new(1.0, 0.0)),
        OdeAst::Neg(x) => expand(x, env)?.into_iter().map(|(s, c)| (s, -c)).collect(),
        OdeAst::Add(a, b) | OdeAst::Sub(a, b) => {
            let sign = if matches!(ast, OdeAst::Sub(..)) { -1.0 } else { 1.0 };
            let mut out = expand(a, env)?;
            for (s, c) in expand(b, env)? {
                *out.entry(s).or_insert(C64::new(0.0, 0.0)) += c * sign;
            }
            prune(out)
        }
        OdeAst::Mul(a, b) => ex_mul(&expand(a, env)?, &expand(b, env)?),
        OdeAst::Pow(b, e) => {
            let base = expand(b, env)?;
            let base = if *e < 0 {
                if base.len() != 1 {
                    return Err(if base.is_empty() {
                        Error::SingularInput("zero raised to a negative power".into())
                    } else {
                        Error::NonMonomialNegativePower
                    });
                }
                let (sig, c) = base.into_iter().next().expect("one term");
                single(sig.into_iter().map(|(k, d)| (k, -d)).collect(), C64::new(1.0, 0.0) / c)
            } else {
                base
            };
            let mut acc = single(vec![], C64::new(1.0, 0.0));
            for _ in 0..e.unsigned_abs() {
                acc = ex_mul(&acc, &base);
            }
            acc
        }
    })
}

/// Expands the tree into monomials, clears negative powers of `y` with the
/// smallest multiplier `y^k`, and merges like terms.
pub fn normalize(ast: &OdeAst, env: &ParamEnv) -> Result<DifferentialPolynomial> {
    for name in ast.parameters() {
        if env.get(&name).is_none() {
            return Err(Error::UnboundParameter(name));
        }
    }
    let expanded = expand(ast, env)?;
    let mut clear = 0i32;
    for sig in expanded.keys() {
        for &(k, d) in sig {
            if d < 0 {
                if k > 0 {
                    return Err(Error::NegativeDerivativePower { order: k });
                }
                clear = clear.max(-d);
            }
        }
    }
    let terms = expanded.into_iter().map(|(sig, c)| {
        let mut degrees: BTreeMap<u8, i32> = sig.into_iter().collect();
        *degrees.entry(0).or_insert(0) += clear;
        DiffMonomial::new(
            c,
            degrees
                .into_iter()
                .filter(|(_, d)| *d != 0)
                .map(|(k, d)| (k, d as u32)),
        )
    });
    let poly = DifferentialPolynomial::with_multiplier(terms, clear as u32)?;
    if poly.is_constant() {
        return Err(Error::IdenticallyConstant(fmt_coeff(poly.monomials[0].coeff)));
    }
    Ok(poly)
}

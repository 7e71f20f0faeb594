//! Puiseux/Laurent series arithmetic, substitution into differential
//! polynomials, and recursive local solutions.

mod cot;
mod local;
mod puiseux;

pub use cot::{cot_coefficients, cot_laurent};
pub use local::{
    solve_forced_series, solve_local_series, substitute, substitute_through, Compatibility,
    LocalSolution,
};
pub use puiseux::PuiseuxSeries;

/// Default number of correction orders (units of `tau^{1/n}`).
pub const DEFAULT_ORDER: usize = 12;

/// `s^e`, exposed under its operation name.
pub fn series_pow<S: crate::Scalar>(s: &PuiseuxSeries<S>, e: i32) -> crate::Result<PuiseuxSeries<S>> {
    s.pow(e)
}

/// `d^k s / d tau^k`.
pub fn series_differentiate<S: crate::Scalar>(s: &PuiseuxSeries<S>, k: u32) -> PuiseuxSeries<S> {
    s.differentiate(k)
}

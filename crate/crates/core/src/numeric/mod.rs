//! Complex-time integration of EP and the linear oscillator, singularity
//! probing, invariant drift and series-vs-numeric comparison.

mod compare;
mod integrate;
mod probe;

pub use compare::{
    fit_branch_series, invariant_drift, series_vs_numeric, BranchFit, InvariantDrift, RayComparison,
    SeriesComparison,
};
pub use integrate::{integrate, ComplexPath, ComplexTrajectory, Halt, Sample, StepStats, System, METHOD};
pub use probe::{
    detect_singularity, fit_local_exponent, probe_singularity, ExponentFit, ProbeKind, SingularityProbe,
};

use crate::scalar::C64;

/// Serializes a complex number as `[re, im]`.
pub fn ser_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

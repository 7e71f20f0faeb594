//! Movable-singularity analysis of autonomous polynomial ODEs, with the
//! Ermakov-Pinney equation `y'' + omega^2 y = y^-3` as the worked case.
//!
//! The pipeline is:
//!
//! 1. [`ode`]: parse the equation text and clear negative powers of `y`.
//! 2. [`balance`]: dominant balances `y ~ a tau^p` (poles and algebraic
//!    branch points) and their resonances.
//! 3. [`series`]: Puiseux/Laurent series arithmetic and order-by-order
//!    local solutions.
//! 4. [`closedform`]: cotangent-type and rational candidates built from the
//!    local data and verified by substitution.
//! 5. [`exactlab`]: closed-form reference solutions (Pinney superposition,
//!    Ermakov-Lewis invariant, Riccati reduction).
//! 6. [`numeric`]: complex-time integration and singularity probing.
//! 7. [`report`]: the JSON analysis report tying everything together.

pub mod balance;
pub mod closedform;
pub mod error;
pub mod exactlab;
pub mod numeric;
pub mod ode;
pub mod report;
pub mod roots;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar, C64};

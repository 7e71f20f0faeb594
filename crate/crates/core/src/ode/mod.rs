//! ODE model: DSL parsing, parameter binding and normalization to a
//! cleared differential polynomial.

mod dsl;
mod poly;

use std::collections::BTreeMap;

pub use dsl::{parse_ode, OdeAst, MAX_DERIVATIVE_ORDER};
pub use poly::{check_demina_condition, normalize, DeminaCheck, DiffMonomial, DifferentialPolynomial};

use crate::scalar::C64;

/// The canonical Ermakov-Pinney text, `y'' + omega^2 y - y^-3`.
pub const ERMAKOV_PINNEY: &str = "y'' + omega^2*y - y^-3";

/// Parameter bindings. Units follow hbar = m = 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamEnv {
    values: BTreeMap<String, C64>,
}

impl ParamEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, C64)>) -> Self {
        let mut env = Self::new();
        for (k, v) in pairs {
            env.bind(k, v);
        }
        env
    }

    pub fn bind(&mut self, name: &str, value: C64) -> &mut Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<C64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, C64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Parses and normalizes the Ermakov-Pinney equation at frequency `omega`.
pub fn ermakov_pinney(omega: f64) -> DifferentialPolynomial {
    let env = ParamEnv::from_pairs([("omega", C64::new(omega, 0.0))]);
    let ast = parse_ode(ERMAKOV_PINNEY).expect("built-in text parses");
    match normalize(&ast, &env) {
        Ok(p) => p,
        // omega = 0 still leaves y^3 y'' - 1
        Err(e) => unreachable!("built-in equation normalizes: {e}"),
    }
}

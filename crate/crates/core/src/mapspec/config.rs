//! JSON map configuration.
//!
//! ```json
//! {
//!   "f":   {"breakpoints": [0, "1/3", "2/3"], "branches": ["3*x", "3*x", "3*x"]},
//!   "tau": {"breakpoints": [0], "branches": ["cos(2*pi*x)"]},
//!   "validation_grid": 10000,
//!   "seed": 42
//! }
//! ```
//!
//! Breakpoints may be numbers or constant expressions. Branch expressions use
//! the variable `x` at the lifted coordinate of their interval.

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::piecewise::{MapKind, PiecewiseC2Map};
use super::skew::{BuildOptions, SkewProduct, Validation, DEFAULT_VALIDATION_GRID};
use super::MapError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Breakpoint {
    Number(f64),
    Expr(String),
}

impl Breakpoint {
    pub fn resolve(&self) -> Result<f64, MapError> {
        match self {
            Breakpoint::Number(v) => Ok(*v),
            Breakpoint::Expr(s) => {
                let e = Expr::parse(s).map_err(|source| MapError::Parse { which: "breakpoint", branch: 0, source })?;
                if !e.is_constant() {
                    return Err(MapError::Config(format!("breakpoint `{s}` depends on x")));
                }
                e.eval(0.0_f64).map_err(|source| MapError::Eval { which: "breakpoint", branch: 0, x: 0.0, source })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub breakpoints: Vec<Breakpoint>,
    pub branches: Vec<String>,
}

impl BranchSpec {
    pub fn build<T: Scalar>(&self, which: &'static str, kind: MapKind) -> Result<PiecewiseC2Map<T>, MapError> {
        let bps = self
            .breakpoints
            .iter()
            .map(|b| b.resolve().map(T::lit))
            .collect::<Result<Vec<_>, _>>()?;
        let exprs = self
            .branches
            .iter()
            .enumerate()
            .map(|(branch, s)| Expr::parse(s).map_err(|source| MapError::Parse { which, branch, source }))
            .collect::<Result<Vec<_>, _>>()?;
        PiecewiseC2Map::new(bps, exprs, kind).map_err(|source| MapError::Piecewise { which, source })
    }
}

fn default_grid() -> usize {
    DEFAULT_VALIDATION_GRID
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub f: BranchSpec,
    pub tau: BranchSpec,
    #[serde(default = "default_grid")]
    pub validation_grid: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl MapConfig {
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        serde_json::from_str(text).map_err(|e| MapError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build<T: Scalar>(&self) -> Result<Validation<T>, MapError> {
        let f = self.f.build("f", MapKind::Circle)?;
        let tau = self.tau.build("tau", MapKind::Real)?;
        SkewProduct::build(f, tau, BuildOptions { validation_grid: self.validation_grid })
    }
}

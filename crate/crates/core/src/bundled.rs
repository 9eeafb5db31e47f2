//! Example maps shipped with the crate.

use crate::mapspec::{MapConfig, SkewProduct};
use crate::scalar::Scalar;

/// `f = 3x`, `tau = cos(2 pi x)`: the generic, exponentially mixing example.
pub const TRIPLING_COS: &str = include_str!("../configs/tripling_cos.json");
/// `f = 3x`, `tau = theta o f - theta + 2^-1/2` with `theta = 0.1 sin(2 pi x)`.
pub const COHOMOLOGOUS: &str = include_str!("../configs/cohomologous.json");
/// `f = 3x + 0.05 sin(6 pi x)` as one full branch, `tau = cos(2 pi x)`.
pub const PERTURBED: &str = include_str!("../configs/perturbed.json");
/// `f = 2x`: rejected, not expanding enough.
pub const DOUBLING: &str = include_str!("../configs/doubling.json");

pub const NAMES: [&str; 4] = ["tripling_cos", "cohomologous", "perturbed", "doubling"];

/// Constant of the cohomologous example.
pub const COHOMOLOGOUS_C: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Transfer function of the cohomologous example.
pub fn cohomologous_theta<T: Scalar>(x: T) -> T {
    T::lit(0.1) * (T::TAU() * x).sin()
}

pub fn config_text(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".json") {
        "tripling_cos" => Some(TRIPLING_COS),
        "cohomologous" => Some(COHOMOLOGOUS),
        "perturbed" => Some(PERTURBED),
        "doubling" => Some(DOUBLING),
        _ => None,
    }
}

fn load<T: Scalar>(text: &str) -> SkewProduct<T> {
    MapConfig::from_json(text)
        .and_then(|c| c.build())
        .expect("bundled configs are valid")
        .into_product()
}

pub fn tripling_cos<T: Scalar>() -> SkewProduct<T> {
    load(TRIPLING_COS)
}

pub fn cohomologous<T: Scalar>() -> SkewProduct<T> {
    load(COHOMOLOGOUS)
}

pub fn perturbed<T: Scalar>() -> SkewProduct<T> {
    load(PERTURBED)
}

//! Piecewise expanding skew products on the two-torus.

pub mod bundled;
pub mod cohomology;
pub mod cones;
pub mod correlation;
pub mod dynamics;
pub mod growth;
pub mod mapspec;
pub mod oscillatory;
pub mod roots;
pub mod scalar;
pub mod suite;
pub mod transfer;

pub use mapspec::{build_skew_product, Expr, Jet2, MapConfig, MapError, PiecewiseC2Map, SkewProduct, Validation};
pub use scalar::Scalar;
pub use transfer::GridFunction;

pub type Jet2F64 = Jet2<f64>;
pub type Jet2F32 = Jet2<f32>;
pub type SkewProductF64 = SkewProduct<f64>;
pub type SkewProductF32 = SkewProduct<f32>;
pub type GridFunctionF64 = GridFunction<f64>;
pub type GridFunctionF32 = GridFunction<f32>;

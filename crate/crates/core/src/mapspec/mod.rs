//! Map definitions: expressions, jets, piecewise maps and validated skew products.

mod config;
mod expr;
mod jet;
mod piecewise;
mod skew;

pub use config::{Breakpoint, BranchSpec, MapConfig};
pub use expr::{parse_expression, BinOp, EvalError, Expr, Func, ParseError};
pub use jet::Jet2;
pub use piecewise::{MapKind, PiecewiseC2Map, PiecewiseError};
pub use skew::{
    BuildOptions, InversionPiece, SkewConstants, SkewProduct, Validation, BOUNDARY_FLAG, DEFAULT_VALIDATION_GRID,
};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("config: {0}")]
    Config(String),
    #[error("{which} branch {branch}: {source}")]
    Parse { which: &'static str, branch: usize, source: ParseError },
    #[error("{which}: {source}")]
    Piecewise { which: &'static str, source: PiecewiseError },
    #[error("{which} branch {branch} at x = {x}: {source}")]
    Eval { which: &'static str, branch: usize, x: f64, source: EvalError },
    #[error("f must be circle-valued and tau real-valued")]
    WrongKind,
    #[error("branch {branch} of f is not strictly monotone")]
    NonMonotoneBranch { branch: usize },
    #[error("not expanding: inf |f'| = {lambda_tilde} is not > 2")]
    NotExpanding { lambda_tilde: f64 },
    #[error("not covering: branch images miss the circle near {gap_at}")]
    NotCovering { gap_at: f64 },
    #[error("branch inversion failed: {0}")]
    Inversion(String),
}

/// Builds and validates a skew product from branch expressions.
pub fn build_skew_product<T: Scalar>(
    f: &BranchSpec,
    tau: &BranchSpec,
    options: BuildOptions,
) -> Result<Validation<T>, MapError> {
    let f = f.build("f", MapKind::Circle)?;
    let tau = tau.build("tau", MapKind::Real)?;
    SkewProduct::build(f, tau, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(bps: &[f64], branches: &[&str]) -> BranchSpec {
        BranchSpec {
            breakpoints: bps.iter().map(|&b| Breakpoint::Number(b)).collect(),
            branches: branches.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn tripling() -> BranchSpec {
        spec(&[0.0, 1.0 / 3.0, 2.0 / 3.0], &["3*x"; 3])
    }

    #[test]
    fn tripling_cos_constants() {
        let v = build_skew_product::<f64>(&tripling(), &spec(&[0.0], &["cos(2*pi*x)"]), BuildOptions::default()).unwrap();
        let c = v.product().consts();
        assert_eq!(c.lambda_tilde, 3.0);
        assert_eq!(c.lambda_max, 3.0);
        assert!((c.c1 - 2.0 * PI).abs() < 1e-12);
        assert!((c.delta - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(v, Validation::Expanding(_)));
    }

    #[test]
    fn doubling_is_not_expanding() {
        let r = build_skew_product::<f64>(&spec(&[0.0, 0.5], &["2*x"; 2]), &spec(&[0.0], &["cos(2*pi*x)"]), BuildOptions::default());
        assert!(matches!(r, Err(MapError::NotExpanding { .. })));
    }

    #[test]
    fn constant_tau_is_a_verdict() {
        let v = build_skew_product::<f64>(&tripling(), &spec(&[0.0], &["0.7"]), BuildOptions::default()).unwrap();
        assert!(v.is_trivially_cohomologous());
        assert_eq!(v.product().consts().c1, 0.0);
    }

    #[test]
    fn non_monotone_branch_rejected() {
        let r = build_skew_product::<f64>(&spec(&[0.0], &["3*x + sin(2*pi*x)"]), &spec(&[0.0], &["0"]), BuildOptions::default());
        assert!(matches!(r, Err(MapError::NonMonotoneBranch { branch: 0 })));
    }

    #[test]
    fn non_covering_rejected() {
        // four slope-3 branches, each with image [0, 0.75]
        let f = spec(&[0.0, 0.25, 0.5, 0.75], &["3*x", "3*(x-0.25)", "3*(x-0.5)", "3*(x-0.75)"]);
        let r = build_skew_product::<f64>(&f, &spec(&[0.0], &["x"]), BuildOptions::default());
        assert!(matches!(r, Err(MapError::NotCovering { .. })), "{r:?}");
    }

    #[test]
    fn full_circle_branch_split_into_inversion_pieces() {
        let v = build_skew_product::<f64>(&spec(&[0.0], &["3*x + 0.05*sin(6*pi*x)"]), &spec(&[0.0], &["cos(2*pi*x)"]), BuildOptions::default()).unwrap();
        let sp = v.product();
        assert_eq!(sp.pieces().len(), 3);
        for p in sp.pieces() {
            assert!((p.image_len() - 1.0).abs() < 1e-12);
        }
        // f' = 3 + 0.3 pi cos(6 pi x) has its minimum at x = 1/6, off the sample grid
        assert!((sp.consts().lambda_tilde - (3.0 - 0.3 * PI)).abs() < 1e-12);
        assert!((sp.consts().lambda_max - (3.0 + 0.3 * PI)).abs() < 1e-12);
    }

    #[test]
    fn lambda_tilde_nonincreasing_under_refinement() {
        let f = spec(&[0.0], &["3*x + 0.05*sin(6*pi*x)"]);
        let tau = spec(&[0.0], &["cos(2*pi*x)"]);
        let mut prev = f64::INFINITY;
        // nested grids: each spacing divides the previous one
        for grid in [10, 100, 1000, 10_000] {
            let v = build_skew_product::<f64>(&f, &tau, BuildOptions { validation_grid: grid }).unwrap();
            let lt = v.product().consts().lambda_tilde;
            assert!(lt <= prev + 1e-15);
            prev = lt;
        }
    }

    #[test]
    fn build_is_deterministic() {
        let tau = spec(&[0.0], &["cos(2*pi*x)"]);
        let a = build_skew_product::<f64>(&tripling(), &tau, BuildOptions::default()).unwrap();
        let b = build_skew_product::<f64>(&tripling(), &tau, BuildOptions::default()).unwrap();
        assert_eq!(a.product().consts(), b.product().consts());
    }

    #[test]
    fn single_precision_build() {
        let v = build_skew_product::<f32>(&tripling(), &spec(&[0.0], &["cos(2*pi*x)"]), BuildOptions::default()).unwrap();
        assert!((v.product().consts().c1 - 2.0 * std::f32::consts::PI).abs() < 1e-5);
    }
}

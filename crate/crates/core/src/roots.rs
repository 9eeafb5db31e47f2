//! Safeguarded Newton iteration for monotone branches.

use thiserror::Error;

use crate::mapspec::{EvalError, Jet2};
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("target {target} not bracketed by [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64, target: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Solves `f(x) = target` on `[lo, hi]` for monotone `f`, to residual `tol`.
///
/// Newton steps use the jet derivative; any step leaving the current bracket is
/// replaced by bisection.
pub fn solve_monotone<T, F>(f: F, lo: T, hi: T, target: T, tol: T) -> Result<T, RootError>
where
    T: Scalar,
    F: Fn(T) -> Result<Jet2<T>, EvalError>,
{
    let (mut a, mut b) = (lo, hi);
    let ra = f(a)?.value - target;
    if ra.abs() <= tol {
        return Ok(a);
    }
    let rb = f(b)?.value - target;
    if rb.abs() <= tol {
        return Ok(b);
    }
    if (ra > T::zero()) == (rb > T::zero()) {
        return Err(RootError::NotBracketed { lo: lo.as_f64(), hi: hi.as_f64(), target: target.as_f64() });
    }
    let sign_a = ra > T::zero();
    // secant guess is exact for affine branches
    let mut x = a - ra * (b - a) / (rb - ra);
    if !(x > a && x < b) {
        x = (a + b) / T::lit(2.0);
    }
    let mut best = (x, T::infinity());
    for _ in 0..MAX_ITERATIONS {
        let j = f(x)?;
        let r = j.value - target;
        if r.abs() < best.1 {
            best = (x, r.abs());
        }
        if r.abs() <= tol {
            return Ok(x);
        }
        if (r > T::zero()) == sign_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= T::epsilon() * (T::one() + x.abs()) {
            break;
        }
        let newton = x - r / j.d1;
        x = if j.d1 != T::zero() && newton > a && newton < b { newton } else { (a + b) / T::lit(2.0) };
    }
    Err(RootError::NoConvergence { iterations: MAX_ITERATIONS, residual: best.1.as_f64() })
}

/// Plain bisection; used as an independent oracle in tests.
pub fn bisect<T, F>(f: F, mut lo: T, mut hi: T, target: T, tol: T) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let up = f(hi) > f(lo);
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        let r = f(mid) - target;
        if r.abs() <= tol || hi - lo <= T::epsilon() {
            return mid;
        }
        if (r < T::zero()) == up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::Expr;

    #[test]
    fn newton_on_nonlinear_branch_matches_bisection() {
        let e = Expr::parse("3*x + 0.05*sin(2*pi*x)").unwrap();
        let x = solve_monotone(|t: f64| e.eval_jet2(t), 0.0, 1.0 / 3.0, 0.25, 1e-13).unwrap();
        let oracle = bisect(|t: f64| e.eval(t).unwrap(), 0.0, 1.0 / 3.0, 0.25, 1e-13);
        assert!((e.eval(x).unwrap() - 0.25).abs() <= 1e-13);
        assert!((x - oracle).abs() < 1e-12);
    }

    #[test]
    fn decreasing_branch() {
        let e = Expr::parse("1 - 3*x").unwrap();
        let x = solve_monotone(|t: f64| e.eval_jet2(t), 0.0, 1.0 / 3.0, 0.4, 1e-13).unwrap();
        assert!((x - 0.2).abs() < 1e-14);
    }

    #[test]
    fn unbracketed_target() {
        let e = Expr::parse("3*x").unwrap();
        let r = solve_monotone(|t: f64| e.eval_jet2(t), 0.0, 1.0 / 3.0, 2.0, 1e-13);
        assert!(matches!(r, Err(RootError::NotBracketed { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let e = Expr::parse("3*x + 0.05*sin(2*pi*x)").unwrap();
        let tol = f32::attainable_tol(1e-13, 1.0);
        let x = solve_monotone(|t: f32| e.eval_jet2(t), 0.0, 1.0 / 3.0, 0.25, tol).unwrap();
        assert!((e.eval(x).unwrap() - 0.25).abs() <= tol);
    }
}

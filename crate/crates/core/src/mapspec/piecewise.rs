use super::expr::{EvalError, Expr};
use super::jet::Jet2;
use crate::scalar::{wrap01, Scalar};

/// How the values of a [`PiecewiseC2Map`] are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// Values taken modulo 1 (the base map).
    Circle,
    /// Plain real values (the fibre map).
    Real,
}

/// A circle map given by breakpoints `a_0 < ... < a_{J-1}` in `[0,1)` and one
/// expression per branch.
///
/// Branch `i` lives on the lifted interval `[a_i, a_{i+1}]` with `a_J = a_0 + 1`;
/// the last branch wraps through `0` and its expression is evaluated at the
/// lifted coordinate in `[a_{J-1}, a_0 + 1]`.
#[derive(Debug, Clone)]
pub struct PiecewiseC2Map<T> {
    breakpoints: Vec<T>,
    branches: Vec<Expr>,
    kind: MapKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PiecewiseError {
    #[error("need at least one breakpoint")]
    NoBreakpoints,
    #[error("{branches} branch expressions for {breakpoints} breakpoints")]
    BranchCount { breakpoints: usize, branches: usize },
    #[error("breakpoints must be strictly increasing in [0, 1); offending value {0}")]
    BadBreakpoint(f64),
}

impl<T: Scalar> PiecewiseC2Map<T> {
    pub fn new(breakpoints: Vec<T>, branches: Vec<Expr>, kind: MapKind) -> Result<Self, PiecewiseError> {
        if breakpoints.is_empty() {
            return Err(PiecewiseError::NoBreakpoints);
        }
        if breakpoints.len() != branches.len() {
            return Err(PiecewiseError::BranchCount { breakpoints: breakpoints.len(), branches: branches.len() });
        }
        let mut prev: Option<T> = None;
        for &a in &breakpoints {
            let bad = !(a >= T::zero() && a < T::one()) || prev.is_some_and(|p| a <= p);
            if bad {
                return Err(PiecewiseError::BadBreakpoint(a.as_f64()));
            }
            prev = Some(a);
        }
        Ok(Self { breakpoints, branches, kind })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[Expr] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Lifted domain `[a_i, a_{i+1}]` of branch `i`.
    pub fn domain(&self, i: usize) -> (T, T) {
        let n = self.breakpoints.len();
        let lo = self.breakpoints[i];
        let hi = if i + 1 < n { self.breakpoints[i + 1] } else { self.breakpoints[0] + T::one() };
        (lo, hi)
    }

    /// Branch containing circle point `x` (half-open on the right) and the
    /// lift of `x` into that branch's domain.
    pub fn locate(&self, x: T) -> (usize, T) {
        let x = wrap01(x);
        let a0 = self.breakpoints[0];
        let n = self.breakpoints.len();
        if x < a0 {
            return (n - 1, x + T::one());
        }
        // last breakpoint <= x
        let i = self.breakpoints.partition_point(|&a| a <= x) - 1;
        (i, x)
    }

    /// Evaluates branch `i` at a lifted coordinate.
    pub fn eval_branch(&self, i: usize, x_lifted: T) -> Result<Jet2<T>, EvalError> {
        self.branches[i].eval_jet2(x_lifted)
    }

    /// Jet of the map at circle point `x`.
    pub fn eval(&self, x: T) -> Result<Jet2<T>, EvalError> {
        let (i, xl) = self.locate(x);
        self.eval_branch(i, xl)
    }

    /// The closure of branch `i` cut into `cells` equal steps; `cells + 1`
    /// points, endpoints included.
    pub fn grid(&self, i: usize, cells: usize) -> impl Iterator<Item = T> + '_ {
        let (lo, hi) = self.domain(i);
        let m = cells.max(1);
        let step = (hi - lo) / T::from_usize_lossy(m);
        (0..=m).map(move |k| if k == m { hi } else { lo + step * T::from_usize_lossy(k) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tripling() -> PiecewiseC2Map<f64> {
        let e = Expr::parse("3*x").unwrap();
        PiecewiseC2Map::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0], vec![e.clone(), e.clone(), e], MapKind::Circle).unwrap()
    }

    #[test]
    fn locate_is_half_open() {
        let f = tripling();
        assert_eq!(f.locate(0.0).0, 0);
        assert_eq!(f.locate(1.0 / 3.0).0, 1);
        assert_eq!(f.locate(0.99).0, 2);
        assert_eq!(f.locate(1.2).0, 0);
    }

    #[test]
    fn wrapping_last_branch_uses_lifted_coordinate() {
        let e = Expr::parse("x").unwrap();
        let g = PiecewiseC2Map::<f64>::new(vec![0.25, 0.75], vec![e.clone(), e], MapKind::Real).unwrap();
        let (i, xl) = g.locate(0.1);
        assert_eq!(i, 1);
        assert!((xl - 1.1).abs() < 1e-15);
        assert_eq!(g.domain(1), (0.75, 1.25));
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let e = Expr::parse("x").unwrap();
        assert!(PiecewiseC2Map::<f64>::new(vec![0.5, 0.2], vec![e.clone(), e.clone()], MapKind::Real).is_err());
        assert!(PiecewiseC2Map::<f64>::new(vec![1.0], vec![e.clone()], MapKind::Real).is_err());
        assert!(PiecewiseC2Map::<f64>::new(vec![0.0], vec![e.clone(), e], MapKind::Real).is_err());
    }

    #[test]
    fn grid_includes_endpoints() {
        let f = tripling();
        let g: Vec<f64> = f.grid(1, 3).collect();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 1.0 / 3.0);
        assert_eq!(g[3], 2.0 / 3.0);
    }
}

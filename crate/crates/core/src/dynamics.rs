//! Preimage trees of the base map and the cocycle data carried along them.

use thiserror::Error;

use crate::mapspec::{EvalError, SkewProduct};
use crate::roots::{solve_monotone, RootError};
use crate::scalar::{wrap01, Compensated, Scalar};

/// Default maximal depth of a preimage tree.
pub const DEFAULT_CAP: usize = 14;

/// Residual tolerance for branch inversion.
pub const INVERSE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("preimage depth {n} exceeds the cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("branch inversion: {0}")]
    NoConvergence(#[from] RootError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Itinerary of a preimage: `symbols[k]` is the inversion piece containing `f^k(x)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BranchWord {
    pub symbols: Vec<usize>,
}

impl BranchWord {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The word of `f^k(x)`.
    pub fn suffix(&self, k: usize) -> BranchWord {
        BranchWord { symbols: self.symbols[k..].to_vec() }
    }

    pub fn prefix(&self, k: usize) -> BranchWord {
        BranchWord { symbols: self.symbols[..k].to_vec() }
    }
}

impl std::fmt::Display for BranchWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// One point of `f^-n(y)` with its cocycle data.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageNode<T> {
    pub x: T,
    pub word: BranchWord,
    /// `1 / |(f^n)'(x)|`.
    pub j_n: T,
    pub tau_n: T,
    /// `tau_n'(x)`; grows like `lambda^n`.
    pub dtau_n: T,
    /// `tau_n' / (f^n)'` at `x`, the center of the image cone.
    pub slope: T,
    /// Sign of `(f^n)'(x)`.
    pub orientation: T,
    /// Some lift along the chain fell within the boundary band of a piece image.
    pub near_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct PreimageTree<T> {
    pub y: T,
    pub n: usize,
    pub nodes: Vec<PreimageNode<T>>,
    /// Nodes with `|J_n tau_n'| > C1 / 2`.
    pub cocycle_violations: usize,
    pub flagged: usize,
}

impl<T: Scalar> PreimageTree<T> {
    pub fn total_weight(&self) -> T {
        let mut acc = Compensated::default();
        for node in &self.nodes {
            acc.add(node.j_n);
        }
        acc.value()
    }
}

/// Lifted preimage of `y` in inversion piece `p`, with the boundary flag.
pub fn invert_piece<T: Scalar>(sp: &SkewProduct<T>, p: usize, y: T) -> Result<Option<(T, bool)>, DynamicsError> {
    let piece = &sp.pieces()[p];
    let Some(yl) = piece.lift(wrap01(y)) else {
        return Ok(None);
    };
    let tol = T::attainable_tol(INVERSE_TOL, yl);
    let x = solve_monotone(|x| sp.eval_piece(p, x), piece.lo, piece.hi, yl, tol)?;
    Ok(Some((x, piece.near_boundary(yl))))
}

/// The point of branch `branch` mapped to `y`, reduced to `[0, 1)`; `None` when `y`
/// is outside the branch image.
pub fn branch_inverse<T: Scalar>(sp: &SkewProduct<T>, branch: usize, y: T) -> Result<Option<T>, DynamicsError> {
    for (p, piece) in sp.pieces().iter().enumerate() {
        if piece.branch != branch {
            continue;
        }
        if let Some((x, _)) = invert_piece(sp, p, y)? {
            return Ok(Some(wrap01(x)));
        }
    }
    Ok(None)
}

/// Single-step preimages of `y` as (piece, lifted x, flag).
pub fn preimages_once<T: Scalar>(sp: &SkewProduct<T>, y: T) -> Result<Vec<(usize, T, bool)>, DynamicsError> {
    let mut out = Vec::with_capacity(sp.pieces().len());
    for p in 0..sp.pieces().len() {
        if let Some((x, flag)) = invert_piece(sp, p, y)? {
            out.push((p, x, flag));
        }
    }
    Ok(out)
}

struct Acc<T> {
    j: T,
    tau: Compensated<T>,
    dtau: T,
    slope: Compensated<T>,
    orientation: T,
    flag: bool,
}

/// All solutions of `f^n(x) = y`, sorted lexicographically by word.
pub fn preimages<T: Scalar>(sp: &SkewProduct<T>, y: T, n: usize) -> Result<PreimageTree<T>, DynamicsError> {
    preimages_with_cap(sp, y, n, DEFAULT_CAP)
}

pub fn preimages_with_cap<T: Scalar>(sp: &SkewProduct<T>, y: T, n: usize, cap: usize) -> Result<PreimageTree<T>, DynamicsError> {
    if n > cap {
        return Err(DynamicsError::CapExceeded { n, cap });
    }
    let y = wrap01(y);
    let mut nodes = Vec::new();
    let mut rev_word = Vec::with_capacity(n);
    let root = Acc {
        j: T::one(),
        tau: Compensated::default(),
        dtau: T::zero(),
        slope: Compensated::default(),
        orientation: T::one(),
        flag: false,
    };
    descend(sp, y, n, &root, &mut rev_word, &mut nodes)?;
    nodes.sort_by(|a: &PreimageNode<T>, b| a.word.cmp(&b.word));
    let half_c1 = sp.consts().c1 / T::lit(2.0);
    let cocycle_violations = nodes.iter().filter(|nd| (nd.j_n * nd.dtau_n).abs() > half_c1).count();
    let flagged = nodes.iter().filter(|nd| nd.near_boundary).count();
    Ok(PreimageTree { y, n, nodes, cocycle_violations, flagged })
}

fn descend<T: Scalar>(
    sp: &SkewProduct<T>,
    z: T,
    remaining: usize,
    acc: &Acc<T>,
    rev_word: &mut Vec<usize>,
    out: &mut Vec<PreimageNode<T>>,
) -> Result<(), DynamicsError> {
    if remaining == 0 {
        let symbols: Vec<usize> = rev_word.iter().rev().copied().collect();
        out.push(PreimageNode {
            x: z,
            word: BranchWord { symbols },
            j_n: acc.j,
            tau_n: acc.tau.value(),
            dtau_n: acc.dtau,
            slope: acc.slope.value(),
            orientation: acc.orientation,
            near_boundary: acc.flag,
        });
        return Ok(());
    }
    for (p, xl, flag) in preimages_once(sp, z)? {
        let fj = sp.eval_piece(p, xl)?;
        let x = wrap01(xl);
        let tj = sp.tau().eval(x)?;
        let sign = fj.d1.signum();
        let j = acc.j / fj.d1.abs();
        let orientation = acc.orientation * sign;
        let mut tau = acc.tau;
        tau.add(tj.value);
        let mut slope = acc.slope;
        slope.add(orientation * tj.d1 * j);
        let next = Acc {
            j,
            tau,
            dtau: tj.d1 + fj.d1 * acc.dtau,
            slope,
            orientation,
            flag: acc.flag || flag,
        };
        rev_word.push(p);
        descend(sp, x, remaining - 1, &next, rev_word, out)?;
        rev_word.pop();
    }
    Ok(())
}

/// Forward orbit `(F^k(x, u))_{k = 0..=n}`, both coordinates reduced mod 1.
pub fn orbit<T: Scalar>(sp: &SkewProduct<T>, x: T, u: T, n: usize) -> Result<Vec<(T, T)>, EvalError> {
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = (wrap01(x), wrap01(u));
    out.push(cur);
    for _ in 0..n {
        cur = sp.step(cur.0, cur.1)?;
        out.push(cur);
    }
    Ok(out)
}

/// `(f^n(x), tau_n(x))` with the fibre sum unreduced.
pub fn birkhoff<T: Scalar>(sp: &SkewProduct<T>, x: T, n: usize) -> Result<(T, T), EvalError> {
    let mut x = wrap01(x);
    let mut acc = Compensated::default();
    for _ in 0..n {
        acc.add(sp.tau().eval(x)?.value);
        x = sp.step_base(x)?;
    }
    Ok((x, acc.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::{BranchSpec, Breakpoint, BuildOptions, build_skew_product};
    use std::f64::consts::PI;

    fn spec(bps: &[f64], branches: &[&str]) -> BranchSpec {
        BranchSpec {
            breakpoints: bps.iter().map(|&b| Breakpoint::Number(b)).collect(),
            branches: branches.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn tripling(tau: &str) -> SkewProduct<f64> {
        build_skew_product(&spec(&[0.0, 1.0 / 3.0, 2.0 / 3.0], &["3*x"; 3]), &spec(&[0.0], &[tau]), BuildOptions::default())
            .unwrap()
            .into_product()
    }

    fn perturbed() -> SkewProduct<f64> {
        build_skew_product(&spec(&[0.0], &["3*x + 0.05*sin(6*pi*x)"]), &spec(&[0.0], &["cos(2*pi*x)"]), BuildOptions::default())
            .unwrap()
            .into_product()
    }

    #[test]
    fn linear_inverses() {
        let sp = tripling("cos(2*pi*x)");
        assert!((branch_inverse(&sp, 0, 0.5).unwrap().unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((branch_inverse(&sp, 1, 0.5).unwrap().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_inverse_residual() {
        let f = spec(&[0.0, 1.0 / 3.0, 2.0 / 3.0], &["3*x + 0.05*sin(2*pi*x)", "3*x + 0.05*sin(2*pi*x)", "3*x + 0.05*sin(2*pi*x)"]);
        let sp = build_skew_product::<f64>(&f, &spec(&[0.0], &["0"]), BuildOptions::default()).unwrap().into_product();
        let e = crate::mapspec::Expr::parse("3*x + 0.05*sin(2*pi*x)").unwrap();
        let x = branch_inverse(&sp, 0, 0.25).unwrap().unwrap();
        let oracle = crate::roots::bisect(|t: f64| e.eval(t).unwrap(), 0.0, 1.0 / 3.0, 0.25, 1e-13);
        assert!(crate::scalar::circle_dist(e.eval(x).unwrap(), 0.25) <= 1e-13);
        assert!((x - oracle).abs() < 1e-12);
    }

    #[test]
    fn tripling_first_level() {
        let sp = tripling("cos(2*pi*x)");
        let t = preimages(&sp, 0.5, 1).unwrap();
        let xs: Vec<f64> = t.nodes.iter().map(|n| n.x).collect();
        for (x, e) in xs.iter().zip([1.0 / 6.0, 0.5, 5.0 / 6.0]) {
            assert!((x - e).abs() < 1e-15);
        }
        assert!(t.nodes.iter().all(|n| (n.j_n - 1.0 / 3.0).abs() < 1e-16));
        assert!((t.nodes[0].dtau_n + 2.0 * PI * (PI / 3.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn second_level_mass() {
        let sp = tripling("cos(2*pi*x)");
        let t = preimages(&sp, 0.123, 2).unwrap();
        assert_eq!(t.nodes.len(), 9);
        assert!(t.nodes.iter().all(|n| (n.j_n - 1.0 / 9.0).abs() < 1e-16));
        assert!((t.total_weight() - 1.0).abs() < 1e-12);
        let words: Vec<_> = t.nodes.iter().map(|n| n.word.clone()).collect();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
    }

    #[test]
    fn zero_preimage_is_counted_once() {
        let sp = tripling("cos(2*pi*x)");
        let t = preimages(&sp, 0.0, 3).unwrap();
        assert_eq!(t.nodes.len(), 27);
        assert!(t.flagged > 0);
    }

    #[test]
    fn cap_is_enforced() {
        let sp = tripling("cos(2*pi*x)");
        assert_eq!(preimages(&sp, 0.1, 15).unwrap_err(), DynamicsError::CapExceeded { n: 15, cap: 14 });
    }

    #[test]
    fn cocycle_consistency() {
        let sp = perturbed();
        let y = 0.377;
        let deep = preimages(&sp, y, 4).unwrap();
        let shallow = preimages(&sp, y, 3).unwrap();
        assert_eq!(deep.nodes.len(), 81);
        for node in &deep.nodes {
            let fx = sp.step_base(node.x).unwrap();
            let parent = shallow.nodes.iter().find(|m| m.word == node.word.suffix(1)).unwrap();
            assert!(crate::scalar::circle_dist(fx, parent.x) < 1e-12);
            let j1 = 1.0 / sp.f().eval(node.x).unwrap().d1.abs();
            assert!((node.j_n - j1 * parent.j_n).abs() <= 1e-15 * node.j_n.max(1e-300) * 10.0);
            // slope recursion against the unbounded form
            assert!((node.slope - node.dtau_n * node.j_n * node.orientation).abs() < 1e-12);
        }
    }

    #[test]
    fn cocycle_bound_and_contraction() {
        for sp in [tripling("cos(2*pi*x)"), perturbed()] {
            let lt = sp.consts().lambda_tilde;
            for n in 1..=6 {
                let t = preimages(&sp, 0.31, n).unwrap();
                assert_eq!(t.cocycle_violations, 0);
                for node in &t.nodes {
                    assert!(node.j_n > 0.0 && node.j_n <= lt.powi(-(n as i32)) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn periodic_orbit_and_zero_fibre() {
        let sp = tripling("0");
        let o = orbit(&sp, 1.0 / 13.0, 0.4, 6).unwrap();
        assert!(crate::scalar::circle_dist(o[3].0, 1.0 / 13.0) < 1e-14);
        assert!(o.iter().all(|p| p.1 == 0.4));
        let sp = tripling("0.5");
        let o = orbit(&sp, 0.1, 0.2, 1).unwrap();
        assert!((o[1].0 - 0.3).abs() < 1e-15 && (o[1].1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perturbed_full_branch_preimages() {
        let sp = perturbed();
        let t = preimages(&sp, 0.0, 1).unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert!(t.nodes[0].x.abs() < 1e-15);
        let t = preimages(&sp, 0.7, 5).unwrap();
        assert_eq!(t.nodes.len(), 243);
    }
}

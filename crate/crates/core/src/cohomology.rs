//! Invariant slope, transfer function and the piecewise constant remainder of `tau`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{invert_piece, DynamicsError};
use crate::mapspec::SkewProduct;
use crate::scalar::{wrap01, Compensated, Scalar};
use crate::transfer::{midpoint, GridFunction, TransferError};

/// Default truncation tolerance of the slope series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CohomologyError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("point {y} has no preimage")]
    NoPreimage { y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Cohomologous,
    NotCohomologous,
}

/// Number of series terms giving a tail below `tol`.
pub fn series_terms<T: Scalar>(sp: &SkewProduct<T>, tol: T) -> usize {
    let k = sp.consts();
    if k.sup_dtau == T::zero() {
        return 0;
    }
    let m = (k.sup_dtau / ((k.lambda_tilde - T::one()) * tol)).ln() / k.lambda_tilde.ln();
    m.ceil().max(T::one()).to_usize().unwrap_or(1)
}

/// The selected inverse branch: preimage of `y` in the lowest-indexed piece whose
/// image contains it.
pub fn select_inverse<T: Scalar>(sp: &SkewProduct<T>, y: T) -> Result<(usize, T), CohomologyError> {
    for p in 0..sp.pieces().len() {
        if let Some((x, _)) = invert_piece(sp, p, y)? {
            return Ok((p, x));
        }
    }
    Err(CohomologyError::NoPreimage { y: y.as_f64() })
}

/// `sum_{k=1}^{terms} tau'(g^k y) / (f^k)'(g^k y)` along the selected inverse branch.
pub fn ell_at<T: Scalar>(sp: &SkewProduct<T>, y: T, terms: usize) -> Result<T, CohomologyError> {
    let mut z = wrap01(y);
    let mut deriv = T::one();
    let mut acc = Compensated::default();
    for _ in 0..terms {
        let (p, xl) = select_inverse(sp, z)?;
        deriv *= sp.eval_piece(p, xl).map_err(DynamicsError::from)?.d1;
        z = wrap01(xl);
        acc.add(sp.tau().eval(z).map_err(DynamicsError::from)?.d1 / deriv);
    }
    Ok(acc.value())
}

/// Invariant slope at the midpoints of an `cells` grid, truncated so the tail is below `tol`.
pub fn invariant_slope<T: Scalar>(sp: &SkewProduct<T>, cells: usize, tol: T) -> Result<GridFunction<T>, CohomologyError> {
    invariant_slope_terms(sp, cells, series_terms(sp, tol))
}

pub fn invariant_slope_terms<T: Scalar>(sp: &SkewProduct<T>, cells: usize, terms: usize) -> Result<GridFunction<T>, CohomologyError> {
    if !cells.is_power_of_two() {
        return Err(TransferError::NotPowerOfTwo(cells).into());
    }
    let vals: Vec<T> = (0..cells)
        .into_par_iter()
        .map(|i| ell_at(sp, midpoint::<T>(i, cells), terms))
        .collect::<Result<_, _>>()?;
    Ok(GridFunction::from_real(vals)?)
}

/// Exact primitive of the piecewise constant slope: piecewise linear with nodes at `i/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> Primitive<T> {
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `theta(1) = int ell`; zero when `theta` closes up on the circle.
    pub fn period_defect(&self) -> T {
        self.nodes[self.cells()]
    }

    pub fn eval(&self, y: T) -> T {
        let n = self.cells();
        let y = wrap01(y);
        let s = y * T::from_usize_lossy(n);
        let k = s.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = s - T::from_usize_lossy(k);
        self.nodes[k] + (self.nodes[k + 1] - self.nodes[k]) * t
    }

    /// Values at the cell midpoints.
    pub fn grid(&self) -> GridFunction<T> {
        let n = self.cells();
        let half = T::lit(0.5);
        GridFunction::from_real((0..n).map(|k| (self.nodes[k] + self.nodes[k + 1]) * half).collect())
            .expect("power-of-two grid")
    }

    /// Largest difference quotient between adjacent nodes.
    pub fn lipschitz(&self) -> T {
        let n = T::from_usize_lossy(self.cells());
        self.nodes.windows(2).map(|w| (w[1] - w[0]).abs() * n).fold(T::zero(), T::max)
    }
}

/// `theta(y) = int_0^y ell`, normalized by `theta(0) = 0`.
pub fn primitive_theta<T: Scalar>(ell: &GridFunction<T>) -> Primitive<T> {
    let n = ell.len();
    let h = T::one() / T::from_usize_lossy(n);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut acc = Compensated::default();
    nodes.push(T::zero());
    for v in ell.values() {
        acc.add(v.re * h);
        nodes.push(acc.value());
    }
    Primitive { nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohomologyReport<T> {
    pub ell: GridFunction<T>,
    pub theta: GridFunction<T>,
    pub chi: GridFunction<T>,
    pub verdict: Verdict,
    /// Largest spread of `chi` over one smoothness piece.
    pub deviation: T,
    pub tol_chi: T,
    /// Smoothness pieces `[a, b)` (lifted when wrapping).
    pub pieces: Vec<(T, T)>,
    pub terms: usize,
}

pub fn default_tol_chi<T: Scalar>(sp: &SkewProduct<T>) -> T {
    T::lit(1e-6) * (T::one() + sp.consts().sup_tau)
}

fn smoothness_pieces<T: Scalar>(sp: &SkewProduct<T>) -> Vec<(T, T)> {
    let b = sp.merged_breakpoints();
    (0..b.len())
        .map(|k| (b[k], if k + 1 < b.len() { b[k + 1] } else { b[0] + T::one() }))
        .collect()
}

/// `chi = tau - theta o f + theta` at the midpoints of the grid of `theta`.
pub fn extract_chi<T: Scalar>(sp: &SkewProduct<T>, theta: &Primitive<T>) -> Result<CohomologyReport<T>, CohomologyError> {
    let n = theta.cells();
    let chi: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<T, CohomologyError> {
            let x = midpoint::<T>(i, n);
            let t = sp.tau().eval(x).map_err(DynamicsError::from)?.value;
            let fx = sp.step_base(x).map_err(DynamicsError::from)?;
            Ok(t - theta.eval(fx) + theta.eval(x))
        })
        .collect::<Result<_, _>>()?;
    let pieces = smoothness_pieces(sp);
    let mut deviation = T::zero();
    for &(a, b) in &pieces {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for (i, &c) in chi.iter().enumerate() {
            let x = midpoint::<T>(i, n);
            let inside = (x > a && x < b) || (x + T::one() > a && x + T::one() < b);
            if inside {
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        if hi >= lo {
            deviation = deviation.max(hi - lo);
        }
    }
    let tol_chi = default_tol_chi(sp);
    let verdict = if deviation <= tol_chi { Verdict::Cohomologous } else { Verdict::NotCohomologous };
    Ok(CohomologyReport {
        ell: GridFunction::zeros(n)?,
        theta: theta.grid(),
        chi: GridFunction::from_real(chi)?,
        verdict,
        deviation,
        tol_chi,
        pieces,
        terms: 0,
    })
}

/// Slope, primitive and remainder in one pass.
pub fn cohomology<T: Scalar>(sp: &SkewProduct<T>, cells: usize, tol: T) -> Result<CohomologyReport<T>, CohomologyError> {
    let terms = series_terms(sp, tol);
    let ell = invariant_slope_terms(sp, cells, terms)?;
    let theta = primitive_theta(&ell);
    let mut report = extract_chi(sp, &theta)?;
    report.ell = ell;
    report.terms = terms;
    Ok(report)
}

/// Indices `i` where the step from cell `i` to `i + 1` is a jump: larger than 100 times
/// the median step in a window around it.
pub fn detect_jumps<T: Scalar>(values: &[T]) -> Vec<usize> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let diffs: Vec<T> = (0..n).map(|i| (values[(i + 1) % n] - values[i]).abs()).collect();
    let scale = values.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let floor = T::lit(1e-9) * (T::one() + scale);
    let w = 8usize.min(n / 2);
    let mut out = Vec::new();
    let mut window = Vec::with_capacity(2 * w + 1);
    for i in 0..n {
        window.clear();
        for k in 1..=w {
            window.push(diffs[(i + k) % n]);
            window.push(diffs[(i + n - k) % n]);
        }
        window.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let median = window[window.len() / 2];
        if diffs[i] > floor && diffs[i] > T::lit(100.0) * median {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport<T> {
    pub max_residual: T,
    pub bound: T,
    pub checked: usize,
    pub excluded: usize,
}

/// `sup |tau'(x) + ell(x) - f'(x) ell(f x)|` over the grid, away from breakpoints
/// and jumps of `ell`; `ell(f x)` by linear interpolation.
pub fn invariance_residual<T: Scalar>(sp: &SkewProduct<T>, ell: &GridFunction<T>, tol: T) -> Result<ResidualReport<T>, CohomologyError> {
    let n = ell.len();
    let nf = T::from_usize_lossy(n);
    let vals = ell.re();
    let jumps = detect_jumps(&vals);
    let mut bad = vec![false; n];
    for &j in &jumps {
        bad[j] = true;
        bad[(j + 1) % n] = true;
    }
    // linear-interpolation error, from second differences away from jumps
    let mut d2 = T::zero();
    for i in 0..n {
        let (a, b, c) = (vals[(i + n - 1) % n], vals[i], vals[(i + 1) % n]);
        if !bad[(i + n - 1) % n] && !bad[i] && !bad[(i + 1) % n] {
            d2 = d2.max((a - T::lit(2.0) * b + c).abs());
        }
    }
    let window = T::lit(2.0) / nf;
    let near_break = |x: T| sp.merged_breakpoints().iter().any(|&a| crate::scalar::circle_dist(x, a) < window);
    let rows: Vec<Option<T>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<T>, CohomologyError> {
            let x = midpoint::<T>(i, n);
            if near_break(x) || bad[i] {
                return Ok(None);
            }
            let fj = sp.f().eval(x).map_err(DynamicsError::from)?;
            let fx = wrap01(fj.value);
            let (i0, _) = crate::transfer::linear_stencil(fx, n);
            if bad[i0] || bad[(i0 + 1) % n] {
                return Ok(None);
            }
            let lf = ell.lookup(fx, crate::transfer::Lookup::Linear).re;
            let tp = sp.tau().eval(x).map_err(DynamicsError::from)?.d1;
            Ok(Some((tp + vals[i] - fj.d1 * lf).abs()))
        })
        .collect::<Result<_, _>>()?;
    let checked: Vec<T> = rows.iter().flatten().copied().collect();
    let max_residual = checked.iter().copied().fold(T::zero(), T::max);
    let lam = sp.consts().lambda_max;
    let rounding = T::lit(64.0) * T::epsilon() * (T::one() + lam) * (T::one() + ell.sup() + sp.consts().sup_dtau);
    Ok(ResidualReport {
        max_residual,
        bound: T::lit(10.0) * tol + lam * d2 / T::lit(8.0) + rounding,
        checked: checked.len(),
        excluded: n - checked.len(),
    })
}

/// `theta` as a complex phase factor `e^{i b theta}` on the grid, times `h`.
pub fn twisted_eigenfunction<T: Scalar>(theta: &GridFunction<T>, h: &GridFunction<T>, b: T) -> GridFunction<T> {
    theta.zip_with(h, |t, w| w * Complex::from_polar(T::one(), b * t.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::mapspec::MapConfig;
    use std::f64::consts::PI;

    fn coboundary_plus(c: f64) -> SkewProduct<f64> {
        let text = format!(
            r#"{{"f": {{"breakpoints": [0, "1/3", "2/3"], "branches": ["3*x","3*x","3*x"]}},
                "tau": {{"breakpoints": [0], "branches": ["0.1*sin(6*pi*x) - 0.1*sin(2*pi*x) + {c}"]}}}}"#
        );
        MapConfig::from_json(&text).unwrap().build().unwrap().into_product()
    }

    #[test]
    fn constant_slope_primitive() {
        let one = GridFunction::constant(64, Complex::new(1.0, 0.0)).unwrap();
        let th = primitive_theta(&one);
        for (i, v) in th.grid().values().iter().enumerate() {
            assert!((v.re - (i as f64 + 0.5) / 64.0).abs() < 1e-15);
        }
        assert!((th.eval(0.3) - 0.3).abs() < 1e-15);
        let zero = GridFunction::<f64>::zeros(64).unwrap();
        assert!(primitive_theta(&zero).grid().values().iter().all(|v| v.re == 0.0));
    }

    #[test]
    fn primitive_of_cosine() {
        let n = 1 << 14;
        let ell = GridFunction::from_real_fn(n, |x: f64| 0.2 * PI * (2.0 * PI * x).cos()).unwrap();
        let th = primitive_theta(&ell);
        for (i, v) in th.grid().values().iter().enumerate() {
            let x = (i as f64 + 0.5) / n as f64;
            assert!((v.re - 0.1 * (2.0 * PI * x).sin()).abs() < 1e-6);
        }
        assert!(th.lipschitz() <= ell.sup() + 1e-9);
    }

    #[test]
    fn slope_of_coboundary_is_theta_prime() {
        let sp = coboundary_plus(0.3);
        let ell = invariant_slope(&sp, 1 << 10, 1e-10).unwrap();
        for (i, v) in ell.values().iter().enumerate() {
            let y = ell.midpoint(i);
            assert!((v.re - 0.2 * PI * (2.0 * PI * y).cos()).abs() < 1e-9);
        }
        let r = invariance_residual(&sp, &ell, 1e-10).unwrap();
        assert!(r.max_residual <= r.bound, "{r:?}");
    }

    #[test]
    fn piecewise_constant_tau() {
        let text = r#"{"f": {"breakpoints": [0, "1/3", "2/3"], "branches": ["3*x","3*x","3*x"]},
                      "tau": {"breakpoints": [0, 0.5], "branches": ["0.2", "0.9"]}}"#;
        let sp = MapConfig::from_json(text).unwrap().build::<f64>().unwrap().into_product();
        let r = cohomology(&sp, 1 << 10, 1e-10).unwrap();
        assert!(r.ell.values().iter().all(|v| v.re == 0.0));
        assert_eq!(r.verdict, Verdict::Cohomologous);
        for (i, c) in r.chi.values().iter().enumerate() {
            let want = if r.chi.midpoint(i) < 0.5 { 0.2 } else { 0.9 };
            assert_eq!(c.re, want);
        }
    }

    #[test]
    fn recovers_the_constant() {
        let sp = coboundary_plus(0.3);
        let r = cohomology(&sp, 1 << 14, 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::Cohomologous);
        assert!(r.chi.values().iter().all(|c| (c.re - 0.3).abs() < 1e-6));
    }

    #[test]
    fn generic_tau_is_not_cohomologous() {
        let sp = bundled::tripling_cos::<f64>();
        let r = cohomology(&sp, 1 << 12, 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::NotCohomologous);
        assert!(r.deviation > 10.0 * r.tol_chi);
    }

    #[test]
    fn truncation_tail_bound() {
        let sp = bundled::tripling_cos::<f64>();
        let m = 8;
        let a = invariant_slope_terms(&sp, 256, m).unwrap();
        let b = invariant_slope_terms(&sp, 256, m + 5).unwrap();
        let k = sp.consts();
        let bound = k.sup_dtau * k.lambda_tilde.powi(-(m as i32)) / (k.lambda_tilde - 1.0);
        assert!(a.zip_with(&b, |x, y| x - y).sup() <= bound);
    }

    #[test]
    fn jumps_are_found() {
        let mut v: Vec<f64> = (0..64).map(|i| i as f64 * 1e-3).collect();
        v[40] += 1.0;
        let j = detect_jumps(&v);
        assert!(j.contains(&39) && j.contains(&40));
    }
}

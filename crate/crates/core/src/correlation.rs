//! Correlations of observables on the torus: a Fourier-mode estimator built on the
//! twisted operators, an orbit-based direct estimator, and exponential rate fits.
//!
//! Observables are expanded in the fibre as `g(x, u) = sum_k g_k(x) e^{-2 pi i k u}`;
//! mode `k` is carried by the twisted operator with frequency `b = 2 pi k`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundled;
use crate::mapspec::{EvalError, Expr, SkewProduct};
use crate::scalar::{wrap01, Compensated, Scalar};
use crate::transfer::{apply_twisted_fn, invariant_density, midpoint, GridFunction, Lookup, OneStep, TransferError};

pub const DEFAULT_MODE_CUTOFF: usize = 16;
pub const DEFAULT_CELLS: usize = 1 << 12;
pub const DEFAULT_FIBRE_GRID: usize = 1 << 10;
pub const DIRECT_X_GRID: usize = 1 << 16;
pub const DIRECT_U_GRID: usize = 32;
/// `|Cor(n)|` at or below this is dropped from rate fits.
pub const COR_FLOOR: f64 = 1e-13;
/// Fitted rates at or below this count as no decay.
pub const NO_DECAY_ZETA: f64 = 0.01;
pub const DENSITY_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorrelationError {
    #[error("invalid observable: {0}")]
    Config(String),
    #[error("no pairing convention reproduces the direct estimator (errors {errors:?})")]
    ConventionMismatch { errors: Vec<f64> },
    #[error("rate fit needs at least 4 points above the floor, got {usable}")]
    InsufficientData { usable: usize },
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeFn<T> {
    Expr { re: Expr, im: Expr },
    Sampled(GridFunction<T>),
}

impl<T: Scalar> ModeFn<T> {
    pub fn eval(&self, x: T) -> Result<Complex<T>, EvalError> {
        match self {
            ModeFn::Expr { re, im } => Ok(Complex::new(re.eval(x)?, im.eval(x)?)),
            ModeFn::Sampled(g) => Ok(g.lookup(x, Lookup::Linear)),
        }
    }
}

/// A function on the torus through its fibre Fourier modes `|k| <= cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable2D<T> {
    modes: BTreeMap<i64, ModeFn<T>>,
    cutoff: usize,
    /// BV norms of sampled modes beyond the cutoff.
    tail: BTreeMap<i64, T>,
}

/// One mode as written in an observable file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub k: i64,
    pub re: String,
    #[serde(default = "zero_expr")]
    pub im: String,
}

fn zero_expr() -> String {
    "0".to_string()
}

/// Observable file: either expression modes or an `nx` by `nu` table of real samples at
/// the midpoints, rows indexed by `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

fn default_cutoff() -> usize {
    DEFAULT_MODE_CUTOFF
}

/// The pair of observables read by the correlation command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablePair {
    pub g: ObservableSpec,
    pub h: ObservableSpec,
}

impl ObservablePair {
    pub fn from_json(text: &str) -> Result<Self, CorrelationError> {
        serde_json::from_str(text).map_err(|e| CorrelationError::Config(e.to_string()))
    }
}

impl ObservableSpec {
    pub fn build<T: Scalar>(&self) -> Result<Observable2D<T>, CorrelationError> {
        match (&self.samples, self.modes.is_empty()) {
            (Some(_), false) => Err(CorrelationError::Config("give either modes or samples, not both".into())),
            (None, true) => Err(CorrelationError::Config("observable has no modes".into())),
            (None, false) => {
                let modes = self
                    .modes
                    .iter()
                    .map(|m| {
                        let parse = |s: &str| Expr::parse(s).map_err(|e| CorrelationError::Config(format!("mode {}: {e}", m.k)));
                        Ok((m.k, parse(&m.re)?, parse(&m.im)?))
                    })
                    .collect::<Result<Vec<_>, CorrelationError>>()?;
                Observable2D::from_modes(modes, self.cutoff)
            }
            (Some(rows), true) => {
                let nx = rows.len();
                let nu = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != nu) {
                    return Err(CorrelationError::Config("sample rows differ in length".into()));
                }
                let flat: Vec<T> = rows.iter().flatten().map(|&v| T::lit(v)).collect();
                Observable2D::from_samples(nx, nu, &flat, self.cutoff)
            }
        }
    }
}

impl<T: Scalar> Observable2D<T> {
    pub fn from_modes(modes: Vec<(i64, Expr, Expr)>, cutoff: usize) -> Result<Self, CorrelationError> {
        let mut map = BTreeMap::new();
        for (k, re, im) in modes {
            if k.unsigned_abs() as usize > cutoff {
                return Err(CorrelationError::Config(format!("mode {k} beyond cutoff {cutoff}")));
            }
            if map.insert(k, ModeFn::Expr { re, im }).is_some() {
                return Err(CorrelationError::Config(format!("mode {k} given twice")));
            }
        }
        Ok(Self { modes: map, cutoff, tail: BTreeMap::new() })
    }

    /// Modes of a real `nx` by `nu` midpoint sample (row-major in `x`), by a discrete
    /// Fourier transform in the fibre.
    pub fn from_samples(nx: usize, nu: usize, values: &[T], cutoff: usize) -> Result<Self, CorrelationError> {
        if !nx.is_power_of_two() || nu < 2 || values.len() != nx * nu {
            return Err(CorrelationError::Config(format!(
                "sample table must be nx x nu with nx a power of two (got {} values for {nx} x {nu})",
                values.len()
            )));
        }
        let kmax = (nu as i64 - 1) / 2;
        let two_pi = T::lit(std::f64::consts::TAU);
        let inv = T::one() / T::from_usize_lossy(nu);
        let mut modes = BTreeMap::new();
        let mut tail = BTreeMap::new();
        for k in -kmax..=kmax {
            let vals: Vec<Complex<T>> = (0..nx)
                .map(|i| {
                    let row = &values[i * nu..(i + 1) * nu];
                    let (mut re, mut im) = (Compensated::default(), Compensated::default());
                    for (j, &v) in row.iter().enumerate() {
                        let ph = two_pi * T::lit(k as f64) * midpoint::<T>(j, nu);
                        re.add(v * ph.cos());
                        im.add(v * ph.sin());
                    }
                    Complex::new(re.value() * inv, im.value() * inv)
                })
                .collect();
            let g = GridFunction::new(vals)?;
            if k.unsigned_abs() as usize <= cutoff {
                modes.insert(k, ModeFn::Sampled(g));
            } else {
                tail.insert(k, g.bv_norm());
            }
        }
        Ok(Self { modes, cutoff, tail })
    }

    pub fn from_fn(nx: usize, nu: usize, g: impl Fn(T, T) -> T, cutoff: usize) -> Result<Self, CorrelationError> {
        let mut values = Vec::with_capacity(nx * nu);
        for i in 0..nx {
            for j in 0..nu {
                values.push(g(midpoint(i, nx), midpoint(j, nu)));
            }
        }
        Self::from_samples(nx, nu, &values, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.modes.keys().copied()
    }

    pub fn mode(&self, k: i64, x: T) -> Result<Complex<T>, EvalError> {
        match self.modes.get(&k) {
            Some(m) => m.eval(x),
            None => Ok(Complex::new(T::zero(), T::zero())),
        }
    }

    pub fn has_mode(&self, k: i64) -> bool {
        self.modes.contains_key(&k)
    }

    pub fn eval(&self, x: T, u: T) -> Result<Complex<T>, EvalError> {
        let two_pi = T::lit(std::f64::consts::TAU);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (&k, m) in &self.modes {
            let ph = -two_pi * T::lit(k as f64) * u;
            acc += m.eval(x)? * Complex::new(ph.cos(), ph.sin());
        }
        Ok(acc)
    }

    pub fn mode_grid(&self, k: i64, cells: usize) -> Result<GridFunction<T>, CorrelationError> {
        let vals = (0..cells).map(|i| self.mode(k, midpoint(i, cells))).collect::<Result<Vec<_>, _>>()?;
        Ok(GridFunction::new(vals)?)
    }

    /// `g_{-k} = conj(g_k)` on a grid, i.e. the observable is real.
    pub fn is_real(&self, cells: usize, tol: T) -> Result<bool, CorrelationError> {
        for &k in self.modes.keys() {
            let a = self.mode_grid(k, cells)?;
            let b = self.mode_grid(-k, cells)?;
            if a.values().iter().zip(b.values()).any(|(p, q)| (*p - q.conj()).norm() > tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn tail_bv(&self) -> &BTreeMap<i64, T> {
        &self.tail
    }

    /// `||g_k||_BV` against `(1 + |2 pi k|)^-1 ||g||_{C^1}` for every kept mode, with the
    /// `C^1` norm supplied by the caller.
    pub fn mode_decay(&self, cells: usize, c1_norm: T) -> Result<Vec<(i64, T, T)>, CorrelationError> {
        let two_pi = T::lit(std::f64::consts::TAU);
        self.modes
            .keys()
            .map(|&k| {
                let bv = self.mode_grid(k, cells)?.bv_norm();
                Ok((k, bv, c1_norm / (T::one() + two_pi * T::lit(k.unsigned_abs() as f64))))
            })
            .collect()
    }
}

/// `sum_{|k| > cutoff} ||g_k||_BV ||h_{-k}||_BV` over the recorded tails.
pub fn mode_tail_bound<T: Scalar>(g: &Observable2D<T>, h: &Observable2D<T>) -> T {
    let mut acc = T::zero();
    for (&k, &bg) in &g.tail {
        let bh = h.tail.get(&-k).copied().unwrap_or(T::zero());
        acc += bg * bh;
    }
    // a truncated mode of one side can meet a kept mode of the other
    for (&k, &bg) in &g.tail {
        if h.has_mode(-k) && !h.tail.contains_key(&-k) {
            acc += bg;
        }
    }
    for (&k, &bh) in &h.tail {
        if g.has_mode(-k) && !g.tail.contains_key(&-k) {
            acc += bh;
        }
    }
    acc
}

/// Which mode of `h` meets mode `k` of `g`, and where the density sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairingConvention {
    /// `int L_b^n(g_k h_nu) h_{-k}`.
    OppositeInside,
    /// `int L_b^n(g_k h_nu) h_k`.
    SameInside,
    /// `int L_b^n(g_k) h_{-k} h_nu`.
    OppositeOuter,
    /// `int L_b^n(g_k) h_k h_nu`.
    SameOuter,
}

impl PairingConvention {
    pub const ALL: [PairingConvention; 4] = [
        PairingConvention::OppositeInside,
        PairingConvention::SameInside,
        PairingConvention::OppositeOuter,
        PairingConvention::SameOuter,
    ];

    fn partner(self, k: i64) -> i64 {
        match self {
            PairingConvention::OppositeInside | PairingConvention::OppositeOuter => -k,
            _ => k,
        }
    }

    fn inside(self) -> bool {
        matches!(self, PairingConvention::OppositeInside | PairingConvention::SameInside)
    }
}

fn frequency<T: Scalar>(k: i64) -> T {
    T::lit(std::f64::consts::TAU * k as f64)
}

/// `mu(g) = int g_0 h_nu`.
fn mean<T: Scalar>(g: &Observable2D<T>, h_nu: &GridFunction<T>) -> Result<Complex<T>, CorrelationError> {
    let g0 = g.mode_grid(0, h_nu.len())?;
    Ok(g0.pairing(h_nu))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit<T> {
    pub zeta: T,
    pub r2: T,
    pub window: (usize, usize),
    pub used: usize,
    pub no_decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries<T> {
    pub values: Vec<Complex<T>>,
    pub convention: PairingConvention,
    pub tail_bound: T,
}

impl<T: Scalar> CorrelationSeries<T> {
    pub fn abs(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn fit(&self, window: (usize, usize)) -> Result<RateFit<T>, CorrelationError> {
        fit_rate(&self.abs(), window)
    }
}

/// The convention agreeing with the direct estimator, decided once per process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionLock {
    pub convention: PairingConvention,
    /// Largest deviation from the direct estimator for each candidate, in `ALL` order.
    pub errors: [f64; 4],
    pub tolerance: f64,
}

pub const LOCK_TOL: f64 = 1e-8;
const LOCK_DEPTH: usize = 2;
const LOCK_CELLS: usize = 1 << 14;

static LOCK: OnceLock<Result<ConventionLock, CorrelationError>> = OnceLock::new();

pub fn locked_convention() -> Result<ConventionLock, CorrelationError> {
    LOCK.get_or_init(lock_convention).clone()
}

/// Observables of the convention lock: every mode pairing contributes.
pub fn smoke_pair() -> (Observable2D<f64>, Observable2D<f64>) {
    let e = |s: &str| Expr::parse(s).expect("smoke expression");
    let g = Observable2D::from_modes(
        vec![
            (0, e("0.3*cos(2*pi*x)"), e("0")),
            (1, e("0.5*cos(2*pi*x)"), e("0.2*sin(4*pi*x)")),
            (-1, e("0.5*cos(2*pi*x)"), e("-0.2*sin(4*pi*x)")),
        ],
        DEFAULT_MODE_CUTOFF,
    )
    .expect("smoke modes");
    let h = Observable2D::from_modes(
        vec![
            (0, e("sin(2*pi*x) + 0.2"), e("0")),
            (1, e("0.4 + 0.1*cos(2*pi*x)"), e("0.3*cos(2*pi*x)")),
            (-1, e("0.4 + 0.1*cos(2*pi*x)"), e("-0.3*cos(2*pi*x)")),
        ],
        DEFAULT_MODE_CUTOFF,
    )
    .expect("smoke modes");
    (g, h)
}

/// Evaluates the four candidate pairings with the base integrand read exactly at the
/// preimages and compares each with the direct estimator on a map with a nonuniform
/// invariant density.
fn lock_convention() -> Result<ConventionLock, CorrelationError> {
    let sp = bundled::perturbed::<f64>();
    let (g, h) = smoke_pair();
    let h_nu = invariant_density(&sp, LOCK_CELLS, DENSITY_ITERS)?;
    let direct = correlation_direct(&sp, &g, &h, LOCK_DEPTH, &h_nu, DIRECT_X_GRID, DIRECT_U_GRID)?;
    let mu = mean(&g, &h_nu)? * mean(&h, &h_nu)?;
    let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    let mut errors = [0.0f64; 4];
    for (c, conv) in PairingConvention::ALL.iter().enumerate() {
        for (n, d) in direct.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for k in g.mode_indices() {
                let partner = conv.partner(k);
                if !h.has_mode(partner) {
                    continue;
                }
                let inside = conv.inside();
                let phi = |x: f64| {
                    let v = g.mode(k, x).expect("smoke mode");
                    if inside {
                        v * h_nu.lookup(x, Lookup::Linear)
                    } else {
                        v
                    }
                };
                let pushed = apply_twisted_fn(&sp, frequency::<f64>(k), phi, n, LOCK_CELLS)?;
                let mut w = h.mode_grid(partner, LOCK_CELLS)?;
                if !inside {
                    w = w.zip_with(&h_nu, |a, b| a * b);
                }
                acc += pushed.pairing(&w);
            }
            errors[c] = errors[c].max((acc - mu - d).norm());
        }
    }
    let tolerance = LOCK_TOL * scale;
    let matching: Vec<usize> = (0..4).filter(|&c| errors[c] <= tolerance).collect();
    match matching.as_slice() {
        [c] => Ok(ConventionLock { convention: PairingConvention::ALL[*c], errors, tolerance }),
        _ => Err(CorrelationError::ConventionMismatch { errors: errors.to_vec() }),
    }
}

/// `Cor(n)` for `n = 0..=n_max` from the twisted operators on a `cells` grid.
pub fn correlation_fourier<T: Scalar>(
    sp: &SkewProduct<T>,
    g: &Observable2D<T>,
    h: &Observable2D<T>,
    n_max: usize,
    cells: usize,
) -> Result<CorrelationSeries<T>, CorrelationError> {
    let lock = locked_convention()?;
    let h_nu = invariant_density(sp, cells, DENSITY_ITERS)?;
    correlation_fourier_with(sp, g, h, n_max, &h_nu, lock.convention)
}

pub fn correlation_fourier_with<T: Scalar>(
    sp: &SkewProduct<T>,
    g: &Observable2D<T>,
    h: &Observable2D<T>,
    n_max: usize,
    h_nu: &GridFunction<T>,
    convention: PairingConvention,
) -> Result<CorrelationSeries<T>, CorrelationError> {
    let cells = h_nu.len();
    let step = OneStep::build(sp, cells)?;
    let modes: Vec<i64> = g.mode_indices().filter(|&k| h.has_mode(convention.partner(k))).collect();
    let per_mode: Vec<Vec<Complex<T>>> = modes
        .par_iter()
        .map(|&k| -> Result<Vec<Complex<T>>, CorrelationError> {
            let op = step.twisted(frequency::<T>(k), Lookup::Linear);
            let mut v = g.mode_grid(k, cells)?;
            let mut w = h.mode_grid(convention.partner(k), cells)?;
            if convention.inside() {
                v = v.zip_with(h_nu, |a, b| a * b);
            } else {
                w = w.zip_with(h_nu, |a, b| a * b);
            }
            let mut out = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max {
                if n > 0 {
                    v = op.apply(&v);
                }
                out.push(v.pairing(&w));
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let mu = mean(g, h_nu)? * mean(h, h_nu)?;
    let values = (0..=n_max)
        .map(|n| {
            let (mut re, mut im) = (Compensated::default(), Compensated::default());
            for m in &per_mode {
                re.add(m[n].re);
                im.add(m[n].im);
            }
            Complex::new(re.value() - mu.re, im.value() - mu.im)
        })
        .collect();
    Ok(CorrelationSeries { values, convention, tail_bound: mode_tail_bound(g, h) })
}

/// Per grid row: `g . h o F^n` for each `n`, then the row sums of `g` and `h`.
type DirectRow<T> = (Vec<Complex<T>>, Complex<T>, Complex<T>);

/// `mu(g . h o F^n) - mu(g) mu(h)` by midpoint quadrature against `h_nu(x) dx du`, with
/// `F^n` evaluated along orbits.
pub fn correlation_direct<T: Scalar>(
    sp: &SkewProduct<T>,
    g: &Observable2D<T>,
    h: &Observable2D<T>,
    n_max: usize,
    h_nu: &GridFunction<T>,
    x_grid: usize,
    u_grid: usize,
) -> Result<Vec<Complex<T>>, CorrelationError> {
    let two_pi = T::lit(std::f64::consts::TAU);
    let g_modes: Vec<i64> = g.mode_indices().collect();
    let h_modes: Vec<i64> = h.mode_indices().collect();
    let us: Vec<T> = (0..u_grid).map(|j| midpoint(j, u_grid)).collect();
    let phase = |k: i64, u: T| {
        let ph = -two_pi * T::lit(k as f64) * u;
        Complex::new(ph.cos(), ph.sin())
    };
    // g(x, u_j) needs e^{-2 pi i k u_j}; h(y, u_j + s) factors as e^{-2 pi i k s} e^{-2 pi i k u_j}
    let g_table: Vec<Vec<Complex<T>>> = g_modes.iter().map(|&k| us.iter().map(|&u| phase(k, u)).collect()).collect();
    let h_table: Vec<Vec<Complex<T>>> = h_modes.iter().map(|&k| us.iter().map(|&u| phase(k, u)).collect()).collect();
    let zero = Complex::new(T::zero(), T::zero());

    let rows: Vec<DirectRow<T>> = (0..x_grid)
        .into_par_iter()
        .map(|i| -> Result<_, CorrelationError> {
            let x = midpoint::<T>(i, x_grid);
            let w = h_nu.lookup(x, Lookup::Linear);
            let gk: Vec<Complex<T>> = g_modes.iter().map(|&k| g.mode(k, x)).collect::<Result<_, _>>()?;
            let gu: Vec<Complex<T>> = (0..u_grid)
                .map(|j| gk.iter().zip(&g_table).fold(zero, |acc, (c, t)| acc + *c * t[j]))
                .collect();
            let mut out = Vec::with_capacity(n_max + 1);
            let (mut y, mut s) = (x, T::zero());
            for n in 0..=n_max {
                if n > 0 {
                    s += sp.tau().eval(y)?.value;
                    y = sp.step_base(y)?;
                }
                let hk: Vec<Complex<T>> = h_modes
                    .iter()
                    .map(|&k| Ok(h.mode(k, y)? * phase(k, wrap01(s))))
                    .collect::<Result<_, EvalError>>()?;
                let mut acc = zero;
                for j in 0..u_grid {
                    let hv = hk.iter().zip(&h_table).fold(zero, |a, (c, t)| a + *c * t[j]);
                    acc += gu[j] * hv;
                }
                out.push(acc * w);
            }
            // row means of g and h at this x
            let g_row = gu.iter().fold(zero, |a, &v| a + v) * w;
            let h_row = (0..u_grid).fold(zero, |a, j| {
                let hv = h_modes.iter().zip(&h_table).fold(zero, |b, (&k, t)| b + h.mode(k, x).unwrap_or(zero) * t[j]);
                a + hv
            }) * w;
            Ok((out, g_row, h_row))
        })
        .collect::<Result<_, _>>()?;

    let inv = T::one() / (T::from_usize_lossy(x_grid) * T::from_usize_lossy(u_grid));
    let sum = |f: &dyn Fn(&DirectRow<T>) -> Complex<T>| {
        let (mut re, mut im) = (Compensated::default(), Compensated::default());
        for r in &rows {
            let v = f(r);
            re.add(v.re);
            im.add(v.im);
        }
        Complex::new(re.value(), im.value()) * inv
    };
    let mu = sum(&|r| r.1) * sum(&|r| r.2);
    Ok((0..=n_max).map(|n| sum(&|r| r.0[n]) - mu).collect())
}

/// Least squares of `ln |Cor(n)|` against `n` over `window`, dropping values at or
/// below the floor.
pub fn fit_rate<T: Scalar>(abs_values: &[T], window: (usize, usize)) -> Result<RateFit<T>, CorrelationError> {
    let floor = T::lit(COR_FLOOR);
    let pts: Vec<(T, T)> = abs_values
        .iter()
        .enumerate()
        .filter(|(n, v)| *n >= window.0 && *n <= window.1 && **v > floor && v.is_finite())
        .map(|(n, v)| (T::from_usize_lossy(n), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(CorrelationError::InsufficientData { usable: pts.len() });
    }
    let m = T::from_usize_lossy(pts.len());
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / m;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / m;
    let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let slope = sxy / sxx;
    let ss_tot = pts.iter().fold(T::zero(), |a, p| a + (p.1 - my) * (p.1 - my));
    let ss_res = pts.iter().fold(T::zero(), |a, p| {
        let r = p.1 - (my + slope * (p.0 - mx));
        a + r * r
    });
    let tiny = T::lit(1e-24) * m;
    let r2 = if ss_tot <= tiny { if ss_res <= tiny { T::one() } else { T::zero() } } else { T::one() - ss_res / ss_tot };
    let zeta = -slope;
    Ok(RateFit { zeta, r2, window, used: pts.len(), no_decay: zeta <= T::lit(NO_DECAY_ZETA) })
}

use super::expr::EvalError;
use super::jet::Jet2;
use super::piecewise::{MapKind, PiecewiseC2Map};
use super::MapError;
use crate::roots::{solve_monotone, RootError};
use crate::scalar::{wrap01, Scalar};

/// Default number of grid steps per branch closure used to estimate derivative bounds.
pub const DEFAULT_VALIDATION_GRID: usize = 10_000;

/// Width of the boundary band in which a preimage query is flagged.
pub const BOUNDARY_FLAG: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub validation_grid: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { validation_grid: DEFAULT_VALIDATION_GRID }
    }
}

/// A monotone piece of a base-map branch whose image has length at most one,
/// so that every circle point has at most one preimage in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionPiece<T> {
    pub branch: usize,
    /// Lifted domain.
    pub lo: T,
    pub hi: T,
    /// Lifted image, `img_lo < img_hi`.
    pub img_lo: T,
    pub img_hi: T,
    pub increasing: bool,
}

impl<T: Scalar> InversionPiece<T> {
    pub fn image_len(&self) -> T {
        self.img_hi - self.img_lo
    }

    /// Lift of circle point `y` into `[img_lo, img_hi)`, if any.
    pub fn lift(&self, y: T) -> Option<T> {
        let k = (self.img_lo - y).ceil();
        let yl = y + k;
        (yl >= self.img_lo && yl < self.img_hi).then_some(yl)
    }

    /// Lift of `y` into the closed image, tolerating `slack` at either end.
    pub fn lift_closed(&self, y: T, slack: T) -> Option<T> {
        let k = (self.img_lo - slack - y).ceil();
        let yl = y + k;
        (yl <= self.img_hi + slack).then(|| yl.max(self.img_lo).min(self.img_hi))
    }

    pub fn near_boundary(&self, y_lifted: T) -> bool {
        let band = T::lit(BOUNDARY_FLAG);
        (y_lifted - self.img_lo).abs() <= band || (self.img_hi - y_lifted).abs() <= band
    }
}

/// Derived constants of a validated skew product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewConstants<T> {
    /// Grid estimate of `inf |f'|`.
    pub lambda_tilde: T,
    /// Grid estimate of `sup |f'|`.
    pub lambda_max: T,
    pub sup_d2f: T,
    pub sup_tau: T,
    pub sup_dtau: T,
    pub sup_d2tau: T,
    /// Cone aperture `2 sup|tau'| / (lambda_tilde - 1)`.
    pub c1: T,
    /// Intervals of length at most `delta` have images with at most two components.
    pub delta: T,
    /// Growth rate with `2 = lambda_tilde / beta`.
    pub beta: T,
}

/// The skew product `F(x, u) = (f(x), u + tau(x))` on the two-torus.
#[derive(Debug, Clone)]
pub struct SkewProduct<T> {
    f: PiecewiseC2Map<T>,
    tau: PiecewiseC2Map<T>,
    pieces: Vec<InversionPiece<T>>,
    consts: SkewConstants<T>,
    merged_breakpoints: Vec<T>,
    validation_grid: usize,
}

/// Outcome of a successful validation.
#[derive(Debug, Clone)]
pub enum Validation<T> {
    Expanding(SkewProduct<T>),
    /// `sup |tau'| = 0`: tau is piecewise constant, hence trivially cohomologous
    /// to a piecewise constant with `chi = tau`, `theta = 0`.
    TauPiecewiseConstant(SkewProduct<T>),
}

impl<T> Validation<T> {
    pub fn product(&self) -> &SkewProduct<T> {
        match self {
            Validation::Expanding(sp) | Validation::TauPiecewiseConstant(sp) => sp,
        }
    }

    pub fn into_product(self) -> SkewProduct<T> {
        match self {
            Validation::Expanding(sp) | Validation::TauPiecewiseConstant(sp) => sp,
        }
    }

    pub fn is_trivially_cohomologous(&self) -> bool {
        matches!(self, Validation::TauPiecewiseConstant(_))
    }
}

struct Extremes<T> {
    min_abs_d1: T,
    max_abs_d1: T,
    max_abs_d2: T,
    max_abs_value: T,
}

/// Where on the sample grid an extremum of `|d1|` was seen: branch and bracketing interval.
type Bracket<T> = (usize, T, T);

fn scan<T: Scalar>(map: &PiecewiseC2Map<T>, cells: usize, which: &'static str) -> Result<(Extremes<T>, Vec<bool>), MapError> {
    let mut ex = Extremes {
        min_abs_d1: T::infinity(),
        max_abs_d1: T::zero(),
        max_abs_d2: T::zero(),
        max_abs_value: T::zero(),
    };
    let mut at_min: Option<Bracket<T>> = None;
    let mut at_max: Option<Bracket<T>> = None;
    let mut monotone = Vec::with_capacity(map.branch_count());
    for i in 0..map.branch_count() {
        let (lo, hi) = map.domain(i);
        let step = (hi - lo) / T::from_usize_lossy(cells.max(1));
        let (mut pos, mut neg) = (true, true);
        for x in map.grid(i, cells) {
            let j = map
                .eval_branch(i, x)
                .map_err(|source| MapError::Eval { which, branch: i, x: x.as_f64(), source })?;
            let a = j.d1.abs();
            let bracket = (i, (x - step).max(lo), (x + step).min(hi));
            if a < ex.min_abs_d1 {
                ex.min_abs_d1 = a;
                at_min = Some(bracket);
            }
            if a > ex.max_abs_d1 {
                ex.max_abs_d1 = a;
                at_max = Some(bracket);
            }
            ex.max_abs_d2 = ex.max_abs_d2.max(j.d2.abs());
            ex.max_abs_value = ex.max_abs_value.max(j.value.abs());
            pos &= j.d1 > T::zero();
            neg &= j.d1 < T::zero();
        }
        monotone.push(pos || neg);
    }
    // grid extrema of |f'| miss interior critical points by O(step^2); polish them
    if let Some((i, a, b)) = at_min {
        ex.min_abs_d1 = ex.min_abs_d1.min(golden(|x| map.eval_branch(i, x).map(|j| j.d1.abs()).unwrap_or(T::infinity()), a, b));
    }
    if let Some((i, a, b)) = at_max {
        let neg = golden(|x| map.eval_branch(i, x).map(|j| -j.d1.abs()).unwrap_or(T::infinity()), a, b);
        ex.max_abs_d1 = ex.max_abs_d1.max(-neg);
    }
    Ok((ex, monotone))
}

/// Golden-section minimum of a unimodal function on `[a, b]`.
fn golden<T: Scalar>(g: impl Fn(T) -> T, mut a: T, mut b: T) -> T {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if b - a <= T::epsilon() * (T::one() + a.abs()) {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    gc.min(gd)
}

impl<T: Scalar> SkewProduct<T> {
    /// Validates the hypotheses on `(f, tau)` and derives the constants.
    pub fn build(f: PiecewiseC2Map<T>, tau: PiecewiseC2Map<T>, options: BuildOptions) -> Result<Validation<T>, MapError> {
        if f.kind() != MapKind::Circle || tau.kind() != MapKind::Real {
            return Err(MapError::WrongKind);
        }
        let samples = options.validation_grid.max(1);
        let (fx, monotone) = scan(&f, samples, "f")?;
        if let Some(branch) = monotone.iter().position(|m| !m) {
            return Err(MapError::NonMonotoneBranch { branch });
        }
        let lambda_tilde = fx.min_abs_d1;
        if !(lambda_tilde > T::lit(2.0)) {
            return Err(MapError::NotExpanding { lambda_tilde: lambda_tilde.as_f64() });
        }
        let (tx, _) = scan(&tau, samples, "tau")?;

        let pieces = inversion_pieces(&f)?;
        check_covering(&pieces)?;

        let delta = pieces
            .iter()
            .map(|p| p.hi - p.lo)
            .fold(T::infinity(), T::min)
            .min(T::lit(0.45));
        let sup_dtau = tx.max_abs_d1;
        let c1 = T::lit(2.0) * sup_dtau / (lambda_tilde - T::one());
        let consts = SkewConstants {
            lambda_tilde,
            lambda_max: fx.max_abs_d1,
            sup_d2f: fx.max_abs_d2,
            sup_tau: tx.max_abs_value,
            sup_dtau,
            sup_d2tau: tx.max_abs_d2,
            c1,
            delta,
            beta: lambda_tilde / T::lit(2.0),
        };
        let mut merged: Vec<T> = f.breakpoints().iter().chain(tau.breakpoints()).copied().collect();
        merged.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        merged.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon());

        let sp = SkewProduct { f, tau, pieces, consts, merged_breakpoints: merged, validation_grid: samples };
        Ok(if sup_dtau == T::zero() { Validation::TauPiecewiseConstant(sp) } else { Validation::Expanding(sp) })
    }

    pub fn f(&self) -> &PiecewiseC2Map<T> {
        &self.f
    }

    pub fn tau(&self) -> &PiecewiseC2Map<T> {
        &self.tau
    }

    pub fn pieces(&self) -> &[InversionPiece<T>] {
        &self.pieces
    }

    pub fn consts(&self) -> &SkewConstants<T> {
        &self.consts
    }

    pub fn merged_breakpoints(&self) -> &[T] {
        &self.merged_breakpoints
    }

    pub fn validation_grid(&self) -> usize {
        self.validation_grid
    }

    pub fn tau_is_piecewise_constant(&self) -> bool {
        self.consts.sup_dtau == T::zero()
    }

    /// Jet of `f` on inversion piece `p` at a lifted domain coordinate.
    pub fn eval_piece(&self, p: usize, x_lifted: T) -> Result<Jet2<T>, EvalError> {
        self.f.eval_branch(self.pieces[p].branch, x_lifted)
    }

    /// Inversion piece containing circle point `x` (half-open on the right) and the lift of `x`.
    pub fn locate_piece(&self, x: T) -> (usize, T) {
        let (branch, xl) = self.f.locate(x);
        let first = self.pieces.partition_point(|p| p.branch < branch);
        let mut idx = first;
        while idx + 1 < self.pieces.len() && self.pieces[idx + 1].branch == branch && self.pieces[idx + 1].lo <= xl {
            idx += 1;
        }
        (idx, xl)
    }

    /// `f(x)` reduced to `[0, 1)`.
    pub fn step_base(&self, x: T) -> Result<T, EvalError> {
        Ok(wrap01(self.f.eval(x)?.value))
    }

    /// One step of `F`, fibre coordinate reduced mod 1.
    pub fn step(&self, x: T, u: T) -> Result<(T, T), EvalError> {
        let fx = self.f.eval(x)?.value;
        let t = self.tau.eval(x)?.value;
        Ok((wrap01(fx), wrap01(u + t)))
    }
}

fn inversion_pieces<T: Scalar>(f: &PiecewiseC2Map<T>) -> Result<Vec<InversionPiece<T>>, MapError> {
    let guard = T::lit(1e-12);
    let mut out = Vec::new();
    for i in 0..f.branch_count() {
        let (lo, hi) = f.domain(i);
        let eval = |x: T| f.eval_branch(i, x);
        let err = |x: T| move |source| MapError::Eval { which: "f", branch: i, x: x.as_f64(), source };
        let v_lo = eval(lo).map_err(err(lo))?.value;
        let v_hi = eval(hi).map_err(err(hi))?.value;
        let increasing = v_hi > v_lo;
        let (min_v, max_v) = if increasing { (v_lo, v_hi) } else { (v_hi, v_lo) };
        let mut cuts = vec![lo];
        let mut m = (min_v + guard).floor() + T::one();
        let mut crossings = Vec::new();
        while m < max_v - guard {
            let tol = T::attainable_tol(1e-14, m);
            let x = solve_monotone(eval, lo, hi, m, tol).map_err(|e| match e {
                RootError::Eval(source) => MapError::Eval { which: "f", branch: i, x: m.as_f64(), source },
                other => MapError::Inversion(other.to_string()),
            })?;
            crossings.push(x);
            m += T::one();
        }
        if !increasing {
            crossings.reverse();
        }
        cuts.extend(crossings);
        cuts.push(hi);
        for w in cuts.windows(2) {
            let a = eval(w[0]).map_err(err(w[0]))?.value;
            let b = eval(w[1]).map_err(err(w[1]))?.value;
            out.push(InversionPiece {
                branch: i,
                lo: w[0],
                hi: w[1],
                img_lo: a.min(b),
                img_hi: a.max(b),
                increasing,
            });
        }
    }
    Ok(out)
}

fn check_covering<T: Scalar>(pieces: &[InversionPiece<T>]) -> Result<(), MapError> {
    let tol = T::lit(1e-12);
    let mut arcs: Vec<(T, T)> = Vec::new();
    for p in pieces {
        let len = p.image_len();
        if len >= T::one() - tol {
            return Ok(());
        }
        let s = wrap01(p.img_lo);
        let e = s + len;
        if e > T::one() {
            arcs.push((s, T::one()));
            arcs.push((T::zero(), e - T::one()));
        } else {
            arcs.push((s, e));
        }
    }
    arcs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut reach = T::zero();
    for (s, e) in arcs {
        if s > reach + tol {
            return Err(MapError::NotCovering { gap_at: reach.as_f64() });
        }
        reach = reach.max(e);
    }
    if reach < T::one() - tol {
        return Err(MapError::NotCovering { gap_at: reach.as_f64() });
    }
    Ok(())
}

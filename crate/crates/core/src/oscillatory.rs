//! Oscillatory integrals `int_J K e^{i b theta}`, the integration-by-parts bound and
//! the phase differences between inverse branches of `f^n`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cones::{cone_image, transversal};
use crate::dynamics::{preimages, BranchWord, DynamicsError};
use crate::mapspec::{EvalError, Expr, SkewProduct};
use crate::roots::solve_monotone;
use crate::scalar::{wrap01, Scalar};
use crate::transfer::i_partition_count;

pub const PANEL_CAP: usize = 1 << 20;
/// Sample count for the sup norms entering the bound.
pub const SUP_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OscillatoryError {
    #[error("interval [{lo}, {hi}] is empty")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("inf |theta'| = {kappa} is not positive")]
    NonPositiveKappa { kappa: f64 },
    #[error("frequency b must be nonzero")]
    ZeroFrequency,
    #[error("adaptive quadrature exceeded {panels} panels")]
    PanelCapExceeded { panels: usize },
    #[error("point {x} is outside the image of the inverse branch {word}")]
    DomainMismatch { x: f64, word: String },
    #[error("words have lengths {j} and {k}, expected {n}")]
    WordLength { j: usize, k: usize, n: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatoryProblem<T> {
    pub lo: T,
    pub hi: T,
    pub k_re: Expr,
    pub k_im: Expr,
    pub theta: Expr,
    pub b: T,
    /// Sampled `inf |theta'|` over the interval.
    pub kappa: T,
}

fn sample_points<T: Scalar>(lo: T, hi: T, n: usize) -> impl Iterator<Item = T> {
    let h = (hi - lo) / T::from_usize_lossy(n);
    (0..=n).map(move |i| if i == n { hi } else { lo + h * T::from_usize_lossy(i) })
}

impl<T: Scalar> OscillatoryProblem<T> {
    pub fn new(lo: T, hi: T, k_re: Expr, k_im: Expr, theta: Expr, b: T) -> Result<Self, OscillatoryError> {
        if !(hi > lo) {
            return Err(OscillatoryError::EmptyInterval { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        if b == T::zero() {
            return Err(OscillatoryError::ZeroFrequency);
        }
        let mut kappa = T::infinity();
        for x in sample_points(lo, hi, SUP_GRID) {
            kappa = kappa.min(theta.eval_jet2(x)?.d1.abs());
        }
        if !(kappa > T::zero()) {
            return Err(OscillatoryError::NonPositiveKappa { kappa: kappa.as_f64() });
        }
        Ok(Self { lo, hi, k_re, k_im, theta, b, kappa })
    }

    /// `K(x) e^{i b theta(x)}`.
    pub fn integrand(&self, x: T) -> Result<Complex<T>, EvalError> {
        let k = Complex::new(self.k_re.eval(x)?, self.k_im.eval(x)?);
        let ph = self.b * self.theta.eval(x)?;
        Ok(k * Complex::new(ph.cos(), ph.sin()))
    }

    pub fn len(&self) -> T {
        self.hi - self.lo
    }
}

struct Panel<T> {
    a: T,
    b: T,
    fa: Complex<T>,
    fm: Complex<T>,
    fb: Complex<T>,
    whole: Complex<T>,
    tol: T,
}

fn simpson<T: Scalar>(a: T, b: T, fa: Complex<T>, fm: Complex<T>, fb: Complex<T>) -> Complex<T> {
    (fa + fm * T::lit(4.0) + fb) * ((b - a) / T::lit(6.0))
}

/// Adaptive Simpson with absolute tolerance `tol`, real and imaginary parts together.
pub fn oscillatory_integral<T: Scalar>(p: &OscillatoryProblem<T>, tol: T) -> Result<Complex<T>, OscillatoryError> {
    // start from enough panels to resolve every oscillation
    let mut sup_dtheta = T::zero();
    for x in sample_points(p.lo, p.hi, 64) {
        sup_dtheta = sup_dtheta.max(p.theta.eval_jet2(x)?.d1.abs());
    }
    let waves = (p.b.abs() * sup_dtheta * p.len()).to_f64().unwrap_or(0.0);
    let initial = (8.0 + 2.0 * waves).min(PANEL_CAP as f64) as usize;
    let initial = initial.next_power_of_two();
    let half = T::lit(2.0);
    let mut stack = Vec::with_capacity(initial);
    let h = p.len() / T::from_usize_lossy(initial);
    for i in 0..initial {
        let a = p.lo + h * T::from_usize_lossy(i);
        let b = if i + 1 == initial { p.hi } else { a + h };
        let (fa, fb) = (p.integrand(a)?, p.integrand(b)?);
        let fm = p.integrand((a + b) / half)?;
        let whole = simpson(a, b, fa, fm, fb);
        stack.push(Panel { a, b, fa, fm, fb, whole, tol: tol / T::from_usize_lossy(initial) });
    }
    let mut panels = initial;
    let mut total = Complex::new(T::zero(), T::zero());
    while let Some(q) = stack.pop() {
        let m = (q.a + q.b) / half;
        let (lm, rm) = ((q.a + m) / half, (m + q.b) / half);
        let (flm, frm) = (p.integrand(lm)?, p.integrand(rm)?);
        let left = simpson(q.a, m, q.fa, flm, q.fm);
        let right = simpson(m, q.b, q.fm, frm, q.fb);
        let delta = left + right - q.whole;
        if delta.norm() <= T::lit(15.0) * q.tol || q.b - q.a <= T::epsilon() * T::lit(64.0) * (T::one() + q.a.abs()) {
            total = total + left + right + delta / T::lit(15.0);
            continue;
        }
        panels += 1;
        if panels > PANEL_CAP {
            return Err(OscillatoryError::PanelCapExceeded { panels: PANEL_CAP });
        }
        stack.push(Panel { a: q.a, b: m, fa: q.fa, fm: flm, fb: q.fm, whole: left, tol: q.tol / half });
        stack.push(Panel { a: m, b: q.b, fa: q.fm, fm: frm, fb: q.fb, whole: right, tol: q.tol / half });
    }
    Ok(total)
}

/// Composite Simpson on `panels` equal panels.
pub fn fixed_simpson<T: Scalar>(p: &OscillatoryProblem<T>, panels: usize) -> Result<Complex<T>, OscillatoryError> {
    let h = p.len() / T::from_usize_lossy(2 * panels);
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..=2 * panels {
        let x = if i == 2 * panels { p.hi } else { p.lo + h * T::from_usize_lossy(i) };
        let w = if i == 0 || i == 2 * panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += p.integrand(x)? * T::lit(w);
    }
    Ok(acc * (h / T::lit(3.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VdcBound<T> {
    /// Boundary term counted twice, as integration by parts gives.
    pub corrected: T,
    /// Boundary term counted once.
    pub literal: T,
    pub sup_k: T,
    pub sup_dk: T,
    pub sup_d2theta: T,
}

pub fn vdc_bound<T: Scalar>(p: &OscillatoryProblem<T>) -> Result<VdcBound<T>, OscillatoryError> {
    let (mut sup_k, mut sup_dk, mut sup_d2) = (T::zero(), T::zero(), T::zero());
    for x in sample_points(p.lo, p.hi, SUP_GRID) {
        let (kr, ki) = (p.k_re.eval_jet2(x)?, p.k_im.eval_jet2(x)?);
        sup_k = sup_k.max(kr.value.hypot(ki.value));
        sup_dk = sup_dk.max(kr.d1.hypot(ki.d1));
        sup_d2 = sup_d2.max(p.theta.eval_jet2(x)?.d2.abs());
    }
    let k = p.kappa;
    let len = p.len();
    let rest = sup_k * sup_d2 * len / (k * k) + sup_dk * len / k;
    let inv_b = T::one() / p.b.abs();
    Ok(VdcBound {
        corrected: inv_b * (T::lit(2.0) * sup_k / k + rest),
        literal: inv_b * (sup_k / k + rest),
        sup_k,
        sup_dk,
        sup_d2theta: sup_d2,
    })
}

pub const VDC_QUAD_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VdcRow<T> {
    pub id: usize,
    pub integral_abs: T,
    pub bound_literal: T,
    pub bound_corrected: T,
    pub kappa: T,
    pub b: T,
    pub pass: bool,
    pub literal_pass: bool,
}

pub fn vdc_row<T: Scalar>(id: usize, p: &OscillatoryProblem<T>) -> Result<VdcRow<T>, OscillatoryError> {
    let tol = T::lit(VDC_QUAD_TOL);
    let v = oscillatory_integral(p, tol)?.norm();
    let bound = vdc_bound(p)?;
    Ok(VdcRow {
        id,
        integral_abs: v,
        bound_literal: bound.literal,
        bound_corrected: bound.corrected,
        kappa: p.kappa,
        b: p.b,
        pass: v <= bound.corrected + tol,
        literal_pass: v <= bound.literal + tol,
    })
}

pub const SUITE_SIZE: usize = 50;
pub const SUITE_MIN_KAPPA: f64 = 0.2;

fn num(v: f64) -> String {
    format!("({v:?})")
}

/// Seeded problems with `kappa >= 0.2` and `|b|` in `[5, 500]`.
pub fn vdc_suite<T: Scalar>(seed: u64, count: usize) -> Result<Vec<OscillatoryProblem<T>>, OscillatoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let parse = |s: String| Expr::parse(&s).expect("generated expression parses");
    for _ in 0..count {
        let lo: f64 = rng.gen_range(0.0..1.0);
        let len: f64 = rng.gen_range(0.1..1.0);
        // theta' = c0 + 2 a2 x + a3 w cos(w x) stays above c0 - budget >= 0.25 for x < 2
        let c0: f64 = rng.gen_range(0.5..3.0);
        let budget = c0 - 0.25;
        let r: f64 = rng.gen_range(0.0..1.0);
        let a2 = r * budget / 4.0 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let w: f64 = rng.gen_range(1.0..20.0);
        let a3 = (1.0 - r) * budget / w * rng.gen_range(0.0..1.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let theta = format!("{}*({}*x + {}*x^2 + {}*sin({}*x))", num(sign), num(c0), num(a2), num(a3), num(w));
        let nu: f64 = rng.gen_range(0.0..10.0);
        let (k0, k1, k2): (f64, f64, f64) = (rng.gen_range(0.2..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let k_re = format!("{} + {}*cos({}*x)", num(k0), num(k1), num(nu));
        let k_im = format!("{}*sin({}*x + 1)", num(k2), num(nu));
        let b = rng.gen_range(5f64.ln()..500f64.ln()).exp() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        out.push(OscillatoryProblem::new(
            T::lit(lo),
            T::lit(lo + len),
            parse(k_re),
            parse(k_im),
            parse(theta),
            T::lit(b),
        )?);
    }
    Ok(out)
}

pub fn vdc_suite_rows<T: Scalar>(problems: &[OscillatoryProblem<T>]) -> Result<Vec<VdcRow<T>>, OscillatoryError> {
    problems.par_iter().enumerate().map(|(i, p)| vdc_row(i, p)).collect()
}

/// Inverse branch of `f^n` along a word, continued from a reference point.
#[derive(Debug, Clone)]
pub struct InverseBranch<'a, T> {
    sp: &'a SkewProduct<T>,
    word: BranchWord,
    n1: usize,
    /// Integer shifts between successive lifted coordinates along the reference chain.
    shifts: Vec<T>,
}

/// Derivatives of `tau_n o h` and of `h` at one point, with the split at `n1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainJet<T> {
    /// `h(x)`, lifted.
    pub x: T,
    /// `(tau_n o h)'`, `(tau_n o h)''`.
    pub phase_d1: T,
    pub phase_d2: T,
    /// `h'`, `h''`; `J_n o h = |h'|`.
    pub h_d1: T,
    pub h_d2: T,
    /// `(tau_{n2} o g)'` and `J_{n2} o g` with `g = f^{n1} o h`.
    pub inner_d1: T,
    pub inner_j: T,
}

impl<'a, T: Scalar> InverseBranch<'a, T> {
    pub fn new(sp: &'a SkewProduct<T>, word: BranchWord, n1: usize, x_ref: T) -> Result<Self, OscillatoryError> {
        let mut shifts = Vec::with_capacity(word.len());
        let mut y = x_ref;
        for m in 1..=word.len() {
            let p = word.symbols[word.len() - m];
            let piece = &sp.pieces()[p];
            let lifted = piece.lift_closed(wrap01(y), T::lit(1e-12)).ok_or_else(|| OscillatoryError::DomainMismatch {
                x: x_ref.as_f64(),
                word: word.to_string(),
            })?;
            shifts.push((lifted - y).round());
            y = solve(sp, p, lifted)?;
        }
        Ok(Self { sp, word, n1, shifts })
    }

    pub fn word(&self) -> &BranchWord {
        &self.word
    }

    pub fn eval(&self, x: T) -> Result<ChainJet<T>, OscillatoryError> {
        let n = self.word.len();
        let n2 = n - self.n1.min(n);
        let slack = T::lit(1e-12);
        let (mut y, mut h1, mut h2) = (x, T::one(), T::zero());
        let (mut a1, mut a2) = (T::zero(), T::zero());
        let (mut inner_d1, mut inner_j) = (T::zero(), T::one());
        for m in 1..=n {
            let p = self.word.symbols[n - m];
            let piece = &self.sp.pieces()[p];
            let target = y + self.shifts[m - 1];
            if target < piece.img_lo - slack || target > piece.img_hi + slack {
                return Err(OscillatoryError::DomainMismatch { x: x.as_f64(), word: self.word.to_string() });
            }
            y = solve(self.sp, p, target)?;
            let fj = self.sp.eval_piece(p, y)?;
            let tj = self.sp.tau().eval(y)?;
            let d1 = h1 / fj.d1;
            let d2 = (h2 - fj.d2 * d1 * d1) / fj.d1;
            h1 = d1;
            h2 = d2;
            a1 += tj.d1 * h1;
            a2 += tj.d2 * h1 * h1 + tj.d1 * h2;
            if m == n2 {
                inner_d1 = a1;
                inner_j = h1.abs();
            }
        }
        Ok(ChainJet { x: y, phase_d1: a1, phase_d2: a2, h_d1: h1, h_d2: h2, inner_d1, inner_j })
    }
}

fn solve<T: Scalar>(sp: &SkewProduct<T>, p: usize, target: T) -> Result<T, OscillatoryError> {
    let piece = &sp.pieces()[p];
    let target = target.max(piece.img_lo).min(piece.img_hi);
    let tol = T::attainable_tol(1e-14, target);
    Ok(solve_monotone(|x| sp.eval_piece(p, x), piece.lo, piece.hi, target, tol).map_err(DynamicsError::from)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDifference<T> {
    pub theta_d1: T,
    pub theta_d2: T,
    /// `K_{j,k} = J_n o h_j * J_n o h_k` and its derivative.
    pub k: T,
    pub k_d1: T,
    /// Contribution of the last `n2` steps to `theta'`.
    pub inner_d1: T,
    /// `J_{n2} o g_j + J_{n2} o g_k`.
    pub inner_j_sum: T,
}

pub fn combine<T: Scalar>(a: &ChainJet<T>, b: &ChainJet<T>) -> PhaseDifference<T> {
    let (ja, jb) = (a.h_d1.abs(), b.h_d1.abs());
    let dja = a.h_d2 * a.h_d1.signum();
    let djb = b.h_d2 * b.h_d1.signum();
    PhaseDifference {
        theta_d1: a.phase_d1 - b.phase_d1,
        theta_d2: a.phase_d2 - b.phase_d2,
        k: ja * jb,
        k_d1: dja * jb + ja * djb,
        inner_d1: a.inner_d1 - b.inner_d1,
        inner_j_sum: a.inner_j + b.inner_j,
    }
}

/// `theta_{j,k}` derivatives and `K_{j,k}` at the circle point `x`.
pub fn phase_difference<T: Scalar>(
    sp: &SkewProduct<T>,
    word_j: &BranchWord,
    word_k: &BranchWord,
    n1: usize,
    n2: usize,
    x: T,
) -> Result<PhaseDifference<T>, OscillatoryError> {
    let n = n1 + n2;
    if word_j.len() != n || word_k.len() != n {
        return Err(OscillatoryError::WordLength { j: word_j.len(), k: word_k.len(), n });
    }
    let x = wrap01(x);
    let a = InverseBranch::new(sp, word_j.clone(), n1, x)?.eval(x)?;
    let b = InverseBranch::new(sp, word_k.clone(), n1, x)?.eval(x)?;
    Ok(combine(&a, &b))
}

/// Equal cells of the circle with length in `[|b|^-(1-xi), 2|b|^-(1-xi)]`.
pub fn ip_partition<T: Scalar>(b: T, xi: T) -> Vec<(T, T)> {
    let count = i_partition_count(b, xi);
    let w = T::one() / T::from_usize_lossy(count);
    (0..count).map(|i| (w * T::from_usize_lossy(i), w * T::from_usize_lossy(i + 1))).collect()
}

/// Reference point of a cell.
pub fn reference_point<T: Scalar>(cell: (T, T)) -> T {
    (cell.0 + cell.1) / T::lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PairReport<T> {
    pub nodes: usize,
    pub pairs: usize,
    pub transversal_pairs: usize,
    /// Transversal pairs with `|theta'(x_p)| <= C1/2 (J_{n2} o g_j + J_{n2} o g_k)(x_p)`.
    pub transversal_violations: usize,
    pub sampled_pairs: usize,
    pub max_theta_d2: T,
    pub c7: T,
    pub theta_d2_violations: usize,
    pub distortion_violations: usize,
    pub gronwall_violations: usize,
    /// `|I_p| <= C1 / (2 C7) Lambda^-n2`, the hypothesis of the interval-wide bound.
    pub interval_hypothesis: bool,
    pub interval_violations: usize,
}

pub const FD_STEP: f64 = 1e-6;
const CHECK_SLACK: f64 = 1.05;

/// Every pairwise inequality of the oscillatory estimate at one reference point `x_p`
/// with cell `I_p = (x_p - w/2, x_p + w/2)`. Transversality is tested on all pairs; the
/// pointwise distortion and second-derivative checks on a strided sample of at most
/// `max_sampled` pairs.
pub fn pair_checks<T: Scalar>(
    sp: &SkewProduct<T>,
    n1: usize,
    n2: usize,
    x_p: T,
    width: T,
    max_sampled: usize,
) -> Result<PairReport<T>, OscillatoryError> {
    let k = sp.consts();
    let c1 = k.c1;
    let c6 = k.sup_d2f / (k.lambda_tilde - T::one());
    let c7 = (k.sup_d2tau + k.sup_dtau * c6) / (T::one() - T::one() / k.lambda_tilde);
    let n = n1 + n2;
    let x_p = wrap01(x_p);
    let tree = preimages(sp, x_p, n)?;
    let branches: Vec<InverseBranch<T>> =
        tree.nodes.iter().map(|node| InverseBranch::new(sp, node.word.clone(), n1, x_p)).collect::<Result<_, _>>()?;
    let jets: Vec<ChainJet<T>> = branches.par_iter().map(|b| b.eval(x_p)).collect::<Result<_, _>>()?;
    // cones at iterate n2, from the nodes of the shallower tree
    let inner = preimages(sp, x_p, n2)?;
    let inner_cone: std::collections::HashMap<Vec<usize>, _> =
        inner.nodes.iter().map(|node| (node.word.symbols.clone(), cone_image(node, c1))).collect();
    let cones: Vec<_> = tree.nodes.iter().map(|node| inner_cone[&node.word.symbols[n1..].to_vec()]).collect();

    let mut r = PairReport { nodes: jets.len(), c7, ..Default::default() };
    let half = T::lit(0.5);
    for a in 0..jets.len() {
        for b in (a + 1)..jets.len() {
            r.pairs += 1;
            if transversal(&cones[a], &cones[b]) {
                r.transversal_pairs += 1;
                let d = combine(&jets[a], &jets[b]);
                if !(d.theta_d1.abs() > half * c1 * d.inner_j_sum) {
                    r.transversal_violations += 1;
                }
            }
        }
    }

    let lam_n2 = k.lambda_max.powi(n2 as i32);
    r.interval_hypothesis = width <= c1 / (T::lit(2.0) * c7) / lam_n2;
    let total_pairs = jets.len() * jets.len().saturating_sub(1) / 2;
    let stride = (total_pairs / max_sampled.max(1)).max(1);
    let h = T::lit(FD_STEP);
    let samples: Vec<T> = (0..=8).map(|i| x_p - width * half + width * T::lit(i as f64 / 8.0)).collect();
    let mut idx = 0usize;
    for a in 0..jets.len() {
        for b in (a + 1)..jets.len() {
            idx += 1;
            if !idx.is_multiple_of(stride) {
                continue;
            }
            r.sampled_pairs += 1;
            let d = combine(&jets[a], &jets[b]);
            r.max_theta_d2 = r.max_theta_d2.max(d.theta_d2.abs());
            if d.theta_d2.abs() > T::lit(CHECK_SLACK) * c7 {
                r.theta_d2_violations += 1;
            }
            // K' by central differences
            let at = |z: T| -> Result<PhaseDifference<T>, OscillatoryError> {
                Ok(combine(&branches[a].eval(z)?, &branches[b].eval(z)?))
            };
            if let (Ok(p), Ok(m)) = (at(x_p + h), at(x_p - h)) {
                let dk = (p.k - m.k) / (T::lit(2.0) * h);
                let allowance = d.k * T::lit(1e-7);
                if dk.abs() > T::lit(2.0) * c6 * d.k * T::lit(1.0 + 1e-6) + allowance {
                    r.distortion_violations += 1;
                }
            }
            let trans = transversal(&cones[a], &cones[b]);
            let growth = (T::lit(2.0) * c6 * width).exp();
            for &z in &samples {
                let Ok(dz) = at(z) else { continue };
                if dz.k > growth * d.k * T::lit(1.0 + 1e-12) {
                    r.gronwall_violations += 1;
                }
                if trans && r.interval_hypothesis && !(dz.theta_d1.abs() > half * c1 / lam_n2) {
                    r.interval_violations += 1;
                }
            }
        }
    }
    Ok(r)
}

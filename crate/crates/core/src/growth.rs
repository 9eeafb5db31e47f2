//! Refinement of an interval family under the base map and the boundary mass `Z_eps`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::DynamicsError;
use crate::mapspec::SkewProduct;
use crate::roots::solve_monotone;
use crate::scalar::{wrap01, Compensated, Scalar};

/// One interval of `Omega_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPiece<T> {
    /// Domain, in the coordinates of `Omega_0`.
    pub lo: T,
    pub hi: T,
    /// Inversion pieces visited by `x, f(x), ..., f^{n-1}(x)`.
    pub word: Vec<usize>,
    /// Lifted image `f^n(omega)`.
    pub img_lo: T,
    pub img_hi: T,
    /// The image was cut to respect the length bound.
    pub chopped: bool,
}

impl<T: Scalar> GrowthPiece<T> {
    pub fn len(&self) -> T {
        self.hi - self.lo
    }

    pub fn image_len(&self) -> T {
        self.img_hi - self.img_lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState<T> {
    pub n: usize,
    pub pieces: Vec<GrowthPiece<T>>,
    pub omega0: (T, T),
}

/// Which boundary points the distance `r_n` is measured to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BoundaryReading {
    /// Every image endpoint of every piece of `Omega_n`.
    #[default]
    AllBoundaryPoints,
    /// Only the endpoints of the piece's own image.
    OwnEndpoints,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrowthError {
    #[error("Omega_0 = ({lo}, {hi}) must be a nonempty interval of length at most delta = {delta}")]
    BadOmega { lo: f64, hi: f64, delta: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl<T: Scalar> PartitionState<T> {
    pub fn new(sp: &SkewProduct<T>, lo: T, hi: T) -> Result<Self, GrowthError> {
        let delta = sp.consts().delta;
        if !(hi > lo) || hi - lo > delta * (T::one() + T::lit(1e-12)) {
            return Err(GrowthError::BadOmega { lo: lo.as_f64(), hi: hi.as_f64(), delta: delta.as_f64() });
        }
        let piece = GrowthPiece { lo, hi, word: Vec::new(), img_lo: lo, img_hi: hi, chopped: false };
        Ok(Self { n: 0, pieces: vec![piece], omega0: (lo, hi) })
    }

    pub fn measure(&self) -> T {
        let mut acc = Compensated::default();
        for p in &self.pieces {
            acc.add(p.len());
        }
        acc.value()
    }

    pub fn omega0_len(&self) -> T {
        self.omega0.1 - self.omega0.0
    }
}

fn lift_into<T: Scalar>(y: T, lo: T) -> T {
    y + (lo - y).ceil()
}

fn solve_piece<T: Scalar>(sp: &SkewProduct<T>, p: usize, target: T) -> Result<T, GrowthError> {
    let piece = &sp.pieces()[p];
    let target = target.max(piece.img_lo).min(piece.img_hi);
    let tol = T::attainable_tol(1e-14, target);
    solve_monotone(|x| sp.eval_piece(p, x), piece.lo, piece.hi, target, tol).map_err(|e| GrowthError::Dynamics(e.into()))
}

/// Reference orbit of an interior point: for every step the lifted position in the
/// domain of the visited piece and the shift to the previous step's image coordinates.
fn reference_shifts<T: Scalar>(sp: &SkewProduct<T>, piece: &GrowthPiece<T>) -> Result<Vec<T>, GrowthError> {
    let mid = (piece.lo + piece.hi) / T::lit(2.0);
    let mut shifts = Vec::with_capacity(piece.word.len());
    let mut cur = mid;
    for &p in &piece.word {
        let d = lift_into(cur, sp.pieces()[p].lo);
        shifts.push(d - cur);
        cur = sp.eval_piece(p, d).map_err(DynamicsError::from)?.value;
    }
    Ok(shifts)
}

/// The point of `piece` whose `f^n` image is `z` (in image coordinates), with the
/// derivative of the inverse chain there.
fn pull_back_jet<T: Scalar>(sp: &SkewProduct<T>, piece: &GrowthPiece<T>, shifts: &[T], z: T) -> Result<(T, T), GrowthError> {
    let mut w = z;
    let mut d = T::one();
    for k in (0..piece.word.len()).rev() {
        let p = piece.word[k];
        let x = solve_piece(sp, p, w)?;
        d /= sp.eval_piece(p, x).map_err(DynamicsError::from)?.d1;
        w = x - shifts[k];
    }
    Ok((w.max(piece.lo).min(piece.hi), d))
}

fn pull_back<T: Scalar>(sp: &SkewProduct<T>, piece: &GrowthPiece<T>, shifts: &[T], z: T) -> Result<T, GrowthError> {
    Ok(pull_back_jet(sp, piece, shifts, z)?.0)
}

/// Above this many strip components inside one image the inverse chain is replaced by
/// its cubic Hermite interpolant on `HERMITE_NODES` nodes.
pub const EXACT_COMPONENTS: usize = 16;
pub const HERMITE_NODES: usize = 65;

struct HermiteTable<T> {
    lo: T,
    step: T,
    x: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> HermiteTable<T> {
    fn new(sp: &SkewProduct<T>, piece: &GrowthPiece<T>, shifts: &[T]) -> Result<Self, GrowthError> {
        let (u, v) = (piece.img_lo, piece.img_hi);
        let m = HERMITE_NODES - 1;
        let step = (v - u) / T::from_usize_lossy(m);
        let mut x = Vec::with_capacity(m + 1);
        let mut d = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let z = if i == m { v } else { u + step * T::from_usize_lossy(i) };
            let (xi, di) = pull_back_jet(sp, piece, shifts, z)?;
            x.push(xi);
            d.push(di);
        }
        Ok(Self { lo: u, step, x, d })
    }

    fn eval(&self, z: T) -> T {
        let m = self.x.len() - 1;
        let s = ((z - self.lo) / self.step).max(T::zero());
        let i = s.floor().to_usize().unwrap_or(0).min(m - 1);
        let t = s - T::from_usize_lossy(i);
        let (t2, t3) = (t * t, t * t * t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.x[i] + h10 * self.step * self.d[i] + h01 * self.x[i + 1] + h11 * self.step * self.d[i + 1]
    }
}

/// Boundaries of the inversion pieces, reduced to `[0, 1)` and sorted.
fn cut_points<T: Scalar>(sp: &SkewProduct<T>) -> Vec<T> {
    let mut c: Vec<T> = sp.pieces().iter().map(|p| wrap01(p.lo)).collect();
    c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    c.dedup();
    c
}

/// Points `c + m` strictly inside `(u, v)`.
fn interior_cuts<T: Scalar>(cuts: &[T], u: T, v: T) -> Vec<T> {
    let guard = T::lit(1e-13);
    let mut out = Vec::new();
    let mut m = u.floor() - T::one();
    while m <= v.ceil() {
        for &c in cuts {
            let p = c + m;
            if p > u + guard && p < v - guard {
                out.push(p);
            }
        }
        m += T::one();
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

/// One step: split every image at piece boundaries, map by `f`, chop images longer than `delta`.
pub fn refine<T: Scalar>(sp: &SkewProduct<T>, state: &PartitionState<T>) -> Result<PartitionState<T>, GrowthError> {
    let cuts = cut_points(sp);
    let delta = sp.consts().delta;
    let children: Vec<Vec<GrowthPiece<T>>> = state
        .pieces
        .par_iter()
        .map(|piece| refine_piece(sp, piece, &cuts, delta))
        .collect::<Result<_, _>>()?;
    Ok(PartitionState { n: state.n + 1, pieces: children.into_iter().flatten().collect(), omega0: state.omega0 })
}

fn refine_piece<T: Scalar>(sp: &SkewProduct<T>, piece: &GrowthPiece<T>, cuts: &[T], delta: T) -> Result<Vec<GrowthPiece<T>>, GrowthError> {
    let shifts = reference_shifts(sp, piece)?;
    let (u, v) = (piece.img_lo, piece.img_hi);
    let mut bounds = vec![u];
    bounds.extend(interior_cuts(cuts, u, v));
    bounds.push(v);
    let increasing_chain = {
        // orientation of f^n on the piece, from the recorded pieces
        piece.word.iter().fold(true, |acc, &p| acc == sp.pieces()[p].increasing)
    };
    let mut out = Vec::new();
    for seg in bounds.windows(2) {
        let (s, t) = (seg[0], seg[1]);
        let mid = (s + t) / T::lit(2.0);
        let (p, mid_l) = sp.locate_piece(mid);
        let shift = mid_l - mid;
        let (sl, tl) = (s + shift, t + shift);
        let fs = sp.eval_piece(p, sl).map_err(DynamicsError::from)?.value;
        let ft = sp.eval_piece(p, tl).map_err(DynamicsError::from)?.value;
        let (a, b) = if fs < ft { (fs, ft) } else { (ft, fs) };
        let len = b - a;
        let k = (len / delta - T::lit(1e-12)).ceil().max(T::one()).to_usize().unwrap_or(1);
        let step = len / T::from_usize_lossy(k);
        // image cut points pulled back to the old image, then to the domain
        let mut img_cuts = Vec::with_capacity(k + 1);
        let mut dom_cuts = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let y = if j == k { b } else { a + step * T::from_usize_lossy(j) };
            img_cuts.push(y);
            let in_old = if j == 0 {
                if fs < ft { s } else { t }
            } else if j == k {
                if fs < ft { t } else { s }
            } else {
                solve_piece(sp, p, y)? - shift
            };
            let x = if in_old == u {
                if increasing_chain { piece.lo } else { piece.hi }
            } else if in_old == v {
                if increasing_chain { piece.hi } else { piece.lo }
            } else {
                pull_back(sp, piece, &shifts, in_old)?
            };
            dom_cuts.push(x);
        }
        let mut word = piece.word.clone();
        word.push(p);
        for j in 0..k {
            let (x0, x1) = (dom_cuts[j], dom_cuts[j + 1]);
            out.push(GrowthPiece {
                lo: x0.min(x1),
                hi: x0.max(x1),
                word: word.clone(),
                img_lo: img_cuts[j],
                img_hi: img_cuts[j + 1],
                chopped: k > 1,
            });
        }
    }
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite"));
    Ok(out)
}

/// Iterates `refine` `n` times from `Omega_0 = (lo, hi)`, keeping every state.
pub fn evolve<T: Scalar>(sp: &SkewProduct<T>, lo: T, hi: T, n: usize) -> Result<Vec<PartitionState<T>>, GrowthError> {
    let mut states = vec![PartitionState::new(sp, lo, hi)?];
    for _ in 0..n {
        let next = refine(sp, states.last().expect("nonempty"))?;
        states.push(next);
    }
    Ok(states)
}

/// Merged `eps`-neighbourhoods of all image endpoints, as sorted intervals of the line
/// covering one period `[0, 1)` plus overlap.
fn boundary_strips<T: Scalar>(state: &PartitionState<T>, eps: T) -> Vec<(T, T)> {
    let mut pts: Vec<T> = state.pieces.iter().flat_map(|p| [wrap01(p.img_lo), wrap01(p.img_hi)]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out: Vec<(T, T)> = Vec::new();
    for shift in [-T::one(), T::zero(), T::one()] {
        for &p in &pts {
            let (a, b) = (p + shift - eps, p + shift + eps);
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
    }
    out
}

/// Lebesgue measure of `{x in Omega_n : d(f^n x, f^n(boundary)) <= eps}`.
pub fn z_epsilon<T: Scalar>(sp: &SkewProduct<T>, state: &PartitionState<T>, eps: T, reading: BoundaryReading) -> Result<T, GrowthError> {
    z_epsilon_with(sp, state, eps, reading, EXACT_COMPONENTS)
}

fn z_epsilon_with<T: Scalar>(
    sp: &SkewProduct<T>,
    state: &PartitionState<T>,
    eps: T,
    reading: BoundaryReading,
    exact_limit: usize,
) -> Result<T, GrowthError> {
    let strips = match reading {
        BoundaryReading::AllBoundaryPoints => Some(boundary_strips(state, eps)),
        BoundaryReading::OwnEndpoints => None,
    };
    let parts: Vec<T> = state
        .pieces
        .par_iter()
        .map(|piece| -> Result<T, GrowthError> {
            let (u, v) = (piece.img_lo, piece.img_hi);
            if T::lit(2.0) * eps >= v - u {
                return Ok(piece.len());
            }
            let shifts = reference_shifts(sp, piece)?;
            let measure = |a: T, b: T| -> Result<T, GrowthError> {
                let xa = pull_back(sp, piece, &shifts, a)?;
                let xb = pull_back(sp, piece, &shifts, b)?;
                Ok((xb - xa).abs())
            };
            match &strips {
                None => Ok(measure(u, u + eps)? + measure(v - eps, v)?),
                Some(strips) => {
                    // strips live on [-1, 2); shift the image so it starts in [0, 1)
                    let m = u.floor();
                    let (uu, vv) = (u - m, v - m);
                    let first = strips.partition_point(|s| s.1 < uu);
                    let comps: Vec<(T, T)> = strips[first..]
                        .iter()
                        .take_while(|s| s.0 <= vv)
                        .map(|s| (s.0.max(uu) + m, s.1.min(vv) + m))
                        .filter(|c| c.1 > c.0)
                        .collect();
                    let mut total = Compensated::default();
                    if comps.len() <= exact_limit {
                        for (a, b) in comps {
                            total.add(measure(a, b)?);
                        }
                    } else {
                        let table = HermiteTable::new(sp, piece, &shifts)?;
                        for (a, b) in comps {
                            total.add((table.eval(b) - table.eval(a)).abs());
                        }
                    }
                    Ok(total.value().min(piece.len()))
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let mut acc = Compensated::default();
    for p in parts {
        acc.add(p);
    }
    Ok(acc.value())
}

/// Slack on the right-hand side of the growth bound.
pub const GROWTH_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck<T> {
    pub n: usize,
    pub pieces: usize,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
    /// `Z_{eps / lambda^n} Omega_0 <= 2 eps / lambda^n` for the single starting interval.
    pub single_interval_bound: bool,
}

/// `Z_eps Omega_n <= 2^n Z_{eps/lambda^n} Omega_0 + eps C_beta |Omega_0|` with `lambda = lambda_tilde`,
/// `beta = lambda / 2`.
pub fn growth_bound_at<T: Scalar>(
    sp: &SkewProduct<T>,
    initial: &PartitionState<T>,
    state: &PartitionState<T>,
    eps: T,
    reading: BoundaryReading,
) -> Result<GrowthCheck<T>, GrowthError> {
    let k = sp.consts();
    let lambda = k.lambda_tilde;
    let beta = k.beta;
    let c_beta = T::lit(4.0) * k.lambda_max * beta / (k.delta * lambda * (beta - T::one()));
    let n = state.n;
    let lam_n = lambda.powi(n as i32);
    let lhs = z_epsilon(sp, state, eps, reading)?;
    let z0 = z_epsilon(sp, initial, eps / lam_n, reading)?;
    let rhs = (lambda / beta).powi(n as i32) * z0 + eps * c_beta * initial.omega0_len();
    Ok(GrowthCheck {
        n,
        pieces: state.pieces.len(),
        lhs,
        rhs,
        pass: lhs <= T::lit(GROWTH_SLACK) * rhs,
        single_interval_bound: z0 <= T::lit(2.0) * eps / lam_n * (T::one() + T::lit(1e-9)) + T::lit(1e-14) * initial.omega0_len(),
    })
}

pub fn growth_bound_check<T: Scalar>(
    sp: &SkewProduct<T>,
    omega0: (T, T),
    n: usize,
    eps: T,
    reading: BoundaryReading,
) -> Result<GrowthCheck<T>, GrowthError> {
    let states = evolve(sp, omega0.0, omega0.1, n)?;
    growth_bound_at(sp, &states[0], &states[n], eps, reading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn chopping_rule() {
        let sp = bundled::tripling_cos::<f64>();
        let d = sp.consts().delta;
        let s0 = PartitionState::new(&sp, 0.05, 0.05 + d / 2.0).unwrap();
        let s1 = refine(&sp, &s0).unwrap();
        assert_eq!(s1.pieces.len(), 2);
        for p in &s1.pieces {
            assert!((p.image_len() - 0.75 * d).abs() < 1e-14);
            assert!(p.chopped);
        }
    }

    #[test]
    fn short_piece_passes_through() {
        let sp = bundled::tripling_cos::<f64>();
        let s0 = PartitionState::new(&sp, 0.1, 0.15).unwrap();
        let s1 = refine(&sp, &s0).unwrap();
        assert_eq!(s1.pieces.len(), 1);
        assert!(!s1.pieces[0].chopped);
        assert_eq!((s1.pieces[0].lo, s1.pieces[0].hi), (0.1, 0.15));
    }

    #[test]
    fn measure_and_lengths_are_kept() {
        for sp in [bundled::tripling_cos::<f64>(), bundled::perturbed()] {
            let d = sp.consts().delta;
            let states = evolve(&sp, 0.27, 0.27 + 0.4 * d, 7).unwrap();
            for st in &states {
                assert!((st.measure() - 0.4 * d).abs() < 1e-12);
                for p in &st.pieces {
                    assert!(p.image_len() > 0.0 && p.image_len() <= d * (1.0 + 1e-12));
                    if p.chopped {
                        assert!(p.image_len() >= d / 2.0 * (1.0 - 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn images_match_forward_iteration() {
        let sp = bundled::perturbed::<f64>();
        let states = evolve(&sp, 0.6, 0.65, 5).unwrap();
        for p in &states[5].pieces {
            let mut x = p.lo;
            let mut y = p.hi;
            for _ in 0..5 {
                x = sp.step_base(x).unwrap();
                y = sp.step_base(y).unwrap();
            }
            let ends = [wrap01(p.img_lo), wrap01(p.img_hi)];
            let close = |a: f64| ends.iter().any(|&e| crate::scalar::circle_dist(a, e) < 1e-10);
            assert!(close(x) && close(y));
        }
    }

    #[test]
    fn z_epsilon_cases() {
        let sp = bundled::tripling_cos::<f64>();
        let d = sp.consts().delta;
        let s0 = PartitionState::new(&sp, 0.1, 0.1 + d / 3.0).unwrap();
        for reading in [BoundaryReading::AllBoundaryPoints, BoundaryReading::OwnEndpoints] {
            assert_eq!(z_epsilon(&sp, &s0, d, reading).unwrap(), s0.measure());
        }
        // one linear piece of image length delta
        let s1 = refine(&sp, &s0).unwrap();
        assert_eq!(s1.pieces.len(), 1);
        let z = z_epsilon(&sp, &s1, d / 10.0, BoundaryReading::OwnEndpoints).unwrap();
        assert!((z - 2.0 * d / 10.0 / 3.0).abs() < 1e-14);
        let states = evolve(&sp, 0.1, 0.3, 5).unwrap();
        let mut prev = 0.0;
        for eps in [1e-5, 1e-4, 1e-3, 1e-2] {
            let z = z_epsilon(&sp, &states[5], eps, BoundaryReading::AllBoundaryPoints).unwrap();
            assert!(z >= prev && z <= states[5].measure() + 1e-12);
            prev = z;
        }
    }

    #[test]
    fn hermite_table_matches_exact_pullbacks() {
        let sp = bundled::perturbed::<f64>();
        let states = evolve(&sp, 0.2, 0.4, 6).unwrap();
        for eps in [1e-6, 1e-4] {
            let exact = z_epsilon_with(&sp, &states[6], eps, BoundaryReading::AllBoundaryPoints, usize::MAX).unwrap();
            let table = z_epsilon_with(&sp, &states[6], eps, BoundaryReading::AllBoundaryPoints, 0).unwrap();
            assert!((exact - table).abs() <= 1e-8 * exact, "{exact} {table}");
        }
    }

    #[test]
    fn base_case_and_example() {
        let sp = bundled::tripling_cos::<f64>();
        let d = sp.consts().delta;
        let c = growth_bound_check(&sp, (0.0, d / 2.0), 0, 1e-4, BoundaryReading::OwnEndpoints).unwrap();
        assert!(c.pass && (c.lhs - 2e-4).abs() < 1e-15);
        let c = growth_bound_check(&sp, (0.0, d / 2.0), 6, 1e-4, BoundaryReading::OwnEndpoints).unwrap();
        assert!(c.pass, "{c:?}");
    }
}

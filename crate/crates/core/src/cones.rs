//! Cone images, transversality and the non-transversal mass `phi(n)`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{preimages, DynamicsError, PreimageNode, PreimageTree};
use crate::mapspec::SkewProduct;
use crate::scalar::{wrap01, Scalar};
use crate::transfer::{GridFunction, Lookup, PhiFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("density must be positive, minimum is {min}")]
    NonPositiveDensity { min: f64 },
    #[error("need at least two points to fit, got {0}")]
    InsufficientData(usize),
}

/// Default size of the uniform `y` grid.
pub const DEFAULT_Y_SAMPLES: usize = 64;

/// Slope interval `[center - halfwidth, center + halfwidth]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeInterval<T> {
    pub center: T,
    pub halfwidth: T,
}

impl<T: Scalar> ConeInterval<T> {
    pub fn new(center: T, halfwidth: T) -> Self {
        Self { center, halfwidth }
    }

    pub fn lo(&self) -> T {
        self.center - self.halfwidth
    }

    pub fn hi(&self) -> T {
        self.center + self.halfwidth
    }

    pub fn contains(&self, slope: T) -> bool {
        self.lo() <= slope && slope <= self.hi()
    }

    pub fn contains_cone(&self, other: &Self) -> bool {
        self.lo() <= other.lo() && other.hi() <= self.hi()
    }
}

/// Image at `y` of the base cone at a preimage node.
pub fn cone_image<T: Scalar>(node: &PreimageNode<T>, c1: T) -> ConeInterval<T> {
    ConeInterval::new(node.slope, c1 * node.j_n)
}

/// Closed slope intervals are disjoint.
pub fn transversal<T: Scalar>(a: &ConeInterval<T>, b: &ConeInterval<T>) -> bool {
    a.hi() < b.lo() || b.hi() < a.lo()
}

/// Sample points for sups over `y`: a uniform grid plus the images of all breakpoints of `f`.
pub fn y_grid<T: Scalar>(sp: &SkewProduct<T>, samples: usize) -> Vec<T> {
    let s = samples.max(1);
    let mut ys: Vec<T> = (0..s).map(|k| T::from_usize_lossy(k) / T::from_usize_lossy(s)).collect();
    let f = sp.f();
    for i in 0..f.branch_count() {
        let (lo, hi) = f.domain(i);
        for x in [lo, hi] {
            if let Ok(j) = f.eval_branch(i, x) {
                ys.push(wrap01(j.value));
            }
        }
    }
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ys.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon());
    ys
}

/// `max_{x1} sum_{x2 not transversal to x1} J_n(x2)` over one preimage tree.
pub fn phi_at<T: Scalar>(tree: &PreimageTree<T>, c1: T) -> T {
    let cones: Vec<(ConeInterval<T>, T)> = tree.nodes.iter().map(|n| (cone_image(n, c1), n.j_n)).collect();
    overlap_masses(&cones).into_iter().fold(T::zero(), T::max)
}

/// For every cone, the total weight of cones it is not transversal to (itself included).
pub fn overlap_masses<T: Scalar>(cones: &[(ConeInterval<T>, T)]) -> Vec<T> {
    let mut by_lo: Vec<(T, T)> = cones.iter().map(|(c, w)| (c.lo(), *w)).collect();
    let mut by_hi: Vec<(T, T)> = cones.iter().map(|(c, w)| (c.hi(), *w)).collect();
    by_lo.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    by_hi.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    // suffix sums over lo, prefix sums over hi
    let mut suffix = vec![T::zero(); by_lo.len() + 1];
    for k in (0..by_lo.len()).rev() {
        suffix[k] = suffix[k + 1] + by_lo[k].1;
    }
    let mut prefix = vec![T::zero(); by_hi.len() + 1];
    for k in 0..by_hi.len() {
        prefix[k + 1] = prefix[k] + by_hi[k].1;
    }
    let total = suffix[0];
    cones
        .iter()
        .map(|(c, _)| {
            let right = suffix[by_lo.partition_point(|p| p.0 <= c.hi())];
            let left = prefix[by_hi.partition_point(|p| p.0 < c.lo())];
            total - right - left
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiReport<T> {
    pub n: usize,
    /// Sup over the sample grid ("grid sup").
    pub phi: T,
    /// `phi^(1/n)`.
    pub phi_pow: T,
    pub argmax_y: T,
    pub samples: usize,
}

pub fn phi<T: Scalar>(sp: &SkewProduct<T>, n: usize, y_samples: usize) -> Result<PhiReport<T>, ConeError> {
    let ys = y_grid(sp, y_samples);
    let c1 = sp.consts().c1;
    let vals: Vec<(T, T)> = ys
        .par_iter()
        .map(|&y| preimages(sp, y, n).map(|t| (phi_at(&t, c1), y)))
        .collect::<Result<_, _>>()?;
    let (best, argmax_y) = vals
        .into_iter()
        .fold((T::zero(), T::zero()), |acc, v| if v.0 > acc.0 { v } else { acc });
    Ok(PhiReport {
        n,
        phi: best,
        phi_pow: best.powf(T::one() / T::from_usize_lossy(n.max(1))),
        argmax_y,
        samples: ys.len(),
    })
}

/// Pairs checked and pairs violating `|c1 - c2| > C1 (J1 + J2)` among transversal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SeparationCount {
    pub transversal_pairs: usize,
    pub violations: usize,
}

pub fn transversal_separation<T: Scalar>(tree: &PreimageTree<T>, c1: T) -> SeparationCount {
    let cones: Vec<ConeInterval<T>> = tree.nodes.iter().map(|n| cone_image(n, c1)).collect();
    let mut out = SeparationCount::default();
    for (i, a) in cones.iter().enumerate() {
        for (j, b) in cones.iter().enumerate().skip(i + 1) {
            if transversal(a, b) {
                out.transversal_pairs += 1;
                let gap = (tree.nodes[i].slope - tree.nodes[j].slope).abs();
                if !(gap > c1 * (tree.nodes[i].j_n + tree.nodes[j].j_n)) {
                    out.violations += 1;
                }
            }
        }
    }
    out
}

fn check_density<T: Scalar>(h_nu: &GridFunction<T>) -> Result<(), ConeError> {
    let min = h_nu.values().iter().map(|v| v.re).fold(T::infinity(), T::min);
    if !(min > T::zero()) {
        return Err(ConeError::NonPositiveDensity { min: min.as_f64() });
    }
    Ok(())
}

fn weighted_cones<T: Scalar>(tree: &PreimageTree<T>, c1: T, h_nu: &GridFunction<T>) -> Vec<(ConeInterval<T>, T)> {
    let hy = h_nu.lookup(tree.y, Lookup::Linear).re;
    tree.nodes
        .iter()
        .map(|n| (cone_image(n, c1), n.j_n * h_nu.lookup(n.x, Lookup::Linear).re / hy))
        .collect()
}

/// Density-weighted mass of the depth-`n` preimages of `y` whose cone contains `slope`.
pub fn phi_tilde<T: Scalar>(
    sp: &SkewProduct<T>,
    n: usize,
    slope: T,
    y: T,
    h_nu: &GridFunction<T>,
) -> Result<T, ConeError> {
    check_density(h_nu)?;
    let tree = preimages(sp, y, n)?;
    Ok(weighted_cones(&tree, sp.consts().c1, h_nu)
        .into_iter()
        .filter(|(c, _)| c.contains(slope))
        .fold(T::zero(), |acc, (_, w)| acc + w))
}

/// `sup_L phi_tilde(n, L, y)` and a maximizing slope, by a sweep over cone endpoints.
pub fn max_stab<T: Scalar>(cones: &[(ConeInterval<T>, T)]) -> (T, T) {
    let mut events: Vec<(T, bool, T)> = Vec::with_capacity(2 * cones.len());
    for (c, w) in cones {
        events.push((c.lo(), true, *w));
        events.push((c.hi(), false, *w));
    }
    // closed intervals: openings sort before closings at equal slope
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(b.1.cmp(&a.1)));
    let (mut cur, mut best, mut at) = (T::zero(), T::zero(), T::zero());
    for (s, open, w) in events {
        if open {
            cur += w;
            if cur > best {
                best = cur;
                at = s;
            }
        } else {
            cur -= w;
        }
    }
    (best, at)
}

pub fn phi_tilde_sup_at<T: Scalar>(sp: &SkewProduct<T>, n: usize, y: T, h_nu: &GridFunction<T>) -> Result<T, ConeError> {
    check_density(h_nu)?;
    let tree = preimages(sp, y, n)?;
    Ok(max_stab(&weighted_cones(&tree, sp.consts().c1, h_nu)).0)
}

/// Sup of `phi_tilde(n, ., .)` over the `y` sample grid and all slopes.
pub fn phi_tilde_sup<T: Scalar>(sp: &SkewProduct<T>, n: usize, y_samples: usize, h_nu: &GridFunction<T>) -> Result<T, ConeError> {
    check_density(h_nu)?;
    let vals: Vec<T> = y_grid(sp, y_samples)
        .par_iter()
        .map(|&y| phi_tilde_sup_at(sp, n, y, h_nu))
        .collect::<Result<_, _>>()?;
    Ok(vals.into_iter().fold(T::zero(), T::max))
}

/// One instance of the pointwise submultiplicativity bound at `y`:
/// `sup_L phi~(m+k, L, y) <= sup_L phi~(m, L, y) * max_{z in f^-m(y)} sup_L phi~(k, L, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubmultCheck<T> {
    pub y: T,
    pub lhs: T,
    pub rhs: T,
}

pub fn submultiplicativity_at<T: Scalar>(
    sp: &SkewProduct<T>,
    m: usize,
    k: usize,
    y: T,
    h_nu: &GridFunction<T>,
) -> Result<SubmultCheck<T>, ConeError> {
    let lhs = phi_tilde_sup_at(sp, m + k, y, h_nu)?;
    let outer = phi_tilde_sup_at(sp, m, y, h_nu)?;
    let mut inner = T::zero();
    for node in preimages(sp, y, m)?.nodes {
        inner = inner.max(phi_tilde_sup_at(sp, k, node.x, h_nu)?);
    }
    Ok(SubmultCheck { y, lhs, rhs: outer * inner })
}

/// Log-linear fit `phi(n) ~ C_gamma e^{-gamma n}`; `C_gamma` is raised so the bound
/// covers every data point.
pub fn fit_phi<T: Scalar>(points: &[(usize, T)]) -> Result<PhiFit<T>, ConeError> {
    if points.len() < 2 {
        return Err(ConeError::InsufficientData(points.len()));
    }
    let k = T::from_usize_lossy(points.len());
    let xs: Vec<T> = points.iter().map(|p| T::from_usize_lossy(p.0)).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let gamma = -sxy / sxx;
    let c_gamma = xs.iter().zip(&ys).map(|(x, y)| (*y + gamma * *x).exp()).fold(T::zero(), T::max);
    Ok(PhiFit { c_gamma, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::dynamics::BranchWord;
    use num_complex::Complex;
    use std::f64::consts::PI;

    fn ones(n: usize) -> GridFunction<f64> {
        GridFunction::constant(n, Complex::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn transversality_examples() {
        let a = ConeInterval::new(0.0, 1.0);
        assert!(transversal(&a, &ConeInterval::new(3.0, 1.0)));
        assert!(!transversal(&a, &a));
        assert!(!transversal(&a, &ConeInterval::new(1.5, 1.0)));
        // tangency is not transversal
        assert!(!transversal(&a, &ConeInterval::new(2.0, 1.0)));
    }

    #[test]
    fn cone_at_one_sixth() {
        let sp = bundled::tripling_cos::<f64>();
        let t = preimages(&sp, 0.5, 1).unwrap();
        let c = cone_image(&t.nodes[0], sp.consts().c1);
        assert!((c.center + 2.0 * PI * (PI / 3.0).sin() / 3.0).abs() < 1e-12);
        assert!((c.halfwidth - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_slope_cone() {
        let sp = bundled::tripling_cos::<f64>();
        let t = preimages(&sp, 0.25, 1).unwrap();
        let flat = PreimageNode { slope: 0.0, dtau_n: 0.0, ..t.nodes[0].clone() };
        let c = cone_image(&flat, sp.consts().c1);
        assert_eq!(c.center, 0.0);
        assert!((c.halfwidth - sp.consts().c1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cones_nest_along_the_tree() {
        let sp = bundled::perturbed::<f64>();
        let c1 = sp.consts().c1;
        for n in 1..5 {
            let deep = preimages(&sp, 0.41, n + 1).unwrap();
            let shallow = preimages(&sp, 0.41, n).unwrap();
            for node in &deep.nodes {
                let parent = shallow.nodes.iter().find(|m| m.word == node.word.suffix(1)).unwrap();
                let outer = cone_image(parent, c1);
                let inner = cone_image(node, c1);
                assert!(outer.lo() <= inner.lo() + 1e-12 && inner.hi() <= outer.hi() + 1e-12);
            }
        }
    }

    #[test]
    fn overlap_masses_match_brute_force() {
        let sp = bundled::tripling_cos::<f64>();
        let c1 = sp.consts().c1;
        let tree = preimages(&sp, 0.137, 4).unwrap();
        let cones: Vec<_> = tree.nodes.iter().map(|n| (cone_image(n, c1), n.j_n)).collect();
        let fast = overlap_masses(&cones);
        for (i, (a, _)) in cones.iter().enumerate() {
            let slow: f64 = cones.iter().filter(|(b, _)| !transversal(a, b)).map(|(_, w)| w).sum();
            assert!((fast[i] - slow).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_of_one_step_full_branch_is_one() {
        let sp = bundled::tripling_cos::<f64>();
        let r = phi(&sp, 1, 16).unwrap();
        assert!((r.phi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_is_one_for_coboundary() {
        let cfg = crate::mapspec::MapConfig::from_json(
            r#"{"f": {"breakpoints": [0, "1/3", "2/3"], "branches": ["3*x","3*x","3*x"]},
                "tau": {"breakpoints": [0], "branches": ["0.1*sin(6*pi*x) - 0.1*sin(2*pi*x)"]}}"#,
        )
        .unwrap();
        let sp = cfg.build::<f64>().unwrap().into_product();
        for n in 1..=5 {
            assert!((phi(&sp, n, 16).unwrap().phi - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn phi_is_at_least_the_largest_weight() {
        let sp = bundled::perturbed::<f64>();
        let tree = preimages(&sp, 0.2, 3).unwrap();
        let max_j = tree.nodes.iter().map(|n| n.j_n).fold(0.0, f64::max);
        assert!(phi_at(&tree, sp.consts().c1) >= max_j);
    }

    #[test]
    fn separation_holds_for_transversal_pairs() {
        let sp = bundled::tripling_cos::<f64>();
        let tree = preimages(&sp, 0.3, 5).unwrap();
        let s = transversal_separation(&tree, sp.consts().c1);
        assert!(s.transversal_pairs > 0);
        assert_eq!(s.violations, 0);
    }

    #[test]
    fn phi_tilde_examples() {
        let sp = bundled::cohomologous::<f64>();
        let h = ones(1024);
        assert_eq!(phi_tilde(&sp, 3, 1e6, 0.3, &h).unwrap(), 0.0);
        // the invariant slope at y lies in every cone
        let y: f64 = 0.3;
        let ell = 0.2 * PI * (2.0 * PI * y).cos();
        let v = phi_tilde(&sp, 4, ell, y, &h).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(phi_tilde(&sp, 1, 0.0, 0.3, &ones(8).scale(Complex::new(-1.0, 0.0))).is_err());
    }

    #[test]
    fn sweep_matches_sampled_slopes() {
        let sp = bundled::tripling_cos::<f64>();
        let h = ones(1024);
        let tree = preimages(&sp, 0.77, 3).unwrap();
        let cones = weighted_cones(&tree, sp.consts().c1, &h);
        let (best, _) = max_stab(&cones);
        let sampled = cones
            .iter()
            .flat_map(|(c, _)| [c.lo(), c.center])
            .map(|l| cones.iter().filter(|(c, _)| c.contains(l)).map(|(_, w)| w).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((best - sampled).abs() < 1e-14);
    }

    #[test]
    fn submultiplicative() {
        let sp = bundled::tripling_cos::<f64>();
        let h = ones(1024);
        for y in [0.0, 0.13, 0.5, 0.71] {
            let c = submultiplicativity_at(&sp, 2, 2, y, &h).unwrap();
            assert!(c.lhs <= c.rhs + 1e-9, "{c:?}");
        }
    }

    #[test]
    fn fit_recovers_exponential() {
        let pts: Vec<(usize, f64)> = (1..8).map(|n| (n, 2.0 * (-0.4 * n as f64).exp())).collect();
        let fit = fit_phi(&pts).unwrap();
        assert!((fit.gamma - 0.4).abs() < 1e-12 && (fit.c_gamma - 2.0).abs() < 1e-12);
    }

    #[test]
    fn word_suffix_relation() {
        let w = BranchWord { symbols: vec![2, 0, 1] };
        assert_eq!(w.suffix(1).symbols, vec![0, 1]);
    }
}

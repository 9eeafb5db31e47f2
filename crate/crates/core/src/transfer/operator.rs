use num_complex::Complex;
use rayon::prelude::*;

use super::grid::{cell_of, linear_stencil, midpoint, GridFunction, Lookup};
use super::TransferError;
use crate::dynamics::{preimages, preimages_once};
use crate::mapspec::SkewProduct;
use crate::scalar::{wrap01, Compensated, Scalar};

/// Single-step preimage data of every cell midpoint: the collocation skeleton of the
/// transfer operator, independent of the twist.
#[derive(Debug, Clone)]
pub struct OneStep<T> {
    cells: usize,
    offsets: Vec<usize>,
    sources: Vec<T>,
    weights: Vec<T>,
    taus: Vec<T>,
    flagged: usize,
}

impl<T: Scalar> OneStep<T> {
    pub fn build(sp: &SkewProduct<T>, cells: usize) -> Result<Self, TransferError> {
        if !cells.is_power_of_two() {
            return Err(TransferError::NotPowerOfTwo(cells));
        }
        let rows: Vec<Vec<(T, T, T, bool)>> = (0..cells)
            .into_par_iter()
            .map(|i| -> Result<_, TransferError> {
                let y = midpoint::<T>(i, cells);
                let mut row = Vec::new();
                for (p, xl, flag) in preimages_once(sp, y)? {
                    let d = sp.eval_piece(p, xl)?.d1;
                    let x = wrap01(xl);
                    row.push((x, T::one() / d.abs(), sp.tau().eval(x)?.value, flag));
                }
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        let mut out = Self {
            cells,
            offsets: Vec::with_capacity(cells + 1),
            sources: Vec::new(),
            weights: Vec::new(),
            taus: Vec::new(),
            flagged: 0,
        };
        out.offsets.push(0);
        for row in rows {
            for (x, w, t, flag) in row {
                out.sources.push(x);
                out.weights.push(w);
                out.taus.push(t);
                out.flagged += usize::from(flag);
            }
            out.offsets.push(out.sources.len());
        }
        Ok(out)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn flagged(&self) -> usize {
        self.flagged
    }

    /// `(x, J(x), tau(x))` for every preimage of midpoint `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (T, T, T)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        r.map(move |k| (self.sources[k], self.weights[k], self.taus[k]))
    }

    pub fn twisted(&self, b: T, lookup: Lookup) -> TwistedOperator<T> {
        let n = self.cells;
        let mut idx = Vec::with_capacity(self.sources.len());
        let mut frac = Vec::with_capacity(self.sources.len());
        let mut coef = Vec::with_capacity(self.sources.len());
        for k in 0..self.sources.len() {
            let x = self.sources[k];
            let (i0, t) = match lookup {
                Lookup::Constant => (cell_of(x, n), T::zero()),
                Lookup::Linear => linear_stencil(x, n),
            };
            idx.push(i0 as u32);
            frac.push(t);
            coef.push(Complex::from_polar(self.weights[k], b * self.taus[k]));
        }
        TwistedOperator { b, cells: n, offsets: self.offsets.clone(), idx, frac, coef }
    }
}

/// The discretized twisted operator `L_b` on an `N`-cell grid.
#[derive(Debug, Clone)]
pub struct TwistedOperator<T> {
    b: T,
    cells: usize,
    offsets: Vec<usize>,
    idx: Vec<u32>,
    frac: Vec<T>,
    coef: Vec<Complex<T>>,
}

impl<T: Scalar> TwistedOperator<T> {
    pub fn b(&self) -> T {
        self.b
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn apply(&self, h: &GridFunction<T>) -> GridFunction<T> {
        assert_eq!(h.len(), self.cells, "grid size mismatch");
        let v = h.values();
        let n = self.cells;
        let out: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in self.offsets[i]..self.offsets[i + 1] {
                    let i0 = self.idx[k] as usize;
                    let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
                    let t = self.frac[k];
                    let hx = v[i0] * (T::one() - t) + v[i1] * t;
                    acc += self.coef[k] * hx;
                }
                acc
            })
            .collect();
        GridFunction::new(out).expect("power-of-two grid")
    }

    pub fn apply_n(&self, h: &GridFunction<T>, n: usize) -> GridFunction<T> {
        let mut cur = h.clone();
        for _ in 0..n {
            cur = self.apply(&cur);
        }
        cur
    }
}

/// `L_b^n h` on the grid of `h` by repeated one-step collocation.
pub fn apply_twisted<T: Scalar>(sp: &SkewProduct<T>, b: T, h: &GridFunction<T>, n: usize) -> Result<GridFunction<T>, TransferError> {
    apply_twisted_with(sp, b, h, n, Lookup::default())
}

pub fn apply_twisted_with<T: Scalar>(
    sp: &SkewProduct<T>,
    b: T,
    h: &GridFunction<T>,
    n: usize,
    lookup: Lookup,
) -> Result<GridFunction<T>, TransferError> {
    let op = OneStep::build(sp, h.len())?.twisted(b, lookup);
    Ok(op.apply_n(h, n))
}

/// `L_b^n g` at the midpoints of a `cells` grid, with `g` evaluated exactly at the
/// depth-`n` preimages instead of being read from a grid.
pub fn apply_twisted_fn<T: Scalar, G>(
    sp: &SkewProduct<T>,
    b: T,
    g: G,
    n: usize,
    cells: usize,
) -> Result<GridFunction<T>, TransferError>
where
    G: Fn(T) -> Complex<T> + Sync,
{
    let vals: Vec<Complex<T>> = (0..cells)
        .into_par_iter()
        .map(|i| -> Result<_, TransferError> {
            let tree = preimages(sp, midpoint::<T>(i, cells), n)?;
            let (mut re, mut im) = (Compensated::default(), Compensated::default());
            for node in &tree.nodes {
                let v = Complex::from_polar(node.j_n, b * node.tau_n) * g(node.x);
                re.add(v.re);
                im.add(v.im);
            }
            Ok(Complex::new(re.value(), im.value()))
        })
        .collect::<Result<_, _>>()?;
    GridFunction::new(vals)
}

pub const DENSITY_TOL: f64 = 1e-12;

/// Invariant density by power iteration of `L_0` from `h = 1`, normalized to unit mass.
pub fn invariant_density<T: Scalar>(sp: &SkewProduct<T>, cells: usize, iters: usize) -> Result<GridFunction<T>, TransferError> {
    let op = OneStep::build(sp, cells)?.twisted(T::zero(), Lookup::Linear);
    invariant_density_with(&op, iters)
}

pub fn invariant_density_with<T: Scalar>(op: &TwistedOperator<T>, iters: usize) -> Result<GridFunction<T>, TransferError> {
    let n = op.cells();
    let mut h = GridFunction::constant(n, Complex::new(T::one(), T::zero()))?;
    let tol = T::attainable_tol(DENSITY_TOL, T::one());
    let mut residual = T::infinity();
    for _ in 0..iters {
        let next = op.apply(&h);
        let mass = next.integral().re;
        let next = next.map(|v| Complex::new(v.re / mass, T::zero()));
        residual = next.zip_with(&h, |a, b| a - b).l1();
        h = next;
        if residual < tol {
            return Ok(h);
        }
    }
    Err(TransferError::NotConverged { iterations: iters, residual: residual.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_step_function(rng: &mut ChaCha8Rng, n: usize) -> GridFunction<f64> {
        let jumps: usize = rng.gen_range(1..12);
        let mut cuts: Vec<f64> = (0..jumps).map(|_| rng.gen()).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let levels: Vec<(f64, f64)> = (0..=jumps).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        GridFunction::from_fn(n, |x| {
            let k = cuts.partition_point(|&c| c <= x);
            Complex::new(levels[k].0, levels[k].1)
        })
        .unwrap()
    }

    #[test]
    fn untwisted_tripling_fixes_constants() {
        let sp = bundled::tripling_cos::<f64>();
        let one = GridFunction::constant(256, Complex::new(1.0, 0.0)).unwrap();
        for lookup in [Lookup::Constant, Lookup::Linear] {
            let out = apply_twisted_with(&sp, 0.0, &one, 1, lookup).unwrap();
            assert!(out.values().iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-15));
        }
    }

    #[test]
    fn mass_conservation_at_zero_twist() {
        let sp = bundled::tripling_cos::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = OneStep::build(&sp, 512).unwrap().twisted(0.0, Lookup::Linear);
        for _ in 0..10 {
            let h = random_step_function(&mut rng, 512);
            assert!((op.apply(&h).integral() - h.integral()).norm() < 1e-12);
        }
    }

    #[test]
    fn l1_non_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for sp in [bundled::tripling_cos::<f64>(), bundled::perturbed::<f64>()] {
            let step = OneStep::build(&sp, 1024).unwrap();
            for b in [0.0, 3.0, 40.0] {
                let op = step.twisted(b, Lookup::Linear);
                for _ in 0..10 {
                    let h = random_step_function(&mut rng, 1024);
                    let bound = h.l1() + 2.0 * h.variation() / 1024.0;
                    // the perturbed map is not exactly mass preserving on the grid
                    assert!(op.apply(&h).l1() <= bound * (1.0 + 1e-3), "b = {b}");
                }
            }
        }
    }

    #[test]
    fn tripling_density_is_lebesgue() {
        let sp = bundled::tripling_cos::<f64>();
        let h = invariant_density(&sp, 1 << 12, 100).unwrap();
        assert!(h.values().iter().all(|v| (v.re - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn equal_slope_four_branches_density() {
        let cfg = crate::mapspec::MapConfig::from_json(
            r#"{"f": {"breakpoints": [0, 0.25, 0.5, 0.75], "branches": ["4*x","4*x","4*x","4*x"]},
                "tau": {"breakpoints": [0], "branches": ["sin(2*pi*x)"]}}"#,
        )
        .unwrap();
        let sp = cfg.build::<f64>().unwrap().into_product();
        let h = invariant_density(&sp, 1 << 10, 100).unwrap();
        assert!(h.values().iter().all(|v| (v.re - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn exact_fn_application_matches_grid_for_smooth_input() {
        let sp = bundled::tripling_cos::<f64>();
        let g = |x: f64| Complex::new((2.0 * std::f64::consts::PI * x).cos(), 0.0);
        let exact = apply_twisted_fn(&sp, 2.0, g, 2, 1 << 12).unwrap();
        let h = GridFunction::from_fn(1 << 12, g).unwrap();
        let grid = apply_twisted(&sp, 2.0, &h, 2).unwrap();
        assert!(exact.zip_with(&grid, |a, b| a - b).sup() < 1e-5);
    }

    #[test]
    fn single_precision_operator() {
        let sp = bundled::tripling_cos::<f32>();
        let one = GridFunction::constant(64, Complex::new(1.0f32, 0.0)).unwrap();
        let out = apply_twisted(&sp, 0.0, &one, 3).unwrap();
        assert!(out.values().iter().all(|v| (v.re - 1.0).abs() < 1e-5));
    }
}

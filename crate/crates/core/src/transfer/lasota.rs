use serde::Serialize;

use super::grid::GridFunction;
use super::operator::{OneStep, TwistedOperator};
use super::TransferError;
use crate::mapspec::SkewProduct;
use crate::scalar::Scalar;

/// Smallest admissible image length of a smoothness piece.
pub const MIN_PIECE_IMAGE: f64 = 1e-9;

/// Constants of the one-step Lasota-Yorke inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyConstants<T> {
    /// `sup 1/|f'|`.
    pub sup_j: T,
    pub sup_dj: T,
    pub sup_tau_j: T,
    /// Bound on the derivative of the chopping functions.
    pub sup_dphi: T,
    pub min_piece_image: T,
    pub c_ly: T,
    /// `max(1, C_LY / (1 - 2 sup_J))`.
    pub c_lambda: T,
}

/// Grid estimates over every smoothness piece of `(f, tau)`.
pub fn ly_constants<T: Scalar>(sp: &SkewProduct<T>) -> Result<LyConstants<T>, TransferError> {
    let f = sp.f();
    let tau = sp.tau();
    let bps = sp.merged_breakpoints();
    let cells = sp.validation_grid().max(1);
    let (mut sup_j, mut sup_dj, mut sup_tau_j) = (T::zero(), T::zero(), T::zero());
    let mut min_img = T::infinity();
    for k in 0..bps.len() {
        let a = bps[k];
        let len = if k + 1 < bps.len() { bps[k + 1] - a } else { bps[0] + T::one() - a };
        let (fi, fa) = f.locate(a);
        let (ti, ta) = tau.locate(a);
        let img = (f.eval_branch(fi, fa + len)?.value - f.eval_branch(fi, fa)?.value).abs();
        min_img = min_img.min(img);
        let step = len / T::from_usize_lossy(cells);
        for s in 0..=cells {
            let dx = if s == cells { len } else { step * T::from_usize_lossy(s) };
            let fj = f.eval_branch(fi, fa + dx)?;
            let tj = tau.eval_branch(ti, ta + dx)?;
            let j = fj.d1.abs().recip();
            sup_j = sup_j.max(j);
            sup_dj = sup_dj.max(fj.d2.abs() * j * j);
            sup_tau_j = sup_tau_j.max(tj.d1.abs() * j);
        }
    }
    if min_img < T::lit(MIN_PIECE_IMAGE) {
        return Err(TransferError::DegenerateImage { length: min_img.as_f64() });
    }
    let sup_dphi = T::lit(2.0) * sup_j / min_img;
    let c_ly = sup_dj + sup_tau_j + sup_dphi;
    let c_lambda = (c_ly / (T::one() - T::lit(2.0) * sup_j)).max(T::one());
    Ok(LyConstants { sup_j, sup_dj, sup_tau_j, sup_dphi, min_piece_image: min_img, c_ly, c_lambda })
}

/// Slack on the right-hand side absorbing discretization error.
pub const LY_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// Checks `|L_b^n h|_BV <= C lambda^-n |h|_BV + C (1 + |b|) |h|_L1` on the grid.
pub fn empirical_ly_check<T: Scalar>(sp: &SkewProduct<T>, b: T, h: &GridFunction<T>, n: usize) -> Result<LyCheck<T>, TransferError> {
    let ly = ly_constants(sp)?;
    let op = OneStep::build(sp, h.len())?.twisted(b, Default::default());
    Ok(ly_check_with(&op, &ly, sp.consts().lambda_tilde, h, n))
}

pub fn ly_check_with<T: Scalar>(op: &TwistedOperator<T>, ly: &LyConstants<T>, lambda: T, h: &GridFunction<T>, n: usize) -> LyCheck<T> {
    let out = op.apply_n(h, n);
    let lhs = out.bv_norm();
    let c = ly.c_lambda;
    let rhs = c * lambda.powi(-(n as i32)) * h.bv_norm() + c * (T::one() + op.b().abs()) * h.l1();
    LyCheck { lhs, rhs, pass: lhs <= T::lit(LY_SLACK) * rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use num_complex::Complex;
    use std::f64::consts::PI;

    #[test]
    fn tripling_constants() {
        let ly = ly_constants(&bundled::tripling_cos::<f64>()).unwrap();
        assert!((ly.sup_j - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ly.sup_dj, 0.0);
        assert!((ly.sup_tau_j - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!((ly.sup_dphi - 2.0 / 3.0).abs() < 1e-12);
        assert!(2.0 * ly.sup_j < 1.0);
    }

    #[test]
    fn constant_density_passes_trivially() {
        let sp = bundled::tripling_cos::<f64>();
        let one = GridFunction::constant(256, Complex::new(1.0, 0.0)).unwrap();
        let c = empirical_ly_check(&sp, 0.0, &one, 1).unwrap();
        assert!(c.lhs < 1.0 + 1e-12 && c.pass);
    }

    #[test]
    fn every_bundled_map_has_contracting_jacobian() {
        for sp in [bundled::tripling_cos::<f64>(), bundled::cohomologous(), bundled::perturbed()] {
            let ly = ly_constants(&sp).unwrap();
            assert!(2.0 * ly.sup_j < 1.0);
            assert!(ly.c_lambda >= 1.0);
        }
    }

    #[test]
    fn variation_grows_at_most_linearly_in_b() {
        let sp = bundled::tripling_cos::<f64>();
        let ly = ly_constants(&sp).unwrap();
        let step = OneStep::build(&sp, 1 << 12).unwrap();
        let h = GridFunction::from_real_fn(1 << 12, |x: f64| if x < 0.3 { 1.0 } else { 0.2 }).unwrap();
        let bs: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
        let vars: Vec<f64> = bs.iter().map(|&b| step.twisted(b, Default::default()).apply(&h).variation()).collect();
        let mb = bs.iter().sum::<f64>() / 10.0;
        let mv = vars.iter().sum::<f64>() / 10.0;
        let slope = bs.iter().zip(&vars).map(|(b, v)| (b - mb) * (v - mv)).sum::<f64>()
            / bs.iter().map(|b| (b - mb).powi(2)).sum::<f64>();
        assert!(slope <= ly.c_ly * h.l1() * 1.05, "slope {slope}");
    }
}

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::GridFunction;
use super::lasota::LyConstants;
use super::operator::TwistedOperator;
use super::TransferError;
use crate::mapspec::SkewProduct;
use crate::scalar::Scalar;

/// Smallest admissible frequency: both time scales are at least one step.
pub const DEFAULT_B0: f64 = 2.0;

/// Decay data of the cone quantity, `phi(n) <= C_gamma e^{-n gamma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiFit<T> {
    pub c_gamma: T,
    pub gamma: T,
}

/// Rate exponents and constants that need the cone decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaChain<T> {
    pub gamma3: T,
    pub gamma4: T,
    pub gamma5: T,
    pub gamma6: T,
    pub gamma7: T,
    pub gamma8: T,
    pub c3: T,
    pub c4: T,
    pub c5: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeConstants<T> {
    pub lambda_tilde: T,
    pub lambda_max: T,
    pub delta: T,
    pub c1: T,
    pub beta: T,
    pub rho1: T,
    pub xi: T,
    pub rho2: T,
    /// `rho1 + rho2`.
    pub rho: T,
    pub b0: T,
    pub n0: usize,
    pub c_lambda: T,
    pub c_beta: T,
    pub c6: T,
    pub c7: T,
    pub c8: T,
    pub phi_fit: Option<PhiFit<T>>,
    pub chain: Option<GammaChain<T>>,
}

fn ceil_usize<T: Scalar>(v: T) -> usize {
    v.ceil().max(T::zero()).to_usize().unwrap_or(0)
}

impl<T: Scalar> SchemeConstants<T> {
    pub fn new(sp: &SkewProduct<T>, ly: &LyConstants<T>, phi_fit: Option<PhiFit<T>>) -> Self {
        let k = sp.consts();
        let lt = k.lambda_tilde;
        let lm = k.lambda_max;
        let two = T::lit(2.0);
        let beta = lt / two;
        let rho1 = two / lt.ln();
        let xi = beta.ln() / (two * lt.ln());
        let rho2 = xi / (two * lm.ln());
        let rho = rho1 + rho2;
        let c_lambda = ly.c_lambda;
        let n0 = ceil_usize((T::lit(4.0) * c_lambda).ln() / lt.ln());
        let c_beta = T::lit(4.0) * lm * beta / (k.delta * lt * (beta - T::one()));
        let c6 = k.sup_d2f / (lt - T::one());
        let c7 = (k.sup_d2tau + k.sup_dtau * c6) / (T::one() - lt.recip());
        let c8 = if k.c1 > T::zero() {
            T::lit(8.0) * c6 * (T::one() + c7 + two * c6) / (k.c1 * k.c1)
        } else {
            T::infinity()
        };
        let chain = phi_fit.map(|fit| {
            let gamma6 = (beta.ln() - two * xi / rho).min((T::one() - xi) / rho);
            let gamma7 = two * xi / (T::lit(3.0) * rho2) - lm.ln();
            let gamma8 = rho1 / rho * fit.gamma.min(gamma7);
            let gamma3 = gamma6.min(gamma8 / two);
            let gamma4 = (xi / (two * rho)).min(gamma3);
            let gamma5 = lt.ln().min(gamma4);
            let c3 = T::lit(6.0) * c_lambda * (c_lambda * fit.c_gamma + c8 * c_lambda * c_lambda).sqrt();
            GammaChain {
                gamma3,
                gamma4,
                gamma5,
                gamma6,
                gamma7,
                gamma8,
                c3,
                c4: T::lit(4.0) * c_lambda + c3,
                c5: T::lit(8.0) * (T::one() + two * c_beta),
            }
        });
        Self {
            lambda_tilde: lt,
            lambda_max: lm,
            delta: k.delta,
            c1: k.c1,
            beta,
            rho1,
            xi,
            rho2,
            rho,
            b0: T::lit(DEFAULT_B0),
            n0,
            c_lambda,
            c_beta,
            c6,
            c7,
            c8,
            phi_fit,
            chain,
        }
    }

    pub fn n1(&self, b: T) -> usize {
        ceil_usize(self.rho1 * b.abs().ln())
    }

    pub fn n2(&self, b: T) -> usize {
        ceil_usize(self.rho2 * b.abs().ln())
    }

    pub fn n_b(&self, b: T) -> usize {
        self.n1(b) + self.n2(b)
    }

    /// Largest `|b|` whose fine partition is resolved by `cells` grid cells.
    pub fn b_max(&self, cells: usize) -> T {
        (T::from_usize_lossy(cells) / T::lit(4.0)).powf(T::one() / (T::one() + self.xi))
    }

    /// `alpha = rho gamma2` for a measured rate.
    pub fn alpha(&self, gamma2: T) -> T {
        self.rho * gamma2
    }
}

/// Number of cells of the fine partition: a power of two with
/// `|H| in [|b|^-(1+xi), 2 |b|^-(1+xi)]`.
pub fn h_partition_count<T: Scalar>(b: T, xi: T) -> usize {
    let target = b.abs().powf(T::one() + xi);
    let k = target.log2().floor().max(T::zero()).to_u32().unwrap_or(0);
    1usize << k
}

/// Number of cells of the coarse partition, `|I| in [|b|^-(1-xi), 2 |b|^-(1-xi)]`.
pub fn i_partition_count<T: Scalar>(b: T, xi: T) -> usize {
    let target = b.abs().powf(T::one() - xi);
    let k = target.log2().floor().max(T::zero()).to_u32().unwrap_or(0);
    1usize << k
}

fn check_resolution<T: Scalar>(cells: usize, b: T, xi: T) -> Result<usize, TransferError> {
    let needed = T::lit(4.0) * b.abs().powf(T::one() + xi);
    if T::from_usize_lossy(cells) < needed {
        return Err(TransferError::GridTooCoarse { cells, needed: needed.ceil().to_usize().unwrap_or(usize::MAX) });
    }
    Ok(h_partition_count(b, xi))
}

/// Average of `h` over each cell of the fine partition.
pub fn hl_average<T: Scalar>(h: &GridFunction<T>, b: T, xi: T) -> Result<GridFunction<T>, TransferError> {
    let m = check_resolution(h.len(), b, xi)?;
    let out = h.block_average(h.len() / m)?;
    debug_assert!(
        out.zip_with(h, |a, c| a - c).l1()
            <= T::lit(2.0) * b.abs().powf(-(T::one() + xi)) * h.bv_norm() * (T::one() + T::lit(1e-12))
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRatio<T> {
    pub probe_id: String,
    pub ratio: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormDecayReport<T> {
    pub b: T,
    pub n_b: usize,
    pub probes: Vec<ProbeRatio<T>>,
    pub max_ratio: T,
    /// `-ln(max_ratio) / n(b)`.
    pub gamma2_est: T,
}

pub const RANDOM_PROBES: usize = 20;

/// Random piecewise constant complex function with a few jumps.
pub fn random_bv_probe<T: Scalar>(rng: &mut ChaCha8Rng, cells: usize) -> GridFunction<T> {
    let jumps: usize = rng.gen_range(1..=16);
    let mut cuts: Vec<f64> = (0..jumps).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let levels: Vec<Complex<T>> = (0..=jumps)
        .map(|_| Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
        .collect();
    GridFunction::from_fn(cells, |x: T| levels[cuts.partition_point(|&c| c <= x.as_f64())]).expect("power-of-two grid")
}

/// Probe estimate of the `(b)`-norm of `L_b^{n(b)}`.
///
/// Probes are the indicators of the fine partition, `RANDOM_PROBES` seeded random
/// step functions, and any `extra` probes supplied by the caller.
pub fn norm_decay_experiment<T: Scalar>(
    op: &TwistedOperator<T>,
    consts: &SchemeConstants<T>,
    seed: u64,
    extra: &[(String, GridFunction<T>)],
) -> Result<NormDecayReport<T>, TransferError> {
    let b = op.b();
    if b.abs() < consts.b0 {
        return Err(TransferError::FrequencyTooSmall { b: b.as_f64(), b0: consts.b0.as_f64() });
    }
    let cells = op.cells();
    let m = check_resolution(cells, b, consts.xi)?;
    let block = cells / m;
    let n_b = consts.n_b(b);
    let mut probes: Vec<(String, GridFunction<T>)> = (0..m)
        .map(|l| {
            let mut v = vec![Complex::new(T::zero(), T::zero()); cells];
            v[l * block..(l + 1) * block].iter_mut().for_each(|c| *c = Complex::new(T::one(), T::zero()));
            (format!("H{l}"), GridFunction::new(v).expect("power-of-two grid"))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..RANDOM_PROBES {
        probes.push((format!("R{r}"), random_bv_probe(&mut rng, cells)));
    }
    probes.extend(extra.iter().cloned());
    let ratios: Vec<ProbeRatio<T>> = probes
        .par_iter()
        .map(|(id, h)| {
            let out = op.apply_n(h, n_b);
            ProbeRatio { probe_id: id.clone(), ratio: out.b_norm(b) / h.b_norm(b) }
        })
        .collect();
    let max_ratio = ratios.iter().map(|p| p.ratio).fold(T::zero(), T::max);
    Ok(NormDecayReport {
        b,
        n_b,
        probes: ratios,
        max_ratio,
        gamma2_est: -max_ratio.ln() / T::from_usize_lossy(n_b),
    })
}

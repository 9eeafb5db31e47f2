use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skewmix_core::correlation::fit_rate;
use skewmix_core::dynamics::preimages;
use skewmix_core::growth::{evolve, PartitionState};
use skewmix_core::oscillatory::{vdc_row, OscillatoryProblem};
use skewmix_core::transfer::{random_bv_probe, OneStep, Lookup};
use skewmix_core::{bundled, Expr, GridFunction};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn preimages_map_forward_to_y(y in 0.0f64..1.0, n in 1usize..6) {
        let sp = bundled::perturbed::<f64>();
        let t = preimages(&sp, y, n).unwrap();
        prop_assert_eq!(t.nodes.len(), 3usize.pow(n as u32));
        for node in &t.nodes {
            let mut x = node.x;
            for _ in 0..n {
                x = sp.step_base(x).unwrap();
            }
            let d = (x - y).abs();
            prop_assert!(d.min(1.0 - d) < 1e-9);
        }
    }

    #[test]
    fn untwisted_operator_keeps_the_integral(seed in any::<u64>()) {
        let sp = bundled::perturbed::<f64>();
        let h: GridFunction<f64> = random_bv_probe(&mut ChaCha8Rng::seed_from_u64(seed), 1 << 10);
        let op = OneStep::build(&sp, 1 << 10).unwrap();
        let out = op.twisted(0.0, Lookup::Linear).apply(&h);
        prop_assert!((out.integral() - h.integral()).norm() < 1e-3 * (1.0 + h.l1()));
        let twisted = op.twisted(37.0, Lookup::Linear).apply(&h);
        let abs = op.twisted(0.0, Lookup::Linear).apply(&h.map(|v| Complex::new(v.norm(), 0.0)));
        prop_assert!(twisted.l1() <= abs.l1() * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_keeps_the_measure(lo in 0.0f64..0.6, frac in 0.05f64..1.0) {
        let sp = bundled::tripling_cos::<f64>();
        let hi = lo + frac * sp.consts().delta;
        let states = evolve(&sp, lo, hi, 4).unwrap();
        for s in &states {
            prop_assert!((s.measure() - (hi - lo)).abs() < 1e-12);
            prop_assert!(s.pieces.iter().all(|p| p.image_len() <= sp.consts().delta * (1.0 + 1e-9)));
        }
        prop_assert!(PartitionState::new(&sp, lo, lo + 1.1 * sp.consts().delta).is_err());
    }

    #[test]
    fn exponential_rates_are_recovered(c in 0.01f64..10.0, zeta in 0.05f64..1.5) {
        let v: Vec<f64> = (0..15).map(|n| c * (-zeta * n as f64).exp() * if n % 2 == 0 { 1.0 } else { -1.0 }).map(f64::abs).collect();
        let fit = fit_rate(&v, (0, 14)).unwrap();
        prop_assert!((fit.zeta - zeta).abs() < 1e-9);
        prop_assert!(fit.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn linear_phase_meets_the_corrected_bound(slope in 0.5f64..3.0, b in 5.0f64..200.0, len in 0.1f64..1.0) {
        let e = |s: String| Expr::parse(&s).unwrap();
        let p = OscillatoryProblem::new(0.0, len, e("1".into()), e("0".into()), e(format!("{slope:?}*x")), b).unwrap();
        let r = vdc_row(0, &p).unwrap();
        prop_assert!(r.pass);
        let exact = 2.0 * (0.5 * b * slope * len).sin().abs() / (b * slope);
        prop_assert!((r.integral_abs - exact).abs() < 1e-9);
    }
}

#[test]
fn single_precision_density() {
    let sp = bundled::tripling_cos::<f32>();
    let h = skewmix_core::transfer::invariant_density(&sp, 1 << 10, 200).unwrap();
    assert!(h.values().iter().all(|v| (v.re - 1.0).abs() < 1e-5));
}

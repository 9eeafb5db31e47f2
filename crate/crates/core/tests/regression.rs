use skewmix_core::cohomology::{cohomology, Verdict, DEFAULT_SERIES_TOL};
use skewmix_core::correlation::correlation_fourier;
use skewmix_core::growth::{growth_bound_check, BoundaryReading};
use skewmix_core::suite::{cos_u_cos_x, regression};
use skewmix_core::{bundled, cones};

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * b.abs()
}

#[test]
fn phi8_of_the_tripling_map() {
    let r = cones::phi(&bundled::tripling_cos::<f64>(), 8, 64).unwrap();
    assert!(close(r.phi, regression::PHI8_TRIPLING, 1e-9), "{}", r.phi);
}

#[test]
fn generic_cohomology_deviation() {
    let r = cohomology(&bundled::tripling_cos::<f64>(), 1 << 12, DEFAULT_SERIES_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::NotCohomologous);
    assert!(close(r.deviation, 2.4450490178099784, 1e-9), "{}", r.deviation);
}

#[test]
fn growth_example_at_depth_ten() {
    let sp = bundled::tripling_cos::<f64>();
    let d = sp.consts().delta;
    let c = growth_bound_check(&sp, (0.0, d / 2.0), 10, 1e-4, BoundaryReading::OwnEndpoints).unwrap();
    assert_eq!(c.pieces, 39370);
    assert!(close(c.lhs, 0.0001333333333336364, 1e-9));
    assert!(close(c.rhs, 0.000603468305979903, 1e-9));
    assert!(c.pass && c.single_interval_bound);
}

#[test]
fn generic_correlation_series() {
    let g = cos_u_cos_x();
    let s = correlation_fourier(&bundled::tripling_cos::<f64>(), &g, &g, 14, 1 << 12).unwrap();
    let frozen = [0.25, 0.150890182313159, 0.07816274521435068, 0.030981537156581765, 0.007158670069667431];
    for (v, f) in s.values.iter().zip(frozen) {
        assert!(close(v.re, f, 1e-9) && v.im.abs() < 1e-14, "{v} vs {f}");
    }
    // sign changes at n = 5 and n = 12
    assert!(s.values[5].re < 0.0 && s.values[8].re > 0.0 && s.values[12].re < 0.0);
    let fit = s.fit((4, 14)).unwrap();
    assert!(close(fit.zeta, 0.4542553716937106, 1e-6));
    assert!(close(fit.r2, 0.6707060325980934, 1e-6));
}

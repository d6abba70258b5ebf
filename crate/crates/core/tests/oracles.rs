//! Frozen reference values. Semigroup values and derivatives were computed
//! with 30-digit arbitrary-precision quadrature of the Bessel transition
//! density, independently of this crate.

use bessel_bel::kernels::{sq_bessel_laplace, BesselDim, ExtReal, DELTA_CRITICAL};
use bessel_bel::semigroup::{apply_kernel, derivative_semigroup, fd_derivative, SemigroupQuery};
use bessel_bel::testfn::TestFunction;
use bessel_bel::verifier::{ou_derivative, p_delta_of};

const IND: TestFunction = TestFunction::Indicator { a: 1.0 };

// (delta, T, x, F, P_T F(x), d/dx P_T F(x))
const TABLE: [(f64, f64, f64, TestFunction, f64, f64); 8] = [
    (0.5, 0.25, 1.0, TestFunction::ExpNegY2, 0.463_924_737_445_444_35, -0.618_566_316_593_925_8),
    (1.0, 1.0, 1.0, TestFunction::ExpNegY2, 0.413_689_545_042_572_57, -0.275_793_030_028_381_71),
    (0.0, 0.5, 0.5, IND, 0.908_471_045_979_199_21, -0.362_733_947_116_957_42),
    (1.5, 1.0, 2.0, TestFunction::Cauchy, 0.250_907_144_740_906_93, -0.167_380_850_310_164_83),
    (3.0, 0.25, 0.25, IND, 0.703_004_543_060_719_42, -0.280_452_807_897_096_6),
    (DELTA_CRITICAL, 1.0, 1.0, IND, 0.519_752_498_503_177_64, -0.369_349_967_984_239_04),
    (0.9, 0.5, 1.0, TestFunction::ExpNegY2, 0.444_006_431_518_865_1, -0.444_006_431_518_865_09),
    (2.0, 0.5, 1.0, TestFunction::ExpNegY2, 0.303_265_329_856_316_71, -0.303_265_329_856_316_71),
];

#[test]
fn semigroup_and_derivative_match_high_precision_table() {
    for (delta, t, x, f, p, d) in TABLE {
        let q = SemigroupQuery::new(BesselDim::new(delta).unwrap(), t, x, f).unwrap();
        let pv = apply_kernel(&q).unwrap();
        let dv = derivative_semigroup(&q).unwrap();
        assert!((pv - p).abs() <= 1e-9, "P delta={delta} T={t} x={x}: {pv} vs {p}");
        assert!((dv - d).abs() <= 1e-8 * d.abs().max(1.0), "dP delta={delta} T={t} x={x}: {dv} vs {d}");
    }
}

#[test]
fn laplace_closed_form_value() {
    // exp(−λx²/(1+2λT))/(1+2λT)^{δ/2} at δ=2, T=0.5, x=1, λ=1.
    let v = sq_bessel_laplace(2.0, 0.5, 1.0, 1.0).unwrap();
    assert!((v - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    assert!((v - 0.303_265_3).abs() < 1e-7);
}

#[test]
fn finite_difference_is_second_order() {
    let q = SemigroupQuery::new(BesselDim::new(1.0).unwrap(), 1.0, 1.0, TestFunction::ExpNegY2).unwrap();
    let exact = derivative_semigroup(&q).unwrap();
    let e1 = (fd_derivative(&q, 2e-2).unwrap() - exact).abs();
    let e2 = (fd_derivative(&q, 1e-2).unwrap() - exact).abs();
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.2, "error ratio {ratio}");
}

#[test]
fn moment_threshold_and_alpha_values() {
    assert_eq!(p_delta_of(0.0), 1.0);
    assert!((p_delta_of(0.5) - 1.125).abs() < 1e-15);
    assert!((p_delta_of(DELTA_CRITICAL) - 2.0).abs() < 1e-12);
    assert_eq!(BesselDim::new(1.0).unwrap().p_threshold(), ExtReal::PosInfinity);
    let a = BesselDim::new(DELTA_CRITICAL).unwrap().alpha_exponent().unwrap();
    assert!((a - 0.646_446_6).abs() < 1e-7, "{a}");
    assert_eq!(BesselDim::new(3.0).unwrap().alpha_exponent(), Some(0.5));
    assert_eq!(BesselDim::new(0.5).unwrap().alpha_exponent(), None);
}

#[test]
fn ornstein_uhlenbeck_derivative() {
    // θ = 1, tanh, x = 0, T = 1; 19-digit Gaussian quadrature.
    let d = ou_derivative(1.0, TestFunction::Tanh, 0.0, 1.0).unwrap();
    assert!((d - 0.275_703_951_852_507_594_5).abs() < 1e-12, "{d}");
}

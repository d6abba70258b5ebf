use bessel_bel::kernels::{sq_bessel_laplace, BesselDim};
use bessel_bel::pathsim::{
    bridge_survival, coupled_flow, par_paths, replay, simulate_path, SamplerConfig, Scheme,
};
use bessel_bel::report::{render, Format, Status, VerificationReport};
use bessel_bel::semigroup::{apply_kernel, derivative_semigroup, fd_derivative, SemigroupQuery};
use bessel_bel::stats::McEstimate;
use bessel_bel::testfn::TestFunction;
use proptest::prelude::*;

fn query(delta: f64, t: f64, x: f64, f: TestFunction) -> SemigroupQuery {
    SemigroupQuery::new(BesselDim::new(delta).unwrap(), t, x, f).unwrap()
}

fn any_f() -> impl Strategy<Value = TestFunction> {
    prop_oneof![
        Just(TestFunction::ExpNegY2),
        Just(TestFunction::Cauchy),
        Just(TestFunction::Tanh),
        (0.2f64..3.0).prop_map(|a| TestFunction::Indicator { a }),
        (0.0f64..3.0).prop_map(|lambda| TestFunction::Laplace { lambda }),
    ]
}

fn any_scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::EulerSqBesselTruncated), Just(Scheme::EulerBoundaryCorrected)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_has_unit_mass(delta in 0.0f64..4.0, x in 0.0f64..3.0, t in 0.05f64..2.0) {
        let m = apply_kernel(&query(delta, t, x, TestFunction::One)).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-10, "mass {m}");
    }

    #[test]
    fn derivative_vanishes_at_origin(delta in 0.0f64..4.0, t in 0.05f64..2.0, f in any_f()) {
        prop_assert_eq!(derivative_semigroup(&query(delta, t, 0.0, f)).unwrap(), 0.0);
    }

    #[test]
    fn kernel_is_ordered_in_dimension_and_start(
        d1 in 0.0f64..3.0, dd in 0.0f64..2.0, x1 in 0.0f64..2.0, dx in 0.0f64..1.0, t in 0.1f64..2.0,
    ) {
        // tanh is nondecreasing on [0, ∞).
        let f = TestFunction::Tanh;
        let low = apply_kernel(&query(d1, t, x1, f)).unwrap();
        let up_dim = apply_kernel(&query(d1 + dd, t, x1, f)).unwrap();
        let up_start = apply_kernel(&query(d1, t, x1 + dx, f)).unwrap();
        prop_assert!(low <= up_dim + 1e-9, "{low} > {up_dim}");
        prop_assert!(low <= up_start + 1e-9, "{low} > {up_start}");
    }

    #[test]
    fn quadrature_matches_laplace_transform(
        delta in 0.0f64..4.0, x in 0.0f64..2.5, t in 0.1f64..2.0, lambda in 0.0f64..3.0,
    ) {
        let q = query(delta, t, x, TestFunction::Laplace { lambda });
        let v = apply_kernel(&q).unwrap();
        let closed = sq_bessel_laplace(delta, t, x * x, lambda).unwrap();
        prop_assert!((v - closed).abs() <= 1e-8, "{v} vs {closed}");
    }

    #[test]
    fn derivative_agrees_with_finite_difference(
        delta in 0.0f64..4.0, x in 0.2f64..2.5, t in 0.2f64..2.0, f in any_f(),
    ) {
        let q = query(delta, t, x, f);
        let a = derivative_semigroup(&q).unwrap();
        let fd = fd_derivative(&q, 1e-4).unwrap();
        prop_assert!((a - fd).abs() <= 1e-6 * a.abs() + 1e-8, "{a} vs {fd}");
    }

    #[test]
    fn bridge_survival_is_a_probability(delta in 0.0f64..3.0, z1 in 0.0f64..60.0, dz in 0.0f64..10.0) {
        let s1 = bridge_survival(delta, z1);
        let s2 = bridge_survival(delta, z1 + dz);
        prop_assert!((0.0..=1.0).contains(&s1));
        prop_assert!(s2 >= s1 - 1e-12, "{s1} then {s2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_processes_stay_in_range(
        delta in 0.0f64..3.5, x in 0.05f64..2.0, seed in any::<u64>(), scheme in any_scheme(),
    ) {
        let cfg = SamplerConfig::new(1e-2, seed).with_scheme(scheme);
        let p = simulate_path(delta, x, 1.0, &cfg, &mut cfg.rng(0)).unwrap();
        prop_assert_eq!(p.d_vals[0], x);
        for k in 0..p.len() {
            prop_assert!(p.rho[k] >= 0.0 && p.d_vals[k] >= 0.0 && p.eta[k] >= 0.0);
            if delta >= 1.0 {
                prop_assert!(p.eta[k] <= 1.0 + 1e-15);
            }
            if k > 0 {
                prop_assert!(p.a_vals[k] >= p.a_vals[k - 1]);
            }
            if let Some(t0) = p.t0_index {
                if k >= t0 {
                    prop_assert_eq!(p.d_vals[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn paths_are_reproducible(delta in 0.0f64..3.0, x in 0.1f64..2.0, seed in any::<u64>(), index in 0u64..1000) {
        let cfg = SamplerConfig::new(1e-2, seed);
        let a = simulate_path(delta, x, 0.5, &cfg, &mut cfg.rng(index)).unwrap();
        let b = simulate_path(delta, x, 0.5, &cfg, &mut cfg.rng(index)).unwrap();
        prop_assert_eq!(&a, &b);
        let again = replay(&a, x, cfg.rho_floor);
        prop_assert_eq!(&again.rho, &a.rho);
        prop_assert_eq!(&again.d_vals, &a.d_vals);
    }

    #[test]
    fn coupled_flows_are_ordered(
        delta in 0.0f64..3.0, x in 0.05f64..2.0, gap in 1e-3f64..1.0, seed in any::<u64>(),
    ) {
        // Plain Euler is not order preserving near the origin; the default scheme is.
        let cfg = SamplerConfig::new(1e-2, seed);
        let (_, _, diag) = coupled_flow(delta, x, x + gap, 1.0, &cfg, &mut cfg.rng(0)).unwrap();
        prop_assert_eq!(diag.monotonicity_violations, 0);
        if let Some(g) = diag.post_meeting_max_gap {
            prop_assert!(g <= cfg.rho_floor);
        }
    }

    #[test]
    fn reports_round_trip_bit_exactly(
        mean in prop::num::f64::ANY, se in prop::num::f64::ANY, a in prop::num::f64::ANY, n in any::<u64>(), passed in any::<bool>(),
    ) {
        let mut r = VerificationReport::new("case, with \"quotes\"", "tol")
            .input("delta", a)
            .input("x", 1.0 / 3.0);
        r.analytic = Some(a);
        r.mc = Some(McEstimate { mean, std_error: se, n, seed: n ^ 1 });
        r.set_status(if passed { Status::Pass } else { Status::Inconclusive });
        let line = r.to_json_line().unwrap();
        let back = VerificationReport::from_json_line(&line).unwrap();
        prop_assert_eq!(back.to_json_line().unwrap(), line);
        let bits = |v: f64| if v.is_nan() { u64::MAX } else { v.to_bits() };
        prop_assert_eq!(bits(back.analytic.unwrap()), bits(a));
        prop_assert_eq!(bits(back.mc.unwrap().mean), bits(mean));
        prop_assert_eq!(bits(back.mc.unwrap().std_error), bits(se));
        let csv = render(&[r], Format::Csv).unwrap();
        prop_assert_eq!(csv.lines().count(), 2);
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = SamplerConfig::new(1e-2, 99);
    let run = || par_paths(64, |i| simulate_path(0.5, 1.0, 1.0, &cfg, &mut cfg.rng(i)).unwrap().d_vals[100]);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    assert_eq!(one, three);
}

#[test]
fn empty_report_is_header_only() {
    let csv = render(&[], Format::Csv).unwrap();
    assert_eq!(csv, "name,delta,x,T,n,dt,analytic,oracle,mc_mean,mc_se,passed\n");
    let mut r = VerificationReport::new("one", "tol");
    r.set_passed(true);
    let csv = render(&[r], Format::Csv).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn plain_euler_can_cross_near_the_origin() {
    let cfg = SamplerConfig::new(1e-2, 17_396_272_076_323_124_868).with_scheme(Scheme::EulerSqBesselTruncated);
    let x = 0.126_888_270_812_542_56;
    let (_, _, diag) = coupled_flow(0.761_613_255_990_019_8, x, x + 0.304_613_420_917_424_77, 1.0, &cfg, &mut cfg.rng(0)).unwrap();
    assert!(diag.monotonicity_violations > 0);
}

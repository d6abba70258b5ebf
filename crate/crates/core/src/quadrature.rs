//! Globally adaptive Gauss–Kronrod (7/15 → 10/21) quadrature over a list of panels.
//!
//! Each panel may carry its own integrand, which lets callers apply a change
//! of variables on one panel only (used to flatten the `y^{δ−1}` singularity
//! of the Bessel density at the origin).

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

pub type Integrand<'a> = &'a dyn Fn(f64) -> Result<f64>;

/// One integration panel `[a, b]` with its integrand.
pub struct Panel<'a> {
    pub a: f64,
    pub b: f64,
    pub f: Integrand<'a>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadLimits {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadLimits {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    panel: usize,
    value: f64,
    error: f64,
    splittable: bool,
}

fn gk21(f: Integrand, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg += WG[j] * (f1 + f2);
        resk += WGK[jtw] * (f1 + f2);
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk += WGK[jtwm1] * (f1 + f2);
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !result.is_finite() || !err.is_finite() {
        return Err(Error::Invalid(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((result, err))
}

/// Integrate over the union of `panels`, bisecting the worst piece until the
/// summed error estimate is within `max(abs_tol, rel_tol·|value|)`.
pub fn integrate_panels(panels: &[Panel], limits: QuadLimits) -> Result<QuadOutcome> {
    let mut pieces = Vec::with_capacity(64);
    let mut evaluations = 0usize;
    for (i, p) in panels.iter().enumerate() {
        if !(p.b > p.a) {
            continue;
        }
        let (value, error) = gk21(p.f, p.a, p.b)?;
        evaluations += 21;
        pieces.push(Piece {
            a: p.a,
            b: p.b,
            panel: i,
            value,
            error,
            splittable: true,
        });
    }
    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        let target = limits.abs_tol.max(limits.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadOutcome {
                value,
                abs_error: error,
                intervals: pieces.len(),
                evaluations,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
            .map(|(i, _)| i);
        let Some(w) = worst else {
            return Err(Error::QuadratureNotConverged {
                value,
                achieved: error,
                requested: target,
            });
        };
        if pieces.len() >= limits.max_intervals {
            return Err(Error::QuadratureNotConverged {
                value,
                achieved: error,
                requested: target,
            });
        }
        let (a, b, panel) = (pieces[w].a, pieces[w].b, pieces[w].panel);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) || (b - a) <= 1e3 * f64::EPSILON * a.abs().max(b.abs()) {
            pieces[w].splittable = false;
            continue;
        }
        let f = panels[panel].f;
        let (v1, e1) = gk21(f, a, mid)?;
        let (v2, e2) = gk21(f, mid, b)?;
        evaluations += 42;
        pieces[w] = Piece {
            a,
            b: mid,
            panel,
            value: v1,
            error: e1,
            splittable: true,
        };
        pieces.push(Piece {
            a: mid,
            b,
            panel,
            value: v2,
            error: e2,
            splittable: true,
        });
    }
}

/// Integrate a single function over `[a, b]` split at the given interior points.
pub fn integrate(
    f: Integrand,
    a: f64,
    b: f64,
    interior: &[f64],
    limits: QuadLimits,
) -> Result<QuadOutcome> {
    let mut cuts = vec![a];
    cuts.extend(interior.iter().copied().filter(|&c| c > a && c < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let panels: Vec<Panel> = cuts
        .windows(2)
        .map(|w| Panel { a: w[0], b: w[1], f })
        .collect();
    integrate_panels(&panels, limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| Ok(x.powi(18) - 3.0 * x.powi(7) + 1.0);
        let r = integrate(&f, -1.0, 2.0, &[], QuadLimits::default()).unwrap();
        let exact = (2f64.powi(19) + 1.0) / 19.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0 + 3.0;
        assert!((r.value - exact).abs() < 1e-9 * exact.abs());
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn sqrt_singularity_converges() {
        let f = |x: f64| Ok(1.0 / x.sqrt());
        let r = integrate(&f, 0.0, 1.0, &[], QuadLimits::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn jump_with_breakpoint() {
        let f = |x: f64| Ok(if x < 0.3 { 1.0 } else { 0.0 });
        let r = integrate(&f, 0.0, 1.0, &[0.3], QuadLimits::default()).unwrap();
        assert!((r.value - 0.3).abs() < 1e-14);
    }

    #[test]
    fn failure_reports_achieved_error() {
        let f = |x: f64| Ok((1.0 / x).sin() / x);
        let limits = QuadLimits {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_intervals: 20,
        };
        match integrate(&f, 1e-6, 1.0, &[], limits) {
            Err(Error::QuadratureNotConverged { achieved, .. }) => assert!(achieved > 1e-14),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn integrand_errors_propagate() {
        let f = |_x: f64| Err(Error::Invalid("boom".into()));
        assert!(integrate(&f, 0.0, 1.0, &[], QuadLimits::default()).is_err());
    }
}

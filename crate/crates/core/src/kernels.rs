//! Special functions and closed-form kernels of the Bessel semigroup.
//!
//! Everything here is a pure function. Densities are assembled in log
//! space and exponentiated last, so large `xy/T` does not overflow `I_ν`
//! and the Gaussian factor does not underflow first.

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

/// `2(√2 − 1)`: the smallest dimension for which `D_T` is square integrable.
pub const DELTA_CRITICAL: f64 = 0.828_427_124_746_190_1;

/// Hard cap on the number of power-series terms in [`log_bessel_i`].
pub const MAX_SERIES_TERMS: usize = 500;

const SERIES_REL_TOL: f64 = 1e-16;
const LN_F64_MAX: f64 = 709.782_712_893_384;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Real number or `+∞`, kept as a distinct variant rather than a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// `f64` view; the sentinel maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInfinity => f64::INFINITY,
        }
    }
}

/// Dimension `δ` of a Bessel process together with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselDim {
    delta: f64,
    nu: f64,
    p_threshold: ExtReal,
    alpha_exponent: Option<f64>,
}

impl BesselDim {
    pub fn new(delta: f64) -> Result<Self> {
        check_domain("delta", delta, delta >= 0.0 && delta.is_finite(), "delta >= 0")?;
        let p_threshold = if delta < 1.0 {
            ExtReal::Finite((2.0 - delta).powi(2) / (4.0 * (1.0 - delta)))
        } else {
            ExtReal::PosInfinity
        };
        let alpha_exponent = if delta >= 1.0 {
            Some(0.5)
        } else if delta >= DELTA_CRITICAL {
            Some(alpha_formula(delta))
        } else {
            None
        };
        Ok(Self {
            delta,
            nu: delta / 2.0 - 1.0,
            p_threshold,
            alpha_exponent,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Bessel index `ν = δ/2 − 1`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Sharp integrability exponent `p(δ)` of `D_T`.
    pub fn p_threshold(&self) -> ExtReal {
        self.p_threshold
    }

    /// Exponent `α(δ)` of the improved strong Feller modulus; `None` below `2(√2 − 1)`.
    pub fn alpha_exponent(&self) -> Option<f64> {
        self.alpha_exponent
    }

    /// `α` formula continued below `2(√2 − 1)`, where no bound is known. Exploratory use only.
    pub fn alpha_extrapolated(&self) -> f64 {
        if self.delta >= 1.0 {
            0.5
        } else {
            alpha_formula(self.delta)
        }
    }

    /// Same dimension shifted by `k`, e.g. `δ + 2` in the derivative identity.
    pub fn shifted(&self, k: f64) -> Result<Self> {
        Self::new(self.delta + k)
    }
}

fn alpha_formula(delta: f64) -> f64 {
    0.5 + (1.0 - delta) / (2.0 - delta)
}

/// Coefficients `ζ(k)` for `k = 2..=30`, used in the expansion of `ln Γ(1 + ε)`.
const ZETA: [f64; 29] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_370_0,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
    1.000_494_188_604_119_5,
    1.000_246_086_553_308_0,
    1.000_122_713_347_578_5,
    1.000_061_248_135_058_7,
    1.000_030_588_236_307_0,
    1.000_015_282_259_408_7,
    1.000_007_637_197_637_9,
    1.000_003_817_293_265_0,
    1.000_001_908_212_716_6,
    1.000_000_953_962_033_9,
    1.000_000_476_932_986_8,
    1.000_000_238_450_502_7,
    1.000_000_119_219_926_0,
    1.000_000_059_608_189_1,
    1.000_000_029_803_503_5,
    1.000_000_014_901_554_8,
    1.000_000_007_450_711_8,
    1.000_000_003_725_334_0,
    1.000_000_001_862_659_7,
    1.000_000_000_931_327_4,
];

/// `ln Γ(1 + ε)` for `|ε| ≤ 1/4`, relative accuracy near the zero at `ε = 0`.
fn log_gamma_1p(eps: f64) -> f64 {
    // ln Γ(1+ε) = −γε + Σ_{k≥2} (−1)^k ζ(k) ε^k / k
    let mut acc = 0.0;
    for (i, z) in ZETA.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        let sign = if (i + 2) % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc * eps + sign * z / k;
    }
    eps * (-EULER_GAMMA + eps * acc)
}

/// Stirling series, accurate to well below 1e−16 relative for `z ≥ 15`.
fn log_gamma_stirling(z: f64) -> f64 {
    // B_{2k} / (2k(2k−1)) for k = 1..=8
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let w = 1.0 / (z * z);
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * w + c;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series / z
}

/// `ln Γ(z)` for `z > 0`.
///
/// Stirling series for `z ≥ 15`, upward recurrence below that, and a Taylor
/// expansion in `ε` around the zeros at `z = 1` and `z = 2`, so the relative
/// error stays near machine precision there.
pub fn log_gamma(z: f64) -> Result<f64> {
    check_domain("z", z, z > 0.0 && z.is_finite(), "z > 0")?;
    Ok(log_gamma_unchecked(z))
}

pub(crate) fn log_gamma_unchecked(z: f64) -> f64 {
    if (z - 1.0).abs() <= 0.25 {
        return log_gamma_1p(z - 1.0);
    }
    if (z - 2.0).abs() <= 0.25 {
        let eps = z - 2.0;
        return log_gamma_1p(eps) + eps.ln_1p();
    }
    if z < 0.75 {
        return log_gamma_unchecked(z + 1.0) - z.ln();
    }
    if z >= 15.0 {
        return log_gamma_stirling(z);
    }
    let mut prod = 1.0;
    let mut w = z;
    while w < 15.0 {
        prod *= w;
        w += 1.0;
    }
    log_gamma_stirling(w) - prod.ln()
}

/// `ln I_ν(z)` by the power series, summed outward from its largest term.
///
/// Returns `-∞` where `I_ν(z) = 0` and `+∞` at the pole `z = 0`, `-1 < ν < 0`.
pub fn log_bessel_i(nu: f64, z: f64) -> Result<f64> {
    check_domain("nu", nu, nu >= -1.0 && nu.is_finite(), "nu >= -1")?;
    check_domain("z", z, z >= 0.0 && z.is_finite(), "z >= 0")?;
    if nu == -1.0 {
        // I_{-1} = I_1; the k = 0 term has 1/Γ(0) = 0.
        return log_bessel_i(1.0, z);
    }
    if z == 0.0 {
        return Ok(if nu == 0.0 {
            0.0
        } else if nu > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    let q = 0.25 * z * z;
    // Largest term: first k with t_{k+1}/t_k = q/((k+1)(k+ν+1)) < 1.
    let root = 0.5 * (-(nu + 2.0) + (nu * nu + 4.0 * q).sqrt());
    let peak = if root > 0.0 { root.ceil() } else { 0.0 };
    if peak >= MAX_SERIES_TERMS as f64 {
        return Err(Error::SeriesNotConverged {
            nu,
            z,
            terms: MAX_SERIES_TERMS,
        });
    }
    let peak_k = peak as usize;
    let log_peak = (2.0 * peak + nu) * (0.5 * z).ln()
        - log_gamma_unchecked(peak + 1.0)
        - log_gamma_unchecked(peak + nu + 1.0);

    let mut sum = 1.0;
    let mut terms = 1usize;
    let mut t = 1.0;
    let mut k = peak;
    loop {
        t *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += t;
        terms += 1;
        k += 1.0;
        if t < SERIES_REL_TOL * sum {
            break;
        }
        if terms >= MAX_SERIES_TERMS {
            return Err(Error::SeriesNotConverged { nu, z, terms });
        }
    }
    let mut t = 1.0;
    for k in (1..=peak_k).rev() {
        let kf = k as f64;
        t *= kf * (kf + nu) / q;
        sum += t;
        terms += 1;
        if t < SERIES_REL_TOL * sum {
            break;
        }
        if terms >= MAX_SERIES_TERMS {
            return Err(Error::SeriesNotConverged { nu, z, terms });
        }
    }
    Ok(log_peak + sum.ln())
}

/// `I_ν(z)` for `ν ≥ −1`, `z ≥ 0`. Signals [`Error::Overflow`] instead of returning `inf`.
pub fn bessel_i_series(nu: f64, z: f64) -> Result<f64> {
    let l = log_bessel_i(nu, z)?;
    if l > LN_F64_MAX && l.is_finite() {
        return Err(Error::Overflow {
            nu,
            z,
            log_value: l,
        });
    }
    Ok(l.exp())
}

/// Evaluation point of a transition density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityQuery {
    pub dim: BesselDim,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl DensityQuery {
    pub fn new(dim: BesselDim, t: f64, x: f64, y: f64) -> Result<Self> {
        check_domain("T", t, t > 0.0 && t.is_finite(), "T > 0")?;
        check_domain("x", x, x >= 0.0 && x.is_finite(), "x >= 0")?;
        check_domain("y", y, y >= 0.0 && y.is_finite(), "y >= 0")?;
        Ok(Self { dim, t, x, y })
    }
}

/// `ln p^δ_T(x, y)` for `δ > 0`.
pub fn log_transition_density(q: &DensityQuery) -> Result<f64> {
    let delta = q.dim.delta();
    check_domain("delta", delta, delta > 0.0, "delta > 0; use kernel_atom_delta0 for delta = 0")?;
    check_domain("T", q.t, q.t > 0.0, "T > 0")?;
    let nu = q.dim.nu();
    let (t, x, y) = (q.t, q.x, q.y);
    if y == 0.0 {
        // p ∝ y^{δ−1} near the origin.
        return Ok(if delta < 1.0 {
            f64::INFINITY
        } else if delta > 1.0 {
            f64::NEG_INFINITY
        } else {
            0.5 * (2.0 / (std::f64::consts::PI * t)).ln() - x * x / (2.0 * t)
        });
    }
    if x == 0.0 {
        return Ok(-nu * std::f64::consts::LN_2 - (nu + 1.0) * t.ln()
            - log_gamma_unchecked(nu + 1.0)
            + (2.0 * nu + 1.0) * y.ln()
            - y * y / (2.0 * t));
    }
    let li = log_bessel_i(nu, x * y / t)?;
    Ok(-t.ln() + nu * (y.ln() - x.ln()) + y.ln() - (x * x + y * y) / (2.0 * t) + li)
}

/// Transition density `p^δ_T(x, y)` of the Bessel process for `δ > 0`.
pub fn transition_density(q: &DensityQuery) -> Result<f64> {
    Ok(log_transition_density(q)?.exp())
}

/// Law of `ρ_T` for `δ = 0`: an atom at the origin plus a density on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta0Kernel {
    pub t: f64,
    pub x: f64,
    pub atom_mass: f64,
}

impl Delta0Kernel {
    /// `(1/T) exp(−(x²+y²)/2T) · x · I₁(xy/T)`, identically 0 when `x = 0`.
    pub fn density(&self, y: f64) -> Result<f64> {
        check_domain("y", y, y >= 0.0 && y.is_finite(), "y >= 0")?;
        if self.x == 0.0 || y == 0.0 {
            return Ok(0.0);
        }
        let (t, x) = (self.t, self.x);
        let li = log_bessel_i(1.0, x * y / t)?;
        Ok((-t.ln() - (x * x + y * y) / (2.0 * t) + x.ln() + li).exp())
    }
}

/// `δ = 0` kernel: atom `exp(−x²/2T)` at 0 and the absolutely continuous part.
pub fn kernel_atom_delta0(t: f64, x: f64) -> Result<Delta0Kernel> {
    check_domain("T", t, t > 0.0 && t.is_finite(), "T > 0")?;
    check_domain("x", x, x >= 0.0 && x.is_finite(), "x >= 0")?;
    Ok(Delta0Kernel {
        t,
        x,
        atom_mass: (-x * x / (2.0 * t)).exp(),
    })
}

/// Laplace transform `E[exp(−λ X_T)]` of the squared Bessel process started at `z`.
pub fn sq_bessel_laplace(delta: f64, t: f64, z: f64, lambda: f64) -> Result<f64> {
    check_domain("delta", delta, delta >= 0.0 && delta.is_finite(), "delta >= 0")?;
    check_domain("T", t, t > 0.0 && t.is_finite(), "T > 0")?;
    check_domain("z", z, z >= 0.0 && z.is_finite(), "z >= 0")?;
    check_domain("lambda", lambda, lambda >= 0.0 && lambda.is_finite(), "lambda >= 0")?;
    let s = 1.0 + 2.0 * lambda * t;
    Ok((-lambda * z / s - 0.5 * delta * s.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn log_gamma_matches_high_precision_values() {
        // Reference values are taken at the f64 nearest each decimal input.
        let cases = [
            (0.001, 6.907_178_885_383_853_682_5),
            (0.5, 0.572_364_942_924_700_087_07),
            (1.5, -0.120_782_237_635_245_222_35),
            (2.5, 0.284_682_870_472_919_159_63),
            (5.0, 3.178_053_830_347_945_619_6),
            (10.3, 13.482_036_786_138_358_593),
            (0.999_999, 5.772_164_873_855_652_379_4e-7),
            (1.000_001, -5.772_148_423_874_146_650_6e-7),
            (2.000_000_1, 4.227_843_666_532_497_923_2e-8),
            (170.0, 701.437_263_808_737_085_35),
            (100.5, 361.435_540_467_777_621_56),
            (3.7, 1.428_072_326_665_388_129_2),
        ];
        for (z, want) in cases {
            let got = log_gamma(z).unwrap();
            assert!(rel(got, want) < 1e-13, "lnΓ({z}) = {got}, want {want}");
        }
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn bessel_i_matches_high_precision_values() {
        let zs = [0.1, 1.0, 5.0, 10.0, 50.0, 200.0];
        let table: [(f64, [f64; 6]); 7] = [
            (-0.5, [2.535_758_701_187_412_504, 1.231_200_214_592_967_446_5, 26.479_951_764_305_950_72, 2_778.784_615_329_574_952_1, 2.925_156_852_991_290_042e20, 2.038_409_565_482_938_863_2e85]),
            (0.0, [1.002_501_562_934_095_601_4, 1.266_065_877_752_008_335_6, 27.239_871_823_604_446_895, 2_815.716_628_466_254_471_5, 2.932_553_783_849_336_326_7e20, 2.039_687_173_409_724_619_5e85]),
            (0.5, [0.252_733_984_600_131_973_44, 0.937_674_888_245_487_646_72, 26.477_547_497_559_065_205, 2_778.784_603_874_571_024, 2.925_156_852_991_290_042e20, 2.038_409_565_482_938_863_2e85]),
            (1.0, [0.050_062_526_047_092_692_114, 0.565_159_103_992_485_027_21, 24.335_642_142_450_527_199, 2_670.988_303_701_254_654_3, 2.903_078_590_103_556_796_8e20, 2.034_581_549_332_062_703_4e85]),
            (3.0, [2.084_635_742_232_715_263_8e-5, 0.022_168_424_924_331_902_476, 10.331_150_169_151_138_387, 1_758.380_716_610_853_238_1, 2.677_764_138_883_941_272_4e20, 1.994_194_722_173_734_623_6e85]),
            (-0.75, [2.634_614_617_106_385_344_1, 0.975_867_537_399_708_155_22, 25.561_801_223_062_280_426, 2_733.328_558_385_658_673_7, 2.915_937_102_950_012_59e20, 2.036_813_682_775_809_123_5e85]),
            (2.5, [1.683_290_173_488_853_281_4e-4, 0.057_098_909_203_048_247_351, 13.766_882_138_682_582_598, 2_028.512_757_391_935_669_1, 2.753_157_630_035_402_187_5e20, 2.007_986_302_718_106_000_6e85]),
        ];
        for (nu, row) in table {
            for (z, want) in zs.iter().zip(row) {
                let got = bessel_i_series(nu, *z).unwrap();
                assert!(rel(got, want) < 1e-12, "I_{nu}({z}) = {got}, want {want}");
            }
        }
        for (z, want) in zs.iter().zip(table[3].1) {
            assert!(rel(bessel_i_series(-1.0, *z).unwrap(), want) < 1e-12);
        }
    }

    #[test]
    fn bessel_i_at_zero() {
        assert_eq!(bessel_i_series(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_series(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i_series(2.5, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i_series(-1.0, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i_series(-0.5, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bessel_i_agrees_with_plain_thirty_term_sum() {
        for nu in [-0.5, 0.0, 0.5, 1.0, 3.0] {
            for i in 0..=40 {
                let z = 0.25 * i as f64;
                let mut s = 0.0;
                for k in 0..30 {
                    let kf = k as f64;
                    let g = log_gamma(kf + nu + 1.0).unwrap();
                    let lf = log_gamma(kf + 1.0).unwrap();
                    if z > 0.0 {
                        s += ((2.0 * kf + nu) * (z / 2.0).ln() - lf - g).exp();
                    } else if k == 0 && nu == 0.0 {
                        s += 1.0;
                    }
                }
                if z == 0.0 && nu < 0.0 {
                    continue;
                }
                let got = bessel_i_series(nu, z).unwrap();
                assert!(rel(got, s) < 1e-12, "nu={nu} z={z}: {got} vs {s}");
            }
        }
    }

    #[test]
    fn bessel_i_signals_overflow_and_cap() {
        assert!(matches!(bessel_i_series(0.0, 800.0), Err(Error::Overflow { .. })));
        assert!(matches!(log_bessel_i(0.0, 5000.0), Err(Error::SeriesNotConverged { .. })));
        assert!(log_bessel_i(0.0, 800.0).unwrap().is_finite());
        assert!(log_bessel_i(-1.5, 1.0).is_err());
    }

    #[test]
    fn densities_match_high_precision_values() {
        let cases = [
            (2.0, 1.0, 0.0, 1.0, 0.606_530_659_712_633_423_6),
            (2.0, 1.0, 1.0, 1.0, 0.465_759_607_593_640_436_5),
            (0.5, 1.0, 1.0, 0.3, 0.535_661_569_200_477_264_33),
            (0.5, 0.1, 3.0, 3.2, 1.014_690_070_669_311_291_8),
            (3.0, 0.25, 2.0, 1.5, 0.362_956_086_765_012_944_08),
            (1.0, 1.0, 1.0, 0.5, 0.481_582_922_430_191_205_39),
            (1.5, 1.0, 0.25, 0.7, 0.622_256_480_790_040_337_84),
            (4.0, 0.5, 1.0, 1.0, 0.430_538_578_497_875_318_32),
        ];
        for (d, t, x, y, want) in cases {
            let q = DensityQuery::new(BesselDim::new(d).unwrap(), t, x, y).unwrap();
            let got = transition_density(&q).unwrap();
            assert!(rel(got, want) < 1e-12, "p({d},{t},{x},{y}) = {got}, want {want}");
        }
    }

    #[test]
    fn density_boundary_at_y_zero() {
        let t = 0.7;
        let x = 0.4;
        let at = |d: f64, y: f64| {
            transition_density(&DensityQuery::new(BesselDim::new(d).unwrap(), t, x, y).unwrap())
                .unwrap()
        };
        assert_eq!(at(0.5, 0.0), f64::INFINITY);
        assert_eq!(at(1.5, 0.0), 0.0);
        assert!(rel(at(1.0, 0.0), at(1.0, 1e-9)) < 1e-8);
    }

    #[test]
    fn small_x_density_approaches_boundary_formula() {
        for d in [0.5, 1.0, 2.0, 3.0] {
            let dim = BesselDim::new(d).unwrap();
            let at0 = transition_density(&DensityQuery::new(dim, 1.0, 0.0, 0.8).unwrap()).unwrap();
            let near = transition_density(&DensityQuery::new(dim, 1.0, 1e-7, 0.8).unwrap()).unwrap();
            assert!(rel(near, at0) < 1e-10, "delta={d}: {near} vs {at0}");
        }
    }

    #[test]
    fn density_requires_positive_delta() {
        let q = DensityQuery::new(BesselDim::new(0.0).unwrap(), 1.0, 1.0, 1.0).unwrap();
        assert!(transition_density(&q).is_err());
        assert!(DensityQuery::new(BesselDim::new(1.0).unwrap(), 0.0, 1.0, 1.0).is_err());
        assert!(DensityQuery::new(BesselDim::new(1.0).unwrap(), 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn delta0_kernel_values_and_series_form() {
        let k = kernel_atom_delta0(1.0, 1.0).unwrap();
        assert!(rel(k.atom_mass, 0.606_530_659_712_633_4) < 1e-15);
        let want = 0.176_544_038_491_348_401_34;
        assert!(rel(k.density(0.7).unwrap(), want) < 1e-13);

        // Explicit series Σ x^{2k+2} y^{2k+1} / ((2T)^{2k+1} k! (k+1)!) times the Gaussian factor.
        for (t, x, y) in [(1.0, 1.0, 0.7), (0.3, 2.0, 1.1), (2.0, 0.5, 3.0)] {
            let k = kernel_atom_delta0(t, x).unwrap();
            let mut s = 0.0;
            let mut term = x * x * y / (2.0 * t);
            for j in 0..60 {
                s += term;
                let jf = j as f64;
                term *= (x * y / (2.0 * t)).powi(2) / ((jf + 1.0) * (jf + 2.0));
            }
            let series = s * (-(x * x + y * y) / (2.0 * t)).exp() / t;
            assert!(rel(k.density(y).unwrap(), series) < 1e-13);
        }

        let k0 = kernel_atom_delta0(0.5, 0.0).unwrap();
        assert_eq!(k0.atom_mass, 1.0);
        assert_eq!(k0.density(1.3).unwrap(), 0.0);
        assert!(kernel_atom_delta0(0.0, 1.0).is_err());
    }

    #[test]
    fn laplace_closed_form() {
        assert!(rel(sq_bessel_laplace(2.0, 0.5, 1.0, 1.0).unwrap(), 0.303_265_329_856_316_711_8) < 1e-15);
        assert_eq!(sq_bessel_laplace(0.0, 3.0, 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(sq_bessel_laplace(1.3, 0.2, 4.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn dimension_constants() {
        let d = BesselDim::new(DELTA_CRITICAL).unwrap();
        assert!((d.p_threshold().to_f64() - 2.0).abs() < 1e-12);
        assert!((d.alpha_exponent().unwrap() - 0.646_446_609_406_726_2).abs() < 1e-12);
        assert_eq!(BesselDim::new(0.0).unwrap().p_threshold(), ExtReal::Finite(1.0));
        assert_eq!(BesselDim::new(0.5).unwrap().p_threshold(), ExtReal::Finite(1.125));
        assert!((BesselDim::new(0.9).unwrap().p_threshold().to_f64() - 3.025).abs() < 1e-12);
        assert_eq!(BesselDim::new(1.0).unwrap().p_threshold(), ExtReal::PosInfinity);
        assert_eq!(BesselDim::new(1.0).unwrap().alpha_exponent(), Some(0.5));
        assert_eq!(BesselDim::new(0.5).unwrap().alpha_exponent(), None);
        assert_eq!(BesselDim::new(3.0).unwrap().nu(), 0.5);
        assert!(BesselDim::new(-0.1).is_err());
    }
}

//! `P^δ_T F(x) = E_x F(ρ_T)` by quadrature of the transition density, the
//! derivative identity `d/dx P^δ_T F = (x/T)(P^{δ+2}_T F − P^δ_T F)`, a
//! difference-quotient oracle and strong Feller sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_atom_delta0, log_gamma, log_transition_density, BesselDim, DensityQuery};
use crate::quadrature::{integrate_panels, Panel, QuadLimits};
use crate::report::{Status, VerificationReport};
use crate::testfn::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Integration stops at `x + upper_cutoff_sigmas·√T`.
    pub upper_cutoff_sigmas: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            upper_cutoff_sigmas: 12.0,
            max_intervals: 4000,
        }
    }
}

impl QuadratureSettings {
    /// Tight settings for difference quotients, where quadrature noise is divided by `h`.
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            upper_cutoff_sigmas: 14.0,
            max_intervals: 8000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Invalid("quadrature tolerances must be positive".into()));
        }
        if !(self.upper_cutoff_sigmas >= 6.0) {
            return Err(Error::Invalid(format!(
                "upper_cutoff_sigmas = {} must be >= 6",
                self.upper_cutoff_sigmas
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupQuery {
    pub dim: BesselDim,
    pub t: f64,
    pub x: f64,
    pub f: TestFunction,
    pub quad: QuadratureSettings,
}

impl SemigroupQuery {
    pub fn new(dim: BesselDim, t: f64, x: f64, f: TestFunction) -> Result<Self> {
        let q = Self {
            dim,
            t,
            x,
            f,
            quad: QuadratureSettings::default(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_quad(mut self, quad: QuadratureSettings) -> Self {
        self.quad = quad;
        self
    }

    pub fn at_x(&self, x: f64) -> Self {
        Self { x, ..*self }
    }

    pub fn at_dim(&self, dim: BesselDim) -> Self {
        Self { dim, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Domain {
                name: "T",
                value: self.t,
                expected: "T > 0",
            });
        }
        if !(self.x >= 0.0 && self.x.is_finite()) {
            return Err(Error::Domain {
                name: "x",
                value: self.x,
                expected: "x >= 0",
            });
        }
        self.f.validate()?;
        self.quad.validate()
    }
}

/// A semigroup value with its total error budget (quadrature estimate plus tail bound).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub error_bound: f64,
    pub tail_bound: f64,
}

/// Bound on `P(ρ_T > x + c√T)`: compare with the norm of a `d`-dimensional
/// Brownian motion, `d = max(1, ⌈δ⌉)`, and use Gaussian concentration.
pub fn tail_mass_bound(delta: f64, c: f64) -> f64 {
    let d = delta.ceil().max(1.0);
    let excess = c - d.sqrt();
    if excess <= 0.0 {
        1.0
    } else {
        (-0.5 * excess * excess).exp()
    }
}

/// Below `SMALL_Y_FRACTION` times the first cut the density is replaced by its
/// leading power law.
const SMALL_Y_FRACTION: f64 = 1e-12;

pub fn apply_kernel(q: &SemigroupQuery) -> Result<f64> {
    Ok(apply_kernel_detailed(q)?.value)
}

pub fn apply_kernel_detailed(q: &SemigroupQuery) -> Result<KernelValue> {
    q.validate()?;
    let delta = q.dim.delta();
    let (t, x, f) = (q.t, q.x, q.f);
    let sup = f.sup_norm();
    let upper = x + q.quad.upper_cutoff_sigmas * t.sqrt();
    let tail = sup * tail_mass_bound(delta, q.quad.upper_cutoff_sigmas);
    if tail >= q.quad.abs_tol {
        return Err(Error::QuadratureNotConverged {
            value: f64::NAN,
            achieved: tail,
            requested: q.quad.abs_tol,
        });
    }

    let mut cuts = vec![0.0, upper];
    if x > 0.0 && x < upper {
        cuts.push(x);
    }
    cuts.extend(f.jumps().into_iter().filter(|&j| j > 0.0 && j < upper));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let checked = |y: f64| -> Result<f64> {
        let v = f.eval(y);
        if v.abs() > sup * (1.0 + 1e-12) {
            return Err(Error::SupNormViolated {
                name: f.name(),
                bound: sup,
                y,
                value: v,
            });
        }
        Ok(v)
    };

    let limits = QuadLimits {
        abs_tol: q.quad.abs_tol - tail,
        rel_tol: q.quad.rel_tol,
        max_intervals: q.quad.max_intervals,
    };

    let (atom_part, out) = if delta == 0.0 {
        let k = kernel_atom_delta0(t, x)?;
        let dens = move |y: f64| -> Result<f64> {
            let fy = checked(y)?;
            if fy == 0.0 {
                return Ok(0.0);
            }
            Ok(fy * k.density(y)?)
        };
        let panels: Vec<Panel> = cuts
            .windows(2)
            .map(|w| Panel {
                a: w[0],
                b: w[1],
                f: &dens,
            })
            .collect();
        let atom = k.atom_mass * checked(0.0)?;
        if x == 0.0 {
            return Ok(KernelValue {
                value: atom,
                error_bound: 0.0,
                tail_bound: 0.0,
            });
        }
        (atom, integrate_panels(&panels, limits)?)
    } else {
        let dim = q.dim;
        let dens = move |y: f64| -> Result<f64> {
            let fy = checked(y)?;
            if fy == 0.0 {
                return Ok(0.0);
            }
            Ok(fy * log_transition_density(&DensityQuery { dim, t, x, y })?.exp())
        };
        // Near the origin p(y) = K(y)·y^{δ−1}. On [0, ε] the mass is
        // F(0)K(0)ε^δ/δ up to a relative O(ε); on [ε, b] the substitution
        // y = e^w turns y^{δ−1} dy into the smooth e^{δw} dw.
        let b1 = cuts[1];
        let eps = b1 * SMALL_Y_FRACTION;
        let (lw0, lw1) = (eps.ln(), b1.ln());
        let logged = move |w: f64| -> Result<f64> {
            let y = w.exp();
            let fy = checked(y)?;
            if fy == 0.0 {
                return Ok(0.0);
            }
            let logp = log_transition_density(&DensityQuery { dim, t, x, y })?;
            Ok(fy * (logp + w).exp())
        };
        let mut panels: Vec<Panel> = Vec::with_capacity(cuts.len() + 1);
        let mut near_origin = 0.0;
        if delta < 2.0 {
            let nu = dim.nu();
            let log_k0 = -nu * std::f64::consts::LN_2 - (nu + 1.0) * t.ln() - log_gamma(nu + 1.0)?
                - x * x / (2.0 * t);
            near_origin = checked(0.0)? * (log_k0 + delta * eps.ln() - delta.ln()).exp();
            panels.push(Panel {
                a: lw0,
                b: lw1,
                f: &logged,
            });
        } else {
            panels.push(Panel {
                a: 0.0,
                b: b1,
                f: &dens,
            });
        }
        panels.extend(cuts.windows(2).skip(1).map(|w| Panel {
            a: w[0],
            b: w[1],
            f: &dens as &dyn Fn(f64) -> Result<f64>,
        }));
        (near_origin, integrate_panels(&panels, limits)?)
    };

    let value = atom_part + out.value;
    let error_bound = out.abs_error + tail;
    let target = q.quad.abs_tol.max(q.quad.rel_tol * value.abs());
    if error_bound > target {
        return Err(Error::QuadratureNotConverged {
            value,
            achieved: error_bound,
            requested: target,
        });
    }
    Ok(KernelValue {
        value,
        error_bound,
        tail_bound: tail,
    })
}

/// `d/dx P^δ_T F(x) = (x/T)(P^{δ+2}_T F(x) − P^δ_T F(x))`; exactly 0 at `x = 0`.
pub fn derivative_semigroup(q: &SemigroupQuery) -> Result<f64> {
    Ok(derivative_semigroup_detailed(q)?.value)
}

pub fn derivative_semigroup_detailed(q: &SemigroupQuery) -> Result<KernelValue> {
    q.validate()?;
    if q.x == 0.0 {
        return Ok(KernelValue {
            value: 0.0,
            error_bound: 0.0,
            tail_bound: 0.0,
        });
    }
    let p0 = apply_kernel_detailed(q)?;
    let p2 = apply_kernel_detailed(&q.at_dim(q.dim.shifted(2.0)?))?;
    let s = q.x / q.t;
    Ok(KernelValue {
        value: s * (p2.value - p0.value),
        error_bound: s * (p2.error_bound + p0.error_bound),
        tail_bound: s * (p2.tail_bound + p0.tail_bound),
    })
}

/// Second derivative from applying the derivative identity twice:
/// `(1/T)(P^{δ+2} − P^δ) + (x/T)²(P^{δ+4} − 2P^{δ+2} + P^δ)`.
pub fn second_derivative_semigroup(q: &SemigroupQuery) -> Result<f64> {
    q.validate()?;
    let p0 = apply_kernel(q)?;
    let p2 = apply_kernel(&q.at_dim(q.dim.shifted(2.0)?))?;
    let p4 = apply_kernel(&q.at_dim(q.dim.shifted(4.0)?))?;
    let s = q.x / q.t;
    Ok((p2 - p0) / q.t + s * s * (p4 - 2.0 * p2 + p0))
}

/// Central difference `(P F(x+h) − P F(x−h))/2h`, bias `O(h²)`; forward
/// difference `(P F(x+h) − P F(x))/h` when `x < h`, bias `O(h)`.
pub fn fd_derivative(q: &SemigroupQuery, h: f64) -> Result<f64> {
    q.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain {
            name: "h",
            value: h,
            expected: "h > 0",
        });
    }
    let up = apply_kernel(&q.at_x(q.x + h))?;
    if q.x < h {
        let mid = apply_kernel(q)?;
        Ok((up - mid) / h)
    } else {
        let down = apply_kernel(&q.at_x(q.x - h))?;
        Ok((up - down) / (2.0 * h))
    }
}

/// `(P F(x+h) − 2P F(x) + P F(x−h))/h²`; requires `x ≥ h`.
pub fn fd_second_derivative(q: &SemigroupQuery, h: f64) -> Result<f64> {
    q.validate()?;
    if !(h > 0.0 && q.x >= h) {
        return Err(Error::Invalid(format!("second difference needs 0 < h <= x, got h = {h}, x = {}", q.x)));
    }
    let up = apply_kernel(&q.at_x(q.x + h))?;
    let mid = apply_kernel(q)?;
    let down = apply_kernel(&q.at_x(q.x - h))?;
    Ok((up - 2.0 * mid + down) / (h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Grid points on `[0, R]` for the pairwise modulus check.
    pub pair_points: usize,
    /// Grid points on `[0, R]` for `G(T) = max |d/dx P_T F|`.
    pub derivative_points: usize,
    /// Golden-section refinement of the grid maximum.
    pub refine: bool,
    /// Record `T^α G(T)` below `2(√2 − 1)` without asserting anything.
    pub exploratory: bool,
    /// Maximum allowed `max/min` of `T^α G(T)` across the `T` grid.
    pub alpha_ratio_limit: f64,
    pub quad: QuadratureSettings,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            pair_points: 21,
            derivative_points: 41,
            refine: true,
            exploratory: false,
            alpha_ratio_limit: 3.0,
            quad: QuadratureSettings::default(),
        }
    }
}

struct DerivMax {
    x: f64,
    value: f64,
    err: f64,
}

fn max_abs_derivative(base: &SemigroupQuery, r: f64, points: usize, refine: bool) -> Result<DerivMax> {
    let xs: Vec<f64> = (0..points).map(|i| r * i as f64 / (points - 1) as f64).collect();
    let vals = xs
        .par_iter()
        .map(|&x| derivative_semigroup_detailed(&base.at_x(x)))
        .collect::<Result<Vec<_>>>()?;
    let (mut best_i, mut best) = (0, vals[0]);
    for (i, v) in vals.iter().enumerate() {
        if v.value.abs() > best.value.abs() {
            best_i = i;
            best = *v;
        }
    }
    let mut out = DerivMax {
        x: xs[best_i],
        value: best.value.abs(),
        err: best.error_bound,
    };
    if refine && points > 2 {
        let h = r / (points - 1) as f64;
        let mut lo = (xs[best_i] - h).max(0.0);
        let mut hi = (xs[best_i] + h).min(r);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |x: f64| derivative_semigroup_detailed(&base.at_x(x));
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        for _ in 0..30 {
            if fc.value.abs() > fd.value.abs() {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = eval(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = eval(d)?;
            }
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v.value.abs() > out.value {
                out = DerivMax {
                    x,
                    value: v.value.abs(),
                    err: v.error_bound,
                };
            }
        }
    }
    Ok(out)
}

/// Check `|P_T F(x) − P_T F(y)| ≤ (2R/T)‖F‖∞|x − y|` on a grid of `[0, R]`, and
/// the improved modulus `T^{α(δ)}·G(T) ≤ C` with `C` fitted over the `T` grid.
pub fn strong_feller_sweep(
    dim: BesselDim,
    t_grid: &[f64],
    r: f64,
    f_family: &[TestFunction],
    opts: &SweepOptions,
) -> Result<VerificationReport> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Invalid("T_grid must be non-empty and sorted descending".into()));
    }
    if !(r > 0.0) || opts.pair_points < 2 || opts.derivative_points < 2 {
        return Err(Error::Invalid("need R > 0 and at least two grid points".into()));
    }
    if let Some(f) = f_family.iter().find(|f| f.sup_norm() > 1.0) {
        return Err(Error::Invalid(format!("{} is not bounded by 1", f.name())));
    }
    let delta = dim.delta();
    let mut rep = VerificationReport::new(
        format!("strong_feller delta={delta}"),
        format!(
            "|P F(x)-P F(y)| <= (2R/T)|x-y| + quad err; T^alpha G(T) max/min < {}",
            opts.alpha_ratio_limit
        ),
    )
    .input("delta", delta)
    .input("R", r)
    .input("T_max", t_grid[0])
    .input("T_min", *t_grid.last().unwrap());
    rep.labels.insert("F_family".into(), f_family.iter().map(|f| f.name()).collect::<Vec<_>>().join(";"));

    let xs: Vec<f64> = (0..opts.pair_points)
        .map(|i| r * i as f64 / (opts.pair_points - 1) as f64)
        .collect();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst: Option<[f64; 5]> = None;
    let mut g_of_t = Vec::with_capacity(t_grid.len());
    let mut sqrt_bound_ok = true;

    for &t in t_grid {
        let mut g: f64 = 0.0;
        let mut g_err: f64 = 0.0;
        for (fi, &f) in f_family.iter().enumerate() {
            let base = SemigroupQuery::new(dim, t, 0.0, f)?.with_quad(opts.quad);
            let vals = xs
                .par_iter()
                .map(|&x| apply_kernel_detailed(&base.at_x(x)))
                .collect::<Result<Vec<_>>>()?;
            let lip = 2.0 * r * f.sup_norm() / t;
            for i in 0..xs.len() {
                for j in i + 1..xs.len() {
                    let diff = (vals[i].value - vals[j].value).abs();
                    let bound = lip * (xs[j] - xs[i]);
                    let ratio = diff / bound;
                    if ratio > worst_ratio {
                        worst_ratio = ratio;
                        worst = Some([t, fi as f64, xs[i], xs[j], ratio]);
                    }
                    if diff > bound + vals[i].error_bound + vals[j].error_bound {
                        ok = false;
                    }
                }
            }
            let m = max_abs_derivative(&base, r, opts.derivative_points, opts.refine)?;
            if m.value > g {
                g = m.value;
                g_err = m.err;
            }
            if delta >= 1.0 && m.value > f.sup_norm() / t.sqrt() + m.err {
                sqrt_bound_ok = false;
                rep.note(format!(
                    "G(T) <= T^-1/2 violated: T={t} F={} x={} |d/dx P F|={}",
                    f.name(),
                    m.x,
                    m.value
                ));
            }
        }
        g_of_t.push((t, g, g_err));
    }

    if let Some([t, fi, x, y, ratio]) = worst {
        rep.witness = Some(
            [("T", t), ("F_index", fi), ("x", x), ("y", y), ("ratio_to_bound", ratio)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        );
    }
    if !ok {
        rep.note("Lipschitz bound (2R/T)|x-y| violated beyond the quadrature error budget");
    }

    let alpha = match (dim.alpha_exponent(), opts.exploratory) {
        (Some(a), _) => Some((a, true)),
        (None, true) => Some((dim.alpha_extrapolated(), false)),
        (None, false) => None,
    };
    let mut alpha_ok = true;
    if let Some((a, asserted)) = alpha {
        let scaled: Vec<f64> = g_of_t.iter().map(|&(t, g, _)| t.powf(a) * g).collect();
        let c = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        rep.analytic = Some(c);
        rep.oracle = Some(c / lo);
        rep.inputs.insert("alpha".into(), a);
        rep.note(format!(
            "T^alpha G(T): {}",
            g_of_t
                .iter()
                .zip(&scaled)
                .map(|((t, _, _), s)| format!("T={t:.6}:{s:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
        if asserted {
            alpha_ok = c / lo < opts.alpha_ratio_limit;
        } else {
            rep.note("exploratory: alpha extrapolated below 2(sqrt2-1), nothing asserted");
        }
    }
    rep.set_status(if ok && alpha_ok && sqrt_bound_ok {
        Status::Pass
    } else {
        Status::Fail
    });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sq_bessel_laplace;

    fn q(delta: f64, t: f64, x: f64, f: TestFunction) -> SemigroupQuery {
        SemigroupQuery::new(BesselDim::new(delta).unwrap(), t, x, f).unwrap()
    }

    #[test]
    fn normalization_including_atom() {
        for delta in [0.0, 0.3, 1.0, 2.0, 3.0] {
            for x in [0.0, 0.5, 3.0] {
                let v = apply_kernel(&q(delta, 0.7, x, TestFunction::One)).unwrap();
                assert!((v - 1.0).abs() < 1e-10, "delta={delta} x={x}: {v}");
            }
        }
    }

    #[test]
    fn laplace_oracle_example() {
        let v = apply_kernel(&q(2.0, 0.5, 1.0, TestFunction::ExpNegY2)).unwrap();
        assert!((v - 0.303_265_329_856_316_7).abs() < 1e-10);
        let w = apply_kernel(&q(1.7, 0.3, 0.8, TestFunction::Laplace { lambda: 2.0 })).unwrap();
        assert!((w - sq_bessel_laplace(1.7, 0.3, 0.64, 2.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn derivative_values() {
        let d = derivative_semigroup(&q(1.0, 1.0, 1.0, TestFunction::ExpNegY2)).unwrap();
        assert!((d + 0.275_793_030_028_381_71).abs() < 1e-9);
        let d = derivative_semigroup(&q(2.0, 0.5, 1.0, TestFunction::ExpNegY2)).unwrap();
        assert!((d + 0.303_265_329_856_316_7).abs() < 1e-9);
        assert_eq!(derivative_semigroup(&q(0.5, 1.0, 0.0, TestFunction::ExpNegY2)).unwrap(), 0.0);
        assert!(derivative_semigroup(&q(0.5, 1.0, 0.7, TestFunction::One)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn fd_second_order_signature() {
        let base = q(1.0, 1.0, 1.0, TestFunction::Cauchy).with_quad(QuadratureSettings::tight());
        let exact = derivative_semigroup(&base).unwrap();
        let e1 = (fd_derivative(&base, 0.04).unwrap() - exact).abs();
        let e2 = (fd_derivative(&base, 0.02).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn fd_matches_laplace_derivative() {
        // d/dx exp(−λx²/s) s^{−δ/2} = −2λx/s · (same), s = 1 + 2λT.
        let (delta, t, x, lambda) = (1.5, 0.5, 0.8, 1.0);
        let s = 1.0 + 2.0 * lambda * t;
        let exact = -2.0 * lambda * x / s * sq_bessel_laplace(delta, t, x * x, lambda).unwrap();
        let base = q(delta, t, x, TestFunction::Laplace { lambda }).with_quad(QuadratureSettings::tight());
        let fd = fd_derivative(&base, 1e-3).unwrap();
        assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
    }

    #[test]
    fn rejects_bad_settings() {
        let mut s = QuadratureSettings::default();
        s.upper_cutoff_sigmas = 3.0;
        assert!(apply_kernel(&q(1.0, 1.0, 1.0, TestFunction::One).with_quad(s)).is_err());
        assert!(SemigroupQuery::new(BesselDim::new(1.0).unwrap(), 0.0, 1.0, TestFunction::One).is_err());
    }

    #[test]
    fn huge_dimension_reports_tail_budget_failure() {
        let r = apply_kernel(&q(80.0, 1.0, 1.0, TestFunction::One));
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }
}

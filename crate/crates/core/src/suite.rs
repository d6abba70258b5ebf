//! The acceptance matrix: fifteen numbered criteria, each a list of reports.
//!
//! Criteria are independent and run concurrently; results come back in
//! declaration order. Every random draw is keyed by the suite seed, so a run
//! is reproducible whatever the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{sq_bessel_laplace, BesselDim, DELTA_CRITICAL};
use crate::pathsim::{SamplerConfig, SCALING_HORIZON};
use crate::report::{Status, VerificationReport};
use crate::rng::derive_seed;
use crate::semigroup::{apply_kernel, derivative_semigroup, fd_derivative, strong_feller_sweep, SemigroupQuery, SweepOptions};
use crate::testfn::TestFunction;
use crate::verifier::*;

/// Dimensions of the deterministic semigroup grid.
pub const GRID_DELTAS: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
pub const GRID_XS: [f64; 3] = [0.25, 1.0, 2.0];
pub const GRID_TS: [f64; 2] = [0.25, 1.0];

pub fn grid_functions() -> [TestFunction; 3] {
    [TestFunction::ExpNegY2, TestFunction::Cauchy, TestFunction::Indicator { a: 1.0 }]
}

/// Titles of criteria `1..=15`.
pub const CRITERIA: [&str; 15] = [
    "kernel normalization",
    "analytic derivative vs finite differences",
    "Neumann boundary at x = 0",
    "Laplace transform cross-check",
    "exact endpoint sampler",
    "martingale property of D",
    "BEL triple agreement",
    "Radon-Nikodym identities",
    "stochastic integral identity",
    "eta trichotomy and boundary behavior",
    "tail index of D_T",
    "strong Feller sweeps",
    "coupled flow",
    "hitting time scaling",
    "classical Ornstein-Uhlenbeck baseline",
];

/// Criteria whose inconclusive reports still count as a pass.
pub const SOFT: [usize; 1] = [11];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Multiplier on every path count; 1 is the full matrix.
    pub scale: f64,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn paths(&self, n: usize) -> usize {
        ((n as f64 * self.scale).ceil() as usize).max(20)
    }

    fn sampler(&self, dt: f64, criterion: usize) -> SamplerConfig {
        SamplerConfig::new(dt, derive_seed(self.seed, criterion as u64))
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub reports: Vec<VerificationReport>,
}

impl CriterionResult {
    pub fn soft(&self) -> bool {
        SOFT.contains(&self.id)
    }

    /// Worst status over the reports.
    pub fn status(&self) -> Status {
        let any = |s| self.reports.iter().any(|r| r.status == s);
        if any(Status::Fail) {
            Status::Fail
        } else if any(Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        match self.status() {
            Status::Pass => true,
            Status::Inconclusive => self.soft(),
            Status::Fail => false,
        }
    }

    pub fn summary_line(&self) -> String {
        let failing: Vec<&str> = self
            .reports
            .iter()
            .filter(|r| r.status != Status::Pass)
            .map(|r| r.name.as_str())
            .collect();
        let mut s = format!(
            "criterion {:>2} {:<42} {} ({} reports)",
            self.id,
            self.title,
            if self.passed() { "PASS" } else { "FAIL" },
            self.reports.len()
        );
        if self.status() == Status::Inconclusive {
            s.push_str(" inconclusive");
        }
        if !failing.is_empty() {
            s.push_str(&format!(" not passing: {}", failing.join(", ")));
        }
        s
    }
}

fn deterministic(name: String, tolerance: &str, analytic: f64, oracle: f64, ok: bool) -> VerificationReport {
    let mut rep = VerificationReport::new(name, tolerance);
    rep.analytic = Some(analytic);
    rep.oracle = Some(oracle);
    rep.set_passed(ok);
    rep
}

fn criterion_1() -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for delta in [0.0, 0.5, 1.0, DELTA_CRITICAL, 1.5, 2.0, 3.0] {
        for x in [0.0, 0.5, 1.0, 3.0] {
            for t in [0.1, 1.0] {
                let q = SemigroupQuery::new(BesselDim::new(delta)?, t, x, TestFunction::One)?;
                let mass = apply_kernel(&q)?;
                out.push(
                    deterministic(
                        format!("normalization delta={delta} x={x} T={t}"),
                        "|mass - 1| <= 1e-10",
                        mass,
                        1.0,
                        (mass - 1.0).abs() <= 1e-10,
                    )
                    .input("delta", delta)
                    .input("x", x)
                    .input("T", t),
                );
            }
        }
    }
    Ok(out)
}

fn grid_points() -> Vec<(f64, f64, f64, TestFunction)> {
    let mut v = Vec::new();
    for delta in GRID_DELTAS {
        for x in GRID_XS {
            for t in GRID_TS {
                for f in grid_functions() {
                    v.push((delta, x, t, f));
                }
            }
        }
    }
    v
}

fn criterion_2() -> Result<Vec<VerificationReport>> {
    grid_points()
        .into_par_iter()
        .map(|(delta, x, t, f)| {
            let q = SemigroupQuery::new(BesselDim::new(delta)?, t, x, f)?;
            let a = derivative_semigroup(&q)?;
            let fd = fd_derivative(&q, FD_STEP)?;
            let rel = (a - fd).abs() / a.abs();
            Ok(deterministic(
                format!("fd delta={delta} F={} x={x} T={t}", f.name()),
                "|analytic - fd| <= 1e-6 |analytic| at h = 1e-4",
                a,
                fd,
                rel <= 1e-6,
            )
            .input("delta", delta)
            .input("x", x)
            .input("T", t)
            .input("relative_error", rel)
            .label("F", f.name()))
        })
        .collect()
}

fn criterion_3() -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for delta in GRID_DELTAS {
        for t in GRID_TS {
            for f in grid_functions() {
                let q = SemigroupQuery::new(BesselDim::new(delta)?, t, 0.0, f)?;
                let d = derivative_semigroup(&q)?;
                out.push(
                    deterministic(
                        format!("neumann delta={delta} F={} T={t}", f.name()),
                        "derivative at x = 0 is exactly 0",
                        d,
                        0.0,
                        d == 0.0,
                    )
                    .input("delta", delta)
                    .input("x", 0.0)
                    .input("T", t)
                    .label("F", f.name()),
                );
            }
        }
    }
    Ok(out)
}

fn criterion_4() -> Result<Vec<VerificationReport>> {
    let mut pts = Vec::new();
    for delta in GRID_DELTAS {
        for x in GRID_XS {
            for t in GRID_TS {
                for lambda in [0.5, 1.0, 2.0] {
                    pts.push((delta, x, t, lambda));
                }
            }
        }
    }
    pts.into_par_iter()
        .map(|(delta, x, t, lambda)| {
            let q = SemigroupQuery::new(BesselDim::new(delta)?, t, x, TestFunction::Laplace { lambda })?;
            let quad = apply_kernel(&q)?;
            let closed = sq_bessel_laplace(delta, t, x * x, lambda)?;
            Ok(deterministic(
                format!("laplace delta={delta} x={x} T={t} lambda={lambda}"),
                "|quadrature - closed form| <= 1e-8",
                closed,
                quad,
                (quad - closed).abs() <= 1e-8,
            )
            .input("delta", delta)
            .input("x", x)
            .input("T", t)
            .input("lambda", lambda))
        })
        .collect()
}

fn criterion_5(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let seed = derive_seed(cfg.seed, 5);
    [0.0, 0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&delta| exact_sampler_check(delta, 1.0, 1.0, cfg.paths(100_000), &[0.5, 1.0], seed))
        .collect()
}

fn criterion_6(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-4, 6);
    [0.5, 1.0, 2.0]
        .iter()
        .map(|&delta| martingale_check(delta, 1.0, &[0.25, 0.5, 1.0], cfg.paths(100_000), &s))
        .collect()
}

/// Step of the BEL Monte Carlo leg and of its calibration run.
pub const BEL_DT: f64 = 1e-3;
pub const CALIBRATION_DT: f64 = 1e-2;

fn criterion_7(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let n = cfg.paths(100_000);
    let budget = calibrate_dt_budget(n, CALIBRATION_DT, derive_seed(cfg.seed, 70))?;
    let s = cfg.sampler(BEL_DT, 7);
    let fs = [TestFunction::ExpNegY2, TestFunction::Indicator { a: 1.0 }];
    let mut out = Vec::new();
    for delta in [1.0, 1.5, 2.0, 3.0, 0.9, DELTA_CRITICAL] {
        out.extend(bel_check(delta, &fs, 1.0, &[0.5, 1.0], n, &s, budget)?);
    }
    Ok(out)
}

fn criterion_8(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-3, 8);
    let n = cfg.paths(100_000);
    let cases = [
        (0.0, 2.0, 0.5, TestFunction::Indicator { a: 1.0 }),
        (1.0, 3.0, 1.0, TestFunction::ExpNegY2),
        (0.5, 2.5, 1.0, TestFunction::ExpNegY2),
        (1.0, 4.0, 1.0, TestFunction::ExpNegY2),
    ];
    cases
        .iter()
        .map(|&(d, dp, x, f)| rn_identity_check(d, dp, x, 0.5, f, n, &s))
        .collect()
}

fn criterion_9(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let seed = derive_seed(cfg.seed, 9);
    [1.0, 2.0]
        .iter()
        .map(|&delta| stochastic_integral_check(delta, 1.0, 1.0, cfg.paths(1000), &[1e-2, 1e-3, 1e-4], seed))
        .collect()
}

/// Start and horizon of the boundary study. The floors are absolute, so the
/// start sits close to them and the horizon is `10x²`.
pub const ETA_START: f64 = 0.03;
pub const ETA_FLOORS: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn criterion_10(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-4, 10);
    let x = ETA_START;
    [0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|&delta| eta_blowup_check(delta, x, 10.0 * x * x, cfg.paths(200), &ETA_FLOORS, &s))
        .collect()
}

fn criterion_11(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-3, 11);
    let n = cfg.paths(1_000_000);
    [0.5, DELTA_CRITICAL]
        .iter()
        .map(|&delta| moment_tail_diagnostics(delta, 1.0, 1.0, n, &[0.5, 1.0, 1.5, 2.5], &s, &TailOptions::default()))
        .collect()
}

/// Dimensions where the `T^α G(T)` ratio is asserted; elsewhere it is only recorded.
pub const ALPHA_DELTAS: [f64; 3] = [DELTA_CRITICAL, 1.0, 2.0];

fn criterion_12() -> Result<Vec<VerificationReport>> {
    let t_grid: Vec<f64> = (0..7).map(|k| 0.5f64.powi(k)).collect();
    let fs = [
        TestFunction::One,
        TestFunction::ExpNegY2,
        TestFunction::Cauchy,
        TestFunction::Indicator { a: 1.0 },
    ];
    [0.0, 0.5, DELTA_CRITICAL, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|&delta| {
            let mut opts = SweepOptions::default();
            if !ALPHA_DELTAS.contains(&delta) {
                opts.alpha_ratio_limit = f64::INFINITY;
            }
            strong_feller_sweep(BesselDim::new(delta)?, &t_grid, 3.0, &fs, &opts)
        })
        .collect()
}

fn criterion_13(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-3, 13);
    Ok(vec![flow_check(0.5, 1.0, 1.01, 1.0, 0.5, cfg.paths(100) as u64, &s)?])
}

/// Step of the hitting time samples; `T₀(y)/y²` at `y = 1/2` sees it as `4dt`.
pub const SCALING_DT: f64 = 2.5e-4;

fn criterion_14(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(SCALING_DT, 14);
    let n = cfg.paths(10_000);
    let mut out = Vec::new();
    for delta in [0.5, 1.0] {
        for y in [0.5, 2.0] {
            out.push(scaling_check(delta, y, n, SCALING_HORIZON, &s)?);
        }
    }
    out.push(absorption_cdf_check(1.0, &[0.5, 1.0, 2.0], n, &cfg.sampler(1e-4, 140))?);
    Ok(out)
}

fn criterion_15(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let s = cfg.sampler(1e-3, 15);
    let n = cfg.paths(100_000);
    Ok(vec![
        classical_baseline(1.0, TestFunction::Tanh, 0.0, 1.0, n, &s)?,
        classical_baseline(1.0, TestFunction::One, 0.5, 1.0, n, &s)?,
    ])
}

/// Run criterion `id` (1-based).
pub fn run_criterion(id: usize, cfg: &SuiteConfig) -> Result<CriterionResult> {
    let reports = match id {
        1 => criterion_1()?,
        2 => criterion_2()?,
        3 => criterion_3()?,
        4 => criterion_4()?,
        5 => criterion_5(cfg)?,
        6 => criterion_6(cfg)?,
        7 => criterion_7(cfg)?,
        8 => criterion_8(cfg)?,
        9 => criterion_9(cfg)?,
        10 => criterion_10(cfg)?,
        11 => criterion_11(cfg)?,
        12 => criterion_12()?,
        13 => criterion_13(cfg)?,
        14 => criterion_14(cfg)?,
        15 => criterion_15(cfg)?,
        _ => return Err(crate::Error::Invalid(format!("no criterion {id} (expected 1..=15)"))),
    };
    Ok(CriterionResult {
        id,
        title: CRITERIA[id - 1],
        reports,
    })
}

/// Run the listed criteria concurrently; `progress` sees each one as it finishes.
pub fn run_suite(
    ids: &[usize],
    cfg: &SuiteConfig,
    progress: &(dyn Fn(&CriterionResult) + Sync),
) -> Result<Vec<CriterionResult>> {
    ids.par_iter()
        .map(|&id| {
            let r = run_criterion(id, cfg)?;
            progress(&r);
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_status_rules() {
        let mut pass = VerificationReport::new("a", "");
        pass.set_passed(true);
        let mut inc = VerificationReport::new("b", "");
        inc.set_status(Status::Inconclusive);
        let soft = CriterionResult {
            id: 11,
            title: CRITERIA[10],
            reports: vec![pass.clone(), inc.clone()],
        };
        assert!(soft.passed());
        let hard = CriterionResult {
            id: 13,
            title: CRITERIA[12],
            reports: vec![pass, inc],
        };
        assert!(!hard.passed());
        assert!(run_criterion(16, &SuiteConfig::new(1)).is_err());
    }

    #[test]
    fn neumann_criterion_passes() {
        let r = run_criterion(3, &SuiteConfig::new(0)).unwrap();
        assert!(r.passed(), "{}", r.summary_line());
        assert_eq!(r.reports.len(), GRID_DELTAS.len() * GRID_TS.len() * 3);
    }
}

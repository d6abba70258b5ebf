//! Trajectories of the squared Bessel process and the derived processes
//! `T₀`, `A_t = ∫ds/ρ²`, `η_t = 1_{t<T₀} exp((1−δ)/2 · A_t)` and `D_t = ρ_t η_t`.
//!
//! Bulk Monte Carlo uses [`Stepper`] directly, so no path is stored; it is the
//! same step code that [`simulate_path`] records.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, path_rng};
use crate::kernels::log_bessel_i;
use crate::stats::ks_two_sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `X_{k+1} = max(X_k + 2√X_k ΔB_k + δ dt, 0)`; `T₀` at the first `ρ ≤ ε₀`;
    /// `A` by the trapezoid rule.
    EulerSqBesselTruncated,
    /// `X_{k+1} = max(((ρ_k + ΔB_k)_+)² − ΔB_k² + δ dt, 0)`, which equals the
    /// Euler update unless `ρ_k < −ΔB_k` and is nondecreasing in `X_k`. In the
    /// boundary layer `z = ρ_k ρ_{k+1}/dt < BOUNDARY_LAYER_Z` the step is killed
    /// with the Bessel-bridge probability of touching 0 and the `A` increment
    /// is the bridge-conditional one (see [`bridge_a_increment`]).
    EulerBoundaryCorrected,
}

/// Boundary layer of [`Scheme::EulerBoundaryCorrected`] in units of `ρ_k ρ_{k+1}/dt`.
pub const BOUNDARY_LAYER_Z: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub dt: f64,
    /// Discretized hitting level `ε₀`: `T₀` is the first grid time with `ρ ≤ ε₀`.
    pub rho_floor: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub stream_id: u64,
}

impl SamplerConfig {
    pub fn new(dt: f64, seed: u64) -> Self {
        Self {
            dt,
            rho_floor: 1e-6,
            scheme: Scheme::EulerBoundaryCorrected,
            seed,
            stream_id: 0,
        }
    }

    pub fn with_floor(mut self, rho_floor: f64) -> Self {
        self.rho_floor = rho_floor;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain {
                name: "dt",
                value: self.dt,
                expected: "dt > 0",
            });
        }
        if !(self.rho_floor > 0.0 && self.rho_floor < 0.1) {
            return Err(Error::Domain {
                name: "rho_floor",
                value: self.rho_floor,
                expected: "0 < rho_floor < 0.1",
            });
        }
        Ok(())
    }

    /// Same configuration with the step shrunk so that `T` is a whole number of steps.
    pub fn aligned_to(&self, t: f64) -> Self {
        let mut c = *self;
        c.dt = t / self.steps_for(t) as f64;
        c
    }

    /// Number of uniform steps covering `[0, T]`; the step is then `T/N`.
    pub fn steps_for(&self, t: f64) -> usize {
        ((t / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Random stream of path `index`.
    pub fn rng(&self, index: u64) -> rand_chacha::ChaCha8Rng {
        path_rng(self.seed, self.stream_id, index)
    }

    /// Key of the kill uniforms of path `index` (independent of its normal draws).
    pub fn kill_key(&self, index: u64) -> u64 {
        derive_seed(derive_seed(self.seed, self.stream_id), index)
    }

    pub fn stepper(&self, delta: f64, x: f64, dt: f64, index: u64) -> Stepper {
        Stepper::new(delta, x, dt, self.rho_floor)
            .with_scheme(self.scheme, self.kill_key(index))
    }
}

/// Uniform on (0, 1) attached to step `k` of the path with key `key`.
fn kill_uniform(key: u64, k: usize) -> f64 {
    let h = derive_seed(key, k as u64);
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Probability that a Bessel bridge of dimension `δ < 2` from `a` to `b` over
/// `dt` stays positive, as a function of `z = ab/dt`: `I_{|ν|}(z)/I_ν(z)`.
pub fn bridge_survival(delta: f64, z: f64) -> f64 {
    let nu = 0.5 * delta - 1.0;
    if nu >= 0.0 {
        return 1.0;
    }
    if z == 0.0 {
        return 0.0;
    }
    match (log_bessel_i(-nu, z), log_bessel_i(nu, z)) {
        (Ok(a), Ok(b)) => (a - b).exp().min(1.0),
        _ => 1.0,
    }
}

/// Increment `ΔA` over one step, given survival, chosen so that
/// `exp((1−δ)/2 · ΔA) = E[exp((1−δ)/2 · ∫ds/ρ²) | bridge a→b survives]`
/// `= I_{ν+1}(z)/I_{|ν|}(z)`. At `δ = 1` this is the conditional mean
/// `−(1/|ν|) ∂_s ln I_s(z)` at `s = 1/2`.
pub fn bridge_a_increment(delta: f64, z: f64) -> f64 {
    let nu = 0.5 * delta - 1.0;
    let c = 0.5 * (1.0 - delta);
    let lni = |s: f64| log_bessel_i(s, z).unwrap_or(f64::NAN);
    let v = if c.abs() < 1e-6 {
        let s = nu.abs();
        let h = 1e-4;
        -(lni(s + h) - lni(s - h)) / (2.0 * h * s)
    } else {
        (lni(nu + 1.0) - lni(nu.abs())) / c
    };
    if v.is_finite() {
        v.max(0.0)
    } else {
        f64::INFINITY
    }
}

/// One step at a time of the discretized `(X, ρ, A, η, D)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    delta: f64,
    scheme: Scheme,
    kill_key: u64,
    dt: f64,
    sqrt_dt: f64,
    floor: f64,
    eta_rate: f64,
    k: usize,
    x_sq: f64,
    rho: f64,
    a: f64,
    t0_index: Option<usize>,
}

impl Stepper {
    pub fn new(delta: f64, x: f64, dt: f64, floor: f64) -> Self {
        Self {
            delta,
            scheme: Scheme::EulerSqBesselTruncated,
            kill_key: 0,
            dt,
            sqrt_dt: dt.sqrt(),
            floor,
            eta_rate: 0.5 * (1.0 - delta),
            k: 0,
            x_sq: x * x,
            rho: x,
            a: 0.0,
            t0_index: if x <= floor { Some(0) } else { None },
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme, kill_key: u64) -> Self {
        self.scheme = scheme;
        self.kill_key = kill_key;
        self
    }

    /// Advance by one Brownian increment `ΔB`.
    #[inline]
    pub fn step(&mut self, db: f64) {
        let prev_rho = self.rho;
        let drift = self.delta * self.dt;
        let next = match self.scheme {
            Scheme::EulerSqBesselTruncated => self.x_sq + 2.0 * prev_rho * db + drift,
            Scheme::EulerBoundaryCorrected => {
                let r = (prev_rho + db).max(0.0);
                r * r - db * db + drift
            }
        }
        .max(0.0);
        self.x_sq = next;
        self.rho = next.sqrt();
        self.k += 1;
        if self.t0_index.is_some() {
            return;
        }
        if self.rho <= self.floor {
            // A is frozen at its value one step earlier: the last
            // sub-interval's integrand blows up and is dropped.
            self.t0_index = Some(self.k);
            return;
        }
        let z = prev_rho * self.rho / self.dt;
        if self.scheme == Scheme::EulerBoundaryCorrected && z < BOUNDARY_LAYER_Z {
            if self.delta < 2.0 && kill_uniform(self.kill_key, self.k) > bridge_survival(self.delta, z) {
                self.t0_index = Some(self.k);
                return;
            }
            self.a += bridge_a_increment(self.delta, z);
        } else {
            self.a += 0.5 * self.dt * (1.0 / (prev_rho * prev_rho) + 1.0 / (self.rho * self.rho));
        }
    }

    #[inline]
    pub fn draw_and_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let db = z * self.sqrt_dt;
        self.step(db);
        db
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn x_sq(&self) -> f64 {
        self.x_sq
    }

    /// `A` at the current step (frozen after absorption).
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn absorbed(&self) -> bool {
        self.t0_index.is_some()
    }

    pub fn t0_index(&self) -> Option<usize> {
        self.t0_index
    }

    /// `η` at the current step; 0 from the absorption step on.
    #[inline]
    pub fn eta(&self) -> f64 {
        if self.t0_index.is_some() {
            0.0
        } else {
            (self.eta_rate * self.a).exp()
        }
    }

    /// `η` with the indicator dropped: `exp((1−δ)/2 · A)` with `A` frozen.
    pub fn eta_unkilled(&self) -> f64 {
        (self.eta_rate * self.a).exp()
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.rho * self.eta()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// A recorded trajectory on the grid `t_k = k·dt`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselPath {
    pub delta: f64,
    pub x: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// `ΔB_k`, `k = 0..N−1`.
    pub db: Vec<f64>,
    /// First `k` with `ρ_k ≤ ε₀`; `None` if the floor is never reached.
    pub t0_index: Option<usize>,
    pub a_vals: Vec<f64>,
    pub eta: Vec<f64>,
    pub d_vals: Vec<f64>,
    pub scheme: Scheme,
    /// Key of the kill uniforms used in the boundary layer.
    pub kill_key: u64,
}

impl BesselPath {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.db.len()
    }

    /// Little-endian dump: 48-byte header (`b"BPATH01\0"`, δ, x, T, dt as f64, N as u64)
    /// followed by `N + 1` records `(t, ρ, η, D)` of f64.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"BPATH01\0")?;
        let t_end = self.times.last().copied().unwrap_or(0.0);
        for v in [self.delta, self.x, t_end, self.dt] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.steps() as u64).to_le_bytes())?;
        for k in 0..self.len() {
            for v in [self.times[k], self.rho[k], self.eta[k], self.d_vals[k]] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

fn check_start(delta: f64, x: f64, t: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "delta >= 0",
        });
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            expected: "x > 0",
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            name: "T",
            value: t,
            expected: "T > 0",
        });
    }
    Ok(())
}

/// Simulate one path on `[0, T]` with `N = ⌈T/dt⌉` steps of size `T/N`.
pub fn simulate_path<R: Rng + ?Sized>(
    delta: f64,
    x: f64,
    t: f64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<BesselPath> {
    check_start(delta, x, t)?;
    cfg.validate()?;
    let n = cfg.steps_for(t);
    let dt = t / n as f64;
    let kill_key: u64 = rng.gen();
    let mut st = Stepper::new(delta, x, dt, cfg.rho_floor).with_scheme(cfg.scheme, kill_key);
    let mut path = BesselPath {
        delta,
        x,
        dt,
        times: Vec::with_capacity(n + 1),
        rho: Vec::with_capacity(n + 1),
        db: Vec::with_capacity(n),
        t0_index: None,
        a_vals: Vec::with_capacity(n + 1),
        eta: Vec::with_capacity(n + 1),
        d_vals: Vec::with_capacity(n + 1),
        scheme: cfg.scheme,
        kill_key,
    };
    let record = |st: &Stepper, path: &mut BesselPath| {
        path.times.push(st.k() as f64 * dt);
        path.rho.push(st.rho());
        path.a_vals.push(st.a());
        path.eta.push(st.eta());
        path.d_vals.push(st.d());
    };
    record(&st, &mut path);
    for _ in 0..n {
        let db = st.draw_and_step(rng);
        path.db.push(db);
        record(&st, &mut path);
    }
    if let Some(last) = path.times.last_mut() {
        *last = t;
    }
    path.t0_index = st.t0_index();
    Ok(path)
}

/// Left-point sum `Σ_{k<N} η_{t_k} ΔB_k`.
pub fn discrete_stochastic_integral(path: &BesselPath) -> f64 {
    path.db.iter().zip(&path.eta).map(|(db, eta)| eta * db).sum()
}

/// One draw of `X_T` for the squared Bessel process started at `z0`:
/// `N ~ Poisson(z0/2T)`, `G ~ Gamma(δ/2 + N, scale 2)`, `X_T = T·G`.
pub fn sample_exact_endpoint<R: Rng + ?Sized>(delta: f64, z0: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(delta >= 0.0 && z0 >= 0.0 && t > 0.0) {
        return Err(Error::Invalid(format!(
            "exact sampler needs delta >= 0, z0 >= 0, T > 0 (got {delta}, {z0}, {t})"
        )));
    }
    let lam = z0 / (2.0 * t);
    let n = if lam > 0.0 {
        Poisson::new(lam)
            .map_err(|e| Error::Invalid(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let shape = 0.5 * delta + n;
    if shape == 0.0 {
        return Ok(0.0);
    }
    let g = Gamma::new(shape, 2.0)
        .map_err(|e| Error::Invalid(e.to_string()))?
        .sample(rng);
    Ok(t * g)
}

/// Ordered map over path indices `0..n`, in parallel; output order is the index order.
pub fn par_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    /// Grid points with `ρ_k(x) > ρ_k(y)` beyond rounding.
    pub monotonicity_violations: usize,
    /// First index with `|ρ_k(x) − ρ_k(y)| ≤ ε₀`.
    pub meeting_index: Option<usize>,
    /// `max_{k ≥ k*} |ρ_k(x) − ρ_k(y)|`, or `None` if the paths never meet.
    pub post_meeting_max_gap: Option<f64>,
    /// `(ρ_k(y) − ρ_k(x))/(y − x)` for `k` before the discretized `T₀(x)`.
    pub fd_ratio: Vec<f64>,
}

/// Two paths from `x < y` driven by the same increments.
pub fn coupled_flow<R: Rng + ?Sized>(
    delta: f64,
    x: f64,
    y: f64,
    t: f64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(BesselPath, BesselPath, FlowDiagnostics)> {
    check_start(delta, x, t)?;
    if !(y > x && y.is_finite()) {
        return Err(Error::Invalid(format!("coupled flow needs 0 < x < y (got x = {x}, y = {y})")));
    }
    let px = simulate_path(delta, x, t, cfg, rng)?;
    let py = replay(&px, y, cfg.rho_floor);
    let diag = flow_diagnostics(&px, &py, cfg.rho_floor);
    Ok((px, py, diag))
}

/// Re-run the scheme of `source` from `x` with its increments and kill uniforms.
pub fn replay(source: &BesselPath, x: f64, floor: f64) -> BesselPath {
    let (delta, dt, db) = (source.delta, source.dt, &source.db);
    let mut st = Stepper::new(delta, x, dt, floor).with_scheme(source.scheme, source.kill_key);
    let n = db.len();
    let mut path = BesselPath {
        delta,
        x,
        dt,
        times: Vec::with_capacity(n + 1),
        rho: Vec::with_capacity(n + 1),
        db: db.to_vec(),
        t0_index: None,
        a_vals: Vec::with_capacity(n + 1),
        eta: Vec::with_capacity(n + 1),
        d_vals: Vec::with_capacity(n + 1),
        scheme: source.scheme,
        kill_key: source.kill_key,
    };
    for k in 0..=n {
        if k > 0 {
            st.step(db[k - 1]);
        }
        path.times.push(k as f64 * dt);
        path.rho.push(st.rho());
        path.a_vals.push(st.a());
        path.eta.push(st.eta());
        path.d_vals.push(st.d());
    }
    path.t0_index = st.t0_index();
    path
}

pub fn flow_diagnostics(px: &BesselPath, py: &BesselPath, floor: f64) -> FlowDiagnostics {
    let mut violations = 0;
    let mut meeting = None;
    let mut post_gap: Option<f64> = None;
    for k in 0..px.len() {
        let (a, b) = (px.rho[k], py.rho[k]);
        if a > b + 8.0 * f64::EPSILON * b.max(a) {
            violations += 1;
        }
        let gap = (a - b).abs();
        if meeting.is_none() && gap <= floor {
            meeting = Some(k);
        }
        if meeting.is_some() {
            post_gap = Some(post_gap.map_or(gap, |g: f64| g.max(gap)));
        }
    }
    let h = py.x - px.x;
    let end = px.t0_index.unwrap_or(px.len());
    let fd_ratio = (0..end).map(|k| (py.rho[k] - px.rho[k]) / h).collect();
    FlowDiagnostics {
        monotonicity_violations: violations,
        meeting_index: meeting,
        post_meeting_max_gap: post_gap,
        fd_ratio,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    /// `T₀(y)/y²`, censored values set to the scaled horizon.
    pub samples_y: Vec<f64>,
    /// `T₀(1)`, censored values set to the horizon.
    pub samples_1: Vec<f64>,
    pub censored_y: usize,
    pub censored_1: usize,
    /// Horizon in units of `y²`.
    pub horizon: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

impl ScalingSample {
    pub fn censored_fraction(&self) -> f64 {
        let n = (self.samples_y.len() + self.samples_1.len()) as f64;
        (self.censored_y + self.censored_1) as f64 / n
    }
}

/// Default hitting-time horizon, in units of the squared starting point.
pub const SCALING_HORIZON: f64 = 50.0;

/// Discretized `T₀` of path `index` from `x`, or `None` if not reached by `horizon`.
pub fn hitting_time(delta: f64, x: f64, horizon: f64, cfg: &SamplerConfig, index: u64) -> Option<f64> {
    let dt = cfg.dt;
    let n = (horizon / dt).ceil() as usize;
    let mut rng = cfg.rng(index);
    let mut st = cfg.stepper(delta, x, dt, index);
    if st.absorbed() {
        return Some(0.0);
    }
    for _ in 0..n {
        st.draw_and_step(&mut rng);
        if st.absorbed() {
            return Some(st.k() as f64 * dt);
        }
    }
    None
}

/// `n` discretized hitting times from `y` and from 1; KS compares `T₀(y)/y²` with `T₀(1)`.
pub fn hitting_time_scaling_sample(
    delta: f64,
    y: f64,
    n: usize,
    horizon: f64,
    cfg: &SamplerConfig,
) -> Result<ScalingSample> {
    if !(0.0..2.0).contains(&delta) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "0 <= delta < 2 (T0 finite)",
        });
    }
    check_start(delta, y, 1.0)?;
    cfg.validate()?;
    let run = |start: f64, stream: u64| -> (Vec<f64>, usize) {
        let cap = horizon * start * start;
        let c = cfg.with_stream(stream);
        let raw = par_paths(n, |i| hitting_time(delta, start, cap, &c, i));
        let censored = raw.iter().filter(|v| v.is_none()).count();
        let scaled = raw.into_iter().map(|v| v.unwrap_or(cap) / (start * start)).collect();
        (scaled, censored)
    };
    let (samples_y, censored_y) = run(y, cfg.stream_id);
    let (samples_1, censored_1) = run(1.0, derive_seed(cfg.stream_id, 1));
    let (ks_statistic, ks_p_value) = ks_two_sample(&samples_y, &samples_1);
    Ok(ScalingSample {
        samples_y,
        samples_1,
        censored_y,
        censored_1,
        horizon,
        ks_statistic,
        ks_p_value,
    })
}

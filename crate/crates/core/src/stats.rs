//! Small statistics toolbox: Monte Carlo summaries, median of means,
//! two-sample Kolmogorov–Smirnov, Hill tail index, least squares.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::report::float;

/// Monte Carlo estimate of a scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    #[serde(with = "float")]
    pub mean: f64,
    #[serde(with = "float")]
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Sample mean and `sd/√n` (unbiased variance).
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let (mean, var) = mean_var(samples);
        Self {
            mean,
            std_error: if n > 1 { (var / n as f64).sqrt() } else { f64::INFINITY },
            n: n as u64,
            seed,
        }
    }

    /// `|mean − target| ≤ k·SE`.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Mean and unbiased variance (Welford).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if xs.len() > 1 {
        m2 / (xs.len() - 1) as f64
    } else {
        f64::NAN
    };
    (mean, var)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated empirical quantile; NaN for an empty slice.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Median of the means of `blocks` contiguous blocks.
///
/// The reported standard error is `√(π/2) · 1.4826 · MAD(block means) / √blocks`,
/// a robust stand-in for the spread of a median of asymptotically normal block means.
pub fn median_of_means(samples: &[f64], blocks: usize, seed: u64) -> McEstimate {
    let blocks = blocks.clamp(1, samples.len().max(1));
    let size = samples.len() / blocks;
    let means: Vec<f64> = (0..blocks)
        .map(|b| {
            let end = if b + 1 == blocks { samples.len() } else { (b + 1) * size };
            mean_var(&samples[b * size..end]).0
        })
        .collect();
    let m = median(&means);
    let dev: Vec<f64> = means.iter().map(|x| (x - m).abs()).collect();
    let mad = median(&dev);
    let se = (std::f64::consts::FRAC_PI_2).sqrt() * 1.4826 * mad / (blocks as f64).sqrt();
    McEstimate {
        mean: m,
        std_error: se,
        n: samples.len() as u64,
        seed,
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, kolmogorov_q((ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d))
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Hill estimate of the tail index from the `k` largest values: `k / Σ ln(X_(i)/X_(k+1))`.
///
/// Returns `None` when fewer than `k + 1` positive values are available.
pub fn hill(samples: &[f64], k: usize) -> Option<f64> {
    if k == 0 || samples.len() <= k {
        return None;
    }
    let mut v = samples.to_vec();
    let idx = v.len() - k - 1;
    v.select_nth_unstable_by(idx, f64::total_cmp);
    let threshold = v[idx];
    if !(threshold > 0.0) {
        return None;
    }
    let s: f64 = v[idx + 1..].iter().map(|x| (x / threshold).ln()).sum();
    if s > 0.0 {
        Some(k as f64 / s)
    } else {
        None
    }
}

/// Percentile bootstrap interval for [`hill`] at the same tail fraction.
pub fn hill_bootstrap_ci<R: Rng>(
    samples: &[f64],
    k: usize,
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Option<(f64, f64)> {
    let n = samples.len();
    let mut est = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        if let Some(h) = hill(&buf, k) {
            est.push(h);
        }
    }
    if est.len() < resamples / 2 {
        return None;
    }
    let tail = 0.5 * (1.0 - level);
    Some((quantile(&est, tail), quantile(&est, 1.0 - tail)))
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Pareto, StandardNormal};

    #[test]
    fn mean_and_se() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = McEstimate::from_samples(&xs, 7);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.n, 4);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Classical critical values: P(K > 1.36) ≈ 0.05, P(K > 1.63) ≈ 0.01.
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        let (_, p_same) = ks_two_sample(&a, &b);
        let (d_shift, p_shift) = ks_two_sample(&a, &c);
        assert!(p_same > 0.01);
        assert!(p_shift < 1e-6 && d_shift > 0.05);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Pareto::new(1.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let h = hill(&xs, 2000).unwrap();
        assert!((h - 1.5).abs() < 0.1, "{h}");
        let (lo, hi) = hill_bootstrap_ci(&xs, 2000, 50, 0.95, &mut rng).unwrap();
        assert!(lo < 1.5 && 1.5 < hi, "[{lo}, {hi}]");
    }

    #[test]
    fn median_of_means_is_robust() {
        let mut xs = vec![1.0; 3100];
        xs[5] = 1e12;
        let e = median_of_means(&xs, 31, 0);
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, c) = ols(&x, &y);
        assert!((s - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}

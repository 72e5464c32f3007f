//! Sample statistics: Kolmogorov–Smirnov distances, quantiles, bootstrap intervals.

use crate::env::CellRng;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("level must lie in (0, 1), got {0}")]
    BadLevel(f64),
}

/// Fixed-shape pairwise sum; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&d) / (xs.len() as f64 - 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], p: f64) -> Result<f64, StatsError> {
    let v = sorted(xs)?;
    Ok(quantile_sorted(&v, p))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> Result<f64, StatsError> {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> Result<f64, StatsError> {
    let v = sorted(xs)?;
    Ok(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25))
}

/// P(K ≤ x) for the Kolmogorov distribution K = sup|B(t)|, B a Brownian bridge.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // theta-function form, fast for small x
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for j in 0..50 {
            let m = (2 * j + 1) as f64;
            let t = (-m * m * c).exp();
            s += t;
            if t < 1e-17 {
                break;
            }
        }
        (2.0 * std::f64::consts::PI).sqrt() / x * s
    } else {
        let mut s = 0.0;
        for j in 1..100 {
            let jf = j as f64;
            let t = (-2.0 * jf * jf * x * x).exp();
            s += if j % 2 == 1 { t } else { -t };
            if t < 1e-17 {
                break;
            }
        }
        1.0 - 2.0 * s
    }
}

/// Level-`p` quantile of the Kolmogorov distribution.
pub fn kolmogorov_quantile(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::BadLevel(p));
    }
    let (mut a, mut b) = (0.01, 10.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if kolmogorov_cdf(m) < p {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// 99% quantile of the statistic under the null for these sample sizes.
    pub null_q99: f64,
    /// Acceptance threshold: null quantile plus a 50% margin.
    pub threshold: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic <= self.threshold
    }
}

fn ks_result(statistic: f64, effective_n: f64) -> KsResult {
    let k = kolmogorov_quantile(0.99).expect("valid level");
    let se = effective_n.sqrt();
    // Stephens' finite-sample correction
    let null_q99 = k / (se + 0.12 + 0.11 / se);
    KsResult { statistic, null_q99, threshold: 1.5 * null_q99 }
}

/// sup_x |F_a(x) − F_b(x)| over the pooled sample.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(ks_result(d, na * nb / (na + nb)))
}

/// sup_x |F_n(x) − F(x)| against a CDF, using its left limit just below each sample point.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult, StatsError> {
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        let f_left = cdf(v[i].next_down());
        d = d.max((f_left - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(ks_result(d, n))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Percentile bootstrap interval for a statistic of one sample.
pub fn bootstrap_ci<S: Fn(&[f64]) -> f64>(
    xs: &[f64],
    stat: S,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let mut rng = CellRng::from_key(seed);
    let mut buf = vec![0.0; xs.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = xs[rng.random_range(0..xs.len())];
        }
        stats.push(stat(&buf));
    }
    let a = (1.0 - level) / 2.0;
    Ok((quantile(&stats, a)?, quantile(&stats, 1.0 - a)?))
}

/// Bootstrap interval for a statistic comparing two samples, resampling each independently.
pub fn bootstrap_ci_two<S: Fn(&[f64], &[f64]) -> f64>(
    a: &[f64],
    b: &[f64],
    stat: S,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut rng = CellRng::from_key(seed);
    let mut ba = vec![0.0; a.len()];
    let mut bb = vec![0.0; b.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for v in ba.iter_mut() {
            *v = a[rng.random_range(0..a.len())];
        }
        for v in bb.iter_mut() {
            *v = b[rng.random_range(0..b.len())];
        }
        stats.push(stat(&ba, &bb));
    }
    let lo = (1.0 - level) / 2.0;
    Ok((quantile(&stats, lo)?, quantile(&stats, 1.0 - lo)?))
}

/// Least-squares slope and intercept of y on x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

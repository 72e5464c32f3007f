//! Continuum reference quantities and replica experiments around the intermediate-disorder limit.

use crate::env::{derive_seed, EnvError, EnvField, EnvSpec};
use crate::stats::{self, KsResult, StatsError};
use crate::transfer::{evolve, evolve_sampled, exact_normalized_variance, EvolveSpec, Form, PartitionField, TransferError};
use crate::walk::{heat_kernel, parity_ok, rw_pmf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChaosError {
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("n_list must be strictly increasing and nonempty")]
    BadNList,
    #[error("grid point x = {0} lies outside |x| <= 3")]
    GridOutOfRange(f64),
    #[error("delta must be positive")]
    BadDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSeriesSpec {
    pub beta: f64,
    pub tol: f64,
    pub max_order: usize,
}

impl LimitSeriesSpec {
    pub fn new(beta: f64) -> Self {
        LimitSeriesSpec { beta, tol: 1e-12, max_order: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// Upper bound on the omitted tail.
    pub tail_bound: f64,
}

/// Var 𝒵_{√2β} = Σ_{k≥1} β^{2k}/Γ(k/2+1) by direct summation with a certified tail.
pub fn limit_variance_series(spec: &LimitSeriesSpec) -> SeriesValue {
    let b2 = spec.beta * spec.beta;
    let b4 = b2 * b2;
    let term = |k: usize| -> f64 { (2.0 * k as f64 * spec.beta.abs().ln() - statrs::function::gamma::ln_gamma(k as f64 / 2.0 + 1.0)).exp() };
    if spec.beta == 0.0 {
        return SeriesValue { value: 0.0, terms: 0, tail_bound: 0.0 };
    }
    let mut sum = 0.0;
    let mut k = 1;
    loop {
        sum += term(k);
        // a_{m+2}/a_m = β⁴/(m/2+1) ≤ ρ for m > k
        let rho = b4 / ((k as f64 + 1.0) / 2.0 + 1.0);
        let tail = if rho < 1.0 { (term(k + 1) + term(k + 2)) / (1.0 - rho) } else { f64::INFINITY };
        if tail <= spec.tol || k >= spec.max_order {
            return SeriesValue { value: sum, terms: k, tail_bound: tail };
        }
        k += 1;
    }
}

/// Closed form e^{β⁴}(1 + erf β²) − 1 of the limit variance.
pub fn limit_variance(beta: f64) -> f64 {
    let b2 = beta * beta;
    (b2 * b2).exp() * (1.0 + erf(b2)) - 1.0
}

/// β² n^{−1/2} Σ_{i≤n} p(2i,0): variance of the first-order chaos term.
pub fn first_order_variance(beta: f64, n: usize) -> f64 {
    let s: f64 = (1..=n).map(|i| rw_pmf(2 * i, 0)).sum();
    beta * beta * s / (n as f64).sqrt()
}

/// n → ∞ limit 2β²/√π of [`first_order_variance`].
pub fn first_order_limit(beta: f64) -> f64 {
    2.0 * beta * beta / std::f64::consts::PI.sqrt()
}

/// Σ_{i,x} p(i,x)ω(i,x) on the sampled environment.
pub fn first_order_term(spec: &EnvSpec, seed: u64, n: usize) -> f64 {
    let mut row = vec![0.0; n + 1];
    let mut total = 0.0;
    for i in 1..=n {
        let w = &mut row[..i + 1];
        crate::env::fill_row(spec, seed, i, -(i as i64), w);
        let p = crate::walk::rw_row(i);
        total += p.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    total
}

/// [`first_order_term`] for many replicas, sharing the walk rows.
pub fn first_order_terms(spec: &EnvSpec, n: usize, replicas: usize, seed: u64) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (1..=n).map(crate::walk::rw_row).collect();
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let key = replica_seed(seed, r);
            let mut w = vec![0.0; n + 1];
            let mut total = 0.0;
            for (i, p) in (1..=n).zip(&rows) {
                let w = &mut w[..i + 1];
                crate::env::fill_row(spec, key, i, -(i as i64), w);
                total += p.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            total
        })
        .collect()
}

/// Inverse temperature β₀ n^{−α}.
pub fn scaled_beta(beta0: f64, alpha: f64, n: usize) -> f64 {
    beta0 * (n as f64).powf(-alpha)
}

/// Key of replica `r` under a master seed.
pub fn replica_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

/// Normalized point-to-line values: 𝔷_n (product) or e^{−nλ(β_n)} Z_n (exponential).
pub fn sample_p2l(
    spec: &EnvSpec,
    beta0: f64,
    alpha: f64,
    n: usize,
    form: Form,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>, ChaosError> {
    let beta = scaled_beta(beta0, alpha, n);
    let lam = match form {
        Form::Product => 0.0,
        Form::Exponential => spec.log_mgf(beta)?,
    };
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let f = evolve_sampled(spec, replica_seed(seed, r), &EvolveSpec::new(beta, form, n))?;
            Ok(match form {
                Form::Product => f.p2l_value(),
                Form::Exponential => (f.log_p2l() - n as f64 * lam).exp(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub label_a: String,
    pub label_b: String,
    pub ks: KsResult,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergenceTable {
    pub beta0: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    /// KS between consecutive n for the first environment kind.
    pub consecutive: Vec<KsRow>,
    /// KS between the first kind and every other kind at the largest n.
    pub universality: Vec<KsRow>,
}

fn ks_row(a: &[f64], b: &[f64], la: String, lb: String, seed: u64) -> Result<KsRow, ChaosError> {
    let ks = stats::ks_two_sample(a, b)?;
    let ci = stats::bootstrap_ci_two(a, b, |x, y| stats::ks_two_sample(x, y).map(|r| r.statistic).unwrap_or(f64::NAN), 200, 0.95, seed)?;
    Ok(KsRow { label_a: la, label_b: lb, ks, ci })
}

/// Cauchy-in-law check across n and universality check across environment kinds.
pub fn self_convergence(
    kinds: &[EnvSpec],
    beta0: f64,
    n_list: &[usize],
    form: Form,
    replicas: usize,
    seed: u64,
) -> Result<SelfConvergenceTable, ChaosError> {
    if n_list.is_empty() || !n_list.windows(2).all(|w| w[0] < w[1]) || kinds.is_empty() {
        return Err(ChaosError::BadNList);
    }
    let base = kinds[0];
    let mut samples = Vec::new();
    for &n in n_list {
        samples.push(sample_p2l(&base, beta0, 0.25, n, form, replicas, derive_seed(seed, n as u64))?);
    }
    let mut consecutive = Vec::new();
    if replicas > 0 {
        for j in 1..n_list.len() {
            consecutive.push(ks_row(
                &samples[j - 1],
                &samples[j],
                format!("n={}", n_list[j - 1]),
                format!("n={}", n_list[j]),
                derive_seed(seed, 7_000 + j as u64),
            )?);
        }
    }
    let nmax = *n_list.last().expect("nonempty");
    let mut universality = Vec::new();
    if replicas > 0 {
        for (c, other) in kinds.iter().enumerate().skip(1) {
            let s = sample_p2l(other, beta0, 0.25, nmax, form, replicas, derive_seed(seed, 1_000_000 + c as u64))?;
            universality.push(ks_row(
                samples.last().expect("nonempty"),
                &s,
                base.kind.name().to_string(),
                other.kind.name().to_string(),
                derive_seed(seed, 9_000 + c as u64),
            )?);
        }
    }
    Ok(SelfConvergenceTable { beta0, n_list: n_list.to_vec(), replicas, consecutive, universality })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AProcessSample {
    pub x_grid: Vec<f64>,
    /// None where the interpolated point-to-point value is not positive.
    pub values: Vec<Option<f64>>,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
}

/// Final-row value at u ∈ ℝ, linear between sites of the row's parity.
pub fn interpolate_final_row(field: &PartitionField, u: f64) -> f64 {
    let k = field.origin.0 + field.horizon;
    let p = (k % 2) as i64;
    let a = 2 * ((u - p as f64) / 2.0).floor() as i64 + p;
    let lam = (u - a as f64) / 2.0;
    let v = |x: i64| field.value(k, x).unwrap_or(0.0);
    (1.0 - lam) * v(a) + lam * v(a + 2)
}

/// log[(√n/2)·𝔷_n(x√n)·√(2π)·e^{x²/2}] on the grid, from a completed field.
pub fn a_process_from_field(field: &PartitionField, n: usize, log_norm: f64, x_grid: &[f64]) -> Result<Vec<Option<f64>>, ChaosError> {
    let sn = (n as f64).sqrt();
    x_grid
        .iter()
        .map(|&x| {
            if x.abs() > 3.0 {
                return Err(ChaosError::GridOutOfRange(x));
            }
            let z = if field.log_space {
                // log-space rows: interpolate the linear values after removing the normalization
                let k = n;
                let p = (k % 2) as i64;
                let u = x * sn;
                let a = 2 * ((u - p as f64) / 2.0).floor() as i64 + p;
                let lam = (u - a as f64) / 2.0;
                let v = |y: i64| field.log_value(k, y).map(|l| (l - log_norm).exp()).unwrap_or(0.0);
                (1.0 - lam) * v(a) + lam * v(a + 2)
            } else {
                interpolate_final_row(field, x * sn)
            };
            if z > 0.0 {
                let rho = heat_kernel(1.0, x);
                Ok(Some((0.5 * sn * z / rho).ln()))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Finite-n proxy for A_{√2β₀}(x), product form with β = β₀ n^{−1/4}.
pub fn a_process_sample(env: &EnvField, beta0: f64, n: usize, x_grid: &[f64]) -> Result<AProcessSample, ChaosError> {
    let beta = scaled_beta(beta0, 0.25, n);
    let f = evolve(env, &EvolveSpec::new(beta, Form::Product, n))?;
    let values = a_process_from_field(&f, n, 0.0, x_grid)?;
    Ok(AProcessSample { x_grid: x_grid.to_vec(), values, n, beta, seed: env.seed() })
}

/// A-proxy values for many replicas on freshly sampled environments.
pub fn a_process_replicas(
    spec: &EnvSpec,
    beta0: f64,
    n: usize,
    x_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<Option<f64>>>, ChaosError> {
    let beta = scaled_beta(beta0, 0.25, n);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let f = evolve_sampled(spec, replica_seed(seed, r), &EvolveSpec::new(beta, Form::Product, n))?;
            a_process_from_field(&f, n, 0.0, x_grid)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercriticalRow {
    pub n: usize,
    pub beta_n: f64,
    pub exact_variance: f64,
    pub empirical_variance: Option<f64>,
}

/// Variance of e^{−nλ(β_n)} Z_n(β_n) under β_n = β n^{−(1/4+δ)}.
pub fn supercritical_probe(
    spec: &EnvSpec,
    beta: f64,
    delta: f64,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<SupercriticalRow>, ChaosError> {
    if delta < 0.0 {
        return Err(ChaosError::BadDelta);
    }
    let alpha = 0.25 + delta;
    n_list
        .iter()
        .map(|&n| {
            let beta_n = scaled_beta(beta, alpha, n);
            let exact = if beta_n == 0.0 { 0.0 } else { exact_normalized_variance(spec, n, beta_n)? };
            let empirical = if replicas >= 2 {
                let s = sample_p2l(spec, beta, alpha, n, Form::Exponential, replicas, derive_seed(seed, n as u64))?;
                Some(stats::variance(&s))
            } else {
                None
            };
            Ok(SupercriticalRow { n, beta_n, exact_variance: exact, empirical_variance: empirical })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointStats {
    pub max_prob: f64,
    pub scaled_second_moment: f64,
}

/// Endpoint statistics of the exponential-form polymer with inverse temperature β₀ n^{−α}.
pub fn endpoint_replicas(
    spec: &EnvSpec,
    beta0: f64,
    alpha: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<EndpointStats>, ChaosError> {
    let beta = scaled_beta(beta0, alpha, n);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let f = evolve_sampled(spec, replica_seed(seed, r), &EvolveSpec::new(beta, Form::Exponential, n).log_space(true))?;
            let ep = f.endpoint()?;
            Ok(EndpointStats { max_prob: ep.max_prob(), scaled_second_moment: ep.scaled_second_moment(n) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub moment: u32,
    pub offsets: Vec<f64>,
    /// (E|Δ_h z|^M)^{1/M} pooled over replicas and base sites.
    pub moment_norms: Vec<f64>,
    /// Slope of the pooled norms against the offsets on log scales.
    pub pooled_exponent: f64,
    /// Median over replicas of the per-replica slopes; the random overall level of each
    /// replica cancels in its moment ratios.
    pub exponent: f64,
    pub replica_exponents: Vec<f64>,
}

/// Spatial Hölder exponent of z_n(1,·) from M-th moment ratios across lattice offsets `lags`
/// (even), with base sites |x| ≤ 2√n.
pub fn holder_fit(
    spec: &EnvSpec,
    beta0: f64,
    n: usize,
    moment: u32,
    lags: &[i64],
    replicas: usize,
    seed: u64,
) -> Result<HolderFit, ChaosError> {
    let beta = scaled_beta(beta0, 0.25, n);
    let sn = (n as f64).sqrt();
    let reach = (2.0 * sn).floor() as i64;
    let offsets: Vec<f64> = lags.iter().map(|&h| h as f64 / sn).collect();
    let lx: Vec<f64> = offsets.iter().map(|v| v.ln()).collect();
    let per: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>, ChaosError> {
            let f = evolve_sampled(spec, replica_seed(seed, r), &EvolveSpec::new(beta, Form::Product, n))?;
            let z = |x: i64| sn * f.value(n, x).unwrap_or(0.0);
            Ok(lags
                .iter()
                .map(|&h| {
                    let mut acc = 0.0;
                    let mut count = 0usize;
                    let mut x = -reach;
                    while x <= reach {
                        if parity_ok(n, x) {
                            acc += (z(x + h) - z(x)).abs().powi(moment as i32);
                            count += 1;
                        }
                        x += 1;
                    }
                    acc / count as f64
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let mut norms = Vec::new();
    for j in 0..lags.len() {
        let col: Vec<f64> = per.iter().map(|v| v[j]).collect();
        norms.push(stats::mean(&col).powf(1.0 / moment as f64));
    }
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (pooled, _) = stats::linear_fit(&lx, &ly);
    let replica_exponents: Vec<f64> = per
        .iter()
        .filter(|v| v.iter().all(|&m| m > 0.0))
        .map(|v| {
            let ly: Vec<f64> = v.iter().map(|m| m.ln() / moment as f64).collect();
            stats::linear_fit(&lx, &ly).0
        })
        .collect();
    let exponent = if replica_exponents.is_empty() { f64::NAN } else { stats::median(&replica_exponents)? };
    Ok(HolderFit { moment, offsets, moment_norms: norms, pooled_exponent: pooled, exponent, replica_exponents })
}

/// E[z_n(s,y)²]/ϱ(s,y)² over replicas on a grid of (s, y) with lattice times ⌈ns⌉.
pub fn second_moment_ratios(
    spec: &EnvSpec,
    beta0: f64,
    n: usize,
    s_grid: &[f64],
    y_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>, ChaosError> {
    let beta = scaled_beta(beta0, 0.25, n);
    let sn = (n as f64).sqrt();
    let points: Vec<(usize, i64, f64)> = s_grid
        .iter()
        .flat_map(|&s| {
            let k = (n as f64 * s).ceil() as usize;
            y_grid.iter().map(move |&y| (k, crate::walk::parity_round(y * sn, k), s))
        })
        .collect();
    let sums: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>, ChaosError> {
            let f = evolve_sampled(spec, replica_seed(seed, r), &EvolveSpec::new(beta, Form::Product, n).stored())?;
            Ok(points.iter().map(|&(k, x, _)| (sn * f.value(k, x).unwrap_or(0.0)).powi(2)).collect())
        })
        .collect::<Result<_, _>>()?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(j, &(k, x, _))| {
            let col: Vec<f64> = sums.iter().map(|v| v[j]).collect();
            let rho = heat_kernel(k as f64 / n as f64, x as f64 / sn);
            stats::mean(&col) / (rho * rho)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;
    use crate::transfer::second_moment_with_overlap;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn limit_variance_zero() {
        assert_eq!(limit_variance(0.0), 0.0);
        assert_eq!(limit_variance_series(&LimitSeriesSpec::new(0.0)).value, 0.0);
    }

    #[test]
    fn series_matches_closed_form() {
        for &b in &[0.1, 0.5, 1.0, 1.3, 2.0] {
            let s = limit_variance_series(&LimitSeriesSpec::new(b));
            assert!(s.tail_bound <= 1e-12);
            assert_relative_eq!(s.value, limit_variance(b), max_relative = 1e-10);
        }
        assert_abs_diff_eq!(limit_variance(1.0), std::f64::consts::E * (1.0 + erf(1.0)) - 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(limit_variance(1.0), 4.00898, epsilon = 1e-5);
    }

    #[test]
    fn limit_variance_increasing() {
        let mut prev = 0.0;
        for j in 1..=20 {
            let v = limit_variance(0.1 * j as f64);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn pair_dp_approaches_limit() {
        // the relative gap decays like n^{-1/2}: it halves when n quadruples
        let mut gaps = Vec::new();
        for &n in &[64usize, 256, 1024, 4096, 16384] {
            let q = 1.0 + 1.0 / (n as f64).sqrt();
            let v = second_moment_with_overlap(n, q) - 1.0;
            gaps.push((limit_variance(1.0) - v) / limit_variance(1.0));
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "{gaps:?}");
        for w in gaps.windows(2).skip(1) {
            assert_abs_diff_eq!(w[1] / w[0], 0.5, epsilon = 0.05);
        }
        assert!(gaps[4] <= 0.05, "{gaps:?}");
    }

    #[test]
    fn first_order_variance_limit() {
        assert_relative_eq!(first_order_variance(1.0, 4096), first_order_limit(1.0), max_relative = 0.02);
        assert_abs_diff_eq!(first_order_variance(1.0, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn first_order_term_matches_layers() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let n = 30;
        let env = EnvField::sample(&spec, n, n, 4).unwrap();
        let l = crate::ustat::chaos_layers(&env, n, crate::ustat::ChaosTarget::PointToLine, 1).unwrap();
        assert_relative_eq!(first_order_term(&spec, 4, n), l.orders[1], max_relative = 1e-12);
        let batch = first_order_terms(&spec, n, 3, 9);
        assert_eq!(batch[2], first_order_term(&spec, replica_seed(9, 2), n));
    }

    #[test]
    fn zero_beta_degenerate() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let s = sample_p2l(&spec, 0.0, 0.25, 64, Form::Product, 50, 1).unwrap();
        assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-13));
        let rows = supercritical_probe(&spec, 0.0, 0.25, &[64, 256], 0, 1).unwrap();
        assert!(rows.iter().all(|r| r.exact_variance == 0.0));
    }

    #[test]
    fn zero_beta_a_process_within_llt() {
        let n = 1024;
        let env = EnvField::sample(&EnvSpec::new(EnvKind::Rademacher), n, n, 1).unwrap();
        let grid = [0.0, 0.5, 1.0, -1.5];
        let a = a_process_sample(&env, 0.0, n, &grid).unwrap();
        let gap = crate::walk::llt_gap(n);
        for (x, v) in grid.iter().zip(&a.values) {
            let bound = 2.0 * gap * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
            assert!(v.unwrap().abs() <= bound, "x={x} v={v:?} bound={bound}");
        }
    }

    #[test]
    fn supercritical_exact_decreasing() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let rows = supercritical_probe(&spec, 1.0, 0.25, &[64, 256, 1024], 0, 0).unwrap();
        assert!(rows.windows(2).all(|w| w[1].exact_variance < w[0].exact_variance));
        let crit = supercritical_probe(&spec, 1.0, 0.0, &[4096], 0, 0).unwrap();
        assert_relative_eq!(crit[0].exact_variance, limit_variance(1.0), max_relative = 0.05);
    }

    #[test]
    fn grid_range_enforced() {
        let env = EnvField::sample(&EnvSpec::new(EnvKind::Gaussian), 16, 16, 1).unwrap();
        assert!(matches!(a_process_sample(&env, 1.0, 16, &[3.5]), Err(ChaosError::GridOutOfRange(_))));
    }
}

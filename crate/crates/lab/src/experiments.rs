//! The ten experiments. Each one produces tables; `evaluate` turns tables into a verdict and reads
//! nothing else, so a persisted run can be re-judged offline.

use crate::config::{Budget, Experiment, ExperimentConfig};
use crate::results::{Evaluation, ResultSet, Table};
use crate::LabError;
use polymer::chaos::{self, endpoint_replicas, holder_fit, limit_variance, replica_seed, sample_p2l, scaled_beta};
use polymer::crossover::{self, CrossoverParams};
use polymer::env::{derive_seed, splitmix64, EnvField, EnvKind, EnvSpec};
use polymer::stats::{self, ks_one_sample, ks_two_sample};
use polymer::transfer::{duhamel_residual, evolve_sampled, exact_normalized_variance, exact_second_moment, four_param, BackwardField, EvolveSpec, Form};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// E6 residual bound.
pub const DUHAMEL_TOL: f64 = 1e-9;
/// E5 relative agreement of the two transition computations.
pub const FOUR_PARAM_TOL: f64 = 1e-10;
/// E2 bound on the median ratio of √n·max P between the largest and smallest n.
pub const LLT_RATIO_MAX: f64 = 1.5;
/// E2 floor on the median of max P at fixed β.
pub const STRONG_DISORDER_FLOOR: f64 = 0.05;
/// E3 terminal variance relative to the δ = 0 limit.
pub const SUPERCRITICAL_FRACTION: f64 = 0.2;
/// E4 bound on the IQR ratio of log 𝔷_n between the largest and smallest n.
pub const IQR_RATIO_MAX: f64 = 1.5;
/// E7 accepted range of the fitted spatial exponent.
pub const HOLDER_RANGE: (f64, f64) = (0.2, 0.55);
/// E8 tolerances.
pub const CROSSOVER_SELF_CONVERGENCE: f64 = 1e-4;
pub const CROSSOVER_MASS_TOL: f64 = 5e-3;
pub const SMALL_BETA_GAP_MAX: f64 = 0.05;
/// E1 mean check in standard errors.
pub const MEAN_SE: f64 = 4.0;

pub fn tolerances(e: Experiment) -> BTreeMap<String, f64> {
    let pairs: Vec<(&str, f64)> = match e {
        Experiment::E1P2lConvergence => vec![("mean_standard_errors", MEAN_SE), ("ks_threshold_factor", 1.5)],
        Experiment::E2RandomLlt => vec![("llt_ratio_max", LLT_RATIO_MAX), ("strong_disorder_floor", STRONG_DISORDER_FLOOR)],
        Experiment::E3Supercritical => vec![("terminal_fraction_of_limit", SUPERCRITICAL_FRACTION)],
        Experiment::E4ChiZero => vec![("iqr_ratio_max", IQR_RATIO_MAX)],
        Experiment::E5FourParam => vec![("relative_tol", FOUR_PARAM_TOL)],
        Experiment::E6Duhamel => vec![("residual_tol", DUHAMEL_TOL)],
        Experiment::E7Holder => vec![("exponent_lo", HOLDER_RANGE.0), ("exponent_hi", HOLDER_RANGE.1)],
        Experiment::E8CrossoverAsymptotics => vec![
            ("self_convergence", CROSSOVER_SELF_CONVERGENCE),
            ("mass_tol", CROSSOVER_MASS_TOL),
            ("small_beta_gap_max", SMALL_BETA_GAP_MAX),
        ],
        Experiment::E9Universality => vec![("ks_threshold_factor", 1.5)],
        Experiment::E10WeakUniversalityGap => vec![],
    };
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn delta(c: &ExperimentConfig) -> f64 {
    c.options.delta.unwrap_or(0.25)
}
fn moment(c: &ExperimentConfig) -> u32 {
    c.options.moment.unwrap_or(8)
}
fn lags(c: &ExperimentConfig) -> Vec<i64> {
    c.options.lags.clone().unwrap_or_else(|| vec![2, 4, 8, 16])
}
fn large_betas(c: &ExperimentConfig) -> Vec<f64> {
    c.options.large_betas.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0])
}
fn small_betas(c: &ExperimentConfig) -> Vec<f64> {
    c.options.small_betas.clone().unwrap_or_else(|| vec![0.5, 0.25, 0.125])
}
fn other_env(c: &ExperimentConfig) -> EnvSpec {
    c.options.other_env.unwrap_or(EnvSpec::new(EnvKind::Rademacher))
}
fn e10_betas(c: &ExperimentConfig) -> Vec<f64> {
    c.options.betas.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0])
}

/// Smallest β accepted for the crossover experiment; the t-space system grows like κ^{−1}.
pub const MIN_CROSSOVER_BETA: f64 = 0.1;

/// Rejects configurations outside the budget before any work is done.
pub fn check(c: &ExperimentConfig, budget: &Budget) -> Result<(), LabError> {
    if !(c.beta.is_finite() && c.beta >= 0.0) {
        return Err(LabError::Config(format!("beta must be finite and nonnegative, got {}", c.beta)));
    }
    let needs_n = !matches!(c.experiment, Experiment::E8CrossoverAsymptotics);
    if needs_n && c.n_list.is_empty() {
        return Err(LabError::Config("n_list is empty".into()));
    }
    if c.n_list.iter().any(|&n| n == 0) {
        return Err(LabError::Config("n_list entries must be positive".into()));
    }
    if c.n_max() > budget.max_n {
        return Err(LabError::Budget(format!("n = {} exceeds the budget {}", c.n_max(), budget.max_n)));
    }
    if c.replicas > budget.max_replicas {
        return Err(LabError::Budget(format!("replicas = {} exceeds the budget {}", c.replicas, budget.max_replicas)));
    }
    let work = Budget::work(c);
    if work > budget.max_work {
        return Err(LabError::Budget(format!("estimated work {work:e} exceeds the budget {:e}", budget.max_work)));
    }
    match c.experiment {
        Experiment::E8CrossoverAsymptotics => {
            if let Some(b) = large_betas(c).iter().chain(small_betas(c).iter()).find(|&&b| !(b >= MIN_CROSSOVER_BETA && b.is_finite())) {
                return Err(LabError::Budget(format!("crossover beta {b} is below {MIN_CROSSOVER_BETA}")));
            }
        }
        Experiment::E7Holder if lags(c).iter().any(|&h| h <= 0 || h % 2 != 0) => {
            return Err(LabError::Config("lags must be positive and even".into()));
        }
        Experiment::E10WeakUniversalityGap if c.n_list.iter().any(|n| n % 2 != 0) => {
            return Err(LabError::Config("point-to-point values at 0 need even n".into()));
        }
        _ => {}
    }
    Ok(())
}

/// Runs the experiment and judges it.
pub fn run(c: &ExperimentConfig, budget: &Budget) -> Result<ResultSet, LabError> {
    check(c, budget)?;
    let tables = generate(c)?;
    let evaluation = evaluate(c, &tables)?;
    Ok(ResultSet { experiment: c.experiment.tag().to_string(), tables, evaluation })
}

fn stochastic_empty(c: &ExperimentConfig) -> bool {
    c.replicas == 0 && !matches!(c.experiment, Experiment::E3Supercritical | Experiment::E8CrossoverAsymptotics)
}

/// Per-replica and per-parameter tables.
pub fn generate(c: &ExperimentConfig) -> Result<Vec<Table>, LabError> {
    if stochastic_empty(c) {
        return Ok(Vec::new());
    }
    let r = c.replicas;
    Ok(match c.experiment {
        Experiment::E1P2lConvergence => {
            let mut t = Table::new("replicas", &["n", "replica", "z"]);
            let mut exact = Table::new("exact", &["n", "beta_n", "variance"]);
            for &n in &c.n_list {
                let z = sample_p2l(&c.env, c.beta, c.alpha, n, Form::Product, r, derive_seed(c.seed, n as u64))?;
                for (i, v) in z.into_iter().enumerate() {
                    t.push(vec![n as f64, i as f64, v]);
                }
                let b = scaled_beta(c.beta, c.alpha, n);
                exact.push(vec![n as f64, b, exact_second_moment(n, b) - 1.0]);
            }
            vec![t, exact]
        }
        Experiment::E2RandomLlt => {
            let mut t = Table::new("replicas", &["n", "replica", "sqrt_n_max_prob", "fixed_beta_max_prob"]);
            for &n in &c.n_list {
                let s = derive_seed(c.seed, n as u64);
                let scaled = endpoint_replicas(&c.env, c.beta, c.alpha, n, r, s)?;
                let fixed = endpoint_replicas(&c.env, c.beta, 0.0, n, r, s)?;
                for (i, (a, b)) in scaled.iter().zip(&fixed).enumerate() {
                    t.push(vec![n as f64, i as f64, (n as f64).sqrt() * a.max_prob, b.max_prob]);
                }
            }
            vec![t]
        }
        Experiment::E3Supercritical => {
            let d = delta(c);
            let mut exact = Table::new("exact", &["n", "beta_n", "variance"]);
            let mut samples = Table::new("replicas", &["n", "replica", "normalized_z"]);
            for &n in &c.n_list {
                let b = scaled_beta(c.beta, c.alpha + d, n);
                exact.push(vec![n as f64, b, if b == 0.0 { 0.0 } else { exact_normalized_variance(&c.env, n, b)? }]);
                if r > 0 {
                    let z = sample_p2l(&c.env, c.beta, c.alpha + d, n, Form::Exponential, r, derive_seed(c.seed, n as u64))?;
                    for (i, v) in z.into_iter().enumerate() {
                        samples.push(vec![n as f64, i as f64, v]);
                    }
                }
            }
            vec![exact, samples]
        }
        Experiment::E4ChiZero => {
            let mut t = Table::new("replicas", &["n", "replica", "log_z"]);
            for &n in &c.n_list {
                let z = sample_p2l(&c.env, c.beta, c.alpha, n, Form::Exponential, r, derive_seed(c.seed, n as u64))?;
                for (i, v) in z.into_iter().enumerate() {
                    t.push(vec![n as f64, i as f64, v.ln()]);
                }
            }
            vec![t]
        }
        Experiment::E5FourParam => vec![four_param_table(c)?],
        Experiment::E6Duhamel => {
            let mut t = Table::new("replicas", &["n", "replica", "residual", "rows_checked"]);
            for &n in &c.n_list {
                let rows: Vec<(f64, usize)> = (0..r)
                    .into_par_iter()
                    .map(|i| -> Result<(f64, usize), LabError> {
                        let env = EnvField::sample(&c.env, n, n, replica_seed(derive_seed(c.seed, n as u64), i))?;
                        let rep = duhamel_residual(&env, c.beta, n)?;
                        Ok((rep.residual, rep.rows_checked))
                    })
                    .collect::<Result<_, _>>()?;
                for (i, (res, rows)) in rows.into_iter().enumerate() {
                    t.push(vec![n as f64, i as f64, res, rows as f64]);
                }
            }
            vec![t]
        }
        Experiment::E7Holder => {
            let n = c.n_max();
            let fit = holder_fit(&c.env, c.beta, n, moment(c), &lags(c), r, c.seed)?;
            let mut per = Table::new("replicas", &["index", "exponent"]);
            for (i, e) in fit.replica_exponents.iter().enumerate() {
                per.push(vec![i as f64, *e]);
            }
            let mut pooled = Table::new("pooled", &["lag", "offset", "moment_norm"]);
            for ((h, o), m) in lags(c).iter().zip(&fit.offsets).zip(&fit.moment_norms) {
                pooled.push(vec![*h as f64, *o, *m]);
            }
            vec![per, pooled]
        }
        Experiment::E8CrossoverAsymptotics => {
            let mut t = Table::new("gaps", &["limit", "beta", "sup_gap", "self_convergence", "mass"]);
            let gue = crossover::gue_gap(&large_betas(c), &gue_s_grid(), 40, CrossoverParams::new)?;
            for g in gue {
                t.push(vec![0.0, g.beta, g.sup_gap, g.self_convergence, g.mass]);
            }
            let small = crossover::small_beta_check(&small_betas(c), &normal_s_grid(), CrossoverParams::new)?;
            for g in small {
                t.push(vec![1.0, g.beta, g.sup_gap, g.self_convergence, g.mass]);
            }
            vec![t]
        }
        Experiment::E9Universality => {
            let n = c.n_max();
            let mut t = Table::new("replicas", &["env", "replica", "z"]);
            for (k, spec) in [c.env, other_env(c)].iter().enumerate() {
                let z = sample_p2l(spec, c.beta, c.alpha, n, Form::Product, r, derive_seed(c.seed, 1 + k as u64))?;
                for (i, v) in z.into_iter().enumerate() {
                    t.push(vec![k as f64, i as f64, v]);
                }
            }
            vec![t]
        }
        Experiment::E10WeakUniversalityGap => {
            let n = c.n_max();
            let mut t = Table::new("replicas", &["beta", "replica", "scaled_free_energy"]);
            for &b in &e10_betas(c) {
                let bn = scaled_beta(b, c.alpha, n);
                let lam = c.env.log_mgf(bn)?;
                let spec = EvolveSpec::new(bn, Form::Exponential, n).log_space(true);
                let shift = -(n as f64) * lam + 0.5 * (std::f64::consts::PI * n as f64 / 2.0).ln() + 2.0 * b.powi(4) / 3.0;
                let scale = 2.0 * b.powf(4.0 / 3.0);
                let vals: Vec<f64> = (0..r)
                    .into_par_iter()
                    .map(|i| -> Result<f64, LabError> {
                        let f = evolve_sampled(&c.env, replica_seed(derive_seed(c.seed, b.to_bits()), i), &spec)?;
                        let lz = f.log_value(n, 0).unwrap_or(f64::NEG_INFINITY);
                        Ok((lz + shift) / scale)
                    })
                    .collect::<Result<_, _>>()?;
                for (i, v) in vals.into_iter().enumerate() {
                    t.push(vec![b, i as f64, v]);
                }
            }
            vec![t]
        }
    })
}

pub fn gue_s_grid() -> Vec<f64> {
    (0..=50).map(|i| -3.0 + 0.1 * i as f64).collect()
}

pub fn normal_s_grid() -> Vec<f64> {
    (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect()
}

/// Random (m,y; k,x) inside the light cone of the origin, from the replica key.
fn pick_points(key: u64, n: usize) -> (usize, i64, usize, i64) {
    let mut h = key;
    let mut next = |bound: u64| {
        h = splitmix64(h);
        h % bound.max(1)
    };
    let m = next(n as u64 - 1) as usize;
    let k = m + 1 + next((n - m) as u64) as usize;
    let y = -(m as i64) + 2 * next(m as u64 + 1) as i64;
    let d = (k - m) as i64;
    let x = y - d + 2 * next(d as u64 + 1) as i64;
    (m, y, k, x)
}

/// P(S_k = x | S_m = y) by pushing the conditional chain forward with one-step transitions, against
/// Z(m,y; k,x) Z(k,x; n,*) / Z(m,y; n,*).
fn four_param_table(c: &ExperimentConfig) -> Result<Table, LabError> {
    let n = c.n_max();
    if n < 2 {
        return Err(LabError::Config("four-parameter experiment needs n >= 2".into()));
    }
    let beta = scaled_beta(c.beta, c.alpha, n);
    let rows: Vec<Vec<f64>> = (0..c.replicas)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, LabError> {
            let key = replica_seed(c.seed, i);
            let env = EnvField::sample(&c.env, n, n, key)?;
            let back = BackwardField::new(&env, beta, Form::Exponential, n)?;
            let (m, y, k, x) = pick_points(splitmix64(key ^ 0x5eed), n);
            // dist[q] is the mass at site y − (j − m) + 2q after j steps
            let mut dist = vec![1.0];
            for j in m..k {
                let lo = y - (j - m) as i64;
                let mut next = vec![0.0; dist.len() + 1];
                for (q, &p) in dist.iter().enumerate() {
                    let site = lo + 2 * q as i64;
                    if p == 0.0 || site.unsigned_abs() as usize > j {
                        continue;
                    }
                    next[q] += p * back.transition(j, site, -1)?;
                    next[q + 1] += p * back.transition(j, site, 1)?;
                }
                dist = next;
            }
            let chain = dist[((x - (y - (k - m) as i64)) / 2) as usize];
            let z = four_param(&env, beta, Form::Exponential, (m, y), (k, x))?;
            let ratio = (z.ln() + back.log_abs_value(k, x) - back.log_abs_value(m, y)).exp();
            Ok(vec![i as f64, m as f64, y as f64, k as f64, x as f64, chain, ratio])
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("replicas", &["replica", "m", "y", "k", "x", "chain", "ratio"]);
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

fn table<'a>(tables: &'a [Table], name: &str) -> Result<&'a Table, LabError> {
    tables.iter().find(|t| t.name == name).ok_or_else(|| LabError::Config(format!("missing table `{name}`")))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn sorted_n(c: &ExperimentConfig) -> Vec<usize> {
    let mut n = c.n_list.clone();
    n.sort_unstable();
    n.dedup();
    n
}

/// F_GUE on [−8, 4] by linear interpolation of a 0.02-spaced table, clamped outside.
pub struct GueTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl GueTable {
    pub fn new() -> Result<Self, LabError> {
        let (lo, step) = (-8.0, 0.02);
        let values = (0..=600)
            .into_par_iter()
            .map(|i| crossover::tw_gue_cdf((lo + step * i as f64).min(4.0), 40).map(|f| f.value))
            .collect::<Result<_, _>>()?;
        Ok(GueTable { lo, step, values })
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let u = (s - self.lo) / self.step;
        if u <= 0.0 {
            return self.values[0].max(0.0);
        }
        let last = self.values.len() - 1;
        if u >= last as f64 {
            return 1.0;
        }
        let j = u.floor() as usize;
        let l = u - j as f64;
        (1.0 - l) * self.values[j] + l * self.values[j + 1]
    }
}

/// Verdict and summary from the tables alone (plus the configuration that produced them).
pub fn evaluate(c: &ExperimentConfig, tables: &[Table]) -> Result<Evaluation, LabError> {
    let mut s = BTreeMap::new();
    if stochastic_empty(c) {
        return Ok(Evaluation { summary: s, predicate: "no replicas: nothing to judge".into(), passed: true });
    }
    let ns = sorted_n(c);
    let (predicate, passed) = match c.experiment {
        Experiment::E1P2lConvergence => {
            let t = table(tables, "replicas")?;
            let mut ok = true;
            for &n in &ns {
                let z = t.select("n", n as f64, "z");
                let (m, v) = (stats::mean(&z), stats::variance(&z));
                ok &= (m - 1.0).abs() <= MEAN_SE * (v / z.len() as f64).sqrt();
                s.insert(format!("mean_n{n}"), m);
                s.insert(format!("variance_n{n}"), v);
            }
            for row in &table(tables, "exact")?.rows {
                s.insert(format!("exact_variance_n{}", row[0]), row[2]);
            }
            s.insert("limit_variance".into(), limit_variance(c.beta));
            if ns.len() >= 2 {
                let a = t.select("n", ns[ns.len() - 2] as f64, "z");
                let b = t.select("n", ns[ns.len() - 1] as f64, "z");
                let ks = ks_two_sample(&a, &b)?;
                s.insert("ks_last_pair".into(), ks.statistic);
                s.insert("ks_threshold".into(), ks.threshold);
                ok &= ks.passes();
            }
            ("|mean - 1| <= 4 SE at every n and KS(two largest n) below 1.5x the 99% null quantile".to_string(), ok)
        }
        Experiment::E2RandomLlt => {
            let t = table(tables, "replicas")?;
            let mut fixed_min = f64::INFINITY;
            let mut med = Vec::new();
            for &n in &ns {
                let a = stats::median(&t.select("n", n as f64, "sqrt_n_max_prob"))?;
                let b = stats::median(&t.select("n", n as f64, "fixed_beta_max_prob"))?;
                s.insert(format!("median_sqrt_n_max_prob_n{n}"), a);
                s.insert(format!("median_fixed_beta_max_prob_n{n}"), b);
                fixed_min = fixed_min.min(b);
                med.push(a);
            }
            let ratio = med[med.len() - 1] / med[0];
            s.insert("llt_ratio".into(), ratio);
            (
                format!("median sqrt(n) max P ratio <= {LLT_RATIO_MAX} and fixed-beta median max P >= {STRONG_DISORDER_FLOOR}"),
                ratio <= LLT_RATIO_MAX && fixed_min >= STRONG_DISORDER_FLOOR,
            )
        }
        Experiment::E3Supercritical => {
            let t = table(tables, "exact")?;
            let v = t.column("variance").unwrap_or_default();
            let limit = limit_variance(c.beta);
            for row in &t.rows {
                s.insert(format!("exact_variance_n{}", row[0]), row[2]);
            }
            s.insert("limit_variance_delta0".into(), limit);
            let r = table(tables, "replicas")?;
            for &n in &ns {
                let z = r.select("n", n as f64, "normalized_z");
                if z.len() >= 2 {
                    s.insert(format!("empirical_variance_n{n}"), stats::variance(&z));
                }
            }
            let last = v.last().copied().unwrap_or(f64::NAN);
            (
                format!("exact variance strictly decreasing in n with terminal value <= {SUPERCRITICAL_FRACTION} x the delta = 0 limit"),
                strictly_decreasing(&v) && last <= SUPERCRITICAL_FRACTION * limit,
            )
        }
        Experiment::E4ChiZero => {
            let t = table(tables, "replicas")?;
            let mut iq = Vec::new();
            for &n in &ns {
                let v = stats::iqr(&t.select("n", n as f64, "log_z"))?;
                s.insert(format!("iqr_log_z_n{n}"), v);
                iq.push(v);
            }
            let ratio = iq[iq.len() - 1] / iq[0];
            s.insert("iqr_ratio".into(), ratio);
            (format!("IQR(log z) at the largest n / IQR at the smallest n <= {IQR_RATIO_MAX}"), ratio <= IQR_RATIO_MAX)
        }
        Experiment::E5FourParam => {
            let t = table(tables, "replicas")?;
            let chain = t.column("chain").unwrap_or_default();
            let ratio = t.column("ratio").unwrap_or_default();
            let worst = chain.iter().zip(&ratio).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
            s.insert("max_relative_gap".into(), worst);
            (format!("transition chain equals the four-parameter ratio to {FOUR_PARAM_TOL:e} relative"), worst <= FOUR_PARAM_TOL)
        }
        Experiment::E6Duhamel => {
            let t = table(tables, "replicas")?;
            let worst = t.column("residual").unwrap_or_default().into_iter().fold(0.0, f64::max);
            s.insert("max_residual".into(), worst);
            (format!("Duhamel residual <= {DUHAMEL_TOL:e}"), worst <= DUHAMEL_TOL)
        }
        Experiment::E7Holder => {
            let e = table(tables, "replicas")?.column("exponent").unwrap_or_default();
            let med = stats::median(&e)?;
            s.insert("median_replica_exponent".into(), med);
            let p = table(tables, "pooled")?;
            let lx: Vec<f64> = p.column("offset").unwrap_or_default().iter().map(|v| v.ln()).collect();
            let ly: Vec<f64> = p.column("moment_norm").unwrap_or_default().iter().map(|v| v.ln()).collect();
            s.insert("pooled_exponent".into(), stats::linear_fit(&lx, &ly).0);
            (
                format!("median per-replica exponent in [{}, {}]", HOLDER_RANGE.0, HOLDER_RANGE.1),
                (HOLDER_RANGE.0..=HOLDER_RANGE.1).contains(&med),
            )
        }
        Experiment::E8CrossoverAsymptotics => {
            let t = table(tables, "gaps")?;
            let gue = t.select("limit", 0.0, "sup_gap");
            let normal = t.select("limit", 1.0, "sup_gap");
            for r in &t.rows {
                let kind = if r[0] == 0.0 { "gue" } else { "normal" };
                s.insert(format!("{kind}_gap_beta{}", r[1]), r[2]);
                s.insert(format!("{kind}_self_convergence_beta{}", r[1]), r[3]);
                s.insert(format!("{kind}_mass_beta{}", r[1]), r[4]);
            }
            let conv = t.column("self_convergence").unwrap_or_default().into_iter().fold(0.0, f64::max);
            let mass = t.column("mass").unwrap_or_default().into_iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
            let ok = strictly_decreasing(&gue)
                && strictly_decreasing(&normal)
                && normal.last().is_some_and(|&g| g <= SMALL_BETA_GAP_MAX)
                && conv <= CROSSOVER_SELF_CONVERGENCE
                && mass <= CROSSOVER_MASS_TOL;
            (
                "GUE and normal gaps strictly decreasing, last normal gap <= 0.05, self-convergence <= 1e-4, |mass - 1| <= 5e-3".to_string(),
                ok,
            )
        }
        Experiment::E9Universality => {
            let t = table(tables, "replicas")?;
            let ks = ks_two_sample(&t.select("env", 0.0, "z"), &t.select("env", 1.0, "z"))?;
            s.insert("ks".into(), ks.statistic);
            s.insert("ks_threshold".into(), ks.threshold);
            s.insert("ks_null_q99".into(), ks.null_q99);
            ("two-environment KS below 1.5x the 99% null quantile".to_string(), ks.passes())
        }
        Experiment::E10WeakUniversalityGap => {
            let t = table(tables, "replicas")?;
            let gue = GueTable::new()?;
            let mut gaps = Vec::new();
            for &b in &e10_betas(c) {
                let v = t.select("beta", b, "scaled_free_energy");
                let ks = ks_one_sample(&v, |x| gue.cdf(x))?;
                s.insert(format!("ks_to_gue_beta{b}"), ks.statistic);
                gaps.push(ks.statistic);
            }
            ("KS distance to F_GUE strictly decreasing in beta".to_string(), strictly_decreasing(&gaps))
        }
    };
    Ok(Evaluation { summary: s, predicate, passed })
}

/// Reads a persisted run and recomputes its verdict.
pub fn recheck(dir: &std::path::Path) -> Result<Evaluation, LabError> {
    let manifest = crate::results::read_manifest(dir)?;
    let tables = crate::results::read_tables(dir, &manifest.tables)?;
    evaluate(&manifest.config, &tables)
}

pub use chaos::limit_variance as limit_variance_of;

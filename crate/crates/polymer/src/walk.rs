//! Simple random walk kernels, heat kernels, Fock norms and the local limit gauge.

use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("times must be strictly increasing in (0, 1]: {0:?}")]
    BadSimplexTimes(Vec<f64>),
    #[error("lattice times must satisfy 1 <= i_1 < ... < i_k <= {n}: {times:?}")]
    BadLatticeTimes { times: Vec<usize>, n: usize },
    #[error("times and positions differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot condition on S_{n} = {x}: probability zero")]
    NullConditioning { n: usize, x: i64 },
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Whether site x is reachable at time i (same parity).
#[inline]
pub fn parity_ok(i: usize, x: i64) -> bool {
    (x - i as i64).rem_euclid(2) == 0
}

fn binomial_u64(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for j in 0..k {
        c = c * (n - j) / (j + 1);
    }
    c
}

/// ln(n!) − (n + ½)ln n + n − ln√(2π).
fn stirlerr(n: f64) -> f64 {
    if n <= 15.0 {
        ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI
    } else {
        let nn = n * n;
        const S0: f64 = 1.0 / 12.0;
        const S1: f64 = 1.0 / 360.0;
        const S2: f64 = 1.0 / 1260.0;
        const S3: f64 = 1.0 / 1680.0;
        const S4: f64 = 1.0 / 1188.0;
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term x ln(x/np) + np − x, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// p(i,x) = P(S_i = x).
pub fn rw_pmf(i: usize, x: i64) -> f64 {
    if x.unsigned_abs() as usize > i || !parity_ok(i, x) {
        return 0.0;
    }
    let k = ((i as i64 + x) / 2) as u64;
    if i <= 50 {
        return binomial_u64(i as u64, k) as f64 / (1u64 << i) as f64;
    }
    if k == 0 || k == i as u64 {
        return (-(i as f64) * std::f64::consts::LN_2).exp();
    }
    // saddle-point form in log space
    let nf = i as f64;
    let kf = k as f64;
    let half = 0.5 * nf;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, half) - bd0(nf - kf, half);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// Row of p(i, ·) on sites −i, −i+2, …, i.
pub fn rw_row(i: usize) -> Vec<f64> {
    let mut row = vec![0.0; i + 1];
    let c = i / 2;
    let xc = 2 * c as i64 - i as i64;
    row[c] = rw_pmf(i, xc);
    // p(i, x+2)/p(i, x) = (i − x)/(i + x + 2)
    for j in c + 1..=i {
        let x = 2 * (j as i64 - 1) - i as i64;
        row[j] = row[j - 1] * (i as i64 - x) as f64 / (i as i64 + x + 2) as f64;
    }
    for j in (0..c).rev() {
        let x = 2 * j as i64 - i as i64;
        row[j] = row[j + 1] * (i as i64 + x + 2) as f64 / (i as i64 - x) as f64;
    }
    row
}

/// [x]_i: the integer of the parity of i closest to x; ties go to +∞.
pub fn parity_round(x: f64, i: usize) -> i64 {
    let p = (i % 2) as f64;
    let m = ((x - p) / 2.0 + 0.5).floor();
    (2.0 * m + p) as i64
}

/// ϱ(t,x) = e^{−x²/2t}/√(2πt).
#[inline]
pub fn heat_kernel(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Element of the continuous simplex Δ_k with attached positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    times: Vec<f64>,
    positions: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self, WalkError> {
        if times.len() != positions.len() {
            return Err(WalkError::LengthMismatch(times.len(), positions.len()));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t <= 1.0) {
                return Err(WalkError::BadSimplexTimes(times));
            }
            prev = t;
        }
        Ok(SimplexPoint { times, positions })
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// Element of the discrete simplex D_k^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeTimeVector {
    times: Vec<usize>,
    n: usize,
}

impl LatticeTimeVector {
    pub fn new(times: Vec<usize>, n: usize) -> Result<Self, WalkError> {
        let ok = times.windows(2).all(|w| w[0] < w[1])
            && times.first().map_or(true, |&t| t >= 1)
            && times.last().map_or(true, |&t| t <= n);
        if ok {
            Ok(LatticeTimeVector { times, n })
        } else {
            Err(WalkError::BadLatticeTimes { times, n })
        }
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// ϱ_k(t, x) = ∏ ϱ(t_j − t_{j−1}, x_j − x_{j−1}).
pub fn heat_kernel_k(point: &SimplexPoint) -> f64 {
    let mut t0 = 0.0;
    let mut x0 = 0.0;
    let mut v = 1.0;
    for (&t, &x) in point.times.iter().zip(&point.positions) {
        v *= heat_kernel(t - t0, x - x0);
        t0 = t;
        x0 = x;
    }
    v
}

/// p_k(i, x) = ∏ p(i_j − i_{j−1}, x_j − x_{j−1}) with i_0 = x_0 = 0.
pub fn path_kernel(times: &[usize], sites: &[i64]) -> f64 {
    let mut i0 = 0usize;
    let mut x0 = 0i64;
    let mut v = 1.0;
    for (&i, &x) in times.iter().zip(sites) {
        if i < i0 {
            return 0.0;
        }
        v *= rw_pmf(i - i0, x - x0);
        i0 = i;
        x0 = x;
    }
    v
}

/// p_k^n(t, x) = 2^{−k} p_k(⌈nt⌉, [x√n]) when ⌈nt⌉ ∈ D_k^n, else 0.
pub fn pkn_raw(n: usize, point: &SimplexPoint) -> f64 {
    let k = point.k();
    if k > n {
        return 0.0;
    }
    let nf = n as f64;
    let mut times = Vec::with_capacity(k);
    for &t in &point.times {
        // guard against n·t landing a hair above an integer
        let v = (nf * t - 1e-12 * nf).ceil().max(1.0) as usize;
        times.push(v);
    }
    if !times.windows(2).all(|w| w[0] < w[1]) || times.iter().any(|&i| i > n) {
        return 0.0;
    }
    let sites: Vec<i64> = times
        .iter()
        .zip(&point.positions)
        .map(|(&i, &x)| parity_round(x * nf.sqrt(), i))
        .collect();
    0.5f64.powi(k as i32) * path_kernel(&times, &sites)
}

/// n^{k/2} p_k^n(t, x), the rescaled kernel comparable with ϱ_k.
pub fn pkn_scaled(n: usize, point: &SimplexPoint) -> f64 {
    (n as f64).powf(point.k() as f64 / 2.0) * pkn_raw(n, point)
}

/// Walk bridge weight P(S_{i_1} = x_1, …, S_{i_k} = x_k | S_n = x).
pub fn bridge_kernel(times: &LatticeTimeVector, sites: &[i64], x: i64) -> Result<f64, WalkError> {
    let n = times.n;
    if times.times.len() != sites.len() {
        return Err(WalkError::LengthMismatch(times.times.len(), sites.len()));
    }
    let pn = rw_pmf(n, x);
    if pn == 0.0 {
        return Err(WalkError::NullConditioning { n, x });
    }
    let (ik, xk) = match (times.times.last(), sites.last()) {
        (Some(&i), Some(&s)) => (i, s),
        _ => (0, 0),
    };
    Ok(path_kernel(&times.times, sites) * rw_pmf(n - ik, x - xk) / pn)
}

/// ‖ϱ_k‖² = 1/(2^k Γ(k/2 + 1)).
pub fn fock_norm_sq(k: usize) -> f64 {
    1.0 / (2f64.powi(k as i32) * gamma(k as f64 / 2.0 + 1.0))
}

/// Squared norm of the point-to-point kernel pinned at y at time 1:
/// e^{−y²}/(√π 2^{k+1} Γ((k+1)/2)).
pub fn fock_norm_bridge_sq(k: usize, y: f64) -> f64 {
    (-y * y).exp() / (PI.sqrt() * 2f64.powi(k as i32 + 1) * gamma((k as f64 + 1.0) / 2.0))
}

/// sup over parity-valid |x| ≤ 4√n of |(√n/2) p(n,x) − ϱ(1, x/√n)|.
pub fn llt_gap(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let xmax = (4.0 * sn).floor() as i64;
    let row = rw_row(n);
    let mut gap: f64 = 0.0;
    for (j, &p) in row.iter().enumerate() {
        let x = 2 * j as i64 - n as i64;
        if x.abs() > xmax {
            continue;
        }
        gap = gap.max((0.5 * sn * p - heat_kernel(1.0, x as f64 / sn)).abs());
    }
    gap
}

/// ‖n^{k/2} p_k^n‖²_{L²(Δ_k × ℝ^k)} = 2^{−k} n^{−k/2} Σ_{i∈D_k^n} ∏ p(2(i_j − i_{j−1}), 0).
pub fn kernel_norm_sq(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let q: Vec<f64> = (0..=n).map(|d| rw_pmf(2 * d, 0)).collect();
    // a[i] = Σ over i_1 < … < i_j = i of the product so far
    let mut a: Vec<f64> = (0..=n).map(|i| if i == 0 { 0.0 } else { q[i] }).collect();
    for _ in 1..k {
        let mut b = vec![0.0; n + 1];
        for i in 1..=n {
            let mut s = 0.0;
            for l in 1..i {
                s += a[l] * q[i - l];
            }
            b[i] = s;
        }
        a = b;
    }
    let total: f64 = a.iter().sum();
    total * 0.5f64.powi(k as i32) * (n as f64).powf(-(k as f64) / 2.0)
}

/// Per-order constant (‖n^{k/2}p_k^n‖ / ‖ϱ_k‖)^{1/k}.
pub fn kernel_constant(k: usize, n: usize) -> f64 {
    (kernel_norm_sq(k, n) / fock_norm_sq(k)).sqrt().powf(1.0 / k as f64)
}

//! Quenched partition functions by the one-step transfer recursion.

use crate::env::{fill_row, EnvError, EnvField, EnvSpec};
use crate::walk::{parity_ok, rw_row};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("horizon {horizon} from time {start} exceeds the environment length {n}")]
    HorizonTooLong { start: usize, horizon: usize, n: usize },
    #[error("origin ({m},{y}) is not parity-valid")]
    OffLattice { m: usize, y: i64 },
    #[error("cell ({i},{x}) needed by the recursion is outside the stored environment")]
    OutsideWindow { i: usize, x: i64 },
    #[error("point-to-line value vanishes at ({i},{x}); cannot condition")]
    NullConditioning { i: usize, x: i64 },
    #[error("endpoint law needs a nonnegative final row")]
    SignedEndpoint,
    #[error("times must satisfy m < k <= n (got m={m}, k={k}, n={n})")]
    BadTimes { m: usize, k: usize, n: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Product form uses 1 + βω per visited cell, exponential form e^{βω}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Product,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Streaming,
    Stored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveSpec {
    pub beta: f64,
    pub form: Form,
    pub origin: (usize, i64),
    pub horizon: usize,
    pub mode: Mode,
    /// `None` picks log space for exponential form when β ≥ 0.5 or horizon ≥ 1024.
    pub log_space: Option<bool>,
}

impl EvolveSpec {
    pub fn new(beta: f64, form: Form, horizon: usize) -> Self {
        EvolveSpec { beta, form, origin: (0, 0), horizon, mode: Mode::Streaming, log_space: None }
    }

    pub fn origin(mut self, m: usize, y: i64) -> Self {
        self.origin = (m, y);
        self
    }

    pub fn stored(mut self) -> Self {
        self.mode = Mode::Stored;
        self
    }

    pub fn log_space(mut self, on: bool) -> Self {
        self.log_space = Some(on);
        self
    }

    fn resolved_log_space(&self) -> bool {
        match (self.form, self.log_space) {
            (Form::Product, _) => false,
            (Form::Exponential, Some(v)) => v,
            (Form::Exponential, None) => self.beta >= 0.5 || self.horizon >= 1024,
        }
    }
}

/// Rows of Z(m,y; m+j, ·) on the cone y−j, …, y+j.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionField {
    pub form: Form,
    pub beta: f64,
    pub log_space: bool,
    pub origin: (usize, i64),
    pub horizon: usize,
    first_row: usize,
    rows: Vec<Vec<f64>>,
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn env_row<'a>(env: &'a EnvField, i: usize, lo_x: i64, hi_x: i64) -> Result<(&'a [f64], usize), TransferError> {
    let (lo, len) = env.row_window(i);
    let hi = lo + 2 * (len as i64 - 1);
    if len == 0 || lo_x < lo {
        return Err(TransferError::OutsideWindow { i, x: lo_x });
    }
    if hi_x > hi {
        return Err(TransferError::OutsideWindow { i, x: hi_x });
    }
    Ok((env.row(i), ((lo_x - lo) / 2) as usize))
}

/// Evolve the recursion Z(k+1,x) = w(k+1,x)·½[Z(k,x−1) + Z(k,x+1)].
pub fn evolve(env: &EnvField, spec: &EvolveSpec) -> Result<PartitionField, TransferError> {
    let (m, y) = spec.origin;
    if m + spec.horizon > env.n() {
        return Err(TransferError::HorizonTooLong { start: m, horizon: spec.horizon, n: env.n() });
    }
    evolve_with(spec, |i, lo_x, out| {
        let (w, off) = env_row(env, i, lo_x, lo_x + 2 * (out.len() as i64 - 1))?;
        out.copy_from_slice(&w[off..off + out.len()]);
        Ok(())
    })
    .map_err(|e| match e {
        TransferError::OffLattice { .. } => TransferError::OffLattice { m, y },
        other => other,
    })
}

/// Same as [`evolve`] on the environment `EnvField::sample(env_spec, n, n, seed)`,
/// drawing each row as it is needed instead of storing the field.
pub fn evolve_sampled(env_spec: &EnvSpec, seed: u64, spec: &EvolveSpec) -> Result<PartitionField, TransferError> {
    evolve_with(spec, |i, lo_x, out| {
        fill_row(env_spec, seed, i, lo_x, out);
        Ok(())
    })
}

fn evolve_with<F>(spec: &EvolveSpec, mut fill: F) -> Result<PartitionField, TransferError>
where
    F: FnMut(usize, i64, &mut [f64]) -> Result<(), TransferError>,
{
    let (m, y) = spec.origin;
    if !parity_ok(m, y) {
        return Err(TransferError::OffLattice { m, y });
    }
    let log_space = spec.resolved_log_space();
    let beta = spec.beta;
    let mut cur = Vec::with_capacity(spec.horizon + 1);
    cur.push(if log_space { 0.0 } else { 1.0 });
    let mut next: Vec<f64> = Vec::with_capacity(spec.horizon + 1);
    let mut w = vec![0.0; spec.horizon + 1];
    let mut rows = Vec::new();
    if spec.mode == Mode::Stored {
        rows.reserve(spec.horizon + 1);
        rows.push(cur.clone());
    }
    for j in 0..spec.horizon {
        let i = m + j + 1;
        let lo_x = y - (j as i64 + 1);
        let w = &mut w[..j + 2];
        fill(i, lo_x, w)?;
        next.clear();
        match (spec.form, log_space) {
            (Form::Product, _) => {
                next.push((1.0 + beta * w[0]) * 0.5 * cur[0]);
                for q in 1..=j {
                    next.push((1.0 + beta * w[q]) * 0.5 * (cur[q - 1] + cur[q]));
                }
                next.push((1.0 + beta * w[j + 1]) * 0.5 * cur[j]);
            }
            (Form::Exponential, false) => {
                next.push((beta * w[0]).exp() * 0.5 * cur[0]);
                for q in 1..=j {
                    next.push((beta * w[q]).exp() * 0.5 * (cur[q - 1] + cur[q]));
                }
                next.push((beta * w[j + 1]).exp() * 0.5 * cur[j]);
            }
            (Form::Exponential, true) => {
                let ln_half = -std::f64::consts::LN_2;
                next.push(beta * w[0] + ln_half + cur[0]);
                for q in 1..=j {
                    next.push(beta * w[q] + ln_half + log_add(cur[q - 1], cur[q]));
                }
                next.push(beta * w[j + 1] + ln_half + cur[j]);
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if spec.mode == Mode::Stored {
            rows.push(cur.clone());
        }
    }
    let first_row = if spec.mode == Mode::Stored {
        0
    } else {
        rows.push(cur);
        spec.horizon
    };
    Ok(PartitionField {
        form: spec.form,
        beta,
        log_space,
        origin: spec.origin,
        horizon: spec.horizon,
        first_row,
        rows,
    })
}

/// Probabilities P(S_n = x) proportional to the final row.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerEndpoint {
    pub sites: Vec<i64>,
    pub probs: Vec<f64>,
}

impl PolymerEndpoint {
    pub fn max_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(0.0, f64::max)
    }

    /// E[(S_n/√n)²] for horizon n.
    pub fn scaled_second_moment(&self, n: usize) -> f64 {
        self.sites
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| p * (x as f64) * (x as f64))
            .sum::<f64>()
            / n as f64
    }
}

impl PartitionField {
    pub fn is_stored(&self) -> bool {
        self.first_row == 0
    }

    /// Row at relative time j (absolute time origin.0 + j), sites y−j … y+j.
    pub fn row(&self, j: usize) -> Option<&[f64]> {
        if j < self.first_row || j > self.horizon {
            return None;
        }
        Some(&self.rows[j - self.first_row])
    }

    pub fn final_row(&self) -> &[f64] {
        self.rows.last().expect("field has at least one row")
    }

    pub fn final_sites(&self) -> impl Iterator<Item = i64> + '_ {
        let lo = self.origin.1 - self.horizon as i64;
        (0..=self.horizon).map(move |q| lo + 2 * q as i64)
    }

    /// Stored value at absolute (k, x) in the representation of the field (log if log_space).
    pub fn raw(&self, k: usize, x: i64) -> Option<f64> {
        let (m, y) = self.origin;
        if k < m {
            return None;
        }
        let j = k - m;
        let row = self.row(j)?;
        let d = x - (y - j as i64);
        if d < 0 || d % 2 != 0 || d / 2 > j as i64 {
            return Some(if self.log_space { f64::NEG_INFINITY } else { 0.0 });
        }
        Some(row[(d / 2) as usize])
    }

    /// Linear value Z(m,y; k,x).
    pub fn value(&self, k: usize, x: i64) -> Option<f64> {
        self.raw(k, x).map(|v| if self.log_space { v.exp() } else { v })
    }

    /// log Z(m,y; k,x); product-form values must be positive.
    pub fn log_value(&self, k: usize, x: i64) -> Option<f64> {
        self.raw(k, x).map(|v| if self.log_space { v } else { v.ln() })
    }

    /// Σ_x Z(m,y; m+horizon, x).
    pub fn p2l_value(&self) -> f64 {
        if self.log_space {
            self.log_p2l().exp()
        } else {
            crate::stats_sum(self.final_row())
        }
    }

    pub fn log_p2l(&self) -> f64 {
        if self.log_space {
            self.final_row().iter().fold(f64::NEG_INFINITY, |a, &b| log_add(a, b))
        } else {
            self.p2l_value().ln()
        }
    }

    pub fn endpoint(&self) -> Result<PolymerEndpoint, TransferError> {
        let sites: Vec<i64> = self.final_sites().collect();
        let probs = if self.log_space {
            let lz = self.log_p2l();
            self.final_row().iter().map(|v| (v - lz).exp()).collect()
        } else {
            if self.final_row().iter().any(|&v| v < 0.0) {
                return Err(TransferError::SignedEndpoint);
            }
            let z = self.p2l_value();
            self.final_row().iter().map(|v| v / z).collect()
        };
        Ok(PolymerEndpoint { sites, probs })
    }

    /// Every retained row as (k, x, value), or (k, x, log_value) for log-space fields.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["k", "x", if self.log_space { "log_value" } else { "value" }])?;
        let (m, y) = self.origin;
        for j in self.first_row..=self.horizon {
            let row = &self.rows[j - self.first_row];
            for (q, v) in row.iter().enumerate() {
                let x = y - j as i64 + 2 * q as i64;
                w.write_record([(m + j).to_string(), x.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Point-to-line values W(j,x) = Z(j,x; n,*) on the cone |x| ≤ j, kept as
/// row-normalized vectors with a log scale per row.
#[derive(Debug, Clone)]
pub struct BackwardField {
    pub form: Form,
    pub beta: f64,
    pub n: usize,
    rows: Vec<Vec<f64>>,
    log_scale: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl BackwardField {
    pub fn new(env: &EnvField, beta: f64, form: Form, n: usize) -> Result<Self, TransferError> {
        if n > env.n() {
            return Err(TransferError::HorizonTooLong { start: 0, horizon: n, n: env.n() });
        }
        // weights[j][q] = w(j, −j + 2q) for j = 1..=n
        let mut weights = vec![Vec::new()];
        for j in 1..=n {
            let (row, off) = env_row(env, j, -(j as i64), j as i64)?;
            let w: Vec<f64> = row[off..off + j + 1]
                .iter()
                .map(|&v| match form {
                    Form::Product => 1.0 + beta * v,
                    Form::Exponential => (beta * v).exp(),
                })
                .collect();
            weights.push(w);
        }
        let mut rows = vec![Vec::new(); n + 1];
        let mut log_scale = vec![0.0; n + 1];
        rows[n] = vec![1.0; n + 1];
        for j in (0..n).rev() {
            let above = &rows[j + 1];
            let w = &weights[j + 1];
            // site x = −j + 2q steps to x−1 (index q) and x+1 (index q+1) in row j+1
            let mut cur: Vec<f64> = (0..=j).map(|q| 0.5 * (w[q] * above[q] + w[q + 1] * above[q + 1])).collect();
            let scale = cur.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let s = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
            for v in cur.iter_mut() {
                *v /= s;
            }
            log_scale[j] = log_scale[j + 1] + s.ln();
            rows[j] = cur;
        }
        Ok(BackwardField { form, beta, n, rows, log_scale, weights })
    }

    /// Z(j,x; n,*) for |x| ≤ j.
    pub fn value(&self, j: usize, x: i64) -> f64 {
        let q = ((x + j as i64) / 2) as usize;
        self.rows[j][q] * self.log_scale[j].exp()
    }

    pub fn log_abs_value(&self, j: usize, x: i64) -> f64 {
        let q = ((x + j as i64) / 2) as usize;
        self.rows[j][q].abs().ln() + self.log_scale[j]
    }

    /// P(S_{i+1} = x + step | S_i = x) under the polymer measure of horizon n.
    pub fn transition(&self, i: usize, x: i64, step: i64) -> Result<f64, TransferError> {
        assert!(step == 1 || step == -1, "step must be ±1");
        assert!(i < self.n && x.unsigned_abs() as usize <= i && parity_ok(i, x));
        let q = ((x + i as i64) / 2) as usize;
        let here = self.rows[i][q];
        if here == 0.0 {
            return Err(TransferError::NullConditioning { i, x });
        }
        let qn = if step == 1 { q + 1 } else { q };
        let there = self.rows[i + 1][qn];
        let ratio = (self.log_scale[i + 1] - self.log_scale[i]).exp();
        Ok(0.5 * self.weights[i + 1][qn] * there * ratio / here)
    }
}

pub fn transition_prob(
    env: &EnvField,
    beta: f64,
    form: Form,
    n: usize,
    i: usize,
    x: i64,
    step: i64,
) -> Result<f64, TransferError> {
    BackwardField::new(env, beta, form, n)?.transition(i, x, step)
}

/// Z(m,y; k,x): weights over times m+1..=k, started from the delta at (m,y).
pub fn four_param(
    env: &EnvField,
    beta: f64,
    form: Form,
    (m, y): (usize, i64),
    (k, x): (usize, i64),
) -> Result<f64, TransferError> {
    if k < m {
        return Err(TransferError::BadTimes { m, k, n: env.n() });
    }
    let f = evolve(env, &EvolveSpec::new(beta, form, k - m).origin(m, y).log_space(false))?;
    Ok(f.value(k, x).unwrap_or(0.0))
}

/// E[𝔷_n²] = E[q^{#{1 ≤ i ≤ n : S_i = S'_i}}] with q the per-overlap second moment.
pub fn second_moment_with_overlap(n: usize, q: f64) -> f64 {
    // folded difference walk: |S − S'|/2 steps 0 w.p. ½ and ±1 w.p. ¼ each
    let mut cur = vec![0.0; n + 2];
    cur[0] = 1.0;
    let mut next = vec![0.0; n + 2];
    for step in 0..n {
        let reach = (step + 1).min(n + 1);
        next[0] = 0.5 * cur[0] + 0.25 * cur[1];
        if reach >= 1 {
            next[1] = 0.5 * cur[1] + 0.5 * cur[0] + 0.25 * cur[2];
        }
        for d in 2..=reach {
            next[d] = 0.5 * cur[d] + 0.25 * cur[d - 1] + 0.25 * cur[d + 1];
        }
        next[0] *= q;
        std::mem::swap(&mut cur, &mut next);
    }
    crate::stats_sum(&cur)
}

/// Exact E_Q[𝔷_n(β)²] for a mean-zero, unit-variance environment.
pub fn exact_second_moment(n: usize, beta: f64) -> f64 {
    second_moment_with_overlap(n, 1.0 + beta * beta)
}

/// Exact variance of e^{−nλ(β)} Z_n(β) for the given law.
pub fn exact_normalized_variance(spec: &EnvSpec, n: usize, beta: f64) -> Result<f64, TransferError> {
    let q = crate::env::tilted_overlap_factor(spec, beta)?;
    Ok(second_moment_with_overlap(n, q) - 1.0)
}

/// Stored product-form field from the origin with β = β₀ n^{−1/4}, queried in
/// rescaled coordinates z_n(t,x) = √n 𝔷(nt, x√n).
#[derive(Debug, Clone)]
pub struct RescaledField {
    pub n: usize,
    pub beta0: f64,
    field: PartitionField,
}

impl RescaledField {
    pub fn new(env: &EnvField, beta0: f64, n: usize) -> Result<Self, TransferError> {
        let beta = beta0 * (n as f64).powf(-0.25);
        let field = evolve(env, &EvolveSpec::new(beta, Form::Product, n).stored())?;
        Ok(RescaledField { n, beta0, field })
    }

    pub fn field(&self) -> &PartitionField {
        &self.field
    }

    /// √n 𝔷(k, x) at a lattice point (zero off the cone).
    pub fn lattice(&self, k: usize, x: i64) -> f64 {
        (self.n as f64).sqrt() * self.field.value(k, x).unwrap_or(0.0)
    }

    /// Value on the time slice k/n, piecewise linear between parity sites.
    fn slice(&self, k: usize, u: f64) -> f64 {
        let p = (k % 2) as i64;
        let a = 2 * ((u - p as f64) / 2.0).floor() as i64 + p;
        let lam = (u - a as f64) / 2.0;
        (1.0 - lam) * self.lattice(k, a) + lam * self.lattice(k, a + 2)
    }

    /// z_n(t, x) with corner, left-edge, then interior interpolation.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        assert!((0.0..=1.0).contains(&t), "t must lie in [0,1]");
        let nf = self.n as f64;
        let s = nf * t;
        let u = x * nf.sqrt();
        let k = s.round();
        if (s - k).abs() <= 1e-12 * nf.max(1.0) {
            return self.slice(k as usize, u);
        }
        let i = s.ceil() as usize;
        let theta = s - (i - 1) as f64;
        // rectangle ((i−1)/n, i/n] × ((xc−1)/√n, (xc+1)/√n] with xc of parity i
        let xc = crate::walk::parity_round(u, i);
        let (xa, xb) = ((xc - 1) as f64, (xc + 1) as f64);
        let lam = (u - xa) / 2.0;
        let left = (1.0 - lam) * self.lattice(i - 1, xc - 1) + lam * self.lattice(i - 1, xc + 1);
        let right = (1.0 - lam) * self.slice(i, xa) + lam * self.slice(i, xb);
        (1.0 - theta) * left + theta * right
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelReport {
    pub residual: f64,
    pub rows_checked: usize,
}

/// Largest |z_n − p-term − β Σ ω 𝔷̄ p| over the checked rows, in the √n scale.
/// All rows for n ≤ 64; sixteen evenly spaced rows (including n) beyond.
pub fn duhamel_residual(env: &EnvField, beta0: f64, n: usize) -> Result<DuhamelReport, TransferError> {
    let beta = beta0 * (n as f64).powf(-0.25);
    let field = evolve(env, &EvolveSpec::new(beta, Form::Product, n).stored())?;
    let z = |k: usize, x: i64| field.value(k, x).unwrap_or(0.0);
    // source s_i(y) = ω(i,y) 𝔷̄(i−1,y) on |y| ≤ i
    let mut source: Vec<Vec<f64>> = vec![Vec::new()];
    for i in 1..=n {
        let row: Vec<f64> = (0..=i)
            .map(|q| {
                let y = 2 * q as i64 - i as i64;
                let bar = 0.5 * (z(i - 1, y - 1) + z(i - 1, y + 1));
                env.at(i, y) * bar
            })
            .collect();
        source.push(row);
    }
    let prows: Vec<Vec<f64>> = (0..=n).map(rw_row).collect();
    let pval = |d: usize, x: i64| -> f64 {
        if x.unsigned_abs() as usize > d || !parity_ok(d, x) {
            0.0
        } else {
            prows[d][((x + d as i64) / 2) as usize]
        }
    };
    let rows: Vec<usize> = if n <= 64 {
        (0..=n).collect()
    } else {
        let mut r: Vec<usize> = (1..=16).map(|j| (j * n) / 16).collect();
        r.dedup();
        r
    };
    let sn = (n as f64).sqrt();
    let mut worst: f64 = 0.0;
    for &k in &rows {
        for qx in 0..=k {
            let x = 2 * qx as i64 - k as i64;
            let mut acc = 0.0;
            for i in 1..=k {
                let d = k - i;
                let src = &source[i];
                // only |x − y| ≤ d contributes
                let ylo = (x - d as i64).max(-(i as i64));
                let yhi = (x + d as i64).min(i as i64);
                let mut y = ylo;
                if !parity_ok(i, y) {
                    y += 1;
                }
                while y <= yhi {
                    acc += src[((y + i as i64) / 2) as usize] * pval(d, x - y);
                    y += 2;
                }
            }
            let rhs = pval(k, x) + beta * acc;
            worst = worst.max(sn * (z(k, x) - rhs).abs());
        }
    }
    Ok(DuhamelReport { residual: worst, rows_checked: rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, EnvSpec};
    use crate::walk::rw_pmf;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn gauss(n: usize, hw: usize, seed: u64) -> EnvField {
        EnvField::sample(&EnvSpec::new(EnvKind::Gaussian), n, hw, seed).unwrap()
    }

    #[test]
    fn csv_export_lists_retained_rows() {
        let env = gauss(3, 3, 8);
        let stored = evolve(&env, &EvolveSpec::new(0.4, Form::Product, 3).stored()).unwrap();
        let mut buf = Vec::new();
        stored.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,x,value");
        assert_eq!(lines.len(), 1 + 1 + 2 + 3 + 4);
        assert_eq!(lines[1], "0,0,1");
        let last: Vec<&str> = lines[10].split(',').collect();
        assert_eq!((last[0], last[1]), ("3", "3"));
        assert_eq!(last[2].parse::<f64>().unwrap(), stored.value(3, 3).unwrap());
        assert!(!text.contains('\r'));

        let log = evolve(&env, &EvolveSpec::new(0.4, Form::Exponential, 3).log_space(true)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,x,log_value\n"));
        assert_eq!(text.lines().count(), 1 + 4);
    }

    #[test]
    fn one_step_closed_form() {
        let env = gauss(1, 1, 4);
        let beta = 0.37;
        let f = evolve(&env, &EvolveSpec::new(beta, Form::Product, 1)).unwrap();
        let row = f.final_row();
        assert_abs_diff_eq!(row[0], 0.5 * (1.0 + beta * env.at(1, -1)), epsilon = 1e-15);
        assert_abs_diff_eq!(row[1], 0.5 * (1.0 + beta * env.at(1, 1)), epsilon = 1e-15);
    }

    #[test]
    fn zero_beta_is_the_walk() {
        let env = gauss(30, 30, 1);
        for form in [Form::Product, Form::Exponential] {
            for log in [false, true] {
                let f = evolve(&env, &EvolveSpec::new(0.0, form, 30).stored().log_space(log)).unwrap();
                for k in [0usize, 1, 17, 30] {
                    for x in -(k as i64)..=k as i64 {
                        assert_abs_diff_eq!(f.value(k, x).unwrap(), rw_pmf(k, x), epsilon = 1e-14);
                    }
                }
                assert_abs_diff_eq!(f.p2l_value(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn brute_force_path_sum() {
        let n = 16;
        let env = EnvField::sample(&EnvSpec::new(EnvKind::Rademacher), n, n, 11).unwrap();
        let beta = 0.3;
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let mut x = 0i64;
            let mut w = 1.0;
            for i in 1..=n {
                x += if mask >> (i - 1) & 1 == 1 { 1 } else { -1 };
                w *= 1.0 + beta * env.at(i, x);
            }
            total += w;
        }
        total /= (1u64 << n) as f64;
        let f = evolve(&env, &EvolveSpec::new(beta, Form::Product, n)).unwrap();
        assert_relative_eq!(f.p2l_value(), total, max_relative = 1e-12);
    }

    #[test]
    fn log_space_agrees_with_linear() {
        let env = gauss(200, 200, 3);
        let lin = evolve(&env, &EvolveSpec::new(0.6, Form::Exponential, 200).log_space(false)).unwrap();
        let log = evolve(&env, &EvolveSpec::new(0.6, Form::Exponential, 200).log_space(true)).unwrap();
        assert_relative_eq!(lin.log_p2l(), log.log_p2l(), max_relative = 1e-12);
        assert!(log.log_space);
        assert!(evolve(&env, &EvolveSpec::new(0.6, Form::Exponential, 20)).unwrap().log_space);
        assert!(!evolve(&env, &EvolveSpec::new(0.1, Form::Exponential, 20)).unwrap().log_space);
    }

    #[test]
    fn tiny_beta_linear_term() {
        let n = 24;
        let env = gauss(n, n, 6);
        let beta = 1e-6;
        let f = evolve(&env, &EvolveSpec::new(beta, Form::Product, n)).unwrap();
        let mut lin = 0.0;
        for i in 1..=n {
            for x in -(i as i64)..=i as i64 {
                if parity_ok(i, x) {
                    lin += rw_pmf(i, x) * env.at(i, x);
                }
            }
        }
        assert_abs_diff_eq!(f.p2l_value(), 1.0 + beta * lin, epsilon = 1e-10);
    }

    #[test]
    fn errors_are_reported() {
        let env = gauss(8, 8, 0);
        assert!(matches!(
            evolve(&env, &EvolveSpec::new(0.1, Form::Product, 9)),
            Err(TransferError::HorizonTooLong { .. })
        ));
        assert!(matches!(
            evolve(&env, &EvolveSpec::new(0.1, Form::Product, 3).origin(2, 1)),
            Err(TransferError::OffLattice { .. })
        ));
        assert!(matches!(
            evolve(&env, &EvolveSpec::new(0.1, Form::Product, 3).origin(2, 6)),
            Err(TransferError::OutsideWindow { .. })
        ));
    }

    #[test]
    fn second_moment_small_cases() {
        assert_abs_diff_eq!(exact_second_moment(1, 0.8), 1.0 + 0.64 / 2.0, epsilon = 1e-15);
        assert_eq!(exact_second_moment(50, 0.0), 1.0);
        // n = 2: overlaps at time 1 w.p. ½, at time 2 w.p. ½ (3/8 from equal first steps... enumerate)
        let b2: f64 = 0.5;
        let mut e = 0.0;
        for a in 0..4u32 {
            for b in 0..4u32 {
                let s = [if a & 1 == 1 { 1 } else { -1 }, 0];
                let s1 = s[0];
                let s2 = s1 + if a & 2 == 2 { 1 } else { -1 };
                let t1 = if b & 1 == 1 { 1 } else { -1 };
                let t2 = t1 + if b & 2 == 2 { 1 } else { -1 };
                let overlaps = (s1 == t1) as i32 + (s2 == t2) as i32;
                e += (1.0 + b2).powi(overlaps) / 16.0;
            }
        }
        assert_abs_diff_eq!(exact_second_moment(2, b2.sqrt()), e, epsilon = 1e-15);
    }

    #[test]
    fn second_moment_matches_monte_carlo_free_oracle() {
        // independent path: E[𝔷²] = Σ_x Σ_x' E[𝔷(x)𝔷(x')] via a pair recursion on (x, x')
        let n = 12;
        let q = 1.7;
        let mut pair = std::collections::HashMap::new();
        pair.insert((0i64, 0i64), 1.0f64);
        for _ in 0..n {
            let mut next = std::collections::HashMap::new();
            for (&(x, y), &v) in &pair {
                for dx in [-1, 1] {
                    for dy in [-1, 1] {
                        let (a, b) = (x + dx, y + dy);
                        let w = if a == b { q } else { 1.0 };
                        *next.entry((a, b)).or_insert(0.0) += 0.25 * v * w;
                    }
                }
            }
            pair = next;
        }
        let direct: f64 = pair.values().sum();
        assert_relative_eq!(second_moment_with_overlap(n, q), direct, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_normalizes() {
        let env = gauss(40, 40, 9);
        let f = evolve(&env, &EvolveSpec::new(1.0, Form::Exponential, 40)).unwrap();
        let ep = f.endpoint().unwrap();
        assert_abs_diff_eq!(ep.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(ep.probs.iter().all(|&p| p >= 0.0));
        assert_eq!(ep.sites.len(), 41);
    }

    #[test]
    fn transitions_sum_to_one() {
        let env = gauss(10, 10, 2);
        for form in [Form::Product, Form::Exponential] {
            let bw = BackwardField::new(&env, 0.2, form, 10).unwrap();
            for i in 0..10usize {
                for x in (-(i as i64)..=i as i64).step_by(2) {
                    let s = bw.transition(i, x, 1).unwrap() + bw.transition(i, x, -1).unwrap();
                    assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
                }
            }
        }
        let bw0 = BackwardField::new(&env, 0.0, Form::Exponential, 10).unwrap();
        assert_abs_diff_eq!(bw0.transition(3, 1, 1).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn multi_step_identity() {
        let n = 8;
        let env = gauss(n, n, 21);
        let beta = 0.7;
        let form = Form::Exponential;
        let bw = BackwardField::new(&env, beta, form, n).unwrap();
        let (m, y) = (2usize, 0i64);
        let k = 6usize;
        let mut total = 0.0;
        for x in (-(k as i64)..=k as i64).step_by(2) {
            if (x - y).unsigned_abs() as usize > k - m {
                continue;
            }
            let lhs = four_param(&env, beta, form, (m, y), (k, x)).unwrap() * bw.value(k, x) / bw.value(m, y);
            // product of one-step transitions over all paths from (m,y) to (k,x)
            let steps = k - m;
            let mut rhs = 0.0;
            for mask in 0u32..(1 << steps) {
                let mut pos = y;
                let mut p = 1.0;
                for s in 0..steps {
                    let dir = if mask >> s & 1 == 1 { 1 } else { -1 };
                    p *= bw.transition(m + s, pos, dir).unwrap();
                    pos += dir;
                }
                if pos == x {
                    rhs += p;
                }
            }
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            total += lhs;
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shift_covariance() {
        let env = EnvField::sample(&EnvSpec::new(EnvKind::Uniform), 20, 40, 13).unwrap();
        let (m, y) = (4usize, 2i64);
        let h = 12usize;
        let a = evolve(&env, &EvolveSpec::new(0.5, Form::Product, h).origin(m, y)).unwrap();
        let lo: Vec<i64> = (0..=h).map(|i| -(i as i64)).collect();
        let rows: Vec<Vec<f64>> = (0..=h)
            .map(|i| {
                if i == 0 {
                    Vec::new()
                } else {
                    (0..=i).map(|q| env.at(m + i, y + 2 * q as i64 - i as i64)).collect()
                }
            })
            .collect();
        let shifted = EnvField::from_rows(*env.spec(), 0, lo, rows);
        let b = evolve(&shifted, &EvolveSpec::new(0.5, Form::Product, h)).unwrap();
        for (u, v) in a.final_row().iter().zip(b.final_row()) {
            assert_eq!(u, v);
        }
    }

    #[test]
    fn reversibility() {
        let n = 14;
        let env = gauss(n, 2 * n, 17);
        let rev = env.time_reversed();
        let beta = 0.4;
        for &(m, y, k, x) in &[(2usize, 0i64, 9usize, 3i64), (1, 1, 13, -1), (5, -1, 6, 0)] {
            let fwd = four_param(&env, beta, Form::Product, (m, y), (k, x)).unwrap();
            let bwd = four_param(&rev, beta, Form::Product, (n - k, x), (n - m, y)).unwrap();
            let lhs = (1.0 + beta * env.at(m, y)) * fwd;
            let rhs = (1.0 + beta * env.at(k, x)) * bwd;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn rescaled_field_corners_and_edges() {
        let n = 16;
        let env = gauss(n, n, 5);
        let rf = RescaledField::new(&env, 1.0, n).unwrap();
        let sn = 4.0;
        assert_abs_diff_eq!(rf.value(0.5, 2.0 / sn), rf.lattice(8, 2), epsilon = 1e-14);
        assert_abs_diff_eq!(rf.value(9.0 / 16.0, 3.0 / sn), rf.lattice(9, 3), epsilon = 1e-14);
        // on a left edge between (8,0) and (8,2)
        let mid = rf.value(0.5, 1.0 / sn);
        let (a, b) = (rf.lattice(8, 0), rf.lattice(8, 2));
        assert!(mid >= a.min(b) - 1e-14 && mid <= a.max(b) + 1e-14);
        assert_abs_diff_eq!(mid, 0.5 * (a + b), epsilon = 1e-14);
        // interior values are finite and bounded by corner extremes
        let v = rf.value(0.53, 0.1);
        assert!(v.is_finite());
    }

    #[test]
    fn zero_beta_rescaled_field_near_twice_heat_kernel() {
        let n = 4096;
        let env = EnvField::sample(&EnvSpec::new(EnvKind::Rademacher), n, n, 1).unwrap();
        let rf = RescaledField::new(&env, 0.0, n).unwrap();
        assert_abs_diff_eq!(rf.value(1.0, 0.0), 2.0 * crate::walk::heat_kernel(1.0, 0.0), epsilon = 1e-3);
    }

    #[test]
    fn duhamel_identity() {
        let env = gauss(16, 16, 8);
        assert!(duhamel_residual(&env, 1.0, 16).unwrap().residual <= 1e-10);
        assert!(duhamel_residual(&env, 0.0, 16).unwrap().residual <= 1e-12);
        let env64 = gauss(64, 64, 12);
        let r = duhamel_residual(&env64, 1.0, 64).unwrap();
        assert!(r.residual <= 1e-9);
        assert_eq!(r.rows_checked, 65);
    }

    #[test]
    fn sampled_evolution_matches_stored_field() {
        let spec = EnvSpec::new(EnvKind::ShiftedExponential);
        let env = EnvField::sample(&spec, 50, 50, 99).unwrap();
        let es = EvolveSpec::new(0.3, Form::Exponential, 50).log_space(true);
        let a = evolve(&env, &es).unwrap();
        let b = evolve_sampled(&spec, 99, &es).unwrap();
        assert_eq!(a.final_row(), b.final_row());
    }

    #[test]
    fn exponential_equals_tilted_product() {
        for (c, kind) in EnvKind::ALL.iter().enumerate() {
            let spec = EnvSpec::new(*kind);
            let n = 40;
            let env = EnvField::sample(&spec, n, n, c as u64).unwrap();
            let b = 0.6;
            let lam = spec.log_mgf(b).unwrap();
            let z = evolve(&env, &EvolveSpec::new(b, Form::Exponential, n).log_space(true)).unwrap();
            let zt = evolve(&env.tilt(b).unwrap(), &EvolveSpec::new(b, Form::Product, n)).unwrap();
            assert_relative_eq!(z.log_p2l() - n as f64 * lam, zt.p2l_value().ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn product_form_has_mean_one() {
        let n = 32;
        let beta = 0.4;
        let spec = EnvSpec::new(EnvKind::Rademacher);
        let vals: Vec<f64> = (0..10_000u64)
            .map(|r| evolve_sampled(&spec, r, &EvolveSpec::new(beta, Form::Product, n)).unwrap().p2l_value())
            .collect();
        let m = crate::stats::mean(&vals);
        let se = (crate::stats::variance(&vals) / vals.len() as f64).sqrt();
        assert!((m - 1.0).abs() <= 3.0 * se, "mean {m} se {se}");
    }
}

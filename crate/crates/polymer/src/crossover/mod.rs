//! Crossover distributions G_β, the GUE Tracy–Widom law and their Fredholm numerics.
//!
//! The density f(r) = κ⁻¹ det(I − K_σ) tr((I − K_σ)⁻¹ P_Ai) on L²(a, ∞), a = r/κ, is evaluated in
//! t-space: K_σ = A Σ Aᵀ with (Ag)(x) = ∫ Ai(x+t) g(t) dt, so by Sylvester's identity
//! det(I − K_σ) = det(I − Σ AᵀA) and AᵀA(t, t′) = K_Ai(a+t, a+t′) in closed form. The principal value
//! pairs every node t > 0 with −t, using σ(−t) = 1 − σ(t).

pub mod airy;

use crate::quad;
use crate::stats;
use airy::airy_value;
pub use airy::AiryValue;
use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CrossoverError {
    #[error("airy argument {0} is not finite")]
    NotFinite(f64),
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("invalid parameter: {0}")]
    BadParams(&'static str),
    #[error("F_GUE is evaluated for s in [-8, 4], got {0}")]
    GueRange(f64),
    #[error("I - K is ill-conditioned at r = {r}: relative solve residual {residual:e}")]
    IllConditioned { r: f64, residual: f64 },
    #[error("r grid [{lo}, {hi}] leaves density mass {mass:e} outside; use [{need_lo}, {need_hi}]")]
    GridTooNarrow { lo: f64, hi: f64, mass: f64, need_lo: f64, need_hi: f64 },
    #[error("density support did not close within {0} panels")]
    Unbounded(usize),
}

pub type Result<T> = std::result::Result<T, CrossoverError>;

/// Ai(x), Ai′(x). Defined for every finite x; underflows to zero far to the right.
pub fn airy(x: f64) -> Result<AiryValue> {
    if !x.is_finite() {
        return Err(CrossoverError::NotFinite(x));
    }
    Ok(airy_value(x))
}

fn kernel_from(u: f64, a: AiryValue, v: f64, b: AiryValue) -> f64 {
    let d = u - v;
    if d.abs() <= 1e-10 * (1.0 + u.abs()) {
        let m = airy_value(0.5 * (u + v));
        return m.aip * m.aip - 0.5 * (u + v) * m.ai * m.ai;
    }
    (a.ai * b.aip - a.aip * b.ai) / d
}

/// K_Ai(u, v) = ∫₀^∞ Ai(u+s) Ai(v+s) ds, with the diagonal Ai′(u)² − u Ai(u)².
pub fn airy_kernel(u: f64, v: f64) -> f64 {
    kernel_from(u, airy_value(u), v, airy_value(v))
}

/// σ_β(t) = (1 − e^{−κt})⁻¹.
pub fn sigma(kappa: f64, t: f64) -> f64 {
    -1.0 / (-kappa * t).exp_m1()
}

/// σ_β(t) − 1/(κt), continued through t = 0 by its value ½.
pub fn sigma_regular(kappa: f64, t: f64) -> f64 {
    let x = kappa * t;
    if x.abs() < 1e-3 {
        let x2 = x * x;
        0.5 + x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30240.0
    } else {
        sigma(kappa, t) - 1.0 / x
    }
}

pub fn kappa(beta: f64) -> f64 {
    2.0 * beta.powf(4.0 / 3.0)
}

/// Composite Gauss–Legendre grid in r: panels of width `panel·κ`, `order` nodes each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGrid {
    pub panel: f64,
    pub order: usize,
    /// Fixed range; `None` grows the range until the density mass per panel falls below `tail_tol`.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tail_tol: f64,
}

impl Default for RGrid {
    fn default() -> Self {
        RGrid { panel: 0.8, order: 6, lo: None, hi: None, tail_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverParams {
    pub beta: f64,
    pub kappa: f64,
    /// Gauss–Legendre nodes per unit panel of the t-integral.
    pub quad_order: usize,
    /// Upper truncation L: nodes a + t are kept while a + t < L.
    pub domain_cap: f64,
    /// Truncation T of the t-integral on the oscillatory side, where σ(−t) ~ e^{−κt}.
    pub t_trunc: f64,
    pub t_panel: f64,
    pub r_grid: RGrid,
}

impl CrossoverParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(CrossoverError::BadBeta(beta));
        }
        let kappa = kappa(beta);
        Ok(CrossoverParams { beta, kappa, quad_order: 6, domain_cap: 16.0, t_trunc: 20.0 / kappa + 6.0, t_panel: 1.0, r_grid: RGrid::default() })
    }

    /// Twice the nodes, T extended by 8/κ (a further factor e⁻⁸ in the weights) and L by 4.
    pub fn refined(&self) -> Self {
        CrossoverParams { quad_order: 2 * self.quad_order, t_trunc: self.t_trunc + 8.0 / self.kappa, domain_cap: self.domain_cap + 4.0, ..*self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(CrossoverError::BadBeta(self.beta));
        }
        if (self.kappa - kappa(self.beta)).abs() > 1e-12 * self.kappa {
            return Err(CrossoverError::BadParams("kappa must equal 2 beta^(4/3)"));
        }
        if self.quad_order == 0 || self.r_grid.order == 0 {
            return Err(CrossoverError::BadParams("quadrature orders must be positive"));
        }
        if !(self.t_trunc > 0.0 && self.t_panel > 0.0 && self.r_grid.panel > 0.0 && self.domain_cap.is_finite()) {
            return Err(CrossoverError::BadParams("truncations and panel widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FredholmResult {
    pub value: f64,
    /// |value(m) − value(2m)|.
    pub self_convergence: f64,
    pub flagged: bool,
    pub quad_order: usize,
    pub domain_cap: f64,
}

/// Sign and log|det| of an LU-factored matrix.
fn log_det(lu: &faer::linalg::solvers::PartialPivLu<f64>) -> (f64, f64) {
    let u = lu.U();
    let mut sign = 1.0;
    let mut log = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    let (fwd, _) = lu.P().arrays();
    let mut seen = vec![false; fwd.len()];
    for start in 0..fwd.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = fwd[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    (sign, log)
}

fn det_nystrom(nodes: &[(f64, f64)], kernel: impl Fn(usize, usize) -> f64) -> f64 {
    let m = nodes.len();
    let sw: Vec<f64> = nodes.iter().map(|p| p.1.sqrt()).collect();
    let mat = Mat::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - sw[i] * kernel(i, j) * sw[j]);
    let (sign, log) = log_det(&mat.partial_piv_lu());
    sign * log.exp()
}

fn gue_det(s: f64, m: usize, cap: f64) -> f64 {
    let nodes = quad::mapped(m, s, s + cap);
    let ai: Vec<AiryValue> = nodes.iter().map(|p| airy_value(p.0)).collect();
    det_nystrom(&nodes, |i, j| kernel_from(nodes[i].0, ai[i], nodes[j].0, ai[j]))
}

/// F_GUE(s) = det(I − K_Ai) on L²(s, s+12) by m-point Gauss–Legendre, checked against 2m points.
pub fn tw_gue_cdf(s: f64, m: usize) -> Result<FredholmResult> {
    if !(-8.0..=4.0).contains(&s) {
        return Err(CrossoverError::GueRange(s));
    }
    if m == 0 {
        return Err(CrossoverError::BadParams("quadrature order must be positive"));
    }
    let cap = 12.0;
    let value = gue_det(s, m, cap);
    let fine = gue_det(s, 2 * m, cap);
    let self_convergence = (value - fine).abs();
    Ok(FredholmResult { value, self_convergence, flagged: self_convergence > 1e-6, quad_order: m, domain_cap: cap })
}

/// Determinant and resolvent trace behind f(r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfParts {
    pub det: f64,
    pub trace: f64,
    pub value: f64,
    /// Size of the linear system.
    pub nodes: usize,
}

fn check_residual(r: f64, mat: &Mat<f64>, y: &Mat<f64>, rhs: &[f64]) -> Result<()> {
    let n = rhs.len();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let mut acc = -rhs[i];
        for j in 0..n {
            acc += mat[(i, j)] * y[(j, 0)];
        }
        worst = worst.max(acc.abs());
        scale = scale.max(rhs[i].abs());
    }
    let residual = if scale > 0.0 { worst / scale } else { worst };
    if residual > 1e-8 || !residual.is_finite() {
        return Err(CrossoverError::IllConditioned { r, residual });
    }
    Ok(())
}

/// f(r) in the t-space formulation.
pub fn crossover_pdf_parts(r: f64, params: &CrossoverParams) -> Result<PdfParts> {
    params.validate()?;
    if !r.is_finite() {
        return Err(CrossoverError::NotFinite(r));
    }
    let k = params.kappa;
    let a = r / k;
    let rule = quad::composite(params.quad_order, 0.0, params.t_trunc, params.t_panel);
    let reach = (params.domain_cap - a).max(0.5);
    let mut u = Vec::with_capacity(rule.len() * 2);
    let mut w = Vec::with_capacity(rule.len() * 2);
    for &(t, wt) in &rule {
        u.push(a - t);
        w.push(wt * sigma(k, -t));
    }
    for &(t, wt) in rule.iter().take_while(|p| p.0 < reach) {
        u.push(a + t);
        w.push(wt * sigma(k, t));
    }
    let n = u.len();
    let ai: Vec<AiryValue> = u.iter().map(|&x| airy_value(x)).collect();
    let aa = airy_value(a);
    let b: Vec<f64> = (0..n).map(|i| kernel_from(u[i], ai[i], a, aa)).collect();
    let mat = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - w[i] * kernel_from(u[i], ai[i], u[j], ai[j]));
    let lu = mat.partial_piv_lu();
    let (sign, log) = log_det(&lu);
    let rhs: Vec<f64> = (0..n).map(|i| w[i] * b[i]).collect();
    let y = lu.solve(Mat::from_fn(n, 1, |i, _| rhs[i]));
    check_residual(r, &mat, &y, &rhs)?;
    let mut trace = kernel_from(a, aa, a, aa);
    for i in 0..n {
        trace += b[i] * y[(i, 0)];
    }
    let det = sign * log.exp();
    Ok(PdfParts { det, trace, value: det * trace / k, nodes: n })
}

pub fn crossover_pdf(r: f64, params: &CrossoverParams) -> Result<f64> {
    crossover_pdf_parts(r, params).map(|p| p.value)
}

/// The x-space Nyström matrix I − W^{1/2} K_σ W^{1/2} on (a, a + len) with `per_unit` nodes per unit
/// length, K_σ built by t-quadrature, together with the weighted Airy vector.
fn x_space_system(r: f64, params: &CrossoverParams, len: f64, per_unit: usize) -> (Mat<f64>, Vec<f64>) {
    let k = params.kappa;
    let a = r / k;
    let xs = quad::composite(per_unit, a, a + len, 1.0);
    let rule = quad::composite(params.quad_order, 0.0, params.t_trunc, params.t_panel);
    let m = xs.len();
    let mut kern = vec![0.0; m * m];
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    for &(t, wt) in &rule {
        for (i, &(x, _)) in xs.iter().enumerate() {
            plus[i] = airy_value(x + t).ai;
            minus[i] = airy_value(x - t).ai;
        }
        let (sp, sm) = (wt * sigma(k, t), wt * sigma(k, -t));
        for i in 0..m {
            for j in 0..m {
                kern[i * m + j] += sp * plus[i] * plus[j] + sm * minus[i] * minus[j];
            }
        }
    }
    let sw: Vec<f64> = xs.iter().map(|p| p.1.sqrt()).collect();
    let mat = Mat::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - sw[i] * kern[i * m + j] * sw[j]);
    let ai = xs.iter().zip(&sw).map(|(p, s)| airy_value(p.0).ai * s).collect();
    (mat, ai)
}

/// f(r) by Nyström in x on (a, a + len). Only accurate where K_σ is negligible beyond a + len,
/// which requires κ of order one or larger.
pub fn crossover_pdf_nystrom(r: f64, params: &CrossoverParams, len: f64, per_unit: usize) -> Result<PdfParts> {
    params.validate()?;
    let (mat, ai) = x_space_system(r, params, len, per_unit);
    let n = ai.len();
    let lu = mat.partial_piv_lu();
    let (sign, log) = log_det(&lu);
    let y = lu.solve(Mat::from_fn(n, 1, |i, _| ai[i]));
    check_residual(r, &mat, &y, &ai)?;
    let trace: f64 = (0..n).map(|i| ai[i] * y[(i, 0)]).sum();
    let det = sign * log.exp();
    Ok(PdfParts { det, trace, value: det * trace / params.kappa, nodes: n })
}

/// tr((I − K)⁻¹ P_Ai) on the x-space Nyström grid in two ways: the inner product ⟨(I − K)⁻¹Ai, Ai⟩
/// from one solve, and the trace of the dense product of the full inverse with the rank-one P.
pub fn trace_paths(r: f64, params: &CrossoverParams, len: f64, per_unit: usize) -> Result<(f64, f64)> {
    params.validate()?;
    let (mat, ai) = x_space_system(r, params, len, per_unit);
    let n = ai.len();
    let lu = mat.partial_piv_lu();
    let y = lu.solve(Mat::from_fn(n, 1, |i, _| ai[i]));
    let rank_one: f64 = (0..n).map(|i| ai[i] * y[(i, 0)]).sum();
    let inv = lu.solve(Mat::<f64>::identity(n, n));
    let p = Mat::from_fn(n, n, |i, j| ai[i] * ai[j]);
    let prod = &inv * &p;
    let dense: f64 = (0..n).map(|i| prod[(i, i)]).sum();
    Ok((rank_one, dense))
}

/// f tabulated on the r-grid quadrature nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfTable {
    pub params: CrossoverParams,
    pub lo: f64,
    pub hi: f64,
    /// (r, weight, f(r)).
    pub nodes: Vec<(f64, f64, f64)>,
}

impl PdfTable {
    /// ∫ f dr on the grid.
    pub fn mass(&self) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().map(|n| n.1 * n.2).collect();
        stats::pairwise_sum(&terms)
    }

    pub fn min_value(&self) -> f64 {
        self.nodes.iter().map(|n| n.2).fold(f64::INFINITY, f64::min)
    }

    /// G_β(s) = 1 − ∫ exp(−e^{s − c − r}) f(r) dr with c = ½ log(32πβ⁴).
    pub fn cdf(&self, s: f64) -> f64 {
        let c = gumbel_shift(self.params.beta);
        let terms: Vec<f64> = self.nodes.iter().map(|n| n.1 * n.2 * (-(s - c - n.0).exp()).exp()).collect();
        1.0 - stats::pairwise_sum(&terms)
    }

    /// The same nodes evaluated under other parameters.
    pub fn reevaluate(&self, params: &CrossoverParams) -> Result<PdfTable> {
        let vals: Vec<f64> = self.nodes.par_iter().map(|n| crossover_pdf(n.0, params)).collect::<Result<_>>()?;
        Ok(PdfTable { params: *params, lo: self.lo, hi: self.hi, nodes: self.nodes.iter().zip(vals).map(|(n, f)| (n.0, n.1, f)).collect() })
    }
}

pub fn gumbel_shift(beta: f64) -> f64 {
    0.5 * (32.0 * PI * beta.powi(4)).ln()
}

fn panel_values(lo: f64, hi: f64, params: &CrossoverParams) -> Result<Vec<(f64, f64, f64)>> {
    let rule = quad::mapped(params.r_grid.order, lo, hi);
    let vals: Vec<f64> = rule.par_iter().map(|p| crossover_pdf(p.0, params)).collect::<Result<_>>()?;
    Ok(rule.into_iter().zip(vals).map(|(p, f)| (p.0, p.1, f)).collect())
}

fn panel_mass(p: &[(f64, f64, f64)]) -> f64 {
    p.iter().map(|n| (n.1 * n.2).abs()).sum()
}

const MAX_PANELS: usize = 400;

/// Tabulates f over the r-grid. With an open range the grid grows outward from r = 0 until two
/// consecutive panels on each side carry density mass below `tail_tol`.
pub fn pdf_table(params: &CrossoverParams) -> Result<PdfTable> {
    params.validate()?;
    let g = params.r_grid;
    let width = g.panel * params.kappa;
    if let (Some(lo), Some(hi)) = (g.lo, g.hi) {
        if !(hi > lo) {
            return Err(CrossoverError::BadParams("r grid needs lo < hi"));
        }
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        let step = (hi - lo) / panels as f64;
        let mut nodes = Vec::new();
        let mut edge = 0.0;
        for p in 0..panels {
            let vals = panel_values(lo + p as f64 * step, lo + (p + 1) as f64 * step, params)?;
            if p == 0 || p + 1 == panels {
                edge += panel_mass(&vals);
            }
            nodes.extend(vals);
        }
        if edge > 1e-6 {
            let open = CrossoverParams { r_grid: RGrid { lo: None, hi: None, ..g }, ..*params };
            let need = pdf_table(&open)?;
            return Err(CrossoverError::GridTooNarrow { lo, hi, mass: edge, need_lo: need.lo, need_hi: need.hi });
        }
        return Ok(PdfTable { params: *params, lo, hi, nodes });
    }
    let mut right = Vec::new();
    let mut hi = 0.0;
    let mut quiet = 0;
    while quiet < 2 {
        let vals = panel_values(hi, hi + width, params)?;
        quiet = if panel_mass(&vals) < g.tail_tol { quiet + 1 } else { 0 };
        right.extend(vals);
        hi += width;
        if right.len() > MAX_PANELS * g.order {
            return Err(CrossoverError::Unbounded(MAX_PANELS));
        }
    }
    let mut left: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    let mut lo = 0.0;
    quiet = 0;
    while quiet < 2 {
        let vals = panel_values(lo - width, lo, params)?;
        quiet = if panel_mass(&vals) < g.tail_tol { quiet + 1 } else { 0 };
        left.push(vals);
        lo -= width;
        if left.len() > MAX_PANELS {
            return Err(CrossoverError::Unbounded(MAX_PANELS));
        }
    }
    let mut nodes: Vec<(f64, f64, f64)> = left.into_iter().rev().flatten().collect();
    nodes.extend(right);
    Ok(PdfTable { params: *params, lo, hi, nodes })
}

/// G_β on an s-grid with the refinement figure of every value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub params: CrossoverParams,
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    pub self_convergence: Vec<f64>,
    pub mass: f64,
    pub mass_refined: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl CdfCurve {
    pub fn max_self_convergence(&self) -> f64 {
        self.self_convergence.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.g.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["s", "G_beta", "self_convergence"])?;
        for i in 0..self.s.len() {
            w.write_record(&[self.s[i].to_string(), self.g[i].to_string(), self.self_convergence[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A base table and its refinement on the same r-nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverTables {
    pub base: PdfTable,
    pub refined: PdfTable,
}

impl CrossoverTables {
    pub fn new(params: &CrossoverParams) -> Result<Self> {
        let base = pdf_table(params)?;
        let refined = base.reevaluate(&params.refined())?;
        Ok(CrossoverTables { base, refined })
    }

    pub fn curve(&self, s: &[f64]) -> CdfCurve {
        let g: Vec<f64> = s.iter().map(|&x| self.base.cdf(x)).collect();
        let conv = s.iter().zip(&g).map(|(&x, v)| (self.refined.cdf(x) - v).abs()).collect();
        CdfCurve {
            params: self.base.params,
            s: s.to_vec(),
            g,
            self_convergence: conv,
            mass: self.base.mass(),
            mass_refined: self.refined.mass(),
            r_lo: self.base.lo,
            r_hi: self.base.hi,
        }
    }
}

/// G_β(s) with its self-convergence figure.
pub fn crossover_cdf(s: f64, params: &CrossoverParams) -> Result<FredholmResult> {
    let c = CrossoverTables::new(params)?.curve(&[s]);
    Ok(FredholmResult {
        value: c.g[0],
        self_convergence: c.self_convergence[0],
        flagged: c.self_convergence[0] > 1e-4,
        quad_order: params.quad_order,
        domain_cap: params.domain_cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub beta: f64,
    pub sup_gap: f64,
    /// Largest refinement figure among the values entering the gap.
    pub self_convergence: f64,
    /// ∫f from the refined table. At small β the integral cancels over many orders of magnitude
    /// and only the refined f is accurate enough for it.
    pub mass: f64,
}

/// sup_s |G_β(√2 π^{1/4} β s) − Φ(s)| for each β.
pub fn small_beta_check(betas: &[f64], s_grid: &[f64], base: impl Fn(f64) -> Result<CrossoverParams>) -> Result<Vec<GapRow>> {
    betas
        .iter()
        .map(|&beta| {
            let params = base(beta)?;
            let scale = 2f64.sqrt() * PI.powf(0.25) * beta;
            let tables = CrossoverTables::new(&params)?;
            let scaled: Vec<f64> = s_grid.iter().map(|s| scale * s).collect();
            let curve = tables.curve(&scaled);
            let sup_gap = s_grid.iter().zip(&curve.g).map(|(&s, g)| (g - stats::normal_cdf(s)).abs()).fold(0.0, f64::max);
            Ok(GapRow { beta, sup_gap, self_convergence: curve.max_self_convergence(), mass: curve.mass_refined })
        })
        .collect()
}

/// sup_s |G_β(2^{4/3}β^{4/3} s) − F_GUE(2^{1/3} s)| for each β.
pub fn gue_gap(betas: &[f64], s_grid: &[f64], gue_order: usize, base: impl Fn(f64) -> Result<CrossoverParams>) -> Result<Vec<GapRow>> {
    let cbrt2 = 2f64.cbrt();
    let gue: Vec<FredholmResult> = s_grid.par_iter().map(|&s| tw_gue_cdf(cbrt2 * s, gue_order)).collect::<Result<_>>()?;
    let gue_conv = gue.iter().map(|f| f.self_convergence).fold(0.0, f64::max);
    betas
        .iter()
        .map(|&beta| {
            let params = base(beta)?;
            let tables = CrossoverTables::new(&params)?;
            let scaled: Vec<f64> = s_grid.iter().map(|s| params.kappa * cbrt2 * s).collect();
            let curve = tables.curve(&scaled);
            let sup_gap = gue.iter().zip(&curve.g).map(|(f, g)| (g - f.value).abs()).fold(0.0, f64::max);
            Ok(GapRow { beta, sup_gap, self_convergence: curve.max_self_convergence().max(gue_conv), mass: curve.mass_refined })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn sigma_pole_split_is_continuous() {
        for &k in &[0.125, 2.0, 12.7] {
            // The first correction is κt/12.
            assert_abs_diff_eq!(sigma_regular(k, 1e-6), 0.5, epsilon = k * 1e-6 / 11.0);
            assert_abs_diff_eq!(sigma_regular(k, -1e-6), 0.5, epsilon = k * 1e-6 / 11.0);
            assert_abs_diff_eq!(sigma(k, 0.7) - 1.0 / (k * 0.7), sigma_regular(k, 0.7), epsilon = 1e-12);
            assert_abs_diff_eq!(sigma(k, 0.3) + sigma(k, -0.3), 1.0, epsilon = 1e-12);
        }
        let x: f64 = 9e-4;
        assert_relative_eq!(sigma_regular(1.0, x), sigma(1.0, x) - 1.0 / x, max_relative = 1e-9);
    }

    #[test]
    fn airy_kernel_matches_integral() {
        let rule = quad::composite(20, 0.0, 30.0, 1.0);
        for &(u, v) in &[(-3.0, -1.2), (0.5, 0.5), (-7.0, 2.0)] {
            let direct: f64 = rule.iter().map(|&(s, w)| w * airy_value(u + s).ai * airy_value(v + s).ai).sum();
            assert_abs_diff_eq!(airy_kernel(u, v), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn gue_tails_and_convergence() {
        assert!(tw_gue_cdf(4.0, 40).unwrap().value >= 0.9999);
        assert!(tw_gue_cdf(-8.0, 40).unwrap().value <= 1e-3);
        for s in -5..=2 {
            let a = tw_gue_cdf(s as f64, 40).unwrap();
            assert!(a.self_convergence <= 1e-8, "s = {s}: {}", a.self_convergence);
        }
        assert!(matches!(tw_gue_cdf(5.0, 40), Err(CrossoverError::GueRange(_))));
    }

    #[test]
    fn gue_reference_values() {
        // Published values of F_GUE at s = −2 and 0.
        assert_abs_diff_eq!(tw_gue_cdf(-2.0, 40).unwrap().value, 0.413224142, epsilon = 1e-8);
        assert_abs_diff_eq!(tw_gue_cdf(0.0, 40).unwrap().value, 0.969372828, epsilon = 1e-8);
    }

    #[test]
    fn two_trace_paths_agree() {
        let p = CrossoverParams::new(1.0).unwrap();
        for &r in &[-2.0, 0.0, 2.0] {
            let (a, b) = trace_paths(r, &p, 20.0, 1).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn t_space_agrees_with_x_space() {
        let p = CrossoverParams::new(1.0).unwrap();
        for &r in &[-3.0, 0.0, 1.5] {
            let t = crossover_pdf_parts(r, &p).unwrap();
            let x = crossover_pdf_nystrom(r, &p, 14.0 - (r / p.kappa).min(0.0), 12).unwrap();
            assert_relative_eq!(t.value, x.value, max_relative = 1e-9);
            assert_relative_eq!(t.det, x.det, max_relative = 1e-9);
        }
    }

    #[test]
    fn pdf_refinement_at_beta_one() {
        let p = CrossoverParams::new(1.0).unwrap();
        for &r in &[-2.0, 0.0, 2.0] {
            let a = crossover_pdf(r, &p).unwrap();
            let b = crossover_pdf(r, &p.refined()).unwrap();
            assert!((a - b).abs() <= 1e-4, "r = {r}: {a} vs {b}");
        }
    }

    #[test]
    fn cdf_at_beta_one() {
        let p = CrossoverParams::new(1.0).unwrap();
        let tables = CrossoverTables::new(&p).unwrap();
        assert_abs_diff_eq!(tables.base.mass(), 1.0, epsilon = 5e-3);
        let s: Vec<f64> = (0..41).map(|i| -12.0 + 0.5 * i as f64).collect();
        let c = tables.curve(&s);
        assert!(c.is_monotone());
        assert!(c.g[0] < 1e-3 && c.g[40] > 1.0 - 1e-3, "{} {}", c.g[0], c.g[40]);
        assert!(c.max_self_convergence() <= 1e-4);
    }

    #[test]
    fn fixed_grid_too_narrow_is_rejected() {
        let mut p = CrossoverParams::new(1.0).unwrap();
        p.r_grid.lo = Some(-1.0);
        p.r_grid.hi = Some(1.0);
        assert!(matches!(pdf_table(&p), Err(CrossoverError::GridTooNarrow { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(CrossoverParams::new(0.0).is_err());
        let mut p = CrossoverParams::new(1.0).unwrap();
        assert_eq!(p.kappa, 2.0);
        p.kappa = 1.0;
        assert!(crossover_pdf(0.0, &p).is_err());
        assert!(airy(f64::NAN).is_err());
    }
}

//! Weighted U-statistics over the environment and the layered chaos expansion.

use crate::env::{EnvField, EnvKind, EnvSpec};
use crate::quad::mapped;
use crate::transfer::env_row;
use crate::walk::{fock_norm_sq, parity_ok, pkn_raw, SimplexPoint};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Largest dense grid accepted by [`rect_average`].
pub const MAX_GRID_CELLS: usize = 20_000_000;
/// Largest number of cells for exhaustive enumeration (2^cells environments).
pub const MAX_ENUM_CELLS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UStatError {
    #[error("general kernels are limited to order k <= 2 (got {0})")]
    OrderTooHigh(usize),
    #[error("grid needs {cells} cells, above the limit {limit}")]
    CostGuard { cells: usize, limit: usize },
    #[error("chaos order {k} exceeds horizon {n}")]
    OrderAboveHorizon { k: usize, n: usize },
    #[error("cell ({i},{x}) of the grid is not stored in the environment")]
    OutsideEnvironment { i: usize, x: i64 },
    #[error("grids disagree on horizon or window")]
    GridMismatch,
    #[error("product kernels need pairwise disjoint time supports")]
    OverlappingSupports,
    #[error("bad target: {0}")]
    BadTarget(String),
    #[error("enumeration over {0} cells exceeds the limit")]
    TooManyCells(usize),
}

/// Averages ḡ_n over the rectangles ((i−1)/n, i/n] × ((x−1)/√n, (x+1)/√n],
/// i ∈ [n]^k with distinct entries, i ↔ x, |x_j| ≤ halfwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    k: usize,
    n: usize,
    halfwidth: i64,
    values: Vec<f64>,
}

impl KernelGrid {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn halfwidth(&self) -> i64 {
        self.halfwidth
    }

    /// Lebesgue measure 2^k n^{−3k/2} of one rectangle.
    pub fn cell_volume(&self) -> f64 {
        2f64.powi(self.k as i32) * (self.n as f64).powf(-1.5 * self.k as f64)
    }

    fn slots(&self) -> usize {
        self.halfwidth as usize + 1
    }

    /// Parity-valid sites of row i inside the window.
    pub fn sites(&self, i: usize) -> impl Iterator<Item = i64> {
        let h = self.halfwidth;
        let start = if parity_ok(i, -h) { -h } else { -h + 1 };
        (start..=h).step_by(2)
    }

    fn slot(&self, i: usize, x: i64) -> usize {
        let h = self.halfwidth;
        let start = if parity_ok(i, -h) { -h } else { -h + 1 };
        ((x - start) / 2) as usize
    }

    fn index(&self, times: &[usize], sites: &[i64]) -> usize {
        let s = self.slots();
        let mut idx = 0usize;
        for (&i, &x) in times.iter().zip(sites) {
            idx = (idx * self.n + (i - 1)) * s + self.slot(i, x);
        }
        idx
    }

    /// ḡ_n at the cell (i, x); zero for repeated times or cells outside the window.
    pub fn get(&self, times: &[usize], sites: &[i64]) -> f64 {
        assert_eq!(times.len(), self.k);
        for (j, (&i, &x)) in times.iter().zip(sites).enumerate() {
            if i == 0 || i > self.n || x.abs() > self.halfwidth || !parity_ok(i, x) {
                return 0.0;
            }
            if times[..j].contains(&i) {
                return 0.0;
            }
        }
        self.values[self.index(times, sites)]
    }

    /// Visit every stored cell with distinct times.
    pub fn for_each_cell<F: FnMut(&[usize], &[i64], f64)>(&self, mut f: F) {
        match self.k {
            0 => f(&[], &[], self.values[0]),
            1 => {
                for i in 1..=self.n {
                    for x in self.sites(i) {
                        f(&[i], &[x], self.get(&[i], &[x]));
                    }
                }
            }
            _ => {
                for i1 in 1..=self.n {
                    for i2 in 1..=self.n {
                        if i1 == i2 {
                            continue;
                        }
                        for x1 in self.sites(i1) {
                            for x2 in self.sites(i2) {
                                f(&[i1, i2], &[x1, x2], self.get(&[i1, i2], &[x1, x2]));
                            }
                        }
                    }
                }
            }
        }
    }

    /// ‖ḡ_n‖² over the stored rectangles.
    pub fn norm_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_cell(|_, _, v| s += v * v);
        s * self.cell_volume()
    }

    /// Whether ḡ vanishes off the ordered simplex i_1 < … < i_k.
    pub fn is_simplex_supported(&self) -> bool {
        let mut ok = true;
        self.for_each_cell(|t, _, v| {
            if v != 0.0 && !t.windows(2).all(|w| w[0] < w[1]) {
                ok = false;
            }
        });
        ok
    }

    /// The grid with coordinates permuted: (g∘π)(t, x) = g(t_π, x_π).
    pub fn permuted(&self, perm: &[usize]) -> KernelGrid {
        assert_eq!(perm.len(), self.k);
        let mut out = self.clone();
        if self.k < 2 {
            return out;
        }
        self.for_each_cell(|t, x, _| {
            let pt: Vec<usize> = perm.iter().map(|&p| t[p]).collect();
            let px: Vec<i64> = perm.iter().map(|&p| x[p]).collect();
            let idx = out.index(t, x);
            out.values[idx] = self.get(&pt, &px);
        });
        out
    }

    /// Linear combination a·self + b·other.
    pub fn combine(&self, a: f64, other: &KernelGrid, b: f64) -> Result<KernelGrid, UStatError> {
        if self.k != other.k || self.n != other.n || self.halfwidth != other.halfwidth {
            return Err(UStatError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        Ok(KernelGrid { k: self.k, n: self.n, halfwidth: self.halfwidth, values })
    }
}

/// Average g over each rectangle by an `order`-point Gauss–Legendre product rule.
/// `g` receives (t, x) in rescaled coordinates.
pub fn rect_average<G>(g: G, k: usize, n: usize, halfwidth: usize, order: usize) -> Result<KernelGrid, UStatError>
where
    G: Fn(&[f64], &[f64]) -> f64,
{
    if k > 2 {
        return Err(UStatError::OrderTooHigh(k));
    }
    let h = halfwidth as i64;
    let slots = halfwidth + 1;
    if k > n {
        return Ok(KernelGrid { k, n, halfwidth: h, values: vec![0.0; (n * slots).pow(k as u32).max(1)] });
    }
    let cells = (n * slots).pow(k as u32);
    if cells > MAX_GRID_CELLS {
        return Err(UStatError::CostGuard { cells, limit: MAX_GRID_CELLS });
    }
    let mut grid = KernelGrid { k, n, halfwidth: h, values: vec![0.0; cells.max(1)] };
    let nf = n as f64;
    let sn = nf.sqrt();
    let unit = mapped(order, 0.0, 1.0);
    // quadrature nodes of a 1-d cell: (t, x, weight) with weights summing to 1
    let cell_nodes = |i: usize, x: i64| -> Vec<(f64, f64, f64)> {
        let mut v = Vec::with_capacity(unit.len() * unit.len());
        for &(a, wa) in &unit {
            for &(b, wb) in &unit {
                let t = (i as f64 - 1.0 + a) / nf;
                let y = (x as f64 - 1.0 + 2.0 * b) / sn;
                v.push((t, y, wa * wb));
            }
        }
        v
    };
    match k {
        0 => grid.values[0] = g(&[], &[]),
        1 => {
            for i in 1..=n {
                for x in grid.sites(i).collect::<Vec<_>>() {
                    let mut s = 0.0;
                    for (t, y, w) in cell_nodes(i, x) {
                        s += w * g(&[t], &[y]);
                    }
                    let idx = grid.index(&[i], &[x]);
                    grid.values[idx] = s;
                }
            }
        }
        _ => {
            for i1 in 1..=n {
                for x1 in grid.sites(i1).collect::<Vec<_>>() {
                    let n1 = cell_nodes(i1, x1);
                    for i2 in 1..=n {
                        if i1 == i2 {
                            continue;
                        }
                        for x2 in grid.sites(i2).collect::<Vec<_>>() {
                            let n2 = cell_nodes(i2, x2);
                            let mut s = 0.0;
                            for &(t1, y1, w1) in &n1 {
                                for &(t2, y2, w2) in &n2 {
                                    s += w1 * w2 * g(&[t1, t2], &[y1, y2]);
                                }
                            }
                            let idx = grid.index(&[i1, i2], &[x1, x2]);
                            grid.values[idx] = s;
                        }
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// S_k^n(g) = 2^{k/2} Σ_{i ∈ E_k^n} Σ_x ḡ_n ω(i,x). With `ordered`, the sum runs over
/// D_k^n only (i_1 < … < i_k), which coincides with S_k^n(g) for simplex-supported g.
pub fn u_stat(grid: &KernelGrid, env: &EnvField, ordered: bool) -> Result<f64, UStatError> {
    let mut total = 0.0;
    let mut missing = None;
    grid.for_each_cell(|t, x, v| {
        if v == 0.0 || missing.is_some() {
            return;
        }
        if ordered && !t.windows(2).all(|w| w[0] < w[1]) {
            return;
        }
        let mut prod = v;
        for (&i, &y) in t.iter().zip(x) {
            match env.get(i, y) {
                Some(w) => prod *= w,
                None => {
                    missing = Some((i, y));
                    return;
                }
            }
        }
        total += prod;
    });
    if let Some((i, x)) = missing {
        return Err(UStatError::OutsideEnvironment { i, x });
    }
    Ok(2f64.powf(grid.k as f64 / 2.0) * total)
}

/// S_k^n of a product kernel ∏ g_j(t_j, x_j) whose factors live on disjoint time ranges.
pub fn u_stat_product(factors: &[KernelGrid], env: &EnvField) -> Result<f64, UStatError> {
    let mut used: Vec<(usize, usize)> = Vec::new();
    let mut value = 1.0;
    for g in factors {
        if g.k != 1 {
            return Err(UStatError::GridMismatch);
        }
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        g.for_each_cell(|t, _, v| {
            if v != 0.0 {
                lo = lo.min(t[0]);
                hi = hi.max(t[0]);
            }
        });
        if lo <= hi {
            if used.iter().any(|&(a, b)| lo <= b && a <= hi) {
                return Err(UStatError::OverlappingSupports);
            }
            used.push((lo, hi));
        }
        value *= u_stat(g, env, false)?;
    }
    Ok(value)
}

/// Exact moments of S_1, S_2 over every ±1 environment on a small window.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnumerationReport {
    pub n: usize,
    pub halfwidth: usize,
    pub cells: usize,
    pub environments: usize,
    pub mean: [f64; 2],
    pub cross: f64,
    pub second_moment: [f64; 2],
    pub bound: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MomentRecord {
    pub moment: String,
    pub exact_value: f64,
    pub bound: Option<f64>,
}

impl EnumerationReport {
    pub fn records(&self) -> Vec<MomentRecord> {
        vec![
            MomentRecord { moment: "E[S1]".into(), exact_value: self.mean[0], bound: None },
            MomentRecord { moment: "E[S2]".into(), exact_value: self.mean[1], bound: None },
            MomentRecord { moment: "E[S1*S2]".into(), exact_value: self.cross, bound: None },
            MomentRecord { moment: "E[S1^2]".into(), exact_value: self.second_moment[0], bound: Some(self.bound[0]) },
            MomentRecord { moment: "E[S2^2]".into(), exact_value: self.second_moment[1], bound: Some(self.bound[1]) },
        ]
    }
}

/// Rectangular window |x| ≤ halfwidth at every time 1..=n.
pub fn box_cells(n: usize, halfwidth: usize) -> Vec<(usize, i64)> {
    let h = halfwidth as i64;
    let mut cells = Vec::new();
    for i in 1..=n {
        for x in -h..=h {
            if parity_ok(i, x) {
                cells.push((i, x));
            }
        }
    }
    cells
}

/// Field on the box window with the given cell values (in [`box_cells`] order).
pub fn box_env(spec: EnvSpec, n: usize, halfwidth: usize, values: &[f64]) -> EnvField {
    let h = halfwidth as i64;
    let mut lo = vec![0i64];
    let mut rows = vec![Vec::new()];
    let mut it = values.iter();
    for i in 1..=n {
        let start = if parity_ok(i, -h) { -h } else { -h + 1 };
        let row: Vec<f64> = (start..=h).step_by(2).map(|_| *it.next().expect("enough values")).collect();
        lo.push(start);
        rows.push(row);
    }
    EnvField::from_rows(spec, 0, lo, rows)
}

/// p_k^n as a weight for `rect_average`, zero off the simplex.
pub fn pkn_weight(n: usize) -> impl Fn(&[f64], &[f64]) -> f64 + Sync {
    move |t: &[f64], x: &[f64]| match SimplexPoint::new(t.to_vec(), x.to_vec()) {
        Ok(p) => pkn_raw(n, &p),
        Err(_) => 0.0,
    }
}

/// Full enumeration of Rademacher environments on the (n, halfwidth) box.
pub fn enumerate_oracle(g1: &KernelGrid, g2: &KernelGrid) -> Result<EnumerationReport, UStatError> {
    if g1.k != 1 || g2.k != 2 || g1.n != g2.n || g1.halfwidth != g2.halfwidth {
        return Err(UStatError::GridMismatch);
    }
    let n = g1.n;
    let hw = g1.halfwidth as usize;
    let cells = box_cells(n, hw).len();
    if cells > MAX_ENUM_CELLS {
        return Err(UStatError::TooManyCells(cells));
    }
    let count = 1usize << cells;
    let spec = EnvSpec::new(EnvKind::Rademacher);
    let mut m = [0.0; 2];
    let mut sq = [0.0; 2];
    let mut cross = 0.0;
    let mut vals = vec![0.0; cells];
    // ω and −ω are visited together so that odd moments cancel term by term
    let top = count - 1;
    for mask in 0..count / 2 {
        let mut pair = [0.0; 2];
        let mut pair_s2 = [0.0; 2];
        for (slot, mk) in [mask, top ^ mask].into_iter().enumerate() {
            for (c, v) in vals.iter_mut().enumerate() {
                *v = if mk >> c & 1 == 1 { 1.0 } else { -1.0 };
            }
            let env = box_env(spec, n, hw, &vals);
            pair[slot] = u_stat(g1, &env, false)?;
            pair_s2[slot] = u_stat(g2, &env, false)?;
        }
        m[0] += pair[0] + pair[1];
        m[1] += pair_s2[0] + pair_s2[1];
        cross += pair[0] * pair_s2[0] + pair[1] * pair_s2[1];
        sq[0] += pair[0] * pair[0] + pair[1] * pair[1];
        sq[1] += pair_s2[0] * pair_s2[0] + pair_s2[1] * pair_s2[1];
    }
    let c = count as f64;
    let nf = n as f64;
    Ok(EnumerationReport {
        n,
        halfwidth: hw,
        cells,
        environments: count,
        mean: [m[0] / c, m[1] / c],
        cross: cross / c,
        second_moment: [sq[0] / c, sq[1] / c],
        bound: [nf.powf(1.5) * g1.norm_sq(), nf.powf(3.0) * g2.norm_sq()],
    })
}

/// Where the expansion is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosTarget {
    PointToLine,
    PointToPoint { x: i64 },
    FourParam { m: usize, y: i64, k: usize, x: i64 },
}

/// Coefficients T_k of β^k in the product-form partition function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosLayers {
    pub orders: Vec<f64>,
    pub n: usize,
    pub target: ChaosTarget,
}

impl ChaosLayers {
    /// Σ_k β^k T_k.
    pub fn total(&self, beta: f64) -> f64 {
        self.orders.iter().rev().fold(0.0, |acc, &t| acc * beta + t)
    }

    /// S_k^n(p_k^n) = 2^{−k/2} T_k (point-to-line only).
    pub fn s_k(&self, k: usize) -> f64 {
        self.orders[k] * 2f64.powf(-(k as f64) / 2.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["order", "value"])?;
        for (k, v) in self.orders.iter().enumerate() {
            w.write_record([k.to_string(), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Layered expansion U_k(j+1,y) = ½[U_k(j,y±1)] + ω(j+1,y)·½[U_{k−1}(j,y±1)], orders 0..=K.
pub fn chaos_layers(env: &EnvField, n: usize, target: ChaosTarget, max_order: usize) -> Result<ChaosLayers, UStatError> {
    let (m, y0, horizon) = match target {
        ChaosTarget::PointToLine | ChaosTarget::PointToPoint { .. } => (0usize, 0i64, n),
        ChaosTarget::FourParam { m, y, k, .. } => {
            if k < m || !parity_ok(m, y) {
                return Err(UStatError::BadTarget(format!("({m},{y}) -> {k}")));
            }
            (m, y, k - m)
        }
    };
    if max_order > horizon {
        return Err(UStatError::OrderAboveHorizon { k: max_order, n: horizon });
    }
    if m + horizon > env.n() {
        return Err(UStatError::BadTarget(format!("horizon {} beyond environment", m + horizon)));
    }
    let kk = max_order;
    // layers[k][q] at relative time j covers sites y0 − j + 2q
    let mut layers: Vec<Vec<f64>> = (0..=kk).map(|k| vec![if k == 0 { 1.0 } else { 0.0 }]).collect();
    for j in 0..horizon {
        let i = m + j + 1;
        let lo_x = y0 - (j as i64 + 1);
        let (w, off) = env_row(env, i, lo_x, y0 + j as i64 + 1)
            .map_err(|_| UStatError::OutsideEnvironment { i, x: lo_x })?;
        let w = &w[off..off + j + 2];
        let avg = |row: &[f64], q: usize| -> f64 {
            let left = if q >= 1 { row[q - 1] } else { 0.0 };
            let right = if q <= j { row[q] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(kk + 1);
        for k in 0..=kk {
            let row: Vec<f64> = (0..j + 2)
                .map(|q| {
                    let mut v = avg(&layers[k], q);
                    if k > 0 {
                        v += w[q] * avg(&layers[k - 1], q);
                    }
                    v
                })
                .collect();
            next.push(row);
        }
        layers = next;
    }
    let orders = match target {
        ChaosTarget::PointToLine => layers.iter().map(|r| crate::stats_sum(r)).collect(),
        ChaosTarget::PointToPoint { x } | ChaosTarget::FourParam { x, .. } => {
            let d = x - (y0 - horizon as i64);
            if d < 0 || d % 2 != 0 || d / 2 > horizon as i64 {
                vec![0.0; kk + 1]
            } else {
                layers.iter().map(|r| r[(d / 2) as usize]).collect()
            }
        }
    };
    Ok(ChaosLayers { orders, n, target })
}

/// Σ_{k>K} 2^k β^{2k} ‖ϱ_k‖², summed until terms fall below machine precision.
pub fn chaos_tail_mass(max_order: usize, beta: f64) -> f64 {
    let b2 = beta * beta;
    let mut total = 0.0;
    let mut k = max_order + 1;
    loop {
        let term = 2f64.powi(k as i32) * b2.powi(k as i32) * fock_norm_sq(k);
        total += term;
        if term <= f64::EPSILON * total.max(f64::MIN_POSITIVE) && k > 2 * (b2 * b2) as usize + 4 {
            break;
        }
        if term == 0.0 || k > 100_000 {
            break;
        }
        k += 1;
    }
    total
}

//! Space-time disorder: distribution specs, counter-seeded fields and the tilt.

use rand::RngCore;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("halfwidth {halfwidth} is smaller than the horizon {n}; the walk can leave the stored window")]
    WindowTooNarrow { n: usize, halfwidth: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("beta = {beta} lies outside the finite log-MGF interval ({lo}, {hi})")]
    OutsideMgfDomain { beta: f64, lo: f64, hi: f64 },
    #[error("tilt requires beta_n > 0, got {0}")]
    BadTilt(f64),
    #[error("invalid distribution parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Gaussian,
    Rademacher,
    Uniform,
    ShiftedExponential,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::Gaussian,
        EnvKind::Rademacher,
        EnvKind::Uniform,
        EnvKind::ShiftedExponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Gaussian => "gaussian",
            EnvKind::Rademacher => "rademacher",
            EnvKind::Uniform => "uniform",
            EnvKind::ShiftedExponential => "shifted_exponential",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EnvError::BadParams(format!("unknown environment kind `{s}`")))
    }
}

/// Affine change `mean + sd * xi` applied to the standardized draw `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub mean: f64,
    pub sd: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams { mean: 0.0, sd: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    #[serde(default)]
    pub params: EnvParams,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        EnvSpec { kind, params: EnvParams::default() }
    }

    pub fn with_params(kind: EnvKind, mean: f64, sd: f64) -> Result<Self, EnvError> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(EnvError::BadParams(format!("mean {mean}, sd {sd}")));
        }
        Ok(EnvSpec { kind, params: EnvParams { mean, sd } })
    }

    pub fn mean(&self) -> f64 {
        self.params.mean
    }

    pub fn variance(&self) -> f64 {
        self.params.sd * self.params.sd
    }

    /// Open interval of β on which `log E e^{βω}` is finite.
    pub fn mgf_domain(&self) -> (f64, f64) {
        match self.kind {
            EnvKind::ShiftedExponential => (f64::NEG_INFINITY, 1.0 / self.params.sd),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// λ(β) = log E e^{βω}, closed form per kind.
    pub fn log_mgf(&self, beta: f64) -> Result<f64, EnvError> {
        let (lo, hi) = self.mgf_domain();
        if !(beta > lo && beta < hi) {
            return Err(EnvError::OutsideMgfDomain { beta, lo, hi });
        }
        let b = beta * self.params.sd;
        Ok(beta * self.params.mean + standard_log_mgf(self.kind, b))
    }

    /// Draw one value from the stream `rng`.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.mean + self.params.sd * standard_draw(self.kind, rng)
    }
}

fn standard_log_mgf(kind: EnvKind, b: f64) -> f64 {
    match kind {
        EnvKind::Gaussian => 0.5 * b * b,
        EnvKind::Rademacher => {
            let a = b.abs();
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        }
        EnvKind::Uniform => {
            let a = 3f64.sqrt() * b.abs();
            if a < 1e-3 {
                let a2 = a * a;
                a2 / 6.0 - a2 * a2 / 180.0 + a2 * a2 * a2 / 2835.0
            } else {
                a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
            }
        }
        EnvKind::ShiftedExponential => {
            if b.abs() < 1e-3 {
                // Σ_{k≥2} b^k / k
                let mut term = b * b;
                let mut sum = 0.0;
                for k in 2..12 {
                    sum += term / k as f64;
                    term *= b;
                }
                sum
            } else {
                -b - (-b).ln_1p()
            }
        }
    }
}

fn standard_draw<R: RngCore + ?Sized>(kind: EnvKind, rng: &mut R) -> f64 {
    match kind {
        EnvKind::Gaussian => StandardNormal.sample(rng),
        EnvKind::Rademacher => {
            if rng.next_u64() >> 63 == 0 {
                -1.0
            } else {
                1.0
            }
        }
        EnvKind::Uniform => {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            3f64.sqrt() * (2.0 * u - 1.0)
        }
        EnvKind::ShiftedExponential => {
            let e: f64 = Exp1.sample(rng);
            e - 1.0
        }
    }
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent 64-bit key from a parent key and a counter.
#[inline]
pub fn derive_seed(parent: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Small splitmix stream; one per lattice cell.
#[derive(Debug, Clone)]
pub struct CellRng {
    state: u64,
}

impl CellRng {
    pub fn for_cell(seed: u64, i: usize, x: i64) -> Self {
        let key = derive_seed(derive_seed(seed, i as u64), x as u64);
        CellRng { state: key }
    }

    pub fn from_key(key: u64) -> Self {
        CellRng { state: key }
    }
}

impl RngCore for CellRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

/// Value of ω(i,x) for a given master seed, independent of any window.
pub fn cell_value(spec: &EnvSpec, seed: u64, i: usize, x: i64) -> f64 {
    spec.draw(&mut CellRng::for_cell(seed, i, x))
}

/// Fill `out` with ω(i, lo), ω(i, lo+2), … for the given master seed.
pub fn fill_row(spec: &EnvSpec, seed: u64, i: usize, lo: i64, out: &mut [f64]) {
    let row_key = derive_seed(seed, i as u64);
    for (q, v) in out.iter_mut().enumerate() {
        let x = lo + 2 * q as i64;
        *v = spec.draw(&mut CellRng::from_key(derive_seed(row_key, x as u64)));
    }
}

/// Law of the stored values: the base spec, optionally tilted at some β_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldLaw {
    pub spec: EnvSpec,
    pub tilt: Option<f64>,
    pub mean: f64,
    pub variance: f64,
}

/// ω(i,x) on parity-valid cells, rows 0..=n; row 0 carries no disorder.
#[derive(Debug, Clone)]
pub struct EnvField {
    n: usize,
    halfwidth: usize,
    seed: u64,
    law: FieldLaw,
    lo: Vec<i64>,
    offsets: Vec<usize>,
    len: Vec<usize>,
    values: Vec<f64>,
}

/// Largest |x| ≤ r with x ≡ i (mod 2), as a signed bound; negative when empty.
fn parity_radius(r: i64, i: usize) -> i64 {
    if (r - i as i64).rem_euclid(2) == 0 {
        r
    } else {
        r - 1
    }
}

impl EnvField {
    /// Fill the light cone |x| ≤ min(halfwidth, i + halfwidth − n) of every row.
    pub fn sample(spec: &EnvSpec, n: usize, halfwidth: usize, seed: u64) -> Result<Self, EnvError> {
        if n == 0 {
            return Err(EnvError::EmptyHorizon);
        }
        if halfwidth < n {
            return Err(EnvError::WindowTooNarrow { n, halfwidth });
        }
        let extra = halfwidth - n;
        let radii: Vec<i64> = (0..=n)
            .map(|i| {
                if i == 0 {
                    -1
                } else {
                    parity_radius(halfwidth.min(i + extra) as i64, i)
                }
            })
            .collect();
        Ok(Self::fill(n, halfwidth, seed, EnvSpec::clone(spec), |i| {
            let r = radii[i];
            (-r, r)
        }))
    }

    /// Fill an arbitrary per-row window `[lo_i, hi_i]` (parity-adjusted inward).
    pub fn sample_windowed<F>(spec: &EnvSpec, n: usize, seed: u64, window: F) -> Self
    where
        F: Fn(usize) -> (i64, i64),
    {
        let halfwidth = (1..=n)
            .map(|i| {
                let (a, b) = window(i);
                a.unsigned_abs().max(b.unsigned_abs()) as usize
            })
            .max()
            .unwrap_or(0);
        Self::fill(n, halfwidth, seed, *spec, |i| if i == 0 { (1, -1) } else { window(i) })
    }

    fn fill<F>(n: usize, halfwidth: usize, seed: u64, spec: EnvSpec, window: F) -> Self
    where
        F: Fn(usize) -> (i64, i64),
    {
        let mut lo = Vec::with_capacity(n + 1);
        let mut len = Vec::with_capacity(n + 1);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..=n {
            let (a, b) = window(i);
            let a = if (a - i as i64).rem_euclid(2) == 0 { a } else { a + 1 };
            let b = if (b - i as i64).rem_euclid(2) == 0 { b } else { b - 1 };
            let count = if b >= a { ((b - a) / 2 + 1) as usize } else { 0 };
            lo.push(a);
            len.push(count);
            offsets.push(total);
            total += count;
        }
        let mut values = Vec::with_capacity(total);
        for i in 0..=n {
            for j in 0..len[i] {
                let x = lo[i] + 2 * j as i64;
                values.push(cell_value(&spec, seed, i, x));
            }
        }
        let law = FieldLaw { spec, tilt: None, mean: spec.mean(), variance: spec.variance() };
        EnvField { n, halfwidth, seed, law, lo, offsets, len, values }
    }

    /// Build a field directly from row data (row i starts at site `lo[i]`).
    pub fn from_rows(spec: EnvSpec, seed: u64, lo: Vec<i64>, rows: Vec<Vec<f64>>) -> Self {
        assert_eq!(lo.len(), rows.len(), "one lower bound per row");
        assert!(!rows.is_empty(), "at least row 0");
        let n = rows.len() - 1;
        let mut offsets = Vec::with_capacity(rows.len());
        let mut len = Vec::with_capacity(rows.len());
        let mut values = Vec::new();
        let mut halfwidth = 0usize;
        for (i, row) in rows.iter().enumerate() {
            if !row.is_empty() {
                assert_eq!((lo[i] - i as i64).rem_euclid(2), 0, "row {i} starts off parity");
                let hi = lo[i] + 2 * (row.len() as i64 - 1);
                halfwidth = halfwidth.max(lo[i].unsigned_abs() as usize).max(hi.unsigned_abs() as usize);
            }
            offsets.push(values.len());
            len.push(row.len());
            values.extend_from_slice(row);
        }
        let law = FieldLaw { spec, tilt: None, mean: spec.mean(), variance: spec.variance() };
        EnvField { n, halfwidth, seed, law, lo, offsets, len, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn halfwidth(&self) -> usize {
        self.halfwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.law.spec
    }

    pub fn law(&self) -> &FieldLaw {
        &self.law
    }

    /// Stored site range of row i as (lowest site, count).
    pub fn row_window(&self, i: usize) -> (i64, usize) {
        (self.lo[i], self.len[i])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offsets[i]..self.offsets[i] + self.len[i]]
    }

    pub fn contains(&self, i: usize, x: i64) -> bool {
        if i > self.n || (x - i as i64).rem_euclid(2) != 0 {
            return false;
        }
        let d = x - self.lo[i];
        d >= 0 && ((d / 2) as usize) < self.len[i]
    }

    pub fn get(&self, i: usize, x: i64) -> Option<f64> {
        if self.contains(i, x) {
            Some(self.values[self.offsets[i] + ((x - self.lo[i]) / 2) as usize])
        } else {
            None
        }
    }

    /// ω(i,x); panics outside the stored window.
    #[inline]
    pub fn at(&self, i: usize, x: i64) -> f64 {
        match self.get(i, x) {
            Some(v) => v,
            None => panic!("cell ({i},{x}) is not stored in this environment"),
        }
    }

    /// Apply `f` to every stored value, keeping the window and seed.
    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> EnvField {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = f(*v);
        }
        out
    }

    /// ω̃(i,x) = (e^{βω − λ(β)} − 1)/β.
    pub fn tilt(&self, beta_n: f64) -> Result<EnvField, EnvError> {
        if !(beta_n > 0.0) {
            return Err(EnvError::BadTilt(beta_n));
        }
        let spec = self.law.spec;
        let lam = spec.log_mgf(beta_n)?;
        let mut out = self.map_values(|w| (beta_n * w - lam).exp_m1() / beta_n);
        out.law = FieldLaw {
            spec,
            tilt: Some(beta_n),
            mean: 0.0,
            variance: tilted_variance(&spec, beta_n)?,
        };
        Ok(out)
    }

    /// ω_n(i,x) = ω(n − i, x) for i in 1..n; row n of the result is empty.
    pub fn time_reversed(&self) -> EnvField {
        let n = self.n;
        let mut lo = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(n + 1);
        lo.push(0);
        rows.push(Vec::new());
        for i in 1..=n {
            let src = n - i;
            lo.push(self.lo[src]);
            rows.push(self.row(src).to_vec());
        }
        // parity of row i in the reversed field is that of n - i
        let mut out = EnvField::from_rows_unchecked(self.law, self.seed, lo, rows);
        out.halfwidth = self.halfwidth;
        out
    }

    fn from_rows_unchecked(law: FieldLaw, seed: u64, lo: Vec<i64>, rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len() - 1;
        let mut offsets = Vec::with_capacity(rows.len());
        let mut len = Vec::with_capacity(rows.len());
        let mut values = Vec::new();
        for row in &rows {
            offsets.push(values.len());
            len.push(row.len());
            values.extend_from_slice(row);
        }
        EnvField { n, halfwidth: 0, seed, law, lo, offsets, len, values }
    }
}

/// Exact variance of the tilted field, (e^{λ(2β)−2λ(β)} − 1)/β².
pub fn tilted_variance(spec: &EnvSpec, beta_n: f64) -> Result<f64, EnvError> {
    let l1 = spec.log_mgf(beta_n)?;
    match spec.log_mgf(2.0 * beta_n) {
        Ok(l2) => Ok((l2 - 2.0 * l1).exp_m1() / (beta_n * beta_n)),
        Err(_) => Ok(f64::INFINITY),
    }
}

/// Second moment of e^{βω − λ(β)}, i.e. 1 + β² Var(ω̃).
pub fn tilted_overlap_factor(spec: &EnvSpec, beta: f64) -> Result<f64, EnvError> {
    if beta == 0.0 {
        return Ok(1.0);
    }
    let l1 = spec.log_mgf(beta)?;
    let l2 = spec.log_mgf(2.0 * beta)?;
    Ok((l2 - 2.0 * l1).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rademacher_support() {
        let f = EnvField::sample(&EnvSpec::new(EnvKind::Rademacher), 40, 40, 3).unwrap();
        for i in 1..=40 {
            assert!(f.row(i).iter().all(|&v| v == 1.0 || v == -1.0));
        }
    }

    #[test]
    fn regeneration_is_bit_exact() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let a = EnvField::sample(&spec, 30, 35, 99).unwrap();
        let b = EnvField::sample(&spec, 30, 35, 99).unwrap();
        for i in 1..=30 {
            assert_eq!(a.row(i), b.row(i));
        }
    }

    #[test]
    fn narrow_window_rejected() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        assert_eq!(
            EnvField::sample(&spec, 10, 9, 0).unwrap_err(),
            EnvError::WindowTooNarrow { n: 10, halfwidth: 9 }
        );
    }

    #[test]
    fn cone_rows_store_i_plus_one_values() {
        let f = EnvField::sample(&EnvSpec::new(EnvKind::Uniform), 12, 12, 1).unwrap();
        assert_eq!(f.row(0).len(), 0);
        for i in 1..=12 {
            assert_eq!(f.row(i).len(), i + 1);
            assert_eq!(f.row_window(i).0, -(i as i64));
        }
        assert!(!f.contains(3, 0));
        assert!(f.get(3, 2).is_none());
    }

    #[test]
    fn gaussian_sample_moments() {
        // 4σ/√N with N ≈ 10⁶: mean within 4e-3, variance (sd √2) within 1e-2
        let f = EnvField::sample(&EnvSpec::new(EnvKind::Gaussian), 1414, 1414, 2024).unwrap();
        let mut s = 0.0;
        let mut s2 = 0.0;
        let mut cnt = 0usize;
        for i in 1..=1414 {
            for &v in f.row(i) {
                s += v;
                s2 += v * v;
                cnt += 1;
            }
        }
        assert!(cnt >= 1_000_000);
        let mean = s / cnt as f64;
        let var = s2 / cnt as f64 - mean * mean;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-2, "var {var}");
    }

    #[test]
    fn log_mgf_closed_forms() {
        let g = EnvSpec::new(EnvKind::Gaussian);
        assert_abs_diff_eq!(g.log_mgf(0.7).unwrap(), 0.245, epsilon = 1e-15);
        let r = EnvSpec::new(EnvKind::Rademacher);
        assert_abs_diff_eq!(r.log_mgf(1.0).unwrap(), 1f64.cosh().ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.log_mgf(1.0).unwrap(), 0.43378, epsilon = 1e-5);
        let u = EnvSpec::new(EnvKind::Uniform);
        let a = 3f64.sqrt() * 0.8;
        assert_abs_diff_eq!(u.log_mgf(0.8).unwrap(), (a.sinh() / a).ln(), epsilon = 1e-14);
        let e = EnvSpec::new(EnvKind::ShiftedExponential);
        assert_abs_diff_eq!(e.log_mgf(0.4).unwrap(), -0.4 - 0.6f64.ln(), epsilon = 1e-15);
        for k in EnvKind::ALL {
            assert_eq!(EnvSpec::new(k).log_mgf(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn log_mgf_series_branches_are_continuous() {
        for k in [EnvKind::Uniform, EnvKind::ShiftedExponential] {
            let s = EnvSpec::new(k);
            let below = s.log_mgf(0.999e-3 / if k == EnvKind::Uniform { 3f64.sqrt() } else { 1.0 }).unwrap();
            let above = s.log_mgf(1.001e-3 / if k == EnvKind::Uniform { 3f64.sqrt() } else { 1.0 }).unwrap();
            assert!((above - below).abs() < 2.5e-9, "{k:?}");
            assert!(above > below);
        }
    }

    #[test]
    fn mgf_domain_enforced() {
        let e = EnvSpec::new(EnvKind::ShiftedExponential);
        assert_eq!(e.mgf_domain(), (f64::NEG_INFINITY, 1.0));
        match e.log_mgf(1.0) {
            Err(EnvError::OutsideMgfDomain { hi, .. }) => assert_eq!(hi, 1.0),
            other => panic!("unexpected {other:?}"),
        }
        let g = EnvSpec::new(EnvKind::Gaussian);
        assert!(g.mgf_domain().1.is_infinite());
    }

    #[test]
    fn tilt_single_value() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let f = EnvField::from_rows(spec, 0, vec![0, -1], vec![vec![], vec![0.0]]);
        let t = f.tilt(0.5).unwrap();
        assert_abs_diff_eq!(t.at(1, -1), ((-0.125f64).exp() - 1.0) / 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.at(1, -1), -0.23500, epsilon = 1e-5);
        assert_eq!(t.law().mean, 0.0);
        assert!(f.tilt(0.0).is_err());
    }

    #[test]
    fn tiny_tilt_is_close_to_identity() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let f = EnvField::sample(&spec, 140, 140, 5).unwrap();
        let t = f.tilt(1e-6).unwrap();
        let mut max_w2: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for i in 1..=140 {
            for (a, b) in f.row(i).iter().zip(t.row(i)) {
                max_w2 = max_w2.max(a * a);
                max_diff = max_diff.max((a - b).abs());
            }
        }
        assert!(max_diff <= 1e-5 * (1.0 + max_w2));
    }

    #[test]
    fn tilted_variance_tends_to_one() {
        for k in EnvKind::ALL {
            let s = EnvSpec::new(k);
            let mut prev = f64::INFINITY;
            for b in [1e-1, 1e-2, 1e-3] {
                let v = tilted_variance(&s, b).unwrap();
                let gap = (v - 1.0).abs();
                assert!(gap < prev, "{k:?} {b}");
                prev = gap;
            }
            assert!(prev < 1e-2, "{k:?}");
        }
    }

    #[test]
    fn subwindow_matches_full_field() {
        let spec = EnvSpec::new(EnvKind::ShiftedExponential);
        let full = EnvField::sample(&spec, 20, 30, 77).unwrap();
        let part = EnvField::sample_windowed(&spec, 20, 77, |_| (-3, 5));
        for i in 1..=20 {
            let (lo, len) = part.row_window(i);
            for j in 0..len {
                let x = lo + 2 * j as i64;
                assert_eq!(part.at(i, x), full.at(i, x));
                assert_eq!(part.at(i, x), cell_value(&spec, 77, i, x));
            }
        }
    }

    #[test]
    fn time_reversal_rows() {
        let spec = EnvSpec::new(EnvKind::Gaussian);
        let f = EnvField::sample(&spec, 6, 12, 8).unwrap();
        let r = f.time_reversed();
        for i in 1..6 {
            assert_eq!(r.row(i), f.row(6 - i));
        }
        assert!(r.row(6).is_empty());
        assert_eq!(r.at(2, 0), f.at(4, 0));
    }

    #[test]
    fn spec_json_shape() {
        let s = EnvSpec::new(EnvKind::ShiftedExponential);
        let j = serde_json_like(&s);
        assert_eq!(j, "shifted_exponential");
        assert_eq!("rademacher".parse::<EnvKind>().unwrap(), EnvKind::Rademacher);
        assert!("cauchy".parse::<EnvKind>().is_err());
    }

    fn serde_json_like(s: &EnvSpec) -> &'static str {
        s.kind.name()
    }

    #[test]
    fn cell_rng_is_reproducible() {
        let mut a = CellRng::for_cell(1, 2, -3);
        let mut b = CellRng::for_cell(1, 2, -3);
        let mut c = CellRng::for_cell(1, 2, 3);
        let x = a.next_u64();
        assert_eq!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        let mut buf = [0u8; 11];
        a.fill_bytes(&mut buf);
        assert!(buf.iter().any(|&v| v != 0));
    }
}

//! Airy function Ai and its derivative on the real line.
//!
//! Asymptotic expansions for |x| ≥ 10. Inside, Taylor expansions of y'' = xy about anchors spaced 0.5
//! apart; the anchors on [0, 10] are propagated down from the asymptotic value at 10 and those on
//! [−10, 0] up from −10, so the two chains meet at the origin.

use std::f64::consts::PI;
use std::sync::OnceLock;

const SWITCH: f64 = 10.0;
const SPACING: f64 = 0.5;
const ANCHORS: usize = 41;
const TAYLOR_TERMS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValue {
    pub ai: f64,
    pub aip: f64,
}

struct Table {
    anchors: Vec<AiryValue>,
    /// Relative mismatch of the two chains at x = 0.
    seam: f64,
}

fn coeffs() -> &'static [(f64, f64)] {
    static C: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    C.get_or_init(|| {
        let mut out = vec![(1.0, 1.0)];
        let mut u = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
            out.push((u, -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u));
        }
        out
    })
}

/// Σ s_k c_k ζ^{-k} with stopping at machine precision or at the smallest term.
fn series(zeta: f64, pick: impl Fn(usize) -> Option<f64>) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut k = 0;
    while let Some(c) = pick(k) {
        let term = c * zeta.powi(-(k as i32));
        if term.abs() > last {
            break;
        }
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        last = term.abs();
        k += 1;
    }
    sum
}

fn asymptotic(x: f64) -> AiryValue {
    let c = coeffs();
    let rpi = PI.sqrt();
    if x > 0.0 {
        let zeta = 2.0 / 3.0 * x * x.sqrt();
        let q = x.sqrt().sqrt();
        let e = (-zeta).exp();
        let alt = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
        let su = series(zeta, |k| c.get(k).map(|p| alt(k) * p.0));
        let sv = series(zeta, |k| c.get(k).map(|p| alt(k) * p.1));
        AiryValue { ai: e / (2.0 * rpi * q) * su, aip: -q * e / (2.0 * rpi) * sv }
    } else {
        let z = -x;
        let zeta = 2.0 / 3.0 * z * z.sqrt();
        let q = z.sqrt().sqrt();
        let alt = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
        // Even and odd subsequences; index k of the pick is the power of 1/ζ.
        let even = |sel: usize| move |k: usize| if k % 2 == 0 { c.get(k).map(|p| alt(k / 2) * if sel == 0 { p.0 } else { p.1 }) } else { Some(0.0) };
        let odd = |sel: usize| move |k: usize| if k % 2 == 1 { c.get(k).map(|p| alt(k / 2) * if sel == 0 { p.0 } else { p.1 }) } else { Some(0.0) };
        let p = paired(zeta, even(0));
        let qq = paired(zeta, odd(0));
        let r = paired(zeta, even(1));
        let s = paired(zeta, odd(1));
        let (sn, cs) = zeta.sin_cos();
        let cphase = (cs + sn) / std::f64::consts::SQRT_2;
        let sphase = (sn - cs) / std::f64::consts::SQRT_2;
        AiryValue { ai: (cphase * p + sphase * qq) / (rpi * q), aip: q / rpi * (sphase * r - cphase * s) }
    }
}

/// Like `series`, but compares consecutive nonzero terms of a sparse sequence.
fn paired(zeta: f64, pick: impl Fn(usize) -> Option<f64>) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut k = 0;
    while let Some(c) = pick(k) {
        if c != 0.0 {
            let term = c * zeta.powi(-(k as i32));
            if term.abs() > last {
                break;
            }
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            last = term.abs();
        }
        k += 1;
    }
    sum
}

/// Value and slope at x0 + h from the Taylor expansion of y'' = xy about x0.
fn taylor(x0: f64, y: AiryValue, h: f64) -> AiryValue {
    let mut c = [0.0; TAYLOR_TERMS];
    c[0] = y.ai;
    c[1] = y.aip;
    c[2] = x0 * c[0] / 2.0;
    for k in 3..TAYLOR_TERMS {
        c[k] = (x0 * c[k - 2] + c[k - 3]) / (k as f64 * (k as f64 - 1.0));
    }
    let mut v = 0.0;
    let mut d = 0.0;
    for k in (0..TAYLOR_TERMS).rev() {
        v = v * h + c[k];
        if k >= 1 {
            d = d * h + k as f64 * c[k];
        }
    }
    AiryValue { ai: v, aip: d }
}

fn anchor_x(j: usize) -> f64 {
    -SWITCH + SPACING * j as f64
}

fn table() -> &'static Table {
    static T: OnceLock<Table> = OnceLock::new();
    T.get_or_init(|| {
        let mid = (ANCHORS - 1) / 2;
        let mut anchors = vec![AiryValue { ai: 0.0, aip: 0.0 }; ANCHORS];
        anchors[ANCHORS - 1] = asymptotic(SWITCH);
        for j in (mid..ANCHORS - 1).rev() {
            anchors[j] = taylor(anchor_x(j + 1), anchors[j + 1], -SPACING);
        }
        let from_right = anchors[mid];
        anchors[0] = asymptotic(-SWITCH);
        let mut cur = anchors[0];
        for j in 1..=mid {
            cur = taylor(anchor_x(j - 1), cur, SPACING);
            if j < mid {
                anchors[j] = cur;
            }
        }
        let seam = ((cur.ai - from_right.ai) / from_right.ai).abs().max(((cur.aip - from_right.aip) / from_right.aip).abs());
        Table { anchors, seam }
    })
}

/// Ai(x) and Ai′(x). Values beyond x ≈ 104 underflow to zero.
pub(crate) fn airy_value(x: f64) -> AiryValue {
    if x.abs() >= SWITCH {
        return asymptotic(x);
    }
    let t = table();
    let j = ((x + SWITCH) / SPACING).round() as usize;
    taylor(anchor_x(j), t.anchors[j], x - anchor_x(j))
}

/// Relative disagreement at the origin between the anchor chain grown from −10 and the one grown from 10.
pub fn seam_mismatch() -> f64 {
    table().seam
}

/// Asymptotic and Taylor evaluations compared on both sides of |x| = 10.
pub fn switchover_mismatch() -> f64 {
    let mut worst: f64 = 0.0;
    for &x in &[-10.2, -10.05, 10.05, 10.2] {
        let a = asymptotic(x);
        let j = if x < 0.0 { 0 } else { ANCHORS - 1 };
        let b = taylor(anchor_x(j), table().anchors[j], x - anchor_x(j));
        worst = worst.max(((a.ai - b.ai) / a.ai).abs()).max(((a.aip - b.aip) / a.aip).abs());
    }
    worst
}

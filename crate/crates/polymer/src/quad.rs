//! Gauss–Legendre rules on intervals and composite panels.

use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// Nodes and weights of the order-`m` rule on [−1, 1], ascending.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let m = NonZeroUsize::new(m).expect("quadrature order must be positive");
    let mut nodes: Vec<(f64, f64)> = GaussLegendre::new(m).iter().map(|(x, w)| (*x, *w)).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

/// Order-`m` rule mapped to [a, b].
pub fn mapped(m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    gauss_legendre(m).into_iter().map(|(x, w)| (c + h * x, h * w)).collect()
}

/// Composite rule: `[a, b]` cut into panels no wider than `width`, order `m` on each.
pub fn composite(m: usize, a: f64, b: f64, width: f64) -> Vec<(f64, f64)> {
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let base = gauss_legendre(m);
    let step = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * m);
    for p in 0..panels {
        let lo = a + p as f64 * step;
        let h = 0.5 * step;
        let c = lo + h;
        out.extend(base.iter().map(|&(x, w)| (c + h * x, h * w)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = mapped(6, -1.0, 2.0);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(11)).sum();
        assert_abs_diff_eq!(s, (2f64.powi(12) - 1.0) / 12.0, epsilon = 1e-11);
    }

    #[test]
    fn composite_weights_sum_to_length() {
        let rule = composite(8, 0.0, 7.3, 0.5);
        assert_eq!(rule.len(), 15 * 8);
        let s: f64 = rule.iter().map(|p| p.1).sum();
        assert_abs_diff_eq!(s, 7.3, epsilon = 1e-13);
        let e: f64 = rule.iter().map(|(x, w)| w * (-x).exp()).sum();
        assert_abs_diff_eq!(e, 1.0 - (-7.3f64).exp(), epsilon = 1e-14);
    }
}

//! Discrete directed polymers in 1+1 dimensions under intermediate disorder.

pub mod chaos;
pub mod crossover;
pub mod env;
pub mod quad;
pub mod stats;
pub mod transfer;
pub mod ustat;
pub mod walk;

/// Compensated (Neumaier) sum.
pub fn stats_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

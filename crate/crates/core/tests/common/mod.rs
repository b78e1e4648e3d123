//! Shared helpers for integration tests.
// Each test target compiles this module separately and uses a subset.
#![allow(dead_code)]

/// One-sample Kolmogorov-Smirnov statistic against U(0,1).
pub fn ks_uniform_statistic(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - v;
        let lo = v - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic p-value for the one-sample KS test vs U(0,1), with the
/// Stephens small-sample correction to the effective sample size.
pub fn ks_uniform_pvalue(sample: &[f64]) -> f64 {
    let d = ks_uniform_statistic(sample);
    let n = sample.len() as f64;
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Two Monte Carlo standard errors of a binomial rate estimate.
pub fn two_mc_se(rate: f64, n: usize) -> f64 {
    2.0 * (rate * (1.0 - rate) / n as f64).sqrt()
}

//! The two-step hypothesis test for predictive, zero-inflated biomarkers:
//! spike test on the biomarker-zero subjects, tail test (prefix-KS average)
//! on the biomarker-positive subjects, the full-data AKSA comparator, a
//! marginal main-effect test, Fisher/Brown p-value combination, and the
//! orchestrator tying them together.

use crate::error::{Error, Result};
use crate::kernel::{chi_square_sf, spearman_rho};
use crate::perm::{derive_stream, permutation_pvalue, PermTrace, SeedSpec};
use rand::seq::SliceRandom;
use rand::Rng;

/// Per-subject outcome `y`, arm indicator `t` (1 = treatment), and
/// non-negative biomarker `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    pub y: Vec<f64>,
    pub t: Vec<u8>,
    pub x: Vec<f64>,
}

impl TrialDataset {
    pub fn new(y: Vec<f64>, t: Vec<u8>, x: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.len() != t.len() || y.len() != x.len() {
            return Err(Error::InvalidInput(format!(
                "dataset requires equal nonzero lengths, got y={}, t={}, x={}",
                y.len(),
                t.len(),
                x.len()
            )));
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("y[{i}] = {v} is not finite")));
            }
        }
        for (i, &v) in t.iter().enumerate() {
            if v > 1 {
                return Err(Error::InvalidInput(format!("t[{i}] = {v} is not in {{0,1}}")));
            }
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "x[{i}] = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(TrialDataset { y, t, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Indices with x = 0 (the spike).
    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.x[i] == 0.0).collect()
    }

    /// Indices with x > 0 (the tail).
    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.x[i] > 0.0).collect()
    }

    pub fn n_zero(&self) -> usize {
        self.x.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn n_positive(&self) -> usize {
        self.len() - self.n_zero()
    }
}

/// One test's statistic, permutation p-value and trace. A degenerate
/// outcome (gate not met, e.g. no zero-biomarker subjects) carries
/// statistic 0 and p-value 1 plus the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n_perms: usize,
    pub trace: Option<PermTrace>,
    pub degenerate: Option<String>,
}

impl TestOutcome {
    fn degenerate(reason: &str) -> Self {
        TestOutcome {
            statistic: 0.0,
            p_value: 1.0,
            n_perms: 0,
            trace: None,
            degenerate: Some(reason.to_string()),
        }
    }

    fn from_trace(trace: PermTrace) -> Result<Self> {
        let p = permutation_pvalue(&trace)?;
        Ok(TestOutcome {
            statistic: trace.observed,
            p_value: p,
            n_perms: trace.n_perms(),
            trace: Some(trace),
            degenerate: None,
        })
    }
}

/// Component p-values plus both combinations and the dependence estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepResult {
    pub spike: TestOutcome,
    pub tail: TestOutcome,
    pub s_fisher: f64,
    pub p_fisher: f64,
    pub rho_hat: f64,
    pub c: f64,
    pub nu: f64,
    pub s_brown: f64,
    pub p_brown: f64,
}

/// Absolute mean difference of `y` between label cells `1` and `0`.
/// Returns 0 when either cell is empty.
pub fn abs_mean_diff(y: &[f64], labels: &[u8]) -> f64 {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (v, &l) in y.iter().zip(labels) {
        match l {
            1 => {
                s1 += v;
                n1 += 1;
            }
            0 => {
                s0 += v;
                n0 += 1;
            }
            _ => {}
        }
    }
    if n1 == 0 || n0 == 0 {
        return 0.0;
    }
    (s1 / n1 as f64 - s0 / n0 as f64).abs()
}

/// Average of two-sample KS distances over prefixes 1..m-1 of subjects
/// already arranged in biomarker order. `D_k = 0` whenever the prefix
/// holds a single arm.
pub fn prefix_ks_average(y: &[f64], t: &[u8]) -> f64 {
    let m = y.len();
    if m < 2 {
        return 0.0;
    }
    // Sorted prefix maintained by insertion; each prefix is rescanned for
    // the KS sup, so one permutation costs O(m^2).
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(m);
    let (mut n1, mut n0) = (0usize, 0usize);
    let mut sum = 0.0;
    for i in 0..m - 1 {
        let pos = sorted.partition_point(|&(v, _)| v < y[i]);
        sorted.insert(pos, (y[i], t[i]));
        if t[i] == 1 {
            n1 += 1;
        } else {
            n0 += 1;
        }
        if n1 == 0 || n0 == 0 {
            continue; // D_k = 0
        }
        let (fn1, fn0) = (n1 as f64, n0 as f64);
        let (mut c1, mut c0) = (0usize, 0usize);
        let mut d = 0.0f64;
        let mut j = 0;
        while j < sorted.len() {
            let yv = sorted[j].0;
            while j < sorted.len() && sorted[j].0 == yv {
                if sorted[j].1 == 1 {
                    c1 += 1;
                } else {
                    c0 += 1;
                }
                j += 1;
            }
            let diff = (c1 as f64 / fn1 - c0 as f64 / fn0).abs();
            if diff > d {
                d = diff;
            }
        }
        sum += d;
    }
    sum / (m - 1) as f64
}

/// Order `indices` by ascending biomarker, ties broken once by the given
/// generator. The ordering is fixed for the whole call, keeping the
/// permutation null exchangeable.
fn biomarker_order<R: Rng>(ds: &TrialDataset, indices: &[usize], rng: &mut R) -> Vec<usize> {
    let tiebreak: Vec<u64> = (0..indices.len()).map(|_| rng.random()).collect();
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| {
        ds.x[indices[a]]
            .partial_cmp(&ds.x[indices[b]])
            .unwrap()
            .then(tiebreak[a].cmp(&tiebreak[b]))
    });
    order.into_iter().map(|k| indices[k]).collect()
}

/// Spike test: absolute outcome mean difference between the (T=1, X=0)
/// and (T=0, X=0) cells, calibrated by permuting the four-level labels
/// G = T + 2*1{X > 0} over all subjects.
pub fn spike_test(ds: &TrialDataset, n_perms: usize, seed: SeedSpec) -> Result<TestOutcome> {
    if n_perms < 1 {
        return Err(Error::InvalidInput("spike_test requires n_perms >= 1".into()));
    }
    let g: Vec<u8> = ds
        .t
        .iter()
        .zip(&ds.x)
        .map(|(&t, &x)| t + if x > 0.0 { 2 } else { 0 })
        .collect();
    let n10 = g.iter().filter(|&&v| v == 1).count();
    let n00 = g.iter().filter(|&&v| v == 0).count();
    if n10 + n00 == 0 {
        return Ok(TestOutcome::degenerate("no zero-biomarker subjects"));
    }
    if n10 == 0 || n00 == 0 {
        return Ok(TestOutcome::degenerate("empty spike cell"));
    }
    let observed = abs_mean_diff(&ds.y, &g);
    let permuted: Vec<f64> = (0..n_perms)
        .map(|b| {
            let mut rng = derive_stream(seed.child(b as u64 + 1));
            let mut gp = g.clone();
            gp.shuffle(&mut rng);
            abs_mean_diff(&ds.y, &gp)
        })
        .collect();
    TestOutcome::from_trace(PermTrace { observed, permuted })
}

/// Tail test: prefix-KS average over the biomarker-positive subjects,
/// calibrated by permuting arm labels inside that subset. Degenerate with
/// p = 1 when fewer than five positives exist.
pub fn tail_test(ds: &TrialDataset, n_perms: usize, seed: SeedSpec) -> Result<TestOutcome> {
    if n_perms < 1 {
        return Err(Error::InvalidInput("tail_test requires n_perms >= 1".into()));
    }
    let pos = ds.positive_indices();
    if pos.len() < 5 {
        return Ok(TestOutcome::degenerate("fewer than five positive observations"));
    }
    let mut order_rng = derive_stream(seed.child(0));
    let order = biomarker_order(ds, &pos, &mut order_rng);
    let y: Vec<f64> = order.iter().map(|&i| ds.y[i]).collect();
    let t: Vec<u8> = order.iter().map(|&i| ds.t[i]).collect();

    let observed = prefix_ks_average(&y, &t);
    let permuted: Vec<f64> = (0..n_perms)
        .map(|b| {
            let mut rng = derive_stream(seed.child(b as u64 + 1));
            let mut tp = t.clone();
            tp.shuffle(&mut rng);
            prefix_ks_average(&y, &tp)
        })
        .collect();
    TestOutcome::from_trace(PermTrace { observed, permuted })
}

/// Full-data AKSA: the same prefix-KS construction over all subjects
/// (zeros included, their internal order randomized once per call), with
/// arm labels permuted over the whole sample.
pub fn aksa_test(ds: &TrialDataset, n_perms: usize, seed: SeedSpec) -> Result<TestOutcome> {
    if ds.len() < 5 {
        return Err(Error::InvalidInput("aksa_test requires N >= 5".into()));
    }
    if n_perms < 1 {
        return Err(Error::InvalidInput("aksa_test requires n_perms >= 1".into()));
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut order_rng = derive_stream(seed.child(0));
    let order = biomarker_order(ds, &all, &mut order_rng);
    let y: Vec<f64> = order.iter().map(|&i| ds.y[i]).collect();
    let t: Vec<u8> = order.iter().map(|&i| ds.t[i]).collect();

    let observed = prefix_ks_average(&y, &t);
    let permuted: Vec<f64> = (0..n_perms)
        .map(|b| {
            let mut rng = derive_stream(seed.child(b as u64 + 1));
            let mut tp = t.clone();
            tp.shuffle(&mut rng);
            prefix_ks_average(&y, &tp)
        })
        .collect();
    TestOutcome::from_trace(PermTrace { observed, permuted })
}

/// Marginal main-effect test: absolute arm mean difference with labels
/// permuted over all subjects.
pub fn main_effect_test(ds: &TrialDataset, n_perms: usize, seed: SeedSpec) -> Result<TestOutcome> {
    if n_perms < 1 {
        return Err(Error::InvalidInput("main_effect_test requires n_perms >= 1".into()));
    }
    let n1 = ds.t.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == ds.len() {
        return Err(Error::InvalidInput("main_effect_test requires both arms nonempty".into()));
    }
    let observed = abs_mean_diff(&ds.y, &ds.t);
    let permuted: Vec<f64> = (0..n_perms)
        .map(|b| {
            let mut rng = derive_stream(seed.child(b as u64 + 1));
            let mut tp = ds.t.clone();
            tp.shuffle(&mut rng);
            abs_mean_diff(&ds.y, &tp)
        })
        .collect();
    TestOutcome::from_trace(PermTrace { observed, permuted })
}

fn check_pvalue(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("{name} = {p} is not in (0,1]")));
    }
    Ok(())
}

/// Fisher's combination: S = -2(ln p_a + ln p_b) referred to chi-square
/// with 4 degrees of freedom.
pub fn fisher_combine(p_a: f64, p_b: f64) -> Result<(f64, f64)> {
    check_pvalue("p_a", p_a)?;
    check_pvalue("p_b", p_b)?;
    let s = -2.0 * (p_a.ln() + p_b.ln());
    Ok((s, chi_square_sf(s, 4.0)?))
}

/// Brown's combination for correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownCombined {
    pub c: f64,
    pub nu: f64,
    pub s_brown: f64,
    pub p_brown: f64,
}

/// Brown's moment-matched adjustment: scale c = 1 + rho, degrees of
/// freedom nu = 4/c. Negative rho is clamped to 0, reproducing Fisher
/// bit-for-bit.
pub fn brown_combine(p_a: f64, p_b: f64, rho: f64) -> Result<BrownCombined> {
    if !rho.is_finite() {
        return Err(Error::Domain(format!("rho = {rho} must be finite")));
    }
    let (s_fisher, _) = fisher_combine(p_a, p_b)?;
    let rho_eff = rho.clamp(0.0, 1.0);
    let c = 1.0 + rho_eff;
    let nu = 4.0 / c;
    let s_brown = s_fisher / c;
    Ok(BrownCombined {
        c,
        nu,
        s_brown,
        p_brown: chi_square_sf(s_brown, nu)?,
    })
}

/// Spearman correlation between the spike and tail statistics across
/// joint permutations of the treatment labels over all subjects.
///
/// Returns 0 when either component is degenerate or either statistic
/// sequence is constant.
pub fn estimate_component_correlation(
    ds: &TrialDataset,
    n_perms: usize,
    seed: SeedSpec,
) -> Result<f64> {
    if n_perms < 10 {
        return Err(Error::InvalidInput(
            "estimate_component_correlation requires n_perms >= 10".into(),
        ));
    }
    let zeros = ds.zero_indices();
    let pos = ds.positive_indices();
    if zeros.is_empty() || pos.len() < 5 {
        return Ok(0.0);
    }
    let mut order_rng = derive_stream(seed.child(0));
    let order = biomarker_order(ds, &pos, &mut order_rng);
    let y_pos: Vec<f64> = order.iter().map(|&i| ds.y[i]).collect();
    let y_zero: Vec<f64> = zeros.iter().map(|&i| ds.y[i]).collect();

    let mut spike_stats = Vec::with_capacity(n_perms);
    let mut tail_stats = Vec::with_capacity(n_perms);
    for b in 0..n_perms {
        let mut rng = derive_stream(seed.child(b as u64 + 1));
        let mut tp = ds.t.clone();
        tp.shuffle(&mut rng);
        let t_zero: Vec<u8> = zeros.iter().map(|&i| tp[i]).collect();
        let t_pos: Vec<u8> = order.iter().map(|&i| tp[i]).collect();
        spike_stats.push(abs_mean_diff(&y_zero, &t_zero));
        tail_stats.push(prefix_ks_average(&y_pos, &t_pos));
    }
    match spearman_rho(&spike_stats, &tail_stats) {
        Ok(r) => Ok(r),
        Err(Error::UndefinedCorrelation(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// The full two-step procedure: spike and tail tests on independent
/// derived streams, dependence estimation on a third, then Fisher's and
/// Brown's combinations.
pub fn two_step(ds: &TrialDataset, n_perms: usize, seed: SeedSpec) -> Result<TwoStepResult> {
    let spike = spike_test(ds, n_perms, seed.child(1))?;
    let tail = tail_test(ds, n_perms, seed.child(2))?;
    let rho_hat = if n_perms >= 10 {
        estimate_component_correlation(ds, n_perms, seed.child(3))?
    } else {
        0.0
    };
    let (s_fisher, mut p_fisher) = fisher_combine(spike.p_value, tail.p_value)?;
    let mut brown = brown_combine(spike.p_value, tail.p_value, rho_hat)?;
    // With exactly one applicable component the procedure reduces to that
    // single test: folding the degenerate p = 1 through the 4-df reference
    // would discard half the degrees of freedom and gut the power.
    match (&spike.degenerate, &tail.degenerate) {
        (Some(_), None) => {
            p_fisher = tail.p_value;
            brown.p_brown = tail.p_value;
        }
        (None, Some(_)) => {
            p_fisher = spike.p_value;
            brown.p_brown = spike.p_value;
        }
        _ => {}
    }
    Ok(TwoStepResult {
        spike,
        tail,
        s_fisher,
        p_fisher,
        rho_hat,
        c: brown.c,
        nu: brown.nu,
        s_brown: brown.s_brown,
        p_brown: brown.p_brown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::enumerate_label_assignments;
    use approx::assert_abs_diff_eq;

    fn seed(n: u64) -> SeedSpec {
        SeedSpec::new(n, 0)
    }

    #[test]
    fn dataset_validation() {
        assert!(TrialDataset::new(vec![], vec![], vec![]).is_err());
        assert!(TrialDataset::new(vec![1.0], vec![2], vec![0.0]).is_err());
        assert!(TrialDataset::new(vec![1.0], vec![1], vec![-0.1]).is_err());
        assert!(TrialDataset::new(vec![f64::NAN], vec![1], vec![0.0]).is_err());
        assert!(TrialDataset::new(vec![1.0, 2.0], vec![1], vec![0.0, 1.0]).is_err());
        let ds = TrialDataset::new(vec![1.0, 2.0], vec![1, 0], vec![0.0, 0.5]).unwrap();
        assert_eq!(ds.n_zero(), 1);
        assert_eq!(ds.n_positive(), 1);
    }

    #[test]
    fn spike_statistic_hand_arithmetic() {
        // Zeros: treated y = {2,4}, control y = {1,1}; positives arbitrary.
        let ds = TrialDataset::new(
            vec![2.0, 4.0, 1.0, 1.0, 9.0, -3.0],
            vec![1, 1, 0, 0, 1, 0],
            vec![0.0, 0.0, 0.0, 0.0, 0.7, 0.3],
        )
        .unwrap();
        let out = spike_test(&ds, 50, seed(1)).unwrap();
        assert_abs_diff_eq!(out.statistic, 2.0, epsilon = 1e-15);
        assert!(out.degenerate.is_none());
    }

    #[test]
    fn spike_degenerate_when_all_positive() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1, 0, 1, 0],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let out = spike_test(&ds, 10, seed(2)).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.statistic, 0.0);
        assert!(out.degenerate.is_some());
    }

    #[test]
    fn spike_degenerate_when_cell_empty() {
        // Zeros exist but none treated.
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0, 0, 1, 0],
            vec![0.0, 0.0, 0.3, 0.4],
        )
        .unwrap();
        let out = spike_test(&ds, 10, seed(3)).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert!(out.degenerate.is_some());
    }

    #[test]
    fn spike_exact_p_matches_enumeration() {
        // Spike-only toy dataset, N=6: exhaustive G permutations give the
        // exact p; the add-one estimator over all non-identity arrangements
        // must reproduce it.
        let ds = TrialDataset::new(
            vec![2.0, 4.0, 1.0, 1.5, 3.0, 0.5],
            vec![1, 1, 0, 0, 1, 0],
            vec![0.0, 0.0, 0.0, 0.0, 0.7, 0.3],
        )
        .unwrap();
        let g: Vec<u8> = ds
            .t
            .iter()
            .zip(&ds.x)
            .map(|(&t, &x)| t + if x > 0.0 { 2 } else { 0 })
            .collect();
        let observed = abs_mean_diff(&ds.y, &g);

        let mut count_ge = 0usize;
        let mut total = 0usize;
        let mut permuted = Vec::new();
        let mut skipped_identity = false;
        for arrangement in enumerate_label_assignments(&g, 1 << 20).unwrap() {
            let s = abs_mean_diff(&ds.y, &arrangement);
            total += 1;
            if s >= observed {
                count_ge += 1;
            }
            if !skipped_identity && arrangement == g {
                skipped_identity = true;
            } else {
                permuted.push(s);
            }
        }
        assert!(skipped_identity);
        let exact = count_ge as f64 / total as f64;
        let via_trace =
            permutation_pvalue(&PermTrace { observed, permuted }).unwrap();
        assert_eq!(exact, via_trace);
    }

    #[test]
    fn tail_statistic_hand_ecdf() {
        let ds = TrialDataset::new(
            vec![1.0, 0.0, 1.0, 0.0, 1.0],
            vec![1, 0, 1, 0, 1],
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
        )
        .unwrap();
        let out = tail_test(&ds, 20, seed(4)).unwrap();
        // D = (0, 1, 1, 1), B_N = 0.75.
        assert_abs_diff_eq!(out.statistic, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn tail_degenerate_below_five_positives() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![1, 0, 1, 0, 1, 0],
            vec![0.0, 0.0, 0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let out = tail_test(&ds, 10, seed(5)).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.statistic, 0.0);
        assert!(out.degenerate.is_some());
    }

    #[test]
    fn tail_identical_outcomes_give_p_one() {
        let ds = TrialDataset::new(
            vec![3.0; 8],
            vec![1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        )
        .unwrap();
        let out = tail_test(&ds, 100, seed(6)).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn aksa_equals_tail_without_zeros() {
        let ds = TrialDataset::new(
            vec![0.3, -1.2, 0.8, 2.0, -0.5, 1.1, 0.0, 0.9],
            vec![1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.05, 0.9, 0.3, 0.55, 0.15, 0.7, 0.4, 0.8],
        )
        .unwrap();
        let a = aksa_test(&ds, 10, seed(7)).unwrap();
        let b = tail_test(&ds, 10, seed(8)).unwrap();
        assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn aksa_all_equal_outcomes() {
        let ds = TrialDataset::new(
            vec![1.0; 5],
            vec![1, 0, 1, 0, 1],
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
        )
        .unwrap();
        let out = aksa_test(&ds, 50, seed(9)).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn aksa_hand_computed_prefixes() {
        // Alternating arms, perfectly separated outcomes:
        // D = (0, 1, 1, 1, 1), average 0.8.
        let ds = TrialDataset::new(
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            vec![0, 1, 0, 1, 0, 1],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        )
        .unwrap();
        let out = aksa_test(&ds, 10, seed(10)).unwrap();
        assert_abs_diff_eq!(out.statistic, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn aksa_requires_five_subjects() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1, 0, 1, 0],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        assert!(aksa_test(&ds, 10, seed(11)).is_err());
    }

    #[test]
    fn main_effect_hand_arithmetic() {
        let ds = TrialDataset::new(
            vec![3.0, 5.0, 1.0, 1.0],
            vec![1, 1, 0, 0],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let out = main_effect_test(&ds, 20, seed(12)).unwrap();
        assert_abs_diff_eq!(out.statistic, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn main_effect_needs_both_arms() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0],
            vec![1, 1],
            vec![0.1, 0.2],
        )
        .unwrap();
        assert!(main_effect_test(&ds, 10, seed(13)).is_err());
    }

    #[test]
    fn main_effect_exact_p_matches_enumeration() {
        let ds = TrialDataset::new(
            vec![0.4, 1.9, -0.3, 0.8, 1.1, -1.0],
            vec![1, 1, 1, 0, 0, 0],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        )
        .unwrap();
        let observed = abs_mean_diff(&ds.y, &ds.t);
        let mut count_ge = 0usize;
        let mut total = 0usize;
        let mut permuted = Vec::new();
        let mut skipped = false;
        for a in enumerate_label_assignments(&ds.t, 1 << 20).unwrap() {
            let s = abs_mean_diff(&ds.y, &a);
            total += 1;
            if s >= observed {
                count_ge += 1;
            }
            if !skipped && a == ds.t {
                skipped = true;
            } else {
                permuted.push(s);
            }
        }
        let exact = count_ge as f64 / total as f64;
        let via_trace = permutation_pvalue(&PermTrace { observed, permuted }).unwrap();
        assert_eq!(exact, via_trace);
    }

    #[test]
    fn fisher_closed_forms() {
        let (s, p) = fisher_combine(1.0, 1.0).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(p, 1.0);
        let (s, p) = fisher_combine(0.1, 0.1).unwrap();
        assert_abs_diff_eq!(s, 9.21034, epsilon = 1e-5);
        assert_abs_diff_eq!(p, 0.0560517, epsilon = 1e-6);
        let (s, p) = fisher_combine(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(s, 2.77259, epsilon = 1e-5);
        // sf(s, 4) = exp(-s/2)(1 + s/2) with s = -2 ln 0.25.
        assert_abs_diff_eq!(p, 0.25 * (1.0 + 2.0 * std::f64::consts::LN_2), epsilon = 1e-12);
        assert!(fisher_combine(0.0, 0.5).is_err());
        assert!(fisher_combine(0.5, 1.5).is_err());
    }

    #[test]
    fn brown_reduces_to_fisher_at_zero_rho() {
        for &(pa, pb) in &[(0.1, 0.1), (0.5, 0.5), (0.013, 0.7), (1.0, 1.0)] {
            let (_, p_fisher) = fisher_combine(pa, pb).unwrap();
            let b = brown_combine(pa, pb, 0.0).unwrap();
            assert_eq!(b.p_brown, p_fisher); // bit-for-bit
            // Negative rho is clamped: identical to rho = 0.
            assert_eq!(brown_combine(pa, pb, -0.3).unwrap(), b);
        }
    }

    #[test]
    fn brown_perfect_dependence_returns_component_p() {
        let b = brown_combine(0.1, 0.1, 1.0).unwrap();
        assert_eq!(b.c, 2.0);
        assert_eq!(b.nu, 2.0);
        assert_abs_diff_eq!(b.s_brown, 4.60517, epsilon = 1e-5);
        assert_abs_diff_eq!(b.p_brown, 0.1, epsilon = 1e-6);
    }

    #[test]
    fn correlation_conventions() {
        // No zeros: convention 0.
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![1, 0, 1, 0, 1, 0],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        )
        .unwrap();
        assert_eq!(estimate_component_correlation(&ds, 20, seed(14)).unwrap(), 0.0);

        // Constant spike statistics (all outcomes equal): convention 0.
        let ds = TrialDataset::new(
            vec![1.0; 10],
            vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
        )
        .unwrap();
        assert_eq!(estimate_component_correlation(&ds, 20, seed(15)).unwrap(), 0.0);

        assert!(estimate_component_correlation(&ds, 5, seed(16)).is_err());
    }

    #[test]
    fn two_step_degenerate_components_combine_to_one() {
        // n0 = 0 and n+ < 5: both components degenerate.
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1, 0, 1, 0],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let r = two_step(&ds, 100, seed(17)).unwrap();
        assert_eq!(r.p_fisher, 1.0);
        assert_eq!(r.p_brown, 1.0);
    }

    #[test]
    fn two_step_is_deterministic() {
        let ds = TrialDataset::new(
            vec![0.3, -1.2, 0.8, 2.0, -0.5, 1.1, 0.0, 0.9, 0.2, -0.7],
            vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.0, 0.0, 0.0, 0.3, 0.15, 0.7, 0.4, 0.8, 0.55, 0.9],
        )
        .unwrap();
        let a = two_step(&ds, 200, seed(18)).unwrap();
        let b = two_step(&ds, 200, seed(18)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn relabeling_symmetry() {
        let ds = TrialDataset::new(
            vec![0.3, -1.2, 0.8, 2.0, -0.5, 1.1, 0.0, 0.9, 0.2, -0.7],
            vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.0, 0.0, 0.0, 0.3, 0.15, 0.7, 0.4, 0.8, 0.55, 0.9],
        )
        .unwrap();
        let flipped = TrialDataset::new(
            ds.y.clone(),
            ds.t.iter().map(|&v| 1 - v).collect(),
            ds.x.clone(),
        )
        .unwrap();
        let s = seed(19);
        assert_eq!(
            tail_test(&ds, 50, s).unwrap().statistic,
            tail_test(&flipped, 50, s).unwrap().statistic
        );
        assert_eq!(
            aksa_test(&ds, 50, s).unwrap().statistic,
            aksa_test(&flipped, 50, s).unwrap().statistic
        );
        assert_eq!(
            main_effect_test(&ds, 50, s).unwrap().statistic,
            main_effect_test(&flipped, 50, s).unwrap().statistic
        );
        assert_eq!(
            spike_test(&ds, 50, s).unwrap().statistic,
            spike_test(&flipped, 50, s).unwrap().statistic
        );
    }

    #[test]
    fn monotone_transform_and_scale_equivariance() {
        let ds = TrialDataset::new(
            vec![0.3, -1.2, 0.8, 2.0, -0.5, 1.1, 0.0, 0.9],
            vec![1, 0, 1, 0, 1, 0, 1, 0],
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
        )
        .unwrap();
        // Strictly increasing transform of y leaves KS-based statistics
        // and p-values unchanged.
        let warped = TrialDataset::new(
            ds.y.iter().map(|v| v.exp() + 2.0 * v).collect(),
            ds.t.clone(),
            ds.x.clone(),
        )
        .unwrap();
        let s = seed(20);
        let t1 = tail_test(&ds, 100, s).unwrap();
        let t2 = tail_test(&warped, 100, s).unwrap();
        assert_eq!(t1.statistic, t2.statistic);
        assert_eq!(t1.p_value, t2.p_value);
        let a1 = aksa_test(&ds, 100, s).unwrap();
        let a2 = aksa_test(&warped, 100, s).unwrap();
        assert_eq!(a1.statistic, a2.statistic);
        assert_eq!(a1.p_value, a2.p_value);

        // Affine y -> 2y + 3 doubles the mean-difference statistics and
        // leaves their p-values unchanged.
        let scaled = TrialDataset::new(
            ds.y.iter().map(|v| 2.0 * v + 3.0).collect(),
            ds.t.clone(),
            ds.x.clone(),
        )
        .unwrap();
        let m1 = main_effect_test(&ds, 100, s).unwrap();
        let m2 = main_effect_test(&scaled, 100, s).unwrap();
        assert_abs_diff_eq!(m2.statistic, 2.0 * m1.statistic, epsilon = 1e-12);
        assert_eq!(m1.p_value, m2.p_value);
        let sp1 = spike_test(&ds, 100, s).unwrap();
        let sp2 = spike_test(&scaled, 100, s).unwrap();
        assert_abs_diff_eq!(sp2.statistic, 2.0 * sp1.statistic, epsilon = 1e-12);
        assert_eq!(sp1.p_value, sp2.p_value);
    }
}

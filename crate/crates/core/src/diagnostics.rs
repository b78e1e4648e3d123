//! Post-rejection diagnosis and cut-point selection: the marginal
//! main-effect check, the centered interaction-only re-test, a
//! nonparametric treatment-effect curve with bootstrap bands, and
//! threshold optimization with permutation/bootstrap inference.

use crate::error::{Error, Result};
use crate::kernel::normal_pdf;
use crate::perm::{derive_stream, permutation_pvalue, PermTrace, SeedSpec};
use crate::twostep::{main_effect_test, two_step, TrialDataset};
use rand::seq::SliceRandom;
use rand::Rng;

/// Number of grid points used when `diagnose` builds the effect curve.
pub const DEFAULT_CURVE_GRID: usize = 40;

/// A point estimate with a percentile bootstrap band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandedEstimate {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// One grid point of the treatment-effect curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub effect: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Kernel effect curve over the positive biomarker range plus a separate
/// spike point estimate (the biomarker distribution is mixed, so the two
/// are reported apart).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectCurve {
    pub points: Vec<CurvePoint>,
    pub spike: Option<BandedEstimate>,
    /// Set when fewer than five positive subjects exist; `points` is empty.
    pub degenerate: bool,
}

/// Output of the post-rejection diagnostic routine.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub p_a: f64,
    pub p_b: f64,
    pub p_fisher: f64,
    pub p_brown: f64,
    pub p_main: f64,
    pub p_interaction_only_fisher: f64,
    pub p_interaction_only_brown: f64,
    /// Signed estimated overall treatment effect, mean(y|t=1) - mean(y|t=0).
    pub delta_main_hat: f64,
    pub curve: EffectCurve,
}

/// Cut-point selection output.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointResult {
    pub tau_hat: f64,
    pub c_hat: f64,
    pub p_perm: f64,
    pub tau_ci: (f64, f64),
    pub delta_le: BandedEstimate,
    pub delta_gt: BandedEstimate,
    pub n_candidates: usize,
}

fn signed_mean_diff(y: &[f64], t: &[u8]) -> Option<f64> {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (v, &l) in y.iter().zip(t) {
        if l == 1 {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        None
    } else {
        Some(s1 / n1 as f64 - s0 / n0 as f64)
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// 2.5/97.5 percentile band over the finite bootstrap replicates, widened
/// if necessary to contain the point estimate.
fn band(estimate: f64, replicates: &[f64]) -> BandedEstimate {
    let mut finite: Vec<f64> = replicates.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return BandedEstimate { estimate, lo: estimate, hi: estimate };
    }
    finite.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = percentile(&finite, 0.025).min(estimate);
    let hi = percentile(&finite, 0.975).max(estimate);
    BandedEstimate { estimate, lo, hi }
}

/// Silverman's rule-of-thumb bandwidth on the positive biomarker values.
fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-9 // all positive x equal; keep the kernel well defined
    }
}

/// Kernel-weighted arm mean difference at `g` over positive-x subjects.
/// NaN when either arm is absent among them.
fn kernel_effect_at(ds: &TrialDataset, pos: &[usize], g: f64, h: f64) -> f64 {
    let (mut sw1, mut swy1, mut sw0, mut swy0) = (0.0, 0.0, 0.0, 0.0);
    for &i in pos {
        let w = normal_pdf((ds.x[i] - g) / h);
        if ds.t[i] == 1 {
            sw1 += w;
            swy1 += w * ds.y[i];
        } else {
            sw0 += w;
            swy0 += w * ds.y[i];
        }
    }
    if sw1 == 0.0 || sw0 == 0.0 {
        return f64::NAN;
    }
    swy1 / sw1 - swy0 / sw0
}

fn curve_on_grid(ds: &TrialDataset, grid: &[f64]) -> Vec<f64> {
    let pos = ds.positive_indices();
    if pos.len() < 2 {
        return vec![f64::NAN; grid.len()];
    }
    let xs: Vec<f64> = pos.iter().map(|&i| ds.x[i]).collect();
    let h = silverman_bandwidth(&xs);
    grid.iter().map(|&g| kernel_effect_at(ds, &pos, g, h)).collect()
}

fn spike_effect(ds: &TrialDataset) -> Option<f64> {
    let zeros = ds.zero_indices();
    if zeros.is_empty() {
        return None;
    }
    let y: Vec<f64> = zeros.iter().map(|&i| ds.y[i]).collect();
    let t: Vec<u8> = zeros.iter().map(|&i| ds.t[i]).collect();
    signed_mean_diff(&y, &t)
}

fn bootstrap_resample<R: Rng>(ds: &TrialDataset, rng: &mut R) -> TrialDataset {
    let n = ds.len();
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..n);
        y.push(ds.y[i]);
        t.push(ds.t[i]);
        x.push(ds.x[i]);
    }
    TrialDataset { y, t, x }
}

/// Nonparametric treatment-effect curve (Gaussian kernel, Silverman
/// bandwidth) over the positive biomarker range, with percentile
/// bootstrap bands from subject-level resamples, plus the spike estimate.
pub fn effect_curve(
    ds: &TrialDataset,
    grid_size: usize,
    n_boot: usize,
    seed: SeedSpec,
) -> Result<EffectCurve> {
    if grid_size < 2 {
        return Err(Error::InvalidInput("effect_curve requires grid_size >= 2".into()));
    }
    if n_boot < 1 {
        return Err(Error::InvalidInput("effect_curve requires n_boot >= 1".into()));
    }

    let spike_hat = spike_effect(ds);
    let pos = ds.positive_indices();
    let curve_feasible = pos.len() >= 5;

    let grid: Vec<f64> = if curve_feasible {
        let xs: Vec<f64> = pos.iter().map(|&i| ds.x[i]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (0..grid_size)
            .map(|k| lo + (hi - lo) * k as f64 / (grid_size - 1) as f64)
            .collect()
    } else {
        Vec::new()
    };

    let effects = if curve_feasible { curve_on_grid(ds, &grid) } else { Vec::new() };

    let mut grid_reps: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); grid.len()];
    let mut spike_reps: Vec<f64> = Vec::with_capacity(n_boot);
    for r in 0..n_boot {
        let mut rng = derive_stream(seed.child(r as u64));
        let res = bootstrap_resample(ds, &mut rng);
        if curve_feasible {
            for (slot, v) in grid_reps.iter_mut().zip(curve_on_grid(&res, &grid)) {
                slot.push(v);
            }
        }
        if spike_hat.is_some() {
            spike_reps.push(spike_effect(&res).unwrap_or(f64::NAN));
        }
    }

    let points = grid
        .iter()
        .zip(&effects)
        .zip(&grid_reps)
        .map(|((&x, &effect), reps)| {
            let b = band(effect, reps);
            CurvePoint { x, effect, lo: b.lo, hi: b.hi }
        })
        .collect();

    Ok(EffectCurve {
        points,
        spike: spike_hat.map(|est| band(est, &spike_reps)),
        degenerate: !curve_feasible,
    })
}

/// The post-rejection diagnostic routine: component and combined
/// p-values, the marginal main-effect test, the interaction-only re-test
/// on mean-centered outcomes, and the effect curve.
pub fn diagnose(
    ds: &TrialDataset,
    n_perms: usize,
    n_boot: usize,
    seed: SeedSpec,
) -> Result<DiagnosticsReport> {
    let delta_main_hat = signed_mean_diff(&ds.y, &ds.t)
        .ok_or_else(|| Error::InvalidInput("diagnose requires both arms nonempty".into()))?;

    let primary = two_step(ds, n_perms, seed.child(1))?;
    let main = main_effect_test(ds, n_perms, seed.child(2))?;

    // Centre treated outcomes by the estimated overall effect; the re-test
    // then carries interaction information only.
    let centered = TrialDataset {
        y: ds
            .y
            .iter()
            .zip(&ds.t)
            .map(|(&v, &t)| if t == 1 { v - delta_main_hat } else { v })
            .collect(),
        t: ds.t.clone(),
        x: ds.x.clone(),
    };
    let interaction = two_step(&centered, n_perms, seed.child(3))?;

    let curve = effect_curve(ds, DEFAULT_CURVE_GRID, n_boot, seed.child(4))?;

    Ok(DiagnosticsReport {
        p_a: primary.spike.p_value,
        p_b: primary.tail.p_value,
        p_fisher: primary.p_fisher,
        p_brown: primary.p_brown,
        p_main: main.p_value,
        p_interaction_only_fisher: interaction.p_fisher,
        p_interaction_only_brown: interaction.p_brown,
        delta_main_hat,
        curve,
    })
}

/// Candidate thresholds: unique biomarker values leaving at least
/// `min_per_cell` treated and control subjects in both strata.
fn candidate_taus(x: &[f64], t: &[u8], min_per_cell: usize) -> Vec<f64> {
    let mut uniq: Vec<f64> = x.to_vec();
    uniq.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    uniq.dedup();
    uniq.retain(|&tau| {
        let (mut le1, mut le0, mut gt1, mut gt0) = (0usize, 0usize, 0usize, 0usize);
        for (&xi, &ti) in x.iter().zip(t) {
            match (xi <= tau, ti) {
                (true, 1) => le1 += 1,
                (true, _) => le0 += 1,
                (false, 1) => gt1 += 1,
                (false, _) => gt0 += 1,
            }
        }
        le1 >= min_per_cell && le0 >= min_per_cell && gt1 >= min_per_cell && gt0 >= min_per_cell
    });
    uniq
}

/// Stratum contrasts at `tau`: (delta_le, delta_gt).
fn stratum_contrasts(ds: &TrialDataset, t: &[u8], tau: f64) -> Option<(f64, f64)> {
    let (mut le_y, mut le_t, mut gt_y, mut gt_t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..ds.len() {
        if ds.x[i] <= tau {
            le_y.push(ds.y[i]);
            le_t.push(t[i]);
        } else {
            gt_y.push(ds.y[i]);
            gt_t.push(t[i]);
        }
    }
    Some((signed_mean_diff(&le_y, &le_t)?, signed_mean_diff(&gt_y, &gt_t)?))
}

/// Maximum of |delta_gt - delta_le| over the feasible candidates under
/// labels `t`; 0 when no candidate is feasible (permutation convention).
fn max_objective(ds: &TrialDataset, t: &[u8], min_per_cell: usize) -> f64 {
    candidate_taus(&ds.x, t, min_per_cell)
        .into_iter()
        .filter_map(|tau| stratum_contrasts(ds, t, tau).map(|(le, gt)| (gt - le).abs()))
        .fold(0.0, f64::max)
}

/// Select the threshold maximizing the stratum-contrast difference, with
/// a selection-adjusted permutation p-value (the max is re-optimized per
/// permutation) and percentile bootstrap CIs (re-optimized per resample).
pub fn select_cutpoint(
    ds: &TrialDataset,
    min_per_cell: usize,
    n_perms: usize,
    n_boot: usize,
    seed: SeedSpec,
) -> Result<CutpointResult> {
    if n_perms < 1 || n_boot < 1 {
        return Err(Error::InvalidInput("select_cutpoint requires n_perms, n_boot >= 1".into()));
    }
    let candidates = candidate_taus(&ds.x, &ds.t, min_per_cell);
    if candidates.is_empty() {
        return Err(Error::Infeasible(format!(
            "no candidate threshold leaves at least {min_per_cell} treated and \
             {min_per_cell} control subjects in each stratum"
        )));
    }

    // Argmax with ties broken toward the smallest tau.
    let mut tau_hat = candidates[0];
    let mut c_hat = f64::NEG_INFINITY;
    let mut best = (0.0, 0.0);
    for &tau in &candidates {
        let (le, gt) = stratum_contrasts(ds, &ds.t, tau).expect("feasible candidate");
        let c = (gt - le).abs();
        if c > c_hat {
            c_hat = c;
            tau_hat = tau;
            best = (le, gt);
        }
    }

    // Selection-adjusted permutation null: permute arm labels, re-run the
    // full max over feasible candidates each time.
    let permuted: Vec<f64> = (0..n_perms)
        .map(|b| {
            let mut rng = derive_stream(seed.child(1).child(b as u64));
            let mut tp = ds.t.clone();
            tp.shuffle(&mut rng);
            max_objective(ds, &tp, min_per_cell)
        })
        .collect();
    let p_perm = permutation_pvalue(&PermTrace { observed: c_hat, permuted })?;

    // Percentile bootstrap of subjects, re-optimizing tau per resample.
    let mut tau_reps = Vec::with_capacity(n_boot);
    let mut le_reps = Vec::with_capacity(n_boot);
    let mut gt_reps = Vec::with_capacity(n_boot);
    for r in 0..n_boot {
        let mut rng = derive_stream(seed.child(2).child(r as u64));
        let res = bootstrap_resample(ds, &mut rng);
        let cands = candidate_taus(&res.x, &res.t, min_per_cell);
        let mut best_c = f64::NEG_INFINITY;
        let mut best_rep = None;
        for tau in cands {
            if let Some((le, gt)) = stratum_contrasts(&res, &res.t, tau) {
                let c = (gt - le).abs();
                if c > best_c {
                    best_c = c;
                    best_rep = Some((tau, le, gt));
                }
            }
        }
        if let Some((tau, le, gt)) = best_rep {
            tau_reps.push(tau);
            le_reps.push(le);
            gt_reps.push(gt);
        }
    }

    let tau_band = band(tau_hat, &tau_reps);
    Ok(CutpointResult {
        tau_hat,
        c_hat,
        p_perm,
        tau_ci: (tau_band.lo, tau_band.hi),
        delta_le: band(best.0, &le_reps),
        delta_gt: band(best.1, &gt_reps),
        n_candidates: candidates.len(),
    })
}

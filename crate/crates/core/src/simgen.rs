//! Scenario generators for the simulated experiments: the global null,
//! the spike-only / tail-only / mix alternatives, the correlated-outcome
//! perturbation, Beta-skewed positive tails, and the Gaussian-copula
//! p-value-pair generator.

use crate::error::{Error, Result};
use crate::kernel::normal_cdf;
use crate::perm::{derive_stream, SeedSpec};
use crate::twostep::TrialDataset;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// Positive-tail biomarker distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDist {
    Uniform01,
    Beta { a: f64, b: f64 },
}

/// The simulated alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Null,
    SpikeOnly,
    TailOnly,
    Mix,
    Correlated,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Null => "null",
            ScenarioKind::SpikeOnly => "spike_only",
            ScenarioKind::TailOnly => "tail_only",
            ScenarioKind::Mix => "mix",
            ScenarioKind::Correlated => "correlated",
        }
    }
}

/// One simulated-trial design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub pi0: f64,
    pub tail_dist: TailDist,
    /// Effect magnitude for spike-only / tail-only.
    pub delta: f64,
    /// Spike magnitude for mix.
    pub delta_a: f64,
    /// Tail magnitude for mix.
    pub delta_b: f64,
    /// Shared-perturbation scale for the correlated scenario.
    pub k_scale: f64,
    pub seed: SeedSpec,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n must be >= 2, got {}", self.n)));
        }
        if !(0.0..1.0).contains(&self.pi0) {
            return Err(Error::InvalidInput(format!("pi0 must be in [0,1), got {}", self.pi0)));
        }
        if let TailDist::Beta { a, b } = self.tail_dist {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "beta tail requires positive shapes, got ({a}, {b})"
                )));
            }
        }
        for (name, v) in [
            ("delta", self.delta),
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("k_scale", self.k_scale),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} = {v} is not finite")));
            }
        }
        if self.k_scale < 0.0 {
            return Err(Error::InvalidInput(format!("k_scale must be >= 0, got {}", self.k_scale)));
        }
        Ok(())
    }
}

/// Ascending ranks 1..=n of `x` over all subjects, ties broken at random.
fn random_tiebreak_ranks<R: Rng>(x: &[f64], rng: &mut R) -> Vec<usize> {
    let tiebreak: Vec<u64> = (0..x.len()).map(|_| rng.random()).collect();
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(tiebreak[a].cmp(&tiebreak[b])));
    let mut ranks = vec![0usize; x.len()];
    for (r, &i) in idx.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Generate one trial dataset.
///
/// Exactly round(pi0 * N) subjects get x = 0, assigned uniformly at
/// random over positions; the rest draw x from the tail distribution.
/// Arms are an exactly balanced shuffled vector (treatment gets the extra
/// subject for odd N). Baseline outcomes are standard normal; the
/// scenario kind then adds its effect.
pub fn generate_trial(spec: &ScenarioSpec) -> Result<TrialDataset> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = derive_stream(spec.seed);

    // Zero/positive assignment: shuffle positions, first n0 become zeros.
    let n0 = (spec.pi0 * n as f64).round() as usize;
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut x = vec![0.0f64; n];
    for &i in positions.iter().skip(n0) {
        x[i] = match spec.tail_dist {
            TailDist::Uniform01 => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            },
            TailDist::Beta { a, b } => {
                let beta = Beta::new(a, b)
                    .map_err(|e| Error::InvalidInput(format!("beta tail: {e}")))?;
                loop {
                    let v = beta.sample(&mut rng);
                    if v > 0.0 && v < 1.0 {
                        break v;
                    }
                }
            }
        };
    }

    // Balanced arms, shuffled.
    let n_treated = n.div_ceil(2);
    let mut t = vec![0u8; n];
    for slot in t.iter_mut().take(n_treated) {
        *slot = 1;
    }
    t.shuffle(&mut rng);

    // Baseline outcomes.
    let mut y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    // Ranks over all N with random tie-breaks (the zero block ties).
    let ranks = random_tiebreak_ranks(&x, &mut rng);
    let rank_frac = |i: usize| ranks[i] as f64 / n as f64;

    match spec.kind {
        ScenarioKind::Null => {}
        ScenarioKind::SpikeOnly => {
            for i in 0..n {
                if t[i] == 1 && x[i] == 0.0 {
                    y[i] += spec.delta;
                }
            }
        }
        ScenarioKind::TailOnly => {
            for i in 0..n {
                if t[i] == 1 && x[i] > 0.0 {
                    y[i] += spec.delta * rank_frac(i);
                }
            }
        }
        ScenarioKind::Mix => {
            for i in 0..n {
                if t[i] == 1 {
                    if x[i] == 0.0 {
                        y[i] += spec.delta_a;
                    } else {
                        y[i] += spec.delta_b * rank_frac(i);
                    }
                }
            }
        }
        ScenarioKind::Correlated => {
            // Mix-pattern base effects plus one shared |N(0,1)| draw,
            // scaled by k, added to every treated outcome.
            let z: f64 = StandardNormal.sample(&mut rng);
            let shift = spec.k_scale * z.abs();
            for i in 0..n {
                if t[i] == 1 {
                    if x[i] == 0.0 {
                        y[i] += spec.delta_a;
                    } else {
                        y[i] += spec.delta_b * rank_frac(i);
                    }
                    y[i] += shift;
                }
            }
        }
    }

    TrialDataset::new(y, t, x)
}

/// A marginally uniform p-value pair with a prescribed Gaussian-copula
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValuePair {
    pub p_a: f64,
    pub p_b: f64,
}

/// Draw `count` pairs (Phi(z1), Phi(z2)) with (z1, z2) bivariate normal,
/// unit variances and correlation `rho`.
pub fn generate_pvalue_pairs(rho: f64, count: usize, seed: SeedSpec) -> Result<Vec<PValuePair>> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("|rho| must be <= 1, got {rho}")));
    }
    let mut rng = derive_stream(seed);
    let tail = (1.0 - rho * rho).sqrt();
    Ok((0..count)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let z2 = rho * z1 + tail * e;
            PValuePair { p_a: normal_cdf(z1), p_b: normal_cdf(z2) }
        })
        .collect())
}

//! Experiment runner: executes design grids over scenarios and methods,
//! estimates type I error / power with Wilson confidence intervals,
//! calibrates the correlation-specific Fisher threshold, and produces
//! tidy result cells.
//!
//! Replicates run in parallel; every replicate owns a stream derived from
//! (master seed, grid point, replicate index), so results are identical
//! for any thread count.

use crate::error::{Error, Result};
use crate::kernel::wilson_ci;
use crate::perm::SeedSpec;
use crate::simgen::{generate_pvalue_pairs, generate_trial, ScenarioSpec};
use crate::twostep::{aksa_test, brown_combine, fisher_combine, two_step};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Aksa,
    Spike,
    Tail,
    Fisher,
    Brown,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Aksa, Method::Spike, Method::Tail, Method::Fisher, Method::Brown];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Aksa => "aksa",
            Method::Spike => "spike",
            Method::Tail => "tail",
            Method::Fisher => "fisher",
            Method::Brown => "brown",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "aksa" => Ok(Method::Aksa),
            "spike" => Ok(Method::Spike),
            "tail" => Ok(Method::Tail),
            "fisher" => Ok(Method::Fisher),
            "brown" => Ok(Method::Brown),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected aksa|spike|tail|fisher|brown)"
            ))),
        }
    }
}

/// A full experiment: design points, methods, and Monte Carlo scale.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: Vec<ScenarioSpec>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub n_perms: usize,
    pub alpha: f64,
    /// 0 means use the global pool.
    pub threads: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("experiment grid is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidInput("replicates must be >= 1".into()));
        }
        if self.n_perms < 1 {
            return Err(Error::InvalidInput("n_perms must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        for spec in &self.grid {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Per-(design point, method) rejection summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub spec: ScenarioSpec,
    pub method: Method,
    pub rejections: u64,
    pub replicates: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// P-values of one replicate, per method.
struct ReplicateP {
    aksa: Option<f64>,
    spike: Option<f64>,
    tail: Option<f64>,
    fisher: Option<f64>,
    brown: Option<f64>,
}

impl ReplicateP {
    fn get(&self, m: Method) -> Option<f64> {
        match m {
            Method::Aksa => self.aksa,
            Method::Spike => self.spike,
            Method::Tail => self.tail,
            Method::Fisher => self.fisher,
            Method::Brown => self.brown,
        }
    }
}

fn run_replicate(
    spec: &ScenarioSpec,
    base: SeedSpec,
    n_perms: usize,
    need_two_step: bool,
    need_aksa: bool,
) -> Result<ReplicateP> {
    let ds_spec = ScenarioSpec { seed: base.child(0), ..*spec };
    let ds = generate_trial(&ds_spec)?;
    let mut out =
        ReplicateP { aksa: None, spike: None, tail: None, fisher: None, brown: None };
    if need_two_step {
        let r = two_step(&ds, n_perms, base.child(1))?;
        out.spike = Some(r.spike.p_value);
        out.tail = Some(r.tail.p_value);
        out.fisher = Some(r.p_fisher);
        out.brown = Some(r.p_brown);
    }
    if need_aksa {
        out.aksa = Some(aksa_test(&ds, n_perms, base.child(2))?.p_value);
    }
    Ok(out)
}

fn run_grid_inner(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let need_two_step = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::Spike | Method::Tail | Method::Fisher | Method::Brown));
    let need_aksa = config.methods.contains(&Method::Aksa);
    let root = SeedSpec::new(config.master_seed, 0);

    let mut cells = Vec::new();
    for (point_idx, spec) in config.grid.iter().enumerate() {
        let point_seed = root.child(point_idx as u64);
        let reps: Vec<ReplicateP> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                run_replicate(spec, point_seed.child(rep as u64), config.n_perms, need_two_step, need_aksa)
                    .map_err(|e| {
                        Error::InvalidInput(format!(
                            "replicate {rep} of design point {point_idx} ({}, n={}, pi0={}): {e}",
                            spec.kind.name(),
                            spec.n,
                            spec.pi0
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;

        for &method in &config.methods {
            let rejections = reps
                .iter()
                .filter(|r| {
                    r.get(method)
                        .map(|p| p < config.alpha)
                        .expect("method p-value computed for every replicate")
                })
                .count() as u64;
            let n = config.replicates as u64;
            let (ci_lo, ci_hi) = wilson_ci(rejections, n, 0.95)?;
            cells.push(CellResult {
                spec: *spec,
                method,
                rejections,
                replicates: n,
                rate: rejections as f64 / n as f64,
                ci_lo,
                ci_hi,
            });
        }
    }
    Ok(cells)
}

/// Run the full grid. Results are sorted by (design point, method) and
/// independent of thread count.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    if config.threads == 0 {
        run_grid_inner(config)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run_grid_inner(config))
    }
}

/// Empirical alpha-quantile of the Fisher p-value under a dependent null
/// at correlation `rho`: the adjusted rejection threshold that restores
/// level alpha.
pub fn calibrate_fisher_threshold(
    rho: f64,
    n_draws: usize,
    alpha: f64,
    seed: SeedSpec,
) -> Result<f64> {
    if n_draws < 1000 {
        return Err(Error::InvalidInput(format!(
            "calibration needs n_draws >= 1000, got {n_draws}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    let pairs = generate_pvalue_pairs(rho, n_draws, seed)?;
    let mut ps: Vec<f64> = pairs
        .iter()
        .map(|p| fisher_combine(p.p_a, p.p_b).map(|(_, pf)| pf))
        .collect::<Result<Vec<_>>>()?;
    ps.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((alpha * n_draws as f64).ceil() as usize).clamp(1, n_draws);
    Ok(ps[k - 1])
}

/// One row of the copula size experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaCell {
    pub rho: f64,
    pub n_draws: u64,
    pub fisher_rejections: u64,
    pub fisher_rate: f64,
    pub fisher_ci: (f64, f64),
    pub brown_rejections: u64,
    pub brown_rate: f64,
    pub brown_ci: (f64, f64),
    /// Correlation-specific Fisher threshold restoring level alpha.
    pub calibrated_threshold: f64,
}

/// Size of Fisher's and Brown's combinations under a Gaussian-copula
/// dependent null, per correlation level, with the calibrated Fisher
/// threshold as a by-product. Brown uses the target rho.
pub fn copula_size_experiment(
    rhos: &[f64],
    n_draws: usize,
    alpha: f64,
    seed: SeedSpec,
) -> Result<Vec<CopulaCell>> {
    if rhos.is_empty() {
        return Err(Error::InvalidInput("no correlation levels given".into()));
    }
    rhos.iter()
        .enumerate()
        .map(|(i, &rho)| {
            let pairs = generate_pvalue_pairs(rho, n_draws, seed.child(i as u64))?;
            let mut fisher_rej = 0u64;
            let mut brown_rej = 0u64;
            let mut fisher_ps = Vec::with_capacity(n_draws);
            for p in &pairs {
                let (_, pf) = fisher_combine(p.p_a, p.p_b)?;
                if pf < alpha {
                    fisher_rej += 1;
                }
                fisher_ps.push(pf);
                if brown_combine(p.p_a, p.p_b, rho)?.p_brown < alpha {
                    brown_rej += 1;
                }
            }
            fisher_ps.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let k = ((alpha * n_draws as f64).ceil() as usize).clamp(1, n_draws);
            let n = n_draws as u64;
            let fisher_ci = wilson_ci(fisher_rej, n, 0.95)?;
            let brown_ci = wilson_ci(brown_rej, n, 0.95)?;
            Ok(CopulaCell {
                rho,
                n_draws: n,
                fisher_rejections: fisher_rej,
                fisher_rate: fisher_rej as f64 / n as f64,
                fisher_ci,
                brown_rejections: brown_rej,
                brown_rate: brown_rej as f64 / n as f64,
                brown_ci,
                calibrated_threshold: fisher_ps[k - 1],
            })
        })
        .collect()
}

/// Power comparison under the correlated alternative: Fisher evaluated at
/// a correlation-specific calibrated threshold, Brown at its nominal
/// level. Returns (fisher rate, brown rate, mean estimated correlation).
pub fn calibrated_power_cell(
    spec: &ScenarioSpec,
    replicates: usize,
    n_perms: usize,
    alpha: f64,
    calibration_draws: usize,
    master_seed: u64,
) -> Result<(f64, f64, f64)> {
    spec.validate()?;
    let root = SeedSpec::new(master_seed, 0);
    let results: Vec<(f64, f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let base = root.child(rep as u64);
            let ds = generate_trial(&ScenarioSpec { seed: base.child(0), ..*spec })?;
            let r = two_step(&ds, n_perms, base.child(1))?;
            Ok((r.p_fisher, r.p_brown, r.rho_hat))
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_rho = (results.iter().map(|r| r.2.max(0.0)).sum::<f64>() / replicates as f64)
        .clamp(0.0, 1.0);
    let threshold =
        calibrate_fisher_threshold(mean_rho, calibration_draws, alpha, root.child(u64::MAX))?;
    let fisher_rate =
        results.iter().filter(|r| r.0 < threshold).count() as f64 / replicates as f64;
    let brown_rate = results.iter().filter(|r| r.1 < alpha).count() as f64 / replicates as f64;
    Ok((fisher_rate, brown_rate, mean_rho))
}

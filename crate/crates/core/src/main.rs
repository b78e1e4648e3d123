use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use spiketail::diagnostics::{diagnose, select_cutpoint};
use spiketail::error::Error;
use spiketail::harness::{copula_size_experiment, run_grid};
use spiketail::io::{
    cells_to_table, copula_cells_to_table, fmt_g9, load_dataset, parse_experiment_config, Table,
};
use spiketail::perm::SeedSpec;
use spiketail::theory::{average_effect, noncentrality, power_at_noncentrality, TheoryParams};
use spiketail::twostep::two_step;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spiketail", version, about = "Two-step permutation tests for zero-inflated predictive biomarkers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-step test (spike, tail, Fisher/Brown combination) on a dataset.
    Test {
        /// CSV with columns y,t,x
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-rejection diagnostics: main effect, interaction-only re-test, effect curve.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long, default_value_t = 1000)]
        boot: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a biomarker cut-point with permutation and bootstrap inference.
    Cutpoint {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_cell: usize,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long, default_value_t = 1000)]
        boot: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment grid from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Size of Fisher/Brown combinations under a dependent null, per correlation.
    Copula {
        /// Comma-separated correlation levels, e.g. 0,0.2,0.4,0.6,0.8
        #[arg(long)]
        rhos: String,
        #[arg(long, default_value_t = 10000)]
        draws: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Asymptotic power of the average-KS test across zero-inflation rates.
    Theory {
        #[arg(long)]
        delta0: f64,
        /// Effect at biomarker zero
        #[arg(long)]
        d0: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// start:end:step, e.g. 0:0.8:0.1
        #[arg(long, default_value = "0:0.8:0.1")]
        pi0_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_grid_spec(s: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid '{s}' is not start:end:step")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| Error::Config(format!("bad grid number '{p}'"))))
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(Error::Config(format!("grid '{s}' must have step > 0 and end >= start")));
    }
    let count = ((end - start) / step + 0.5).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn parse_rho_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let rho: f64 =
                p.parse().map_err(|_| Error::Config(format!("bad correlation '{p}'")))?;
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::Config(format!("correlation {rho} outside [0,1]")));
            }
            Ok(rho)
        })
        .collect()
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Test { input, alpha, perms, seed, out } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
            }
            let ds = load_dataset(&input)?;
            let r = two_step(&ds, perms, SeedSpec::new(seed, 0))?;

            let mut table = Table::new(&[
                "spike_stat", "p_a", "spike_note", "tail_stat", "p_b", "tail_note", "s_fisher",
                "p_fisher", "rho_hat", "c", "nu", "s_brown", "p_brown", "perms",
            ]);
            table.push_row(vec![
                fmt_g9(r.spike.statistic),
                fmt_g9(r.spike.p_value),
                r.spike.degenerate.clone().unwrap_or_default(),
                fmt_g9(r.tail.statistic),
                fmt_g9(r.tail.p_value),
                r.tail.degenerate.clone().unwrap_or_default(),
                fmt_g9(r.s_fisher),
                fmt_g9(r.p_fisher),
                fmt_g9(r.rho_hat),
                fmt_g9(r.c),
                fmt_g9(r.nu),
                fmt_g9(r.s_brown),
                fmt_g9(r.p_brown),
                perms.to_string(),
            ]);
            if let Some(path) = out {
                table.write_csv(&path)?;
            }

            println!(
                "spike:  stat={} p={}{}",
                fmt_g9(r.spike.statistic),
                fmt_g9(r.spike.p_value),
                r.spike.degenerate.as_deref().map(|d| format!("  [{d}]")).unwrap_or_default()
            );
            println!(
                "tail:   stat={} p={}{}",
                fmt_g9(r.tail.statistic),
                fmt_g9(r.tail.p_value),
                r.tail.degenerate.as_deref().map(|d| format!("  [{d}]")).unwrap_or_default()
            );
            println!("fisher: S={} p={}", fmt_g9(r.s_fisher), fmt_g9(r.p_fisher));
            println!(
                "brown:  rho_hat={} c={} nu={} S={} p={}",
                fmt_g9(r.rho_hat),
                fmt_g9(r.c),
                fmt_g9(r.nu),
                fmt_g9(r.s_brown),
                fmt_g9(r.p_brown)
            );
            let verdict = if r.p_brown < alpha { "reject" } else { "retain" };
            println!("decision at alpha={}: {verdict} (brown)", fmt_g9(alpha));
        }
        Command::Diagnose { input, perms, boot, seed, out } => {
            let ds = load_dataset(&input)?;
            let rep = diagnose(&ds, perms, boot, SeedSpec::new(seed, 0))?;

            let mut table = Table::new(&["record", "name", "x", "value", "lo", "hi"]);
            let pvals = [
                ("p_a", rep.p_a),
                ("p_b", rep.p_b),
                ("p_fisher", rep.p_fisher),
                ("p_brown", rep.p_brown),
                ("p_main", rep.p_main),
                ("p_interaction_only_fisher", rep.p_interaction_only_fisher),
                ("p_interaction_only_brown", rep.p_interaction_only_brown),
            ];
            for (name, p) in pvals {
                table.push_row(vec![
                    "pvalue".into(),
                    name.into(),
                    String::new(),
                    fmt_g9(p),
                    String::new(),
                    String::new(),
                ]);
            }
            table.push_row(vec![
                "estimate".into(),
                "delta_main".into(),
                String::new(),
                fmt_g9(rep.delta_main_hat),
                String::new(),
                String::new(),
            ]);
            if let Some(s) = &rep.curve.spike {
                table.push_row(vec![
                    "spike_effect".into(),
                    "delta_spike".into(),
                    "0".into(),
                    fmt_g9(s.estimate),
                    fmt_g9(s.lo),
                    fmt_g9(s.hi),
                ]);
            }
            for pt in &rep.curve.points {
                table.push_row(vec![
                    "curve".into(),
                    "effect".into(),
                    fmt_g9(pt.x),
                    fmt_g9(pt.effect),
                    fmt_g9(pt.lo),
                    fmt_g9(pt.hi),
                ]);
            }
            table.write_csv(&out)?;

            println!(
                "p_a={} p_b={} p_fisher={} p_brown={}",
                fmt_g9(rep.p_a),
                fmt_g9(rep.p_b),
                fmt_g9(rep.p_fisher),
                fmt_g9(rep.p_brown)
            );
            println!("main effect: delta={} p={}", fmt_g9(rep.delta_main_hat), fmt_g9(rep.p_main));
            println!(
                "interaction-only after centering: p_fisher={} p_brown={}",
                fmt_g9(rep.p_interaction_only_fisher),
                fmt_g9(rep.p_interaction_only_brown)
            );
            if rep.curve.degenerate {
                println!("effect curve: too few positive biomarkers");
            } else {
                println!(
                    "effect curve: {} grid points written to {}",
                    rep.curve.points.len(),
                    out.display()
                );
            }
        }
        Command::Cutpoint { input, min_cell, perms, boot, seed, out } => {
            let ds = load_dataset(&input)?;
            let r = select_cutpoint(&ds, min_cell, perms, boot, SeedSpec::new(seed, 0))?;

            let mut table = Table::new(&[
                "tau_hat", "c_hat", "p_perm", "tau_ci_lo", "tau_ci_hi", "delta_le",
                "delta_le_lo", "delta_le_hi", "delta_gt", "delta_gt_lo", "delta_gt_hi",
                "n_candidates",
            ]);
            table.push_row(vec![
                fmt_g9(r.tau_hat),
                fmt_g9(r.c_hat),
                fmt_g9(r.p_perm),
                fmt_g9(r.tau_ci.0),
                fmt_g9(r.tau_ci.1),
                fmt_g9(r.delta_le.estimate),
                fmt_g9(r.delta_le.lo),
                fmt_g9(r.delta_le.hi),
                fmt_g9(r.delta_gt.estimate),
                fmt_g9(r.delta_gt.lo),
                fmt_g9(r.delta_gt.hi),
                r.n_candidates.to_string(),
            ]);
            table.write_csv(&out)?;

            println!(
                "tau_hat={} (95% CI [{}, {}]), contrast={} ({} candidates), p={}",
                fmt_g9(r.tau_hat),
                fmt_g9(r.tau_ci.0),
                fmt_g9(r.tau_ci.1),
                fmt_g9(r.c_hat),
                r.n_candidates,
                fmt_g9(r.p_perm)
            );
            println!(
                "delta(x<=tau)={} [{}, {}]   delta(x>tau)={} [{}, {}]",
                fmt_g9(r.delta_le.estimate),
                fmt_g9(r.delta_le.lo),
                fmt_g9(r.delta_le.hi),
                fmt_g9(r.delta_gt.estimate),
                fmt_g9(r.delta_gt.lo),
                fmt_g9(r.delta_gt.hi)
            );
        }
        Command::Simulate { config, out, threads, seed } => {
            let text = std::fs::read_to_string(&config)?;
            let experiment = parse_experiment_config(&text, seed, threads)?;
            let cells = run_grid(&experiment)?;
            cells_to_table(&cells).write_csv(&out)?;
            println!(
                "{} design points x {} methods -> {} cells written to {}",
                experiment.grid.len(),
                experiment.methods.len(),
                cells.len(),
                out.display()
            );
        }
        Command::Copula { rhos, draws, alpha, seed, out } => {
            let rhos = parse_rho_list(&rhos)?;
            let cells = copula_size_experiment(&rhos, draws, alpha, SeedSpec::new(seed, 0))?;
            copula_cells_to_table(&cells).write_csv(&out)?;
            for c in &cells {
                println!(
                    "rho={}: fisher rate={} brown rate={} calibrated threshold={}",
                    fmt_g9(c.rho),
                    fmt_g9(c.fisher_rate),
                    fmt_g9(c.brown_rate),
                    fmt_g9(c.calibrated_threshold)
                );
            }
        }
        Command::Theory { delta0, d0, sigma, n, alpha, pi0_grid, out } => {
            let params = TheoryParams { delta0, d_at_zero: d0, sigma, n, alpha };
            let grid = parse_grid_spec(&pi0_grid)?;
            let mut table = Table::new(&["pi0", "avg_effect", "lambda", "power"]);
            for &pi0 in &grid {
                let effect = average_effect(&params, pi0)?;
                let lambda = noncentrality(&params, pi0)?;
                let power = power_at_noncentrality(lambda, alpha)?;
                table.push_row(vec![fmt_g9(pi0), fmt_g9(effect), fmt_g9(lambda), fmt_g9(power)]);
                println!("pi0={}: power={}", fmt_g9(pi0), fmt_g9(power));
            }
            table.write_csv(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Parse { .. }
                | Error::Config(_)
                | Error::Domain(_)
                | Error::InvalidInput(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

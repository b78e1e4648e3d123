//! Dataset and result I/O.
//!
//! Datasets are plain CSV with columns `y,t,x` (header optional). Result
//! tables are written with a fixed column order and a 9-significant-digit
//! float format, so output bytes are stable across runs and thread counts.

use crate::error::{Error, Result};
use crate::harness::{CellResult, CopulaCell, ExperimentConfig, Method};
use crate::perm::SeedSpec;
use crate::simgen::{ScenarioKind, ScenarioSpec, TailDist};
use crate::twostep::TrialDataset;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

/// Format with 9 significant digits, shortest of fixed/scientific,
/// trailing zeros trimmed. Mirrors printf's %.9g closely enough for
/// stable, readable tables.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    let mut s = if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let t = format!("{v:.decimals$}");
        if t.contains('.') {
            t.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            t
        }
    } else {
        format!("{v:.8e}")
    };
    if let Some(epos) = s.find('e') {
        let (mant, e) = s.split_at(epos);
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        s = format!("{mant}{e}");
    }
    s
}

/// A rectangular table rendered as CSV with a trailing newline.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Load a `y,t,x` CSV. A first line of column names is allowed.
pub fn load_dataset(path: &Path) -> Result<TrialDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<TrialDataset> {
    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if i == 0 && fields.iter().all(|f| f.parse::<f64>().is_err()) {
            // Header row.
            let lower: Vec<String> = fields.iter().map(|f| f.to_lowercase()).collect();
            if lower != ["y", "t", "x"] {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected header 'y,t,x', got '{trimmed}'"),
                });
            }
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let yv: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad outcome '{}'", fields[0]) })?;
        let tv: u8 = match fields[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse { line, msg: format!("treatment must be 0 or 1, got '{other}'") })
            }
        };
        let xv: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad biomarker '{}'", fields[2]) })?;
        y.push(yv);
        t.push(tv);
        x.push(xv);
    }
    if y.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data rows".into() });
    }
    TrialDataset::new(y, t, x)
}

pub fn cells_to_table(cells: &[CellResult]) -> Table {
    let mut table = Table::new(&[
        "scenario", "n", "pi0", "tail", "delta", "delta_a", "delta_b", "k", "method",
        "rejections", "replicates", "rate", "ci_lo", "ci_hi",
    ]);
    for c in cells {
        let tail = match c.spec.tail_dist {
            TailDist::Uniform01 => "uniform".to_string(),
            TailDist::Beta { a, b } => format!("beta({};{})", fmt_g9(a), fmt_g9(b)),
        };
        table.push_row(vec![
            c.spec.kind.name().to_string(),
            c.spec.n.to_string(),
            fmt_g9(c.spec.pi0),
            tail,
            fmt_g9(c.spec.delta),
            fmt_g9(c.spec.delta_a),
            fmt_g9(c.spec.delta_b),
            fmt_g9(c.spec.k_scale),
            c.method.name().to_string(),
            c.rejections.to_string(),
            c.replicates.to_string(),
            fmt_g9(c.rate),
            fmt_g9(c.ci_lo),
            fmt_g9(c.ci_hi),
        ]);
    }
    table
}

pub fn copula_cells_to_table(cells: &[CopulaCell]) -> Table {
    let mut table = Table::new(&[
        "rho", "draws", "fisher_rejections", "fisher_rate", "fisher_ci_lo", "fisher_ci_hi",
        "brown_rejections", "brown_rate", "brown_ci_lo", "brown_ci_hi", "calibrated_threshold",
    ]);
    for c in cells {
        table.push_row(vec![
            fmt_g9(c.rho),
            c.n_draws.to_string(),
            c.fisher_rejections.to_string(),
            fmt_g9(c.fisher_rate),
            fmt_g9(c.fisher_ci.0),
            fmt_g9(c.fisher_ci.1),
            c.brown_rejections.to_string(),
            fmt_g9(c.brown_rate),
            fmt_g9(c.brown_ci.0),
            fmt_g9(c.brown_ci.1),
            fmt_g9(c.calibrated_threshold),
        ]);
    }
    table
}

// ---- TOML experiment configuration ----

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn clone_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: String,
    n: OneOrMany<usize>,
    pi0: OneOrMany<f64>,
    #[serde(default)]
    delta: f64,
    #[serde(default)]
    delta_a: f64,
    #[serde(default)]
    delta_b: f64,
    #[serde(default)]
    k: f64,
    tail: Option<String>,
    beta_a: Option<f64>,
    beta_b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    replicates: usize,
    perms: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    threads: usize,
    methods: Vec<String>,
    scenario: Vec<ScenarioSection>,
}

fn default_alpha() -> f64 {
    0.05
}

fn parse_kind(s: &str) -> Result<ScenarioKind> {
    match s {
        "null" => Ok(ScenarioKind::Null),
        "spike_only" => Ok(ScenarioKind::SpikeOnly),
        "tail_only" => Ok(ScenarioKind::TailOnly),
        "mix" => Ok(ScenarioKind::Mix),
        "correlated" => Ok(ScenarioKind::Correlated),
        other => Err(Error::Config(format!(
            "unknown scenario kind '{other}' (expected null|spike_only|tail_only|mix|correlated)"
        ))),
    }
}

fn parse_tail(section: &ScenarioSection) -> Result<TailDist> {
    match section.tail.as_deref() {
        None | Some("uniform") => Ok(TailDist::Uniform01),
        Some("beta") => {
            let (Some(a), Some(b)) = (section.beta_a, section.beta_b) else {
                return Err(Error::Config("tail = \"beta\" requires beta_a and beta_b".into()));
            };
            Ok(TailDist::Beta { a, b })
        }
        Some(other) => Err(Error::Config(format!(
            "unknown tail distribution '{other}' (expected uniform|beta)"
        ))),
    }
}

/// Parse a TOML experiment file. `seed`/`threads` flags override the file
/// when given on the command line.
pub fn parse_experiment_config(
    text: &str,
    seed_override: Option<u64>,
    threads_override: Option<usize>,
) -> Result<ExperimentConfig> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("bad experiment file: {e}")))?;
    let methods = file
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>>>()?;

    let mut grid = Vec::new();
    for section in &file.scenario {
        let kind = parse_kind(&section.kind)?;
        let tail_dist = parse_tail(section)?;
        for &n in &section.n.clone_vec() {
            for &pi0 in &section.pi0.clone_vec() {
                grid.push(ScenarioSpec {
                    kind,
                    n,
                    pi0,
                    tail_dist,
                    delta: section.delta,
                    delta_a: section.delta_a,
                    delta_b: section.delta_b,
                    k_scale: section.k,
                    seed: SeedSpec::new(0, 0), // replaced per replicate by the harness
                });
            }
        }
    }

    Ok(ExperimentConfig {
        grid,
        methods,
        replicates: file.replicates,
        n_perms: file.perms,
        alpha: file.alpha,
        threads: threads_override.unwrap_or(file.threads),
        master_seed: seed_override.unwrap_or(file.seed),
    })
}

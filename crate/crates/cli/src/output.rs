//! CSV rows. Reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};

/// Header of every per-trial result file.
pub const RESULT_HEADER: &str =
    "experiment,seed,N,K,M,model,algorithm,trial,normalized_rmse,iterations,wall_time_s";

/// Header of the aggregate file written next to sweep and noise results.
pub const SUMMARY_HEADER: &str = "experiment,N,K,M,model,algorithm,sigma,snr_db,statistic,value,count";

/// Header of the bound tables.
pub const BOUNDS_HEADER: &str =
    "N,K,J,delta,eps,ln_plain_count,ln_tree_count,ln_tree_count_bound,plain_rip_m,tree_rip_m,tree_ramp_m,block_rip_m";

/// Header of the model self-check report.
pub const MODELCHECK_HEADER: &str = "check,cases,failures,status";

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn opt_int(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One recovery: a trial at one grid point for one model and algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Experiment id; the noise experiment appends `@sigma=<σ>`.
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    /// Empty when a sweep-n search was not bracketed by `M ≤ N`.
    pub m: Option<usize>,
    pub model: String,
    pub algorithm: String,
    pub trial: usize,
    pub normalized_rmse: f64,
    pub iterations: usize,
    /// Empty unless timing is enabled.
    pub wall_time_s: Option<f64>,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.seed,
            self.n,
            self.k,
            opt_int(self.m),
            self.model,
            self.algorithm,
            self.trial,
            real(self.normalized_rmse),
            self.iterations,
            opt_real(self.wall_time_s)
        )
    }
}

/// One aggregate over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: usize,
    pub k: usize,
    pub m: Option<usize>,
    pub model: String,
    pub algorithm: String,
    pub sigma: Option<f64>,
    pub snr_db: Option<f64>,
    /// `mean`, `median`, `max` or `median_m_over_k`.
    pub statistic: String,
    pub value: f64,
    pub count: usize,
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.n,
            self.k,
            opt_int(self.m),
            self.model,
            self.algorithm,
            opt_real(self.sigma),
            opt_real(self.snr_db),
            self.statistic,
            real(self.value),
            self.count
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    pub k: usize,
    pub j: usize,
    pub delta: f64,
    pub eps: f64,
    pub ln_plain_count: f64,
    pub ln_tree_count: Option<f64>,
    pub ln_tree_count_bound: f64,
    pub plain_rip_m: f64,
    pub tree_rip_m: f64,
    pub tree_ramp_m: f64,
    pub block_rip_m: Option<f64>,
}

impl BoundRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.j,
            real(self.delta),
            real(self.eps),
            real(self.ln_plain_count),
            opt_real(self.ln_tree_count),
            real(self.ln_tree_count_bound),
            real(self.plain_rip_m),
            real(self.tree_rip_m),
            real(self.tree_ramp_m),
            opt_real(self.block_rip_m)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRow {
    pub check: String,
    pub cases: usize,
    pub failures: usize,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn to_csv(&self) -> String {
        let status = if self.passed() { "pass" } else { "fail" };
        format!("{},{},{},{}", self.check, self.cases, self.failures, status)
    }
}

/// Header line plus one line per row, each terminated by `\n`.
pub fn render<I>(header: &str, lines: I) -> String
where
    I: IntoIterator<Item = String>,
{
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    for line in lines {
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn write_to<W: Write>(mut w: W, text: &str) -> io::Result<()> {
    w.write_all(text.as_bytes())?;
    w.flush()
}

//! Model-based CoSaMP and iterative hard thresholding.
//!
//! Both engines take any [`ModelKind`]; with [`ModelKind::PlainSparse`] they
//! are the standard CoSaMP and IHT iterations.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::models::{model_approx, model_approx_b, ModelKind, SupportSet};

/// Least-squares iterations allowed per column of `Φ_T`.
pub const LSQ_ITERS_PER_COLUMN: usize = 4;

/// Divergence factor for IHT: stop once `‖d‖₂` exceeds this multiple of
/// its running minimum.
pub const IHT_DIVERGENCE_FACTOR: f64 = 10.0;

/// Relative residual `‖d‖₂/‖y‖₂` treated as zero: the measurements are
/// explained to the resolution of the least-squares solver.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    CoSaMP,
    Iht,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::CoSaMP => "cosamp",
            Algorithm::Iht => "iht",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    /// Target model sparsity (in model units).
    pub k: usize,
    pub max_iters: usize,
    /// Halt when `|‖d_{i−1}‖ − ‖d_i‖| < halt_tol·‖d_{i−1}‖` or when `‖d_i‖` drops
    /// to [`RESIDUAL_FLOOR`]`·‖y‖`.
    pub halt_tol: f64,
    /// Relative stationarity tolerance of the restricted least squares.
    pub lsq_tol: f64,
    pub mode: Algorithm,
    /// Keep every iterate (and CoSaMP's least-squares estimate) in the
    /// report's trace.
    pub record_iterates: bool,
}

impl RecoveryConfig {
    pub fn new(k: usize, mode: Algorithm) -> Self {
        RecoveryConfig {
            k,
            max_iters: 50,
            halt_tol: 1e-6,
            lsq_tol: 1e-10,
            mode,
            record_iterates: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.halt_tol >= 0.0) {
            return Err(Error::InvalidArgument("halt_tol must be nonnegative".into()));
        }
        if !(self.lsq_tol > 0.0) {
            return Err(Error::InvalidArgument("lsq_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration detail kept when [`RecoveryConfig::record_iterates`] is set.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// `x̂_i`
    pub estimate: DenseVector,
    /// CoSaMP's least-squares estimate `b` (IHT: the gradient step).
    pub proxy: DenseVector,
    /// `|T|` after merging supports (IHT: support of `b`'s pruning input).
    pub merged_support_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub estimate: DenseVector,
    pub support: SupportSet,
    pub iterations: usize,
    /// `‖d_i‖₂` after each iteration.
    pub residual_history: Vec<f64>,
    pub wall_time: Duration,
    /// Some least-squares solve stopped short of its tolerance.
    pub degenerate_lsq: bool,
    /// IHT stopped on residual growth and returned its best iterate.
    pub diverged: bool,
    pub trace: Vec<IterationTrace>,
}

fn check_problem(phi: &DenseMatrix, y: &[f64], model: &ModelKind, cfg: &RecoveryConfig) -> Result<()> {
    cfg.validate()?;
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            found: y.len(),
        });
    }
    model.check_len(phi.cols())?;
    let cap = model.capacity(phi.cols());
    if cfg.k > cap {
        return Err(Error::InvalidArgument(format!(
            "K={} exceeds model capacity {cap}",
            cfg.k
        )));
    }
    Ok(())
}

fn zero_report(n: usize, model: &ModelKind, k: usize, started: Instant) -> Result<RecoveryReport> {
    let zero = vec![0.0; n];
    let support = model_approx(&zero, model, k)?.support;
    Ok(RecoveryReport {
        estimate: DenseVector::zeros(n),
        support,
        iterations: 1,
        residual_history: vec![0.0],
        wall_time: started.elapsed(),
        degenerate_lsq: false,
        diverged: false,
        trace: Vec::new(),
    })
}

fn residual(phi: &DenseMatrix, y: &[f64], x: &[f64], support: &SupportSet) -> Vec<f64> {
    let phix = phi.mul_sparse(x, support.indices());
    y.iter().zip(phix).map(|(a, b)| a - b).collect()
}

fn halted(prev: f64, current: f64, y_norm: f64, tol: f64) -> bool {
    current <= RESIDUAL_FLOOR * y_norm || (prev - current).abs() < tol * prev
}

/// Model-based CoSaMP.
///
/// Each iteration forms the proxy `e = Φᵀd`, keeps the support of its
/// `M(e, 2K)` approximation, merges it with the current support, solves
/// least squares on the merged columns, prunes with `M(·, K)` and updates
/// the residual.
pub fn model_cosamp(
    phi: &DenseMatrix,
    y: &[f64],
    model: &ModelKind,
    cfg: &RecoveryConfig,
) -> Result<RecoveryReport> {
    let started = Instant::now();
    check_problem(phi, y, model, cfg)?;
    let n = phi.cols();
    let y_norm = linalg::norm2(y);
    if y_norm == 0.0 {
        return zero_report(n, model, cfg.k, started);
    }

    let mut estimate = DenseVector::zeros(n);
    let mut support = SupportSet::empty();
    let mut d = y.to_vec();
    let mut prev = y_norm;
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut degenerate = false;

    for _ in 0..cfg.max_iters {
        let e = phi.tr_mul_vec(&d);
        let omega = model_approx_b(&e, model, cfg.k, 2)?.support;
        let merged = omega.union(&support);
        let lsq = linalg::restricted_lsq(
            phi,
            &merged,
            y,
            cfg.lsq_tol,
            LSQ_ITERS_PER_COLUMN * merged.len(),
        )?;
        degenerate |= lsq.degenerate;
        let mut b = vec![0.0; n];
        for (&i, &v) in merged.indices().iter().zip(lsq.solution.iter()) {
            b[i] = v;
        }
        let pruned = model_approx(&b, model, cfg.k)?;
        estimate = pruned.approximation;
        support = pruned.support;
        d = residual(phi, y, &estimate, &support);
        let res = linalg::norm2(&d);
        history.push(res);
        if cfg.record_iterates {
            trace.push(IterationTrace {
                estimate: estimate.clone(),
                proxy: DenseVector::new(b),
                merged_support_len: merged.len(),
            });
        }
        if halted(prev, res, y_norm, cfg.halt_tol) {
            break;
        }
        prev = res;
    }

    Ok(RecoveryReport {
        estimate,
        support,
        iterations: history.len(),
        residual_history: history,
        wall_time: started.elapsed(),
        degenerate_lsq: degenerate,
        diverged: false,
        trace,
    })
}

/// Model-based iterative hard thresholding with unit step:
/// `x̂ ← M(x̂ + Φᵀd, K)`, `d ← y − Φx̂`.
pub fn model_iht(
    phi: &DenseMatrix,
    y: &[f64],
    model: &ModelKind,
    cfg: &RecoveryConfig,
) -> Result<RecoveryReport> {
    let started = Instant::now();
    check_problem(phi, y, model, cfg)?;
    let n = phi.cols();
    let y_norm = linalg::norm2(y);
    if y_norm == 0.0 {
        return zero_report(n, model, cfg.k, started);
    }

    let mut estimate = DenseVector::zeros(n);
    let mut support = SupportSet::empty();
    let mut d = y.to_vec();
    let mut prev = y_norm;
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut best: (f64, DenseVector, SupportSet) = (y_norm, estimate.clone(), support.clone());
    let mut diverged = false;

    for _ in 0..cfg.max_iters {
        let grad = phi.tr_mul_vec(&d);
        let b: Vec<f64> = estimate.iter().zip(&grad).map(|(x, g)| x + g).collect();
        let pruned = model_approx(&b, model, cfg.k)?;
        estimate = pruned.approximation;
        support = pruned.support;
        d = residual(phi, y, &estimate, &support);
        let res = linalg::norm2(&d);
        history.push(res);
        if cfg.record_iterates {
            trace.push(IterationTrace {
                estimate: estimate.clone(),
                proxy: DenseVector::new(b),
                merged_support_len: support.len(),
            });
        }
        if res < best.0 {
            best = (res, estimate.clone(), support.clone());
        }
        if res > IHT_DIVERGENCE_FACTOR * best.0 {
            diverged = true;
            break;
        }
        if halted(prev, res, y_norm, cfg.halt_tol) {
            break;
        }
        prev = res;
    }

    let (estimate, support) = if diverged {
        (best.1, best.2)
    } else {
        (estimate, support)
    };
    Ok(RecoveryReport {
        estimate,
        support,
        iterations: history.len(),
        residual_history: history,
        wall_time: started.elapsed(),
        degenerate_lsq: false,
        diverged,
        trace,
    })
}

/// Runs the engine selected by `cfg.mode`.
pub fn recover(
    phi: &DenseMatrix,
    y: &[f64],
    model: &ModelKind,
    cfg: &RecoveryConfig,
) -> Result<RecoveryReport> {
    match cfg.mode {
        Algorithm::CoSaMP => model_cosamp(phi, y, model, cfg),
        Algorithm::Iht => model_iht(phi, y, model, cfg),
    }
}

/// Per-iteration errors against the geometric envelope
/// `‖x − x̂_i‖₂ ≤ 2^{−i}‖x‖₂ + 15‖n‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceAudit {
    /// Iteration numbers audited, starting with 0 (`x̂₀ = 0`).
    pub iterations: Vec<usize>,
    pub errors: Vec<f64>,
    pub envelope: Vec<f64>,
    pub first_violation: Option<usize>,
}

impl ConvergenceAudit {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Multiplier of the noise floor in the envelope.
pub const ENVELOPE_NOISE_FACTOR: f64 = 15.0;

/// Checks the envelope on every recorded iterate (only the final estimate
/// when the report carries no trace).
pub fn convergence_audit(report: &RecoveryReport, x_true: &[f64], noise_norm: f64) -> ConvergenceAudit {
    let x_norm = linalg::norm2(x_true);
    let mut iterations = vec![0];
    let mut errors = vec![x_norm];
    if report.trace.is_empty() {
        iterations.push(report.iterations);
        errors.push(linalg::distance(x_true, &report.estimate));
    } else {
        for (i, t) in report.trace.iter().enumerate() {
            iterations.push(i + 1);
            errors.push(linalg::distance(x_true, &t.estimate));
        }
    }
    let envelope: Vec<f64> = iterations
        .iter()
        .map(|&i| 0.5f64.powi(i as i32) * x_norm + ENVELOPE_NOISE_FACTOR * noise_norm)
        .collect();
    // Relative slack for roundoff once the error has collapsed.
    let slack = 1e-12 * x_norm.max(f64::MIN_POSITIVE);
    let first_violation = iterations
        .iter()
        .zip(errors.iter().zip(&envelope))
        .find(|(_, (e, b))| **e > **b + slack)
        .map(|(&i, _)| i);
    ConvergenceAudit {
        iterations,
        errors,
        envelope,
        first_violation,
    }
}

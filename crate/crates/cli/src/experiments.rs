//! Experiment runners. Each returns its CSV content; nothing here touches
//! the filesystem.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::time::Instant;

use modelcs::bounds::{self, BoundInput};
use modelcs::linalg::{self, DenseMatrix, RngStream};
use modelcs::models::{self, tree};
use modelcs::recovery::{self, RecoveryReport};
use modelcs::signals::{self, NoiseSpec};
use modelcs::wavelet::{self, WaveletFilter};
use modelcs::{Algorithm, ModelKind, RecoveryConfig, SupportSet};

use crate::config::{Experiment, ExperimentConfig, ModelTag, SignalKind};
use crate::output::{
    render, BoundRow, CheckRow, ResultRow, SummaryRow, BOUNDS_HEADER, MODELCHECK_HEADER,
    RESULT_HEADER, SUMMARY_HEADER,
};
use crate::CliError;

/// Per-trial rows, aggregates and the optional recovered-signal table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// `index,original,<model>_<algorithm>...` for the first recover trial.
    pub signal: Option<String>,
}

impl RunOutput {
    pub fn results_csv(&self) -> String {
        render(RESULT_HEADER, self.rows.iter().map(ResultRow::to_csv))
    }

    pub fn summary_csv(&self) -> String {
        render(SUMMARY_HEADER, self.summary.iter().map(SummaryRow::to_csv))
    }

    /// Summary value for `(model, algorithm, statistic)` at measurement
    /// count `m` (any `m` when `None`).
    pub fn statistic(&self, model: &str, algorithm: &str, statistic: &str, m: Option<usize>) -> Vec<&SummaryRow> {
        self.summary
            .iter()
            .filter(|s| {
                s.model == model
                    && s.algorithm == algorithm
                    && s.statistic == statistic
                    && (m.is_none() || s.m == m)
            })
            .collect()
    }
}

/// A test signal in its sparsity domain.
struct Instance {
    coeffs: Vec<f64>,
}

/// The signal-domain basis: wavelet synthesis or the identity.
struct Basis {
    filter: Option<WaveletFilter>,
    levels: usize,
}

impl Basis {
    fn for_config(cfg: &ExperimentConfig, n: usize) -> Result<Self, CliError> {
        if cfg.signal.is_wavelet() {
            let filter = WaveletFilter::by_name(&cfg.filter)?;
            let levels = wavelet::log2_exact(n)?;
            Ok(Basis {
                filter: Some(filter),
                levels,
            })
        } else {
            Ok(Basis {
                filter: None,
                levels: 0,
            })
        }
    }

    /// `A = ΦΨ`.
    fn sensing(&self, phi: DenseMatrix) -> Result<DenseMatrix, CliError> {
        match &self.filter {
            Some(f) => Ok(phi.map_rows(|row| wavelet::dwt(row, f, self.levels))?),
            None => Ok(phi),
        }
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>, CliError> {
        match &self.filter {
            Some(f) => Ok(wavelet::idwt(coeffs, f, self.levels)?),
            None => Ok(coeffs.to_vec()),
        }
    }

    fn analyze(&self, x: &[f64]) -> Result<Vec<f64>, CliError> {
        match &self.filter {
            Some(f) => Ok(wavelet::dwt(x, f, self.levels)?),
            None => Ok(x.to_vec()),
        }
    }
}

fn blocks_of(cfg: &ExperimentConfig, n: usize) -> Result<usize, CliError> {
    if n % cfg.j != 0 {
        return Err(CliError::Usage(format!(
            "N={n} is not a multiple of the block length J={}",
            cfg.j
        )));
    }
    Ok(n / cfg.j)
}

fn make_signal(cfg: &ExperimentConfig, basis: &Basis, n: usize, rng: &mut RngStream) -> Result<Instance, CliError> {
    let coeffs = match cfg.signal {
        SignalKind::HeaviSine => basis.analyze(&signals::heavisine(n)?)?,
        SignalKind::Piecewise => basis.analyze(&signals::piecewise_poly(n, cfg.pieces, cfg.degree, rng)?)?,
        SignalKind::PiecewiseTree => {
            let alpha = basis.analyze(&signals::piecewise_poly(n, cfg.pieces, cfg.degree, rng)?)?;
            tree::optimal_tree_approx(&alpha, cfg.k)?.approximation.into_inner()
        }
        SignalKind::TreeSparse => signals::tree_sparse_random(n, cfg.k, rng)?.into_inner(),
        SignalKind::BlockSparse => {
            signals::block_sparse_random(blocks_of(cfg, n)?, cfg.j, cfg.k, rng)?.into_inner()
        }
        SignalKind::BlockCompressible => {
            signals::block_compressible_random(blocks_of(cfg, n)?, cfg.j, cfg.decay, rng)?.into_inner()
        }
    };
    Ok(Instance { coeffs })
}

/// A model with its sparsity budget in model units.
#[derive(Debug, Clone)]
struct Model {
    tag: ModelTag,
    kind: ModelKind,
    k: usize,
}

/// Builds the recovery models. `K` is in model units of the signal: for
/// block signals plain recovery gets `K·J` coefficients.
fn build_models(cfg: &ExperimentConfig, n: usize) -> Result<Vec<Model>, CliError> {
    if cfg.k > n {
        return Err(CliError::Usage(format!("K={} exceeds N={n}", cfg.k)));
    }
    let block_signal = !cfg.signal.is_wavelet();
    let mut out = Vec::new();
    for &tag in &cfg.models {
        let model = match tag {
            ModelTag::Plain => Model {
                tag,
                kind: ModelKind::PlainSparse,
                k: if block_signal { cfg.k * cfg.j } else { cfg.k },
            },
            ModelTag::Tree => {
                if block_signal {
                    return Err(CliError::Usage(format!(
                        "the tree model needs a wavelet-domain signal, not {}",
                        cfg.signal.id()
                    )));
                }
                let filter = WaveletFilter::by_name(&cfg.filter)?;
                Model {
                    tag,
                    kind: ModelKind::tree(filter, n)?,
                    k: cfg.k,
                }
            }
            ModelTag::Block => {
                let blocks = blocks_of(cfg, n)?;
                if cfg.k > blocks {
                    return Err(CliError::Usage(format!(
                        "K={} exceeds the block count {blocks}",
                        cfg.k
                    )));
                }
                Model {
                    tag,
                    kind: ModelKind::block(cfg.j, blocks)?,
                    k: cfg.k,
                }
            }
        };
        if model.k > n {
            return Err(CliError::Usage(format!("sparsity {} exceeds N={n}", model.k)));
        }
        out.push(model);
    }
    Ok(out)
}

/// Coefficients per model unit of the signal family (`J` for block signals).
fn unit_len(cfg: &ExperimentConfig) -> usize {
    if cfg.signal.is_wavelet() {
        1
    } else {
        cfg.j
    }
}

/// A sensing matrix plus its lazily built unit-spectral-norm copy for IHT.
struct Sensing {
    a: DenseMatrix,
    normalized: OnceCell<(DenseMatrix, f64)>,
}

impl Sensing {
    fn new(a: DenseMatrix) -> Self {
        Sensing {
            a,
            normalized: OnceCell::new(),
        }
    }

    fn normalized(&self) -> Result<&(DenseMatrix, f64), CliError> {
        if let Some(v) = self.normalized.get() {
            return Ok(v);
        }
        let norm = linalg::spectral_norm(&self.a, 1e-12)?;
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        let scaled = self.a.map_rows(|row| Ok(row.iter().map(|v| v * scale).collect()))?;
        Ok(self.normalized.get_or_init(|| (scaled, scale)))
    }

    /// Unit-step IHT runs on `A/‖A‖₂` with `y/‖A‖₂`.
    fn recover(&self, y: &[f64], model: &Model, algorithm: Algorithm, cfg: &ExperimentConfig) -> Result<RecoveryReport, CliError> {
        let mut rc = RecoveryConfig::new(model.k, algorithm);
        rc.halt_tol = cfg.halt_tol;
        match algorithm {
            Algorithm::CoSaMP => {
                rc.max_iters = cfg.max_iters;
                Ok(recovery::recover(&self.a, y, &model.kind, &rc)?)
            }
            Algorithm::Iht => {
                rc.max_iters = cfg.iht_max_iters;
                let (a, scale) = self.normalized()?;
                let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
                Ok(recovery::recover(a, &ys, &model.kind, &rc)?)
            }
        }
    }
}

fn gaussian_sensing(basis: &Basis, m: usize, n: usize, rng: &mut RngStream) -> Result<Sensing, CliError> {
    Ok(Sensing::new(basis.sensing(linalg::gaussian_matrix(m, n, rng)?)?))
}

fn wall(cfg: &ExperimentConfig, started: Instant) -> Option<f64> {
    cfg.timing.then(|| started.elapsed().as_secs_f64())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn max(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Rows grouped by (M, model, algorithm) in first-seen order.
fn group_rmse(rows: &[ResultRow]) -> Vec<((Option<usize>, String, String), Vec<f64>)> {
    let mut groups: Vec<((Option<usize>, String, String), Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.m, r.model.clone(), r.algorithm.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.normalized_rmse),
            None => groups.push((key, vec![r.normalized_rmse])),
        }
    }
    groups
}

fn check_measurements(m: usize, n: usize) -> Result<(), CliError> {
    if m == 0 {
        return Err(CliError::Usage("M must be at least 1".into()));
    }
    if m > n {
        return Err(CliError::Usage(format!("M={m} exceeds N={n}")));
    }
    Ok(())
}

/// Single-configuration recovery, repeated over `trials` seeds.
pub fn cmd_recover(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let n = cfg.n;
    check_measurements(cfg.m, n)?;
    let basis = Basis::for_config(cfg, n)?;
    let models = build_models(cfg, n)?;
    let root = RngStream::new(cfg.seed);
    let mut out = RunOutput::default();
    let mut signal_columns: Vec<(String, Vec<f64>)> = Vec::new();

    for trial in 0..cfg.trials {
        let stream = root.child(0).child(trial as u64);
        let inst = make_signal(cfg, &basis, n, &mut stream.child(0))?;
        let sensing = gaussian_sensing(&basis, cfg.m, n, &mut stream.child(1))?;
        let y = sensing.a.mul_vec(&inst.coeffs);
        if trial == 0 && cfg.signal_out.is_some() {
            signal_columns.push(("original".into(), basis.synthesize(&inst.coeffs)?));
        }
        for model in &models {
            for &alg in &cfg.algorithms {
                let started = Instant::now();
                let report = sensing.recover(&y, model, alg, cfg)?;
                let rmse = signals::normalized_rmse(&inst.coeffs, &report.estimate)?;
                out.rows.push(ResultRow {
                    experiment: Experiment::Recover.id().into(),
                    seed: cfg.seed,
                    n,
                    k: cfg.k,
                    m: Some(cfg.m),
                    model: model.tag.id().into(),
                    algorithm: alg.tag().into(),
                    trial,
                    normalized_rmse: rmse,
                    iterations: report.iterations,
                    wall_time_s: wall(cfg, started),
                });
                if trial == 0 && cfg.signal_out.is_some() {
                    signal_columns.push((
                        format!("{}_{}", model.tag.id(), alg.tag()),
                        basis.synthesize(&report.estimate)?,
                    ));
                }
            }
        }
    }

    for ((m, model, alg), mut v) in group_rmse(&out.rows) {
        let count = v.len();
        out.summary.push(SummaryRow {
            experiment: Experiment::Recover.id().into(),
            n,
            k: cfg.k,
            m,
            model,
            algorithm: alg,
            sigma: None,
            snr_db: None,
            statistic: "median".into(),
            value: median(&mut v),
            count,
        });
    }
    if !signal_columns.is_empty() {
        let header = std::iter::once("index".to_string())
            .chain(signal_columns.iter().map(|(name, _)| name.clone()))
            .collect::<Vec<_>>()
            .join(",");
        let lines = (0..n).map(|i| {
            std::iter::once(i.to_string())
                .chain(signal_columns.iter().map(|(_, col)| crate::output::real(col[i])))
                .collect::<Vec<_>>()
                .join(",")
        });
        out.signal = Some(render(&header, lines));
    }
    Ok(out)
}

/// Measurement count for a grid factor: `round(f·K·unit)`.
fn grid_m(cfg: &ExperimentConfig, factor: f64) -> usize {
    (factor * (cfg.k * unit_len(cfg)) as f64).round() as usize
}

/// Error versus `M/K`: a fresh signal and matrix per grid point and trial.
pub fn cmd_sweep_m(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let n = cfg.n;
    let basis = Basis::for_config(cfg, n)?;
    let models = build_models(cfg, n)?;
    let root = RngStream::new(cfg.seed);
    let mut out = RunOutput::default();

    for (g, &factor) in cfg.m_grid.iter().enumerate() {
        let m = grid_m(cfg, factor);
        check_measurements(m, n)?;
        for trial in 0..cfg.trials {
            let stream = root.child(g as u64).child(trial as u64);
            let inst = make_signal(cfg, &basis, n, &mut stream.child(0))?;
            let sensing = gaussian_sensing(&basis, m, n, &mut stream.child(1))?;
            let y = sensing.a.mul_vec(&inst.coeffs);
            for model in &models {
                for &alg in &cfg.algorithms {
                    let started = Instant::now();
                    let report = sensing.recover(&y, model, alg, cfg)?;
                    out.rows.push(ResultRow {
                        experiment: Experiment::SweepM.id().into(),
                        seed: cfg.seed,
                        n,
                        k: cfg.k,
                        m: Some(m),
                        model: model.tag.id().into(),
                        algorithm: alg.tag().into(),
                        trial,
                        normalized_rmse: signals::normalized_rmse(&inst.coeffs, &report.estimate)?,
                        iterations: report.iterations,
                        wall_time_s: wall(cfg, started),
                    });
                }
            }
        }
    }

    for ((m, model, alg), v) in group_rmse(&out.rows) {
        out.summary.push(SummaryRow {
            experiment: Experiment::SweepM.id().into(),
            n,
            k: cfg.k,
            m,
            model,
            algorithm: alg,
            sigma: None,
            snr_db: None,
            statistic: "mean".into(),
            value: mean(&v),
            count: v.len(),
        });
    }
    Ok(out)
}

/// Outcome of the recovery attempts at one `M` of the sweep-n search.
#[derive(Debug, Clone)]
struct Probe {
    success: bool,
    errors: Vec<f64>,
    iterations: Vec<f64>,
}

/// Minimal `M` per sample signal reaching `‖α − α̂‖ ≤ target_factor·σ_K(α)`.
///
/// For each `N` and sample, binary search over `1..=N`; `M` succeeds when a
/// strict majority of `attempts` independent matrices meet the target.
/// The search assumes success is monotone in `M`. Samples whose target is
/// missed even at `M = N` get an empty `M` column.
pub fn cmd_sweep_n(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let mut out = RunOutput::default();
    let mut ratios: BTreeMap<(usize, usize, String, String), Vec<f64>> = BTreeMap::new();

    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let basis = Basis::for_config(cfg, n)?;
        let models = build_models(cfg, n)?;
        let reference = models
            .iter()
            .find(|m| m.tag != ModelTag::Plain)
            .or(models.first())
            .cloned();
        for trial in 0..cfg.trials {
            let stream = root.child(g as u64).child(trial as u64);
            let inst = make_signal(cfg, &basis, n, &mut stream.child(0))?;
            let norm = linalg::norm2(&inst.coeffs);
            let sigma = match &reference {
                Some(r) => models::model_approx(&inst.coeffs, &r.kind, r.k)?.error_l2,
                None => 0.0,
            };
            let target = (cfg.target_factor * sigma).max(1e-6 * norm);

            for (mi, model) in models.iter().enumerate() {
                for &alg in &cfg.algorithms {
                    let started = Instant::now();
                    let mut cache: BTreeMap<usize, Probe> = BTreeMap::new();
                    let mut probe = |m: usize| -> Result<Probe, CliError> {
                        if let Some(p) = cache.get(&m) {
                            return Ok(p.clone());
                        }
                        let mut errors = Vec::new();
                        let mut iterations = Vec::new();
                        let mut wins = 0;
                        for a in 0..cfg.attempts {
                            let index = 1 + (m * cfg.attempts + a) as u64;
                            let sensing = gaussian_sensing(&basis, m, n, &mut stream.child(index))?;
                            let y = sensing.a.mul_vec(&inst.coeffs);
                            let report = sensing.recover(&y, model, alg, cfg)?;
                            let err = linalg::distance(&inst.coeffs, &report.estimate);
                            if err <= target {
                                wins += 1;
                            }
                            errors.push(if norm > 0.0 { err / norm } else { err });
                            iterations.push(report.iterations as f64);
                        }
                        let p = Probe {
                            success: 2 * wins > cfg.attempts,
                            errors,
                            iterations,
                        };
                        cache.insert(m, p.clone());
                        Ok(p)
                    };

                    let top = probe(n)?;
                    let (found, at) = if !top.success {
                        (None, top)
                    } else {
                        let (mut lo, mut hi) = (0usize, n);
                        let mut best = top;
                        while hi - lo > 1 {
                            let mid = lo + (hi - lo) / 2;
                            let p = probe(mid)?;
                            if p.success {
                                hi = mid;
                                best = p;
                            } else {
                                lo = mid;
                            }
                        }
                        (Some(hi), best)
                    };
                    let mut errs = at.errors.clone();
                    let mut its = at.iterations.clone();
                    out.rows.push(ResultRow {
                        experiment: Experiment::SweepN.id().into(),
                        seed: cfg.seed,
                        n,
                        k: cfg.k,
                        m: found,
                        model: model.tag.id().into(),
                        algorithm: alg.tag().into(),
                        trial,
                        normalized_rmse: median(&mut errs),
                        iterations: median(&mut its).round() as usize,
                        wall_time_s: wall(cfg, started),
                    });
                    let ratio = found.map_or(f64::INFINITY, |m| m as f64 / cfg.k as f64);
                    ratios
                        .entry((g, mi, model.tag.id().to_string(), alg.tag().to_string()))
                        .or_default()
                        .push(ratio);
                }
            }
        }
    }

    for ((g, _, model, alg), mut v) in ratios {
        let count = v.len();
        out.summary.push(SummaryRow {
            experiment: Experiment::SweepN.id().into(),
            n: cfg.n_grid[g],
            k: cfg.k,
            m: None,
            model,
            algorithm: alg,
            sigma: None,
            snr_db: None,
            statistic: "median_m_over_k".into(),
            value: median(&mut v),
            count,
        });
    }
    Ok(out)
}

/// Maximum error over trials versus measurement noise level. Structured
/// models use `M = model_M_factor·K`, plain recovery `plain_M_factor·K`.
/// Signals and matrices are shared across noise levels (trial `t` always
/// sees the same signal).
pub fn cmd_noise(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let n = cfg.n;
    let basis = Basis::for_config(cfg, n)?;
    let models = build_models(cfg, n)?;
    let root = RngStream::new(cfg.seed);
    let mut out = RunOutput::default();
    let ms: Vec<usize> = models
        .iter()
        .map(|m| {
            let f = if m.tag == ModelTag::Plain { cfg.plain_m_factor } else { cfg.model_m_factor };
            grid_m(cfg, f)
        })
        .collect();
    for &m in &ms {
        check_measurements(m, n)?;
    }
    // (sigma index, model index, algorithm index) -> (errors, snrs)
    let mut acc: BTreeMap<(usize, usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut rows: Vec<(usize, ResultRow)> = Vec::new();

    for trial in 0..cfg.trials {
        let stream = root.child(0).child(trial as u64);
        let inst = make_signal(cfg, &basis, n, &mut stream.child(0))?;
        for (mi, model) in models.iter().enumerate() {
            let m = ms[mi];
            let sensing = gaussian_sensing(&basis, m, n, &mut stream.child(1 + mi as u64))?;
            let clean = sensing.a.mul_vec(&inst.coeffs);
            for (si, &sigma) in cfg.sigma_grid.iter().enumerate() {
                let noise_seed = stream.child(1000 + (si * models.len() + mi) as u64).seed();
                let y = signals::add_noise(&clean, NoiseSpec { sigma, seed: noise_seed })?;
                let snr = signals::measurement_snr(&clean, sigma, m);
                for (ai, &alg) in cfg.algorithms.iter().enumerate() {
                    let started = Instant::now();
                    let report = sensing.recover(&y, model, alg, cfg)?;
                    let rmse = signals::normalized_rmse(&inst.coeffs, &report.estimate)?;
                    let e = acc.entry((si, mi, ai)).or_default();
                    e.0.push(rmse);
                    e.1.push(snr);
                    rows.push((
                        si,
                        ResultRow {
                            experiment: format!("{}@sigma={}", Experiment::Noise.id(), crate::output::real(sigma)),
                            seed: cfg.seed,
                            n,
                            k: cfg.k,
                            m: Some(m),
                            model: model.tag.id().into(),
                            algorithm: alg.tag().into(),
                            trial,
                            normalized_rmse: rmse,
                            iterations: report.iterations,
                            wall_time_s: wall(cfg, started),
                        },
                    ));
                }
            }
        }
    }
    // Grid point major, then trial order.
    rows.sort_by_key(|(si, r)| (*si, r.trial));
    out.rows = rows.into_iter().map(|(_, r)| r).collect();

    for ((si, mi, ai), (errs, snrs)) in acc {
        out.summary.push(SummaryRow {
            experiment: Experiment::Noise.id().into(),
            n,
            k: cfg.k,
            m: Some(ms[mi]),
            model: models[mi].tag.id().into(),
            algorithm: cfg.algorithms[ai].tag().into(),
            sigma: Some(cfg.sigma_grid[si]),
            snr_db: Some(mean(&snrs)),
            statistic: "max".into(),
            value: max(&errs),
            count: errs.len(),
        });
    }
    Ok(out)
}

/// Bound table over `N_grid × K_grid` (pairs with `K > N` are skipped).
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut lines = Vec::new();
    for &n in &cfg.n_grid {
        for &k in &cfg.k_grid {
            if n == 0 || k == 0 {
                return Err(CliError::Usage("grid entries must be at least 1".into()));
            }
            if k > n {
                continue;
            }
            let mut input = BoundInput::new(n, k);
            input.delta = cfg.delta;
            input.eps = cfg.eps;
            let ln_plain = bounds::ln_binomial(n, k);
            let count = bounds::tree_subspace_count(n, k);
            let ln_exact = count.exact.as_ref().map(bounds::ln_biguint);
            let ln_tree = ln_exact.unwrap_or(count.log_upper_bound);
            let block_rip_m = if n % cfg.j == 0 && k <= n / cfg.j {
                Some(bounds::block_rip_measurements(n / cfg.j, cfg.j, k, cfg.delta, input.c, input.t)?)
            } else {
                None
            };
            let row = BoundRow {
                n,
                k,
                j: cfg.j,
                delta: cfg.delta,
                eps: cfg.eps,
                ln_plain_count: ln_plain,
                ln_tree_count: ln_exact,
                ln_tree_count_bound: count.log_upper_bound,
                plain_rip_m: bounds::model_rip_measurements(&input, ln_plain)?,
                tree_rip_m: bounds::model_rip_measurements(&input, ln_tree)?,
                tree_ramp_m: bounds::tree_ramp_measurements(n, k, cfg.eps, input.t)?,
                block_rip_m,
            };
            lines.push(row.to_csv());
        }
    }
    Ok(render(BOUNDS_HEADER, lines))
}

/// Oracle-equivalence and invariant checks; every row must report zero
/// failures. `trials` scales the number of random cases.
pub fn run_modelcheck(cfg: &ExperimentConfig) -> Result<Vec<CheckRow>, CliError> {
    let root = RngStream::new(cfg.seed);
    let cases = cfg.trials.max(1) * 20;
    let mut checks = Vec::new();

    // Tree oracle against exhaustive subtree search.
    let mut rng = root.child(0);
    let small_tree = ModelKind::tree(WaveletFilter::haar(), 16)?;
    let (mut failures, mut total) = (0, 0);
    for _ in 0..cases {
        let alpha: Vec<f64> = (0..16).map(|_| rng.normal()).collect();
        for k in 1..=8 {
            let fast = models::model_approx(&alpha, &small_tree, k)?;
            let brute = tree::brute_force_tree_approx(&alpha, k)?;
            total += 1;
            if tree::captured_energy(&alpha, &fast.support) != tree::captured_energy(&alpha, &brute.support) {
                failures += 1;
            }
        }
    }
    checks.push(CheckRow {
        check: "tree_oracle_vs_exhaustive".into(),
        cases: total,
        failures,
    });

    // The greedy CSSA never beats the oracle and stays rooted.
    let mut rng = root.child(1);
    let (mut failures, mut total) = (0, 0);
    for _ in 0..cases {
        let alpha: Vec<f64> = (0..64).map(|_| rng.normal()).collect();
        for k in [1, 3, 8, 20] {
            let greedy = tree::cssa_tree_approx(&alpha, k)?;
            let best = tree::optimal_tree_approx(&alpha, k)?;
            total += 1;
            let ok = tree::is_rooted_subtree(&greedy.support)
                && greedy.support.len() == k
                && tree::captured_energy(&alpha, &greedy.support)
                    <= tree::captured_energy(&alpha, &best.support) * (1.0 + 1e-12);
            if !ok {
                failures += 1;
            }
        }
    }
    checks.push(CheckRow {
        check: "cssa_bounded_by_oracle".into(),
        cases: total,
        failures,
    });

    // Block approximation against exhaustive block subsets.
    let mut rng = root.child(2);
    let (mut failures, mut total) = (0, 0);
    for _ in 0..cases {
        let blocks = 1 + rng.below(8);
        let j = 1 + rng.below(4);
        let k = rng.below(blocks + 1);
        let x: Vec<f64> = (0..blocks * j).map(|_| rng.normal()).collect();
        let fast = models::block_approx(&x, j, blocks, k)?;
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << blocks) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let idx: Vec<usize> = (0..blocks)
                .filter(|b| mask >> b & 1 == 1)
                .flat_map(|b| b * j..(b + 1) * j)
                .collect();
            best = best.max(tree::captured_energy(&x, &SupportSet::from_unsorted(idx)));
        }
        total += 1;
        if tree::captured_energy(&x, &fast.support) != best {
            failures += 1;
        }
    }
    checks.push(CheckRow {
        check: "block_vs_exhaustive".into(),
        cases: total,
        failures,
    });

    // Subtree counts in the Catalan regime and under the closed-form bound.
    let (mut failures, mut total) = (0, 0);
    for n in [64usize, 1024] {
        let log2n = n.trailing_zeros() as usize;
        for k in 1..log2n {
            total += 1;
            if bounds::tree_count_exact(n, k)? != catalan(k) {
                failures += 1;
            }
        }
    }
    for k in 1..=32 {
        total += 1;
        let exact = bounds::ln_biguint(&bounds::tree_count_exact(1024, k)?);
        if exact > bounds::tree_count_bound(1024, k) + 1e-9 {
            failures += 1;
        }
    }
    checks.push(CheckRow {
        check: "tree_counts".into(),
        cases: total,
        failures,
    });

    // Orthonormal transforms.
    let mut rng = root.child(3);
    let (mut failures, mut total) = (0, 0);
    for name in ["haar", "db4", "db6"] {
        let f = WaveletFilter::by_name(name)?;
        for levels in [3usize, 6, 10] {
            let n = 1 << levels;
            let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let a = wavelet::dwt(&x, &f, levels)?;
            let back = wavelet::idwt(&a, &f, levels)?;
            let nx = linalg::norm2(&x);
            total += 1;
            if (linalg::norm2(&a) - nx).abs() > 1e-10 * nx || linalg::distance(&x, &back) > 1e-10 * nx {
                failures += 1;
            }
        }
    }
    checks.push(CheckRow {
        check: "dwt_orthonormal".into(),
        cases: total,
        failures,
    });

    // Restricted least squares stationarity.
    let mut rng = root.child(4);
    let (mut failures, mut total) = (0, 0);
    for _ in 0..cfg.trials.max(1) {
        let phi = linalg::gaussian_matrix(40, 60, &mut rng)?;
        let support = SupportSet::from_unsorted(rng.sample_indices(60, 12));
        let y: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let sol = linalg::restricted_lsq(&phi, &support, &y, 1e-12, 200)?;
        let sub = phi.select_columns(support.indices());
        let r: Vec<f64> = y.iter().zip(sub.mul_vec(&sol.solution)).map(|(a, b)| a - b).collect();
        total += 1;
        if linalg::norm2(&sub.tr_mul_vec(&r)) > 1e-10 * linalg::norm2(&sub.tr_mul_vec(&y)) {
            failures += 1;
        }
    }
    checks.push(CheckRow {
        check: "lsq_stationarity".into(),
        cases: total,
        failures,
    });

    Ok(checks)
}

fn catalan(k: usize) -> num_bigint::BigUint {
    // C(2k, k)/(k+1), built multiplicatively.
    let mut c = num_bigint::BigUint::from(1u32);
    for i in 0..k {
        c = c * (2 * (2 * i + 1)) / (i + 2);
    }
    c
}

pub fn cmd_modelcheck(cfg: &ExperimentConfig) -> Result<(String, bool), CliError> {
    let checks = run_modelcheck(cfg)?;
    let ok = checks.iter().all(CheckRow::passed);
    Ok((render(MODELCHECK_HEADER, checks.iter().map(CheckRow::to_csv)), ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_numbers() {
        let got: Vec<u64> = (0..8).map(|k| catalan(k).try_into().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 2, 5, 14, 42, 132, 429]);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn tree_model_on_block_signal_is_a_usage_error() {
        let mut cfg = ExperimentConfig::default();
        cfg.signal = SignalKind::BlockSparse;
        cfg.models = vec![ModelTag::Tree];
        cfg.n = 64;
        cfg.k = 2;
        cfg.j = 8;
        cfg.m = 20;
        cfg.trials = 1;
        assert!(matches!(cmd_recover(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn bounds_skip_k_above_n() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_grid = vec![4];
        cfg.k_grid = vec![2, 8];
        cfg.j = 2;
        let csv = cmd_bounds(&cfg).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }
}

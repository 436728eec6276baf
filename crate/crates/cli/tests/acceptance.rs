//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values and then asserts the criterion.
//!
//! Tests share one lock so that wall-clock limits measure a single test.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use modelcs::bounds;
use modelcs::linalg::{self, DenseMatrix, RngStream};
use modelcs::models;
use modelcs::recovery::{self, convergence_audit};
use modelcs::signals;
use modelcs::wavelet::{self, WaveletFilter};
use modelcs::{Algorithm, ModelKind, RecoveryConfig, SupportSet};
use modelcs_cli::{
    cmd_noise, cmd_recover, cmd_sweep_m, cmd_sweep_n, Experiment, ExperimentConfig, ModelTag,
    RunOutput, SignalKind,
};
use num_bigint::BigUint;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, checks: &[(bool, String)], elapsed: Duration, limit: Option<Duration>) {
    let mut all = checks.to_vec();
    if let Some(limit) = limit {
        all.push((
            elapsed < limit,
            format!("runtime {:.1}s < {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
        ));
    }
    let pass = all.iter().all(|(ok, _)| *ok);
    let detail: Vec<String> = all
        .iter()
        .map(|(ok, msg)| format!("[{}] {msg}", if *ok { "ok" } else { "miss" }))
        .collect();
    // Straight to the stderr handle so the line survives output capture.
    let line = format!(
        "criterion {id}: {} | {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed");
}

fn summary_value(run: &RunOutput, model: &str, algorithm: &str, statistic: &str, m: Option<usize>) -> f64 {
    let rows = run.statistic(model, algorithm, statistic, m);
    assert_eq!(rows.len(), 1, "expected one {statistic} row for {model}/{algorithm} at {m:?}");
    rows[0].value
}

fn heavisine_config(algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Recover);
    cfg.signal = SignalKind::HeaviSine;
    cfg.n = 1024;
    cfg.m = 80;
    cfg.k = 26;
    cfg.filter = "db6".into();
    cfg.models = vec![ModelTag::Plain, ModelTag::Tree];
    cfg.algorithms = vec![algorithm];
    cfg.trials = 20;
    cfg
}

#[test]
fn criterion_01_heavisine_cosamp() {
    let _g = serial();
    let started = Instant::now();
    let run = cmd_recover(&heavisine_config(Algorithm::CoSaMP)).unwrap();
    let elapsed = started.elapsed();
    let tree = summary_value(&run, "tree", "cosamp", "median", Some(80));
    let plain = summary_value(&run, "plain", "cosamp", "median", Some(80));
    verdict(
        1,
        &[
            (tree <= 0.10, format!("tree-CoSaMP median RMSE {tree:.4} <= 0.10")),
            (plain >= 0.5, format!("plain-CoSaMP median RMSE {plain:.4} >= 0.5")),
        ],
        elapsed,
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn criterion_02_heavisine_iht() {
    let _g = serial();
    let started = Instant::now();
    let run = cmd_recover(&heavisine_config(Algorithm::Iht)).unwrap();
    let elapsed = started.elapsed();
    let tree = summary_value(&run, "tree", "iht", "median", Some(80));
    let plain = summary_value(&run, "plain", "iht", "median", Some(80));
    verdict(
        2,
        &[
            (tree <= 0.20, format!("tree-IHT median RMSE {tree:.4} <= 0.20")),
            (plain >= 0.4, format!("plain-IHT median RMSE {plain:.4} >= 0.4")),
        ],
        elapsed,
        Some(Duration::from_secs(120)),
    );
}

const PIECEWISE_K: usize = 32;

#[test]
fn criterion_03_phase_transition() {
    let _g = serial();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::SweepM);
    cfg.signal = SignalKind::PiecewiseTree;
    cfg.n = 1024;
    cfg.k = PIECEWISE_K;
    cfg.m_grid = vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0];
    cfg.models = vec![ModelTag::Plain, ModelTag::Tree];
    cfg.trials = 50;
    let started = Instant::now();
    let run = cmd_sweep_m(&cfg).unwrap();
    let elapsed = started.elapsed();

    let m_at = |f: f64| (f * PIECEWISE_K as f64).round() as usize;
    let tree3 = summary_value(&run, "tree", "cosamp", "mean", Some(m_at(3.0)));
    let plain3 = summary_value(&run, "plain", "cosamp", "mean", Some(m_at(3.0)));
    let plain_curve: Vec<(f64, f64)> = cfg
        .m_grid
        .iter()
        .map(|&f| (f, summary_value(&run, "plain", "cosamp", "mean", Some(m_at(f)))))
        .collect();
    let first_reach = plain_curve.iter().find(|(_, e)| *e <= 0.05).map(|(f, _)| *f);
    let curve: Vec<String> = plain_curve.iter().map(|(f, e)| format!("{f}:{e:.3}")).collect();
    verdict(
        3,
        &[
            (tree3 <= 0.05, format!("tree mean error at M=3K {tree3:.4} <= 0.05")),
            (
                plain3 >= 4.0 * tree3,
                format!("plain mean error at M=3K {plain3:.4} >= 4 x tree"),
            ),
            (
                matches!(first_reach, Some(f) if (4.5..=5.5).contains(&f)),
                format!(
                    "plain first <= 0.05 at M/K={first_reach:?}, want 5 +/- one grid step (curve {})",
                    curve.join(" ")
                ),
            ),
        ],
        elapsed,
        Some(Duration::from_secs(15 * 60)),
    );
}

#[test]
fn criterion_04_m_versus_n() {
    let _g = serial();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::SweepN);
    cfg.signal = SignalKind::Piecewise;
    cfg.k = PIECEWISE_K;
    cfg.n_grid = vec![128, 256, 512, 1024];
    cfg.models = vec![ModelTag::Plain, ModelTag::Tree];
    cfg.trials = 20;
    cfg.attempts = 5;
    let started = Instant::now();
    let run = cmd_sweep_n(&cfg).unwrap();
    let elapsed = started.elapsed();

    let ratio = |model: &str, n: usize| {
        run.summary
            .iter()
            .find(|s| s.model == model && s.n == n && s.statistic == "median_m_over_k")
            .map(|s| s.value)
            .unwrap()
    };
    let tree: Vec<f64> = cfg.n_grid.iter().map(|&n| ratio("tree", n)).collect();
    let plain: Vec<f64> = cfg.n_grid.iter().map(|&n| ratio("plain", n)).collect();
    let spread = tree.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tree.iter().cloned().fold(f64::INFINITY, f64::min);
    let growth = plain[3] - plain[0];
    verdict(
        4,
        &[
            (spread <= 1.0, format!("tree median M/K {tree:?}, spread {spread:.3} <= 1.0")),
            (
                growth >= 1.0,
                format!("plain median M/K {plain:?}, N=1024 minus N=128 = {growth:.3} >= 1.0"),
            ),
        ],
        elapsed,
        Some(Duration::from_secs(30 * 60)),
    );
}

#[test]
fn criterion_05_block_sparse() {
    let _g = serial();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Recover);
    cfg.signal = SignalKind::BlockSparse;
    cfg.n = 4096;
    cfg.j = 64;
    cfg.k = 6;
    cfg.m = 960;
    cfg.models = vec![ModelTag::Plain, ModelTag::Block];
    cfg.trials = 20;
    let started = Instant::now();
    let run = cmd_recover(&cfg).unwrap();
    let elapsed = started.elapsed();
    let block = summary_value(&run, "block", "cosamp", "median", Some(960));
    let plain = summary_value(&run, "plain", "cosamp", "median", Some(960));
    verdict(
        5,
        &[
            (block <= 0.05, format!("block-CoSaMP median RMSE {block:.4} <= 0.05")),
            (plain >= 0.3, format!("plain-CoSaMP median RMSE {plain:.4} >= 0.3")),
        ],
        elapsed,
        Some(Duration::from_secs(5 * 60)),
    );
}

#[test]
fn criterion_06_block_compressible() {
    let _g = serial();
    let (blocks, j, k, s) = (64usize, 16usize, 5usize, 1.0f64);
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Recover);
    cfg.signal = SignalKind::BlockCompressible;
    cfg.n = blocks * j;
    cfg.j = j;
    cfg.k = k;
    cfg.m = 200;
    cfg.decay = s;
    cfg.models = vec![ModelTag::Plain, ModelTag::Block];
    cfg.trials = 20;
    let started = Instant::now();
    let run = cmd_recover(&cfg).unwrap();
    let elapsed = started.elapsed();

    // Block norms are i^{-s-1/2}; the best K-block error keeps the K largest.
    let energy = |i: usize| (i as f64).powf(-2.0 * s - 1.0);
    let total: f64 = (1..=blocks).map(energy).sum();
    let tail: f64 = (k + 1..=blocks).map(energy).sum();
    let best = (tail / total).sqrt();

    let block = summary_value(&run, "block", "cosamp", "median", Some(200));
    let plain = summary_value(&run, "plain", "cosamp", "median", Some(200));
    verdict(
        6,
        &[
            (block <= 0.35, format!("block-CoSaMP median RMSE {block:.4} <= 0.35")),
            (
                block >= best,
                format!("block-CoSaMP median {block:.4} >= best 5-block error {best:.4}"),
            ),
            (plain >= 0.5, format!("plain-CoSaMP median RMSE {plain:.4} >= 0.5")),
        ],
        elapsed,
        Some(Duration::from_secs(120)),
    );
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in i..=j {
            r[idx[t]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn criterion_07_noise_robustness() {
    let _g = serial();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Noise);
    cfg.signal = SignalKind::PiecewiseTree;
    cfg.n = 1024;
    cfg.k = PIECEWISE_K;
    cfg.models = vec![ModelTag::Plain, ModelTag::Tree];
    cfg.model_m_factor = 3.5;
    cfg.plain_m_factor = 5.0;
    cfg.sigma_grid = vec![0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05];
    cfg.trials = 50;
    let started = Instant::now();
    let run = cmd_noise(&cfg).unwrap();
    let elapsed = started.elapsed();

    let mut checks = Vec::new();
    for model in ["tree", "plain"] {
        let points: Vec<_> = run
            .summary
            .iter()
            .filter(|s| s.model == model && s.sigma.unwrap() > 0.0)
            .collect();
        assert_eq!(points.len(), 6);
        let snr: Vec<f64> = points.iter().map(|s| s.snr_db.unwrap()).collect();
        let err: Vec<f64> = points.iter().map(|s| s.value).collect();
        let rho = spearman(&snr, &err);
        checks.push((
            rho <= -0.9,
            format!("{model} max-error Spearman vs SNR {rho:.3} <= -0.9 (max errors {err:.3?})"),
        ));
        let clean: Vec<f64> = run
            .rows
            .iter()
            .filter(|r| r.model == model && r.experiment.ends_with("sigma=0.0000000000000000e0"))
            .map(|r| r.normalized_rmse)
            .collect();
        let clean_mean = clean.iter().sum::<f64>() / clean.len() as f64;
        checks.push((
            clean_mean <= 0.05,
            format!("{model} noise-free mean error {clean_mean:.4} <= 0.05"),
        ));
    }
    verdict(7, &checks, elapsed, Some(Duration::from_secs(10 * 60)));
}

/// All rooted subtrees of the 16-node heap tree (node 0 has the single
/// child 1; node m ≥ 1 has children 2m, 2m+1), as bit masks by size.
fn rooted_subtree_masks(n: usize) -> Vec<Vec<u32>> {
    let mut by_size = vec![Vec::new(); n + 1];
    for mask in 1u32..(1 << n) {
        if mask & 1 == 0 {
            continue;
        }
        let closed = (1..n).all(|v| {
            let parent = if v == 1 { 0 } else { v / 2 };
            mask >> v & 1 == 0 || mask >> parent & 1 == 1
        });
        if closed {
            by_size[mask.count_ones() as usize].push(mask);
        }
    }
    by_size
}

fn mask_energy(x: &[f64], mask: u32) -> f64 {
    (0..x.len()).filter(|i| mask >> i & 1 == 1).map(|i| x[i] * x[i]).sum()
}

fn support_energy(x: &[f64], support: &SupportSet) -> f64 {
    support.iter().map(|i| x[i] * x[i]).sum()
}

#[test]
fn criterion_08_oracle_equivalence() {
    let _g = serial();
    let started = Instant::now();
    let n = 16;
    let masks = rooted_subtree_masks(n);
    let tree = ModelKind::tree(WaveletFilter::haar(), n).unwrap();
    let mut rng = RngStream::new(8);
    let (mut tree_cases, mut tree_mismatch, mut greedy_short) = (0, 0, 0);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for k in 1..=8 {
            let best = masks[k].iter().map(|&m| mask_energy(&x, m)).fold(f64::NEG_INFINITY, f64::max);
            let got = models::model_approx(&x, &tree, k).unwrap();
            tree_cases += 1;
            if support_energy(&x, &got.support) != best {
                tree_mismatch += 1;
            }
            let greedy = models::tree::cssa_tree_approx(&x, k).unwrap();
            if support_energy(&x, &greedy.support) != best {
                greedy_short += 1;
            }
        }
    }

    let (mut block_cases, mut block_mismatch) = (0, 0);
    for blocks in 1..=8usize {
        for j in 1..=4usize {
            for k in 0..=blocks {
                for _ in 0..5 {
                    let x: Vec<f64> = (0..blocks * j).map(|_| rng.normal()).collect();
                    let mut best = f64::NEG_INFINITY;
                    for mask in 0u32..(1 << blocks) {
                        if mask.count_ones() as usize != k {
                            continue;
                        }
                        let e: f64 = (0..blocks * j)
                            .filter(|i| mask >> (i / j) & 1 == 1)
                            .map(|i| x[i] * x[i])
                            .sum();
                        best = best.max(e);
                    }
                    let got = models::block_approx(&x, j, blocks, k).unwrap();
                    block_cases += 1;
                    if support_energy(&x, &got.support) != best {
                        block_mismatch += 1;
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    verdict(
        8,
        &[
            (
                tree_mismatch == 0,
                format!(
                    "tree oracle vs exhaustive: {tree_mismatch}/{tree_cases} mismatches \
                     (greedy CSSA below optimum in {greedy_short})"
                ),
            ),
            (
                block_mismatch == 0,
                format!("block_approx vs exhaustive: {block_mismatch}/{block_cases} mismatches"),
            ),
        ],
        elapsed,
        Some(Duration::from_secs(60)),
    );
}

fn catalan(k: u64) -> BigUint {
    // C(2k, k) / (k + 1), exact.
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for i in 1..=k {
        num *= k + i;
        den *= i;
    }
    num / den / (k + 1)
}

#[test]
fn criterion_09_counting() {
    let _g = serial();
    let started = Instant::now();
    let mut catalan_bad = Vec::new();
    let mut catalan_cases = 0;
    for n in [64usize, 1024] {
        let log2n = n.trailing_zeros() as usize;
        for k in 1..log2n {
            catalan_cases += 1;
            if bounds::tree_count_exact(n, k).unwrap() != catalan(k as u64) {
                catalan_bad.push((n, k));
            }
        }
    }
    let mut bound_bad = Vec::new();
    for k in 1..=32 {
        let exact: f64 = bounds::tree_count_exact(1024, k).unwrap().to_string().parse().unwrap();
        let bound = bounds::tree_count_bound(1024, k).exp();
        if exact > bound * (1.0 + 1e-12) {
            bound_bad.push(k);
        }
    }
    let elapsed = started.elapsed();
    verdict(
        9,
        &[
            (
                catalan_bad.is_empty(),
                format!("Catalan regime: {} of {catalan_cases} disagree {catalan_bad:?}", catalan_bad.len()),
            ),
            (
                bound_bad.is_empty(),
                format!("exact <= bound for K <= 32, N = 1024: violations {bound_bad:?}"),
            ),
        ],
        elapsed,
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_10_exact_recovery_envelope() {
    let _g = serial();
    let started = Instant::now();
    let (n, k) = (256usize, 16usize);
    let m = 4 * k;
    let tree = ModelKind::tree(WaveletFilter::daubechies6(), n).unwrap();
    let (mut exact, mut envelope_ok) = (0, 0);
    let mut violations = Vec::new();
    for seed in 0..100u64 {
        let mut rng = RngStream::new(seed);
        let x = signals::tree_sparse_random(n, k, &mut rng).unwrap();
        let phi = linalg::gaussian_matrix(m, n, &mut rng).unwrap();
        let y = phi.mul_vec(&x);
        let cfg = RecoveryConfig::new(k, Algorithm::CoSaMP).with_trace();
        let report = recovery::model_cosamp(&phi, &y, &tree, &cfg).unwrap();
        let rel = linalg::distance(&x, &report.estimate) / x.norm();
        if rel < 1e-6 {
            exact += 1;
            let audit = convergence_audit(&report, &x, 0.0);
            // Independent recomputation of the envelope on every iterate.
            let own = report.trace.iter().enumerate().all(|(i, t)| {
                let err = linalg::distance(&x, &t.estimate);
                err <= 0.5f64.powi(i as i32 + 1) * x.norm() * (1.0 + 1e-12)
            });
            if audit.holds() && own {
                envelope_ok += 1;
            } else {
                violations.push(seed);
            }
        }
    }
    let elapsed = started.elapsed();
    verdict(
        10,
        &[
            (exact >= 95, format!("exact recovery in {exact}/100 runs (need >= 95)")),
            (
                envelope_ok == exact,
                format!("envelope held in {envelope_ok}/{exact} exact runs (violating seeds {violations:?})"),
            ),
        ],
        elapsed,
        None,
    );
}

fn gram_eigen_extremes(a: &DenseMatrix) -> (f64, f64) {
    let g = nalgebra::DMatrix::from_fn(a.cols(), a.cols(), |i, j| {
        (0..a.rows()).map(|r| a.get(r, i) * a.get(r, j)).sum::<f64>()
    });
    let eig = g.symmetric_eigen().eigenvalues;
    (eig.min().max(0.0).sqrt(), eig.max().sqrt())
}

#[test]
fn criterion_11_transform_and_solver() {
    let _g = serial();
    let started = Instant::now();
    let mut rng = RngStream::new(11);

    let mut dwt_worst: f64 = 0.0;
    for f in [WaveletFilter::haar(), WaveletFilter::daubechies4(), WaveletFilter::daubechies6()] {
        for levels in [1usize, 4, 7, 10] {
            let nn = 1 << levels;
            for _ in 0..5 {
                let x: Vec<f64> = (0..nn).map(|_| rng.normal()).collect();
                let a = wavelet::dwt(&x, &f, levels).unwrap();
                let back = wavelet::idwt(&a, &f, levels).unwrap();
                let nx = linalg::norm2(&x);
                dwt_worst = dwt_worst
                    .max((linalg::norm2(&a) - nx).abs() / nx)
                    .max(linalg::distance(&x, &back) / nx);
            }
        }
    }

    let mut lsq_worst: f64 = 0.0;
    for _ in 0..50 {
        let phi = linalg::gaussian_matrix(60, 120, &mut rng).unwrap();
        let support = SupportSet::from_unsorted(rng.sample_indices(120, 20));
        let y: Vec<f64> = (0..60).map(|_| rng.normal()).collect();
        let sol = linalg::restricted_lsq(&phi, &support, &y, 1e-10, 200).unwrap();
        let sub = phi.select_columns(support.indices());
        let r: Vec<f64> = y.iter().zip(sub.mul_vec(&sol.solution)).map(|(a, b)| a - b).collect();
        let rel = linalg::norm2(&sub.tr_mul_vec(&r)) / linalg::norm2(&sub.tr_mul_vec(&y));
        lsq_worst = lsq_worst.max(rel);
    }

    let mut svd_worst: f64 = 0.0;
    for _ in 0..50 {
        let a = linalg::gaussian_matrix(50, 10, &mut rng).unwrap();
        let (lo, hi) = linalg::extreme_singular_values(&a, 1e-12).unwrap();
        let (elo, ehi) = gram_eigen_extremes(&a);
        svd_worst = svd_worst.max((lo - elo).abs()).max((hi - ehi).abs());
    }
    let elapsed = started.elapsed();
    verdict(
        11,
        &[
            (dwt_worst <= 1e-10, format!("DWT Parseval/round-trip worst relative error {dwt_worst:.2e} <= 1e-10")),
            (lsq_worst <= 1e-10, format!("restricted_lsq worst relative stationarity {lsq_worst:.2e} <= 1e-10")),
            (svd_worst <= 1e-6, format!("singular values vs Gram eigensolve worst gap {svd_worst:.2e} <= 1e-6")),
        ],
        elapsed,
        None,
    );
}

#[test]
fn criterion_12_power_law_tails() {
    let _g = serial();
    let started = Instant::now();
    let n = 1024;
    let mut checks = Vec::new();
    for r in [0.5f64, 1.0] {
        let s = 1.0 / r - 0.5;
        let mut worst_ratio: f64 = 0.0;
        for seed in 0..5 {
            let x = signals::power_law_random(n, r, &mut RngStream::new(seed)).unwrap();
            let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            // tail[k] = Σ_{i ≥ k} mags[i]², accumulated from the small end.
            let mut tail = vec![0.0; n + 1];
            for i in (0..n).rev() {
                tail[i] = tail[i + 1] + mags[i] * mags[i];
            }
            for k in 1..=n / 2 {
                let bound = (r * s).powf(-0.5) * (k as f64).powf(-s);
                worst_ratio = worst_ratio.max(tail[k].sqrt() / bound);
            }
        }
        checks.push((
            worst_ratio <= 1.0,
            format!("r = {r}: max sigma_K / bound over K <= N/2 is {worst_ratio:.4} <= 1"),
        ));
    }
    verdict(12, &checks, started.elapsed(), Some(Duration::from_secs(5)));
}

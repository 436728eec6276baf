//! Synthetic test signals, measurement noise and error metrics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseVector, RngStream};
use crate::models::{self, ModelKind};
use crate::wavelet;

/// HeaviSine: `f(t) = 4 sin(4πt) − sgn(t − 0.3) − sgn(0.72 − t)`.
pub fn heavisine_at(t: f64) -> f64 {
    4.0 * (4.0 * PI * t).sin() - sign(t - 0.3) - sign(0.72 - t)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// HeaviSine sampled at the cell midpoints `t = (i + ½)/N`.
pub fn heavisine(n: usize) -> Result<DenseVector> {
    wavelet::log2_exact(n)?;
    Ok((0..n)
        .map(|i| heavisine_at((i as f64 + 0.5) / n as f64))
        .collect::<Vec<_>>()
        .into())
}

/// Unit-norm piecewise polynomial with `pieces − 1` random breakpoints.
///
/// Each piece gets its own polynomial of the given degree, with coefficients
/// uniform in `[−1, 1]`, evaluated in the global variable `t = i/N`.
pub fn piecewise_poly(n: usize, pieces: usize, degree: usize, rng: &mut RngStream) -> Result<DenseVector> {
    if pieces == 0 || pieces > n {
        return Err(Error::InvalidArgument(format!(
            "pieces must be in 1..={n}, got {pieces}"
        )));
    }
    let mut breaks: Vec<usize> = rng
        .sample_indices(n - 1, pieces - 1)
        .into_iter()
        .map(|b| b + 1)
        .collect();
    breaks.sort_unstable();
    breaks.push(n);

    let mut x = Vec::with_capacity(n);
    let mut start = 0;
    for end in breaks {
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.uniform(-1.0, 1.0)).collect();
        for i in start..end {
            let t = i as f64 / n as f64;
            x.push(coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c));
        }
        start = end;
    }
    let norm = linalg::norm2(&x);
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(x.into())
}

/// Gaussian coefficients projected onto the best `K`-node rooted subtree.
/// The result lives in the wavelet coefficient domain.
pub fn tree_sparse_random(n: usize, k: usize, rng: &mut RngStream) -> Result<DenseVector> {
    wavelet::log2_exact(n)?;
    if k > n {
        return Err(Error::InvalidArgument(format!("K={k} exceeds length {n}")));
    }
    let alpha: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    Ok(models::optimal_tree_approx(&alpha, k)?.approximation)
}

/// `K` random blocks of length `J` filled with standard Gaussians.
pub fn block_sparse_random(blocks: usize, block_len: usize, k: usize, rng: &mut RngStream) -> Result<DenseVector> {
    if k > blocks {
        return Err(Error::InvalidArgument(format!(
            "K={k} exceeds block count {blocks}"
        )));
    }
    let mut x = vec![0.0; blocks * block_len];
    let mut active = rng.sample_indices(blocks, k);
    active.sort_unstable();
    for b in active {
        for v in &mut x[b * block_len..(b + 1) * block_len] {
            *v = rng.normal();
        }
    }
    Ok(x.into())
}

/// Gaussian blocks rescaled so that the `i`-th largest block norm is exactly
/// `i^{−s−1/2}`; the ranking of blocks is a random permutation.
pub fn block_compressible_random(blocks: usize, block_len: usize, s: f64, rng: &mut RngStream) -> Result<DenseVector> {
    if blocks == 0 || block_len == 0 {
        return Err(Error::InvalidArgument("empty block layout".into()));
    }
    let mut x: Vec<f64> = (0..blocks * block_len).map(|_| rng.normal()).collect();
    let rank = rng.permutation(blocks);
    for (b, &r) in rank.iter().enumerate() {
        let target = ((r + 1) as f64).powf(-s - 0.5);
        let chunk = &mut x[b * block_len..(b + 1) * block_len];
        let norm = linalg::norm2(chunk);
        if norm > 0.0 {
            chunk.iter_mut().for_each(|v| *v *= target / norm);
        }
    }
    Ok(x.into())
}

/// Random signs and positions with sorted magnitudes exactly `i^{−1/r}`
/// (`G = 1`). Such a signal is compressible with `s = 1/r − 1/2`.
pub fn power_law_random(n: usize, r: f64, rng: &mut RngStream) -> Result<DenseVector> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("decay r must be positive, got {r}")));
    }
    let mut x = vec![0.0; n];
    let positions = rng.permutation(n);
    for (i, &p) in positions.iter().enumerate() {
        let mag = ((i + 1) as f64).powf(-1.0 / r);
        x[p] = if rng.coin() { mag } else { -mag };
    }
    Ok(x.into())
}

/// Additive white Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Per-measurement standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

/// `y + n`, `n ~ Normal(0, σ²I)`.
pub fn add_noise(y: &[f64], spec: NoiseSpec) -> Result<DenseVector> {
    if !(spec.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be nonnegative, got {}",
            spec.sigma
        )));
    }
    if spec.sigma == 0.0 {
        return Ok(y.into());
    }
    let mut rng = RngStream::new(spec.seed);
    Ok(y.iter()
        .map(|v| v + spec.sigma * rng.normal())
        .collect::<Vec<_>>()
        .into())
}

/// `‖x − x̂‖₂ / ‖x‖₂`
pub fn normalized_rmse(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: xhat.len(),
        });
    }
    let nx = linalg::norm2(x);
    if nx == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(linalg::distance(x, xhat) / nx)
}

/// `σ_{M_K}(x)`, the ℓ₂ error of the best model approximation.
pub fn sigma_k_error(x: &[f64], model: &ModelKind, k: usize) -> Result<f64> {
    Ok(models::model_approx(x, model, k)?.error_l2)
}

/// Expected measurement SNR in dB: `20 log₁₀(‖y‖₂ / (σ√M))`.
pub fn measurement_snr(y_clean: &[f64], noise_sigma: f64, m: usize) -> f64 {
    20.0 * (linalg::norm2(y_clean) / (noise_sigma * (m as f64).sqrt())).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{is_rooted_subtree, kterm_approx};

    #[test]
    fn heavisine_hand_values() {
        assert!((heavisine_at(0.5) + 2.0).abs() < 1e-12);
        let x = heavisine(1024).unwrap();
        // Exactly two interior jumps of size 2 on top of the smooth part.
        let jumps = x.windows(2).filter(|w| (w[1] - w[0]).abs() > 1.0).count();
        assert_eq!(jumps, 2);
        assert!(heavisine(1000).is_err());
    }

    #[test]
    fn piecewise_constant_single_piece() {
        let x = piecewise_poly(64, 1, 0, &mut RngStream::new(1)).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert!(x.iter().all(|&v| (v - x[0]).abs() < 1e-15));
    }

    #[test]
    fn piecewise_has_jumps_at_breakpoints() {
        let x = piecewise_poly(1024, 5, 3, &mut RngStream::new(2)).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        // Smooth parts move by O(1/N) per sample; jumps are O(1/√N).
        let big = x.windows(2).filter(|w| (w[1] - w[0]).abs() > 1e-3).count();
        assert!((1..=4).contains(&big), "{big} jumps");
        assert!(piecewise_poly(8, 0, 3, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn tree_sparse_support_is_connected() {
        let x = tree_sparse_random(256, 16, &mut RngStream::new(3)).unwrap();
        let s = crate::models::SupportSet::from_unsorted(
            x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect(),
        );
        assert_eq!(s.len(), 16);
        assert!(is_rooted_subtree(&s));
    }

    #[test]
    fn block_sparse_has_k_blocks() {
        let x = block_sparse_random(16, 4, 3, &mut RngStream::new(4)).unwrap();
        let nz = x.chunks(4).filter(|b| b.iter().any(|&v| v != 0.0)).count();
        assert_eq!(nz, 3);
        assert!(block_sparse_random(4, 4, 5, &mut RngStream::new(4)).is_err());
    }

    #[test]
    fn block_compressible_norms_follow_power_law() {
        let s = 1.2;
        let x = block_compressible_random(32, 8, s, &mut RngStream::new(5)).unwrap();
        let mut norms = crate::models::block_norms(&x, 8);
        norms.sort_by(|a, b| b.total_cmp(a));
        for (i, n) in norms.iter().enumerate() {
            let want = ((i + 1) as f64).powf(-s - 0.5);
            assert!((n - want).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_magnitudes() {
        let x = power_law_random(100, 1.0, &mut RngStream::new(6)).unwrap();
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        for (i, m) in mags.iter().enumerate() {
            assert!((m - 1.0 / (i + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_is_identity_at_zero_and_seeded() {
        let y = vec![1.0, 2.0, 3.0];
        assert_eq!(add_noise(&y, NoiseSpec { sigma: 0.0, seed: 1 }).unwrap().as_slice(), &y[..]);
        let a = add_noise(&y, NoiseSpec { sigma: 0.1, seed: 9 }).unwrap();
        let b = add_noise(&y, NoiseSpec { sigma: 0.1, seed: 9 }).unwrap();
        assert_eq!(a, b);
        assert!(add_noise(&y, NoiseSpec { sigma: -1.0, seed: 9 }).is_err());
    }

    #[test]
    fn noise_norm_concentrates() {
        let (m, sigma) = (100, 0.3);
        let y = vec![0.0; m];
        let mean: f64 = (0..1000)
            .map(|s| add_noise(&y, NoiseSpec { sigma, seed: s }).unwrap().norm())
            .sum::<f64>()
            / 1000.0;
        let expected = sigma * (m as f64).sqrt();
        assert!((mean / expected - 1.0).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn metrics() {
        let x = [1.0, -2.0, 2.0];
        assert_eq!(normalized_rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(normalized_rmse(&x, &[0.0; 3]).unwrap(), 1.0);
        let scaled: Vec<f64> = x.iter().map(|v| -4.0 * v).collect();
        let xhat = [0.5, -2.0, 1.0];
        let scaled_hat: Vec<f64> = xhat.iter().map(|v| -4.0 * v).collect();
        let a = normalized_rmse(&x, &xhat).unwrap();
        let b = normalized_rmse(&scaled, &scaled_hat).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(normalized_rmse(&[0.0; 3], &x), Err(Error::ZeroSignal));

        let e = sigma_k_error(&x, &ModelKind::PlainSparse, 1).unwrap();
        assert!((e - kterm_approx(&x, 1).unwrap().error_l2).abs() < 1e-15);
        assert!((e - 5f64.sqrt()).abs() < 1e-12);

        let snr = measurement_snr(&[3.0, 4.0], 0.5, 4);
        assert!((snr - 20.0 * 5f64.log10()).abs() < 1e-12);
    }
}

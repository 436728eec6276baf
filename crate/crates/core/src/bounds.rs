//! Measurement-count bounds, subtree counting and Monte-Carlo estimates of
//! model-restricted isometry and amplification constants.
//!
//! Every count is handled through its natural logarithm so that quantities
//! like `(2e)^{K(2j+1)}` never overflow.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, RngStream};
use crate::models::{self, ModelKind, SupportSet};
use crate::wavelet::children_flat;

/// Parameters shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInput {
    pub n: usize,
    pub k: usize,
    /// Block length (1 outside the block model).
    pub j: usize,
    /// Target isometry constant, in `(0, 1]`.
    pub delta: f64,
    /// Amplification constant `ε_K ≥ 0`.
    pub eps: f64,
    /// Regularity exponent `r ≥ 0`.
    pub r: f64,
    /// Failure-probability slack: bounds hold with probability `1 − e^{−t}`.
    pub t: f64,
    /// Unspecified absolute constant of the concentration bound.
    pub c: f64,
}

impl BoundInput {
    pub fn new(n: usize, k: usize) -> Self {
        BoundInput {
            n,
            k,
            j: 1,
            delta: 0.1,
            eps: 0.1,
            r: 0.5,
            t: 1.0,
            c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.j == 0 {
            return Err(Error::InvalidArgument("N, K and J must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.eps >= 0.0) || !(self.r >= 0.0) || !(self.t >= 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidArgument(
                "eps, r, t must be nonnegative and c positive".into(),
            ));
        }
        Ok(())
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(what.to_string()))
    }
}

/// `ln C(n, k)` via log-gamma-free summation.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Measurements sufficient for the model RIP over `m_K` subspaces of
/// dimension `K`:
/// `(2/(cδ²))(ln(2m_K) + K ln(12/δ) + t)`.
pub fn model_rip_measurements(input: &BoundInput, log_mk: f64) -> Result<f64> {
    input.validate()?;
    let d = input.delta;
    let v = 2.0 / (input.c * d * d)
        * (std::f64::consts::LN_2 + log_mk + input.k as f64 * (12.0 / d).ln() + input.t);
    finite(v, "model RIP bound")
}

/// Measurements sufficient for the `(ε_K, r)` amplification property given
/// the residual subspace counts `ln R_j`:
/// `max_{1≤j≤jmax} (2K + 4 ln(R_j N/K) + 2t) / (j^r √(1+ε_K) − 1)²`.
pub fn ramp_measurements<F>(input: &BoundInput, log_rj: F, jmax: usize) -> Result<f64>
where
    F: Fn(usize) -> f64,
{
    input.validate()?;
    if jmax == 0 {
        return Err(Error::InvalidArgument("jmax must be at least 1".into()));
    }
    let (k, n) = (input.k as f64, input.n as f64);
    let amp = (1.0 + input.eps).sqrt();
    let mut best = f64::NEG_INFINITY;
    for j in 1..=jmax {
        let denom = (j as f64).powf(input.r) * amp - 1.0;
        if denom.abs() < 1e-300 {
            return Err(Error::InvalidArgument(format!(
                "denominator vanishes at j={j}: need eps > 0 (or r > 0 beyond j = 1)"
            )));
        }
        let numer = 2.0 * k + 4.0 * (log_rj(j) + n.ln() - k.ln()) + 2.0 * input.t;
        best = best.max(numer / (denom * denom));
    }
    finite(best, "RAmP bound")
}

/// Largest tree size accepted by [`tree_count_exact`].
pub const TREE_COUNT_MAX_N: usize = 1 << 16;
/// Largest subtree size accepted by [`tree_count_exact`].
pub const TREE_COUNT_MAX_K: usize = 1024;

/// Height of the largest perfect binary tree with at most `n` nodes. For
/// `n = 2^I` this is the detail-coefficient tree of a length-`n` transform.
pub fn perfect_tree_height(n: usize) -> usize {
    ((n + 1).ilog2()) as usize
}

/// Exact number of connected subtrees with `k` nodes that contain the root
/// of the perfect binary tree of height [`perfect_tree_height`]`(n)`.
///
/// Dynamic program over heights: with `c_h(k)` the count for a tree of
/// height `h`, `c_h(k) = Σ_{a+b=k−1} c'_{h−1}(a)·c'_{h−1}(b)` where
/// `c'(0) = 1` accounts for an absent child.
pub fn tree_count_exact(n: usize, k: usize) -> Result<BigUint> {
    if n == 0 || n > TREE_COUNT_MAX_N || k > TREE_COUNT_MAX_K {
        return Err(Error::GuardExceeded(format!(
            "exact subtree count limited to 1 ≤ N ≤ {TREE_COUNT_MAX_N}, K ≤ {TREE_COUNT_MAX_K} (got N={n}, K={k})"
        )));
    }
    let height = perfect_tree_height(n);
    if k == 0 {
        return Ok(BigUint::from(1u32));
    }
    // with_empty[a] = number of rooted subtrees of size a, counting the empty
    // one at a = 0, for the current height.
    let mut with_empty: Vec<BigUint> = vec![BigUint::from(1u32)];
    with_empty.resize(k + 1, BigUint::ZERO);
    for _ in 0..height {
        let mut next = vec![BigUint::ZERO; k + 1];
        next[0] = BigUint::from(1u32);
        for (size, slot) in next.iter_mut().enumerate().skip(1) {
            let rem = size - 1;
            let mut acc = BigUint::ZERO;
            for a in 0..=rem {
                let (l, r) = (&with_empty[a], &with_empty[rem - a]);
                if *l != BigUint::ZERO && *r != BigUint::ZERO {
                    acc += l * r;
                }
            }
            *slot = acc;
        }
        with_empty = next;
    }
    Ok(with_empty[k].clone())
}

/// `ln` of the subtree-count bound: `4^{K+4}/(K e²)` for `K ≥ log₂N` and
/// `(2e)^K/(K+1)` for `K < log₂N`.
pub fn tree_count_bound(n: usize, k: usize) -> f64 {
    let kf = k as f64;
    if kf >= (n as f64).log2() {
        (kf + 4.0) * 4f64.ln() - kf.ln() - 2.0
    } else {
        kf * (2.0 * std::f64::consts::E).ln() - (kf + 1.0).ln()
    }
}

/// Exact count (when within the guard) alongside the log-domain bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub exact: Option<BigUint>,
    pub log_upper_bound: f64,
}

pub fn tree_subspace_count(n: usize, k: usize) -> CountResult {
    CountResult {
        exact: tree_count_exact(n, k).ok(),
        log_upper_bound: tree_count_bound(n, k),
    }
}

/// Natural log of a big integer, accurate to double precision.
pub fn ln_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(60);
    let top: BigUint = v >> shift;
    let mantissa = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    mantissa.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln` of the residual-subspace count bound
/// `R_j ≤ (2e)^{K(2j+1)} / ((Kj+K+1)(Kj+1))`.
pub fn tree_residual_count_bound(k: usize, j: usize) -> f64 {
    let (k, j) = (k as f64, j as f64);
    k * (2.0 * j + 1.0) * (2.0 * std::f64::consts::E).ln()
        - (k * j + k + 1.0).ln()
        - (k * j + 1.0).ln()
}

/// Closed-form tree-model amplification bound
/// `2(10K + 2 ln(N/(K(K+1)(2K+1))) + t) / (√(1+ε) − 1)²`.
///
/// Evaluating the general bound with the residual counts and collecting the
/// `j = 1` terms gives `K(11 + 12 ln 2)` in place of `10K` (with `4 ln` and
/// `2t` inside, no outer factor 2); both are linear in `K`.
pub fn tree_ramp_measurements(n: usize, k: usize, eps: f64, t: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tree RAmP bound needs eps > 0, got {eps}"
        )));
    }
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("N and K must be at least 1".into()));
    }
    let kf = k as f64;
    let ratio = n as f64 / (kf * (kf + 1.0) * (2.0 * kf + 1.0));
    let denom = ((1.0 + eps).sqrt() - 1.0).powi(2);
    finite(2.0 * (10.0 * kf + 2.0 * ratio.ln() + t) / denom, "tree RAmP bound")
}

/// Block-sparse RIP measurement bound
/// `(2/(cδ²))(K(ln(2N/K) + J ln(12/δ)) + t)` with `N` blocks of length `J`.
pub fn block_rip_measurements(blocks: usize, block_len: usize, k: usize, delta: f64, c: f64, t: f64) -> Result<f64> {
    let input = BoundInput {
        n: blocks,
        k,
        j: block_len,
        delta,
        eps: 0.0,
        r: 0.0,
        t,
        c,
    };
    input.validate()?;
    let (kf, nf, jf) = (k as f64, blocks as f64, block_len as f64);
    let v = 2.0 / (c * delta * delta) * (kf * ((2.0 * nf / kf).ln() + jf * (12.0 / delta).ln()) + t);
    finite(v, "block RIP bound")
}

/// Random admissible support for `model` with budget `k`.
///
/// Trees grow from the root by adding a uniformly chosen frontier node
/// until `k` nodes are in; this is not uniform over subtrees.
pub fn random_admissible_support(model: &ModelKind, n: usize, k: usize, rng: &mut RngStream) -> SupportSet {
    match *model {
        ModelKind::PlainSparse => SupportSet::from_unsorted(rng.sample_indices(n, k.min(n))),
        ModelKind::BlockSparse { block_len, blocks } => {
            let chosen = rng.sample_indices(blocks, k.min(blocks));
            SupportSet::from_unsorted(
                chosen
                    .into_iter()
                    .flat_map(|b| b * block_len..(b + 1) * block_len)
                    .collect(),
            )
        }
        ModelKind::WaveletTree { .. } => {
            let mut chosen = Vec::with_capacity(k);
            let mut frontier = vec![0usize];
            while chosen.len() < k.min(n) && !frontier.is_empty() {
                let pick = frontier.swap_remove(rng.below(frontier.len()));
                chosen.push(pick);
                frontier.extend(children_flat(pick, n));
            }
            SupportSet::from_unsorted(chosen)
        }
    }
}

/// Tolerance of the singular-value estimates used by the Monte-Carlo
/// estimators.
pub const EMPIRICAL_SVD_TOL: f64 = 1e-10;

/// Monte-Carlo lower estimate of the model RIP constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RipEstimate {
    pub delta_hat: f64,
    /// `(σ_min, σ_max)` of `Φ_T` for every sampled support.
    pub sigma_extremes: Vec<(f64, f64)>,
}

/// Samples `trials` admissible supports (trial `i` uses `rng.child(i)`),
/// and returns `max(1 − σ_min², σ_max² − 1)` over them.
pub fn empirical_rip(phi: &DenseMatrix, model: &ModelKind, k: usize, trials: usize, rng: &RngStream) -> Result<RipEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = phi.cols();
    model.check_len(n)?;
    let mut delta_hat = 0.0f64;
    let mut sigma_extremes = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut child = rng.child(trial as u64);
        let support = random_admissible_support(model, n, k, &mut child);
        let sub = phi.select_columns(support.indices());
        let (lo, hi) = match linalg::extreme_singular_values(&sub, EMPIRICAL_SVD_TOL) {
            Ok(v) => v,
            Err(Error::NonConvergence { sigma_min, sigma_max, .. }) => (sigma_min, sigma_max),
            Err(e) => return Err(e),
        };
        delta_hat = delta_hat.max(1.0 - lo * lo).max(hi * hi - 1.0);
        sigma_extremes.push((lo, hi));
    }
    Ok(RipEstimate {
        delta_hat,
        sigma_extremes,
    })
}

/// Monte-Carlo lower estimate of the amplification constant `ε_K` at
/// regularity `r`.
///
/// Each trial draws a standard Gaussian signal, splits it into residual
/// pieces `u_j` with [`models::residual_partition`] and records
/// `‖Φu_j‖²/(j^{2r}‖u_j‖²) − 1`. The result is clamped at `−1`.
pub fn empirical_ramp(phi: &DenseMatrix, model: &ModelKind, k: usize, r: f64, trials: usize, rng: &RngStream) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = phi.cols();
    model.check_len(n)?;
    let mut eps_hat = -1.0f64;
    for trial in 0..trials {
        let mut child = rng.child(trial as u64);
        let x: Vec<f64> = (0..n).map(|_| child.normal()).collect();
        for (idx, piece) in models::residual_partition(&x, model, k)?.iter().enumerate() {
            let u2 = linalg::dot(piece, piece);
            if u2 == 0.0 {
                continue;
            }
            let support: Vec<usize> = (0..n).filter(|&i| piece[i] != 0.0).collect();
            let phiu = phi.mul_sparse(piece, &support);
            let j = (idx + 1) as f64;
            let ratio = linalg::dot(&phiu, &phiu) / (j.powf(2.0 * r) * u2) - 1.0;
            eps_hat = eps_hat.max(ratio);
        }
    }
    Ok(eps_hat.max(-1.0))
}

//! Dense vectors and matrices, seeded randomness, restricted least squares
//! and extreme singular value estimation.

use std::ops::{Deref, DerefMut};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::SupportSet;

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Self {
        DenseVector(values)
    }

    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    /// Keeps only the entries listed in `support`.
    pub fn restrict(&self, support: &SupportSet) -> DenseVector {
        let mut out = vec![0.0; self.len()];
        for &i in support.indices() {
            out[i] = self.0[i];
        }
        DenseVector(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        DenseVector(v.to_vec())
    }
}

/// Inner product with four independent accumulators so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖a − b‖₂`
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = checked_size(rows, cols)?;
        Ok(DenseMatrix {
            rows,
            cols,
            values: vec![0.0; len],
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let len = checked_size(rows, cols)?;
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: values.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n).expect("identity size");
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// `A·x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        let mut out = Vec::with_capacity(self.rows);
        let mut blocks = self.values.chunks_exact(4 * self.cols.max(1));
        for block in &mut blocks {
            let (r0, rest) = block.split_at(self.cols);
            let (r1, rest) = rest.split_at(self.cols);
            let (r2, r3) = rest.split_at(self.cols);
            let mut acc = [0.0f64; 4];
            for j in 0..self.cols {
                let xj = x[j];
                acc[0] += r0[j] * xj;
                acc[1] += r1[j] * xj;
                acc[2] += r2[j] * xj;
                acc[3] += r3[j] * xj;
            }
            out.extend_from_slice(&acc);
        }
        for row in blocks.remainder().chunks_exact(self.cols.max(1)) {
            out.push(dot(row, x));
        }
        out.resize(self.rows, 0.0);
        out
    }

    /// `Aᵀ·y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_mul_vec dimension");
        let mut out = vec![0.0; self.cols];
        let full = self.rows / 4 * 4;
        for r in (0..full).step_by(4) {
            let (r0, r1, r2, r3) = (self.row(r), self.row(r + 1), self.row(r + 2), self.row(r + 3));
            let (y0, y1, y2, y3) = (y[r], y[r + 1], y[r + 2], y[r + 3]);
            for j in 0..self.cols {
                out[j] += (r0[j] * y0 + r1[j] * y1) + (r2[j] * y2 + r3[j] * y3);
            }
        }
        for r in full..self.rows {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * y[r];
            }
        }
        out
    }

    /// `A·x` where `x` is nonzero only on `support`.
    pub fn mul_sparse(&self, x: &[f64], support: &[usize]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                support.iter().map(|&c| row[c] * x[c]).sum()
            })
            .collect()
    }

    /// The submatrix formed by the listed columns, in order.
    pub fn select_columns(&self, columns: &[usize]) -> DenseMatrix {
        let k = columns.len();
        let mut values = Vec::with_capacity(self.rows * k);
        for r in 0..self.rows {
            let row = self.row(r);
            values.extend(columns.iter().map(|&c| row[c]));
        }
        DenseMatrix {
            rows: self.rows,
            cols: k,
            values,
        }
    }

    /// `ΦᵀΦ`
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = vec![0.0; n * n];
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..n {
                    g[i * n + j] += ri * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[i * n + j] = g[j * n + i];
            }
        }
        DenseMatrix {
            rows: n,
            cols: n,
            values: g,
        }
    }

    /// Applies `f` to every row, replacing it in place. Used to change basis
    /// (`Φ ↦ ΦΨ` via the analysis transform of each row).
    pub fn map_rows<F>(&self, mut f: F) -> Result<DenseMatrix>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            let out = f(self.row(r))?;
            if out.len() != self.cols {
                return Err(Error::DimensionMismatch {
                    expected: self.cols,
                    found: out.len(),
                });
            }
            values.extend(out);
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }
}

fn checked_size(rows: usize, cols: usize) -> Result<usize> {
    rows.checked_mul(cols)
        .filter(|&n| n <= isize::MAX as usize / std::mem::size_of::<f64>())
        .ok_or(Error::SizeOverflow { rows, cols })
}

/// Deterministic random stream.
///
/// Backed by ChaCha8 (`rand_chacha`), whose output for a given seed is
/// fixed across platforms and releases. Normal deviates come from
/// `rand_distr::StandardNormal`. Children are derived by hashing
/// `(seed, index)` with SplitMix64 so independent trials never share state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `index`.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, index))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.random::<bool>()
    }

    /// `k` distinct values from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k).into_vec()
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        self.sample_indices(n, n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer over `seed ⊕ golden·(index+1)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `m × n` matrix with i.i.d. `Normal(0, 1/m)` entries.
pub fn gaussian_matrix(m: usize, n: usize, rng: &mut RngStream) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let len = checked_size(m, n)?;
    let scale = 1.0 / (m as f64).sqrt();
    let values = (0..len).map(|_| rng.normal() * scale).collect();
    DenseMatrix::from_row_major(m, n, values)
}

/// `m × n` matrix with entries `±1/√m`, each sign with probability 1/2.
pub fn rademacher_matrix(m: usize, n: usize, rng: &mut RngStream) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let len = checked_size(m, n)?;
    let scale = 1.0 / (m as f64).sqrt();
    let values = (0..len)
        .map(|_| if rng.coin() { scale } else { -scale })
        .collect();
    DenseMatrix::from_row_major(m, n, values)
}

/// Outcome of a restricted least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    /// Coefficients on the support, in support order.
    pub solution: DenseVector,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Set when the stationarity tolerance was not reached, which on these
    /// systems indicates a (numerically) rank-deficient `Φ_T`. The solution
    /// is then the CGLS iterate, which approximates the minimum-norm
    /// least-squares solution.
    pub degenerate: bool,
}

/// Solves `min_z ‖y − Φ_T z‖₂` with CGLS (conjugate gradients on the normal
/// equations, started at zero).
///
/// Stops once `‖Φ_Tᵀ(y − Φ_T z)‖₂ ≤ tol·‖Φ_Tᵀ y‖₂` or after `max_iter` steps.
pub fn restricted_lsq(
    phi: &DenseMatrix,
    support: &SupportSet,
    y: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LsqResult> {
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            found: y.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if let Some(&last) = support.indices().last() {
        if last >= phi.cols() {
            return Err(Error::DimensionMismatch {
                expected: phi.cols(),
                found: last + 1,
            });
        }
    }
    let sub = phi.select_columns(support.indices());
    Ok(cgls(&sub, y, tol, max_iter))
}

/// CGLS on an explicit (sub)matrix.
pub fn cgls(a: &DenseMatrix, y: &[f64], tol: f64, max_iter: usize) -> LsqResult {
    let n = a.cols();
    let mut x = vec![0.0; n];
    if n == 0 {
        return LsqResult {
            solution: DenseVector::new(x),
            residual_norm: norm2(y),
            iterations: 0,
            degenerate: false,
        };
    }
    let mut r = y.to_vec();
    let mut s = a.tr_mul_vec(&r);
    let target = tol * norm2(&s);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut iterations = 0;
    let mut converged = gamma.sqrt() <= target;

    while !converged && iterations < max_iter {
        let q = a.mul_vec(&p);
        let qq = dot(&q, &q);
        if !(qq > 0.0) {
            break;
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = a.tr_mul_vec(&r);
        let gamma_next = dot(&s, &s);
        iterations += 1;
        if gamma_next.sqrt() <= target {
            converged = true;
            break;
        }
        let beta = gamma_next / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_next;
    }

    // Recompute the residual directly; the recurrence drifts.
    let ax = a.mul_vec(&x);
    let residual_norm = distance(y, &ax);
    LsqResult {
        solution: DenseVector::new(x),
        residual_norm,
        iterations,
        degenerate: !converged,
    }
}

/// Column count up to which singular values come from a full Jacobi
/// eigensolve of the Gram matrix.
pub const DENSE_SVD_MAX_COLS: usize = 64;

/// Iteration cap for the power-iteration path.
pub const POWER_MAX_ITERS: usize = 20_000;

/// Smallest and largest singular values of `phi_sub`.
///
/// Up to [`DENSE_SVD_MAX_COLS`] columns this diagonalizes `ΦᵀΦ` with cyclic
/// Jacobi rotations; beyond that it runs power iteration on `ΦᵀΦ` for
/// `σ_max` and on `σ_max²·I − ΦᵀΦ` for `σ_min`, both to relative tolerance
/// `tol`.
pub fn extreme_singular_values(phi_sub: &DenseMatrix, tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let n = phi_sub.cols();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let gram = phi_sub.gram();
    if n <= DENSE_SVD_MAX_COLS {
        let eig = symmetric_eigenvalues(&gram);
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        return Ok((lo.sqrt(), hi.sqrt()));
    }

    let (lmax, ok_max) = power_iteration(&gram, 0.0, tol);
    let (shifted, ok_min) = power_iteration(&gram, lmax, tol);
    let lmin = (lmax - shifted).max(0.0);
    let (smin, smax) = (lmin.sqrt(), lmax.max(0.0).sqrt());
    if ok_max && ok_min {
        Ok((smin, smax))
    } else {
        Err(Error::NonConvergence {
            iterations: POWER_MAX_ITERS,
            sigma_min: smin,
            sigma_max: smax,
        })
    }
}

/// Dominant eigenvalue of `shift·I − G` (or of `G` when `shift == 0`).
/// `‖A‖₂` by power iteration on `AᵀA` (or `AAᵀ` when that is smaller),
/// applied as two matrix-vector products, to relative tolerance `tol`.
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let wide = a.rows() < a.cols();
    let dim = if wide { a.rows() } else { a.cols() };
    if dim == 0 {
        return Ok(0.0);
    }
    let apply = |v: &[f64]| {
        if wide {
            a.mul_vec(&a.tr_mul_vec(v))
        } else {
            a.tr_mul_vec(&a.mul_vec(v))
        }
    };
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        let next = norm2(&w);
        if next == 0.0 {
            return Ok(0.0);
        }
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        v = w.into_iter().map(|x| x / next).collect();
        if done {
            return Ok(lambda.sqrt());
        }
    }
    Err(Error::NonConvergence {
        iterations: POWER_MAX_ITERS,
        sigma_min: 0.0,
        sigma_max: lambda.sqrt(),
    })
}

fn power_iteration(gram: &DenseMatrix, shift: f64, tol: f64) -> (f64, bool) {
    let n = gram.cols();
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let mut w = gram.mul_vec(&v);
        if shift != 0.0 {
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = shift * vi - *wi;
            }
        }
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return (0.0, true);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let done = (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        v = w;
        if done {
            return (lambda, true);
        }
    }
    (lambda, false)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut m = a.values().to_vec();
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

//! Structured sparsity models and their approximation oracles.
//!
//! A model restricts which supports are admissible. Each model exposes an
//! oracle returning the best admissible approximation with a given
//! sparsity budget `K`, measured in model units: coefficients for
//! [`ModelKind::PlainSparse`] and [`ModelKind::WaveletTree`], whole blocks
//! for [`ModelKind::BlockSparse`].

pub mod block;
pub mod tree;

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::wavelet::{self, WaveletFilter};

pub use block::{block_approx, block_norms};
pub use tree::{
    brute_force_tree_approx, captured_energy, cssa_tree_approx, is_rooted_subtree,
    optimal_tree_approx, optimal_tree_extension,
};

/// Strictly increasing list of coefficient positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn empty() -> Self {
        SupportSet(Vec::new())
    }

    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet(indices)
    }

    /// Validates that `indices` is strictly increasing.
    pub fn from_sorted(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "support indices must be strictly increasing".into(),
            ));
        }
        Ok(SupportSet(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        SupportSet(out)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &SupportSet) -> SupportSet {
        SupportSet(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

/// The structured sparsity model in use.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Any `K` coefficients.
    PlainSparse,
    /// Connected rooted subtrees of the wavelet coefficient tree of a full
    /// `levels`-level decomposition (signal length `2^levels`). The scaling
    /// coefficient is the root and counts toward `K`.
    WaveletTree { filter: WaveletFilter, levels: usize },
    /// `K` nonzero blocks of `block_len` consecutive coefficients out of
    /// `blocks`.
    BlockSparse { block_len: usize, blocks: usize },
}

impl ModelKind {
    pub fn tree(filter: WaveletFilter, n: usize) -> Result<Self> {
        Ok(ModelKind::WaveletTree {
            filter,
            levels: wavelet::log2_exact(n)?,
        })
    }

    pub fn block(block_len: usize, blocks: usize) -> Result<Self> {
        if block_len == 0 || blocks == 0 {
            return Err(Error::InvalidArgument(
                "block length and block count must be positive".into(),
            ));
        }
        Ok(ModelKind::BlockSparse { block_len, blocks })
    }

    /// Short tag used in reports: `plain`, `tree`, `block`.
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::PlainSparse => "plain",
            ModelKind::WaveletTree { .. } => "tree",
            ModelKind::BlockSparse { .. } => "block",
        }
    }

    /// Checks that a signal of length `n` fits the model.
    pub fn check_len(&self, n: usize) -> Result<()> {
        match *self {
            ModelKind::PlainSparse => Ok(()),
            ModelKind::WaveletTree { levels, .. } => {
                let expected = 1usize
                    .checked_shl(levels as u32)
                    .ok_or_else(|| Error::InvalidArgument(format!("{levels} levels overflow")))?;
                if n != expected {
                    return Err(Error::DimensionMismatch { expected, found: n });
                }
                Ok(())
            }
            ModelKind::BlockSparse { block_len, blocks } => {
                let expected = block_len * blocks;
                if n != expected {
                    return Err(Error::DimensionMismatch { expected, found: n });
                }
                Ok(())
            }
        }
    }

    /// Number of model units (coefficients or blocks) for length `n`.
    pub fn capacity(&self, n: usize) -> usize {
        match *self {
            ModelKind::BlockSparse { blocks, .. } => blocks,
            _ => n,
        }
    }

    /// Coefficients per model unit.
    pub fn unit_len(&self) -> usize {
        match *self {
            ModelKind::BlockSparse { block_len, .. } => block_len,
            _ => 1,
        }
    }

    /// Whether `support` belongs to a model-`K` subspace of length-`n`
    /// signals.
    pub fn is_admissible(&self, support: &SupportSet, n: usize, k: usize) -> bool {
        if support.indices().last().is_some_and(|&i| i >= n) {
            return false;
        }
        match *self {
            ModelKind::PlainSparse => support.len() <= k,
            ModelKind::WaveletTree { .. } => {
                support.len() <= k && (support.is_empty() || is_rooted_subtree(support))
            }
            ModelKind::BlockSparse { block_len, .. } => {
                let mut blocks: Vec<usize> = support.iter().map(|i| i / block_len).collect();
                blocks.dedup();
                blocks.len() <= k
                    && blocks.iter().all(|&b| {
                        (b * block_len..(b + 1) * block_len).all(|i| support.contains(i))
                    })
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::PlainSparse => write!(f, "plain"),
            ModelKind::WaveletTree { filter, levels } => write!(f, "tree({filter}, {levels})"),
            ModelKind::BlockSparse { block_len, blocks } => {
                write!(f, "block(J={block_len}, N={blocks})")
            }
        }
    }
}

/// A model approximation `M(x, K)` and its error `σ_{M_K}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResult {
    pub approximation: DenseVector,
    pub support: SupportSet,
    pub error_l2: f64,
}

impl ApproxResult {
    /// `x` restricted to `support`.
    pub fn from_support(x: &[f64], support: SupportSet) -> Self {
        let mut approximation = vec![0.0; x.len()];
        for i in support.iter() {
            approximation[i] = x[i];
        }
        let mut tail = 0.0;
        let mut s = support.indices().iter().peekable();
        for (i, &v) in x.iter().enumerate() {
            if s.peek() == Some(&&i) {
                s.next();
            } else {
                tail += v * v;
            }
        }
        ApproxResult {
            approximation: DenseVector::new(approximation),
            support,
            error_l2: tail.sqrt(),
        }
    }
}

/// Indices ordered by decreasing magnitude, ties to the lower index.
pub fn magnitude_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order
}

/// Best `K`-term approximation: keep the `K` largest magnitudes.
pub fn kterm_approx(x: &[f64], k: usize) -> Result<ApproxResult> {
    if k > x.len() {
        return Err(Error::InvalidArgument(format!(
            "K={k} exceeds signal length {}",
            x.len()
        )));
    }
    let mut order = magnitude_order(x);
    order.truncate(k);
    Ok(ApproxResult::from_support(x, SupportSet::from_unsorted(order)))
}

/// `M(x, K)` for the given model.
pub fn model_approx(x: &[f64], model: &ModelKind, k: usize) -> Result<ApproxResult> {
    model.check_len(x.len())?;
    match *model {
        ModelKind::PlainSparse => kterm_approx(x, k),
        ModelKind::WaveletTree { .. } => optimal_tree_approx(x, k),
        ModelKind::BlockSparse { block_len, blocks } => block_approx(x, block_len, blocks, k),
    }
}

/// Approximation in the enlarged model `M_K^B`, realized as `M(x, B·K)`
/// (capped at the model capacity, where it becomes the identity).
pub fn model_approx_b(x: &[f64], model: &ModelKind, k: usize, b: usize) -> Result<ApproxResult> {
    if b == 0 {
        return Err(Error::InvalidArgument("B must be at least 1".into()));
    }
    model.check_len(x.len())?;
    let budget = k.saturating_mul(b).min(model.capacity(x.len()));
    model_approx(x, model, budget)
}

/// Supports of `M(x, jK)` for `j = 1..=⌈capacity/K⌉`, nested by
/// construction.
///
/// Plain and block models take prefixes of the sorted order. The tree model
/// starts from the optimal size-`K` tree and, at each stage, adds the best
/// `K` further nodes keeping the previous tree.
pub fn nested_approximations(x: &[f64], model: &ModelKind, k: usize) -> Result<Vec<SupportSet>> {
    model.check_len(x.len())?;
    let cap = model.capacity(x.len());
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let stages = cap.div_ceil(k);
    let sizes = (1..=stages).map(|j| (j * k).min(cap));
    match *model {
        ModelKind::PlainSparse => {
            let order = magnitude_order(x);
            Ok(sizes
                .map(|s| SupportSet::from_unsorted(order[..s].to_vec()))
                .collect())
        }
        ModelKind::BlockSparse { block_len, .. } => {
            let order = block::block_order(x, block_len);
            Ok(sizes
                .map(|s| block::expand_blocks(&order[..s], block_len))
                .collect())
        }
        ModelKind::WaveletTree { .. } => {
            let mut out: Vec<SupportSet> = Vec::with_capacity(stages);
            for s in sizes {
                let next = match out.last() {
                    None => optimal_tree_approx(x, s)?.support,
                    Some(prev) => optimal_tree_extension(x, prev, s)?.support,
                };
                out.push(next);
            }
            Ok(out)
        }
    }
}

/// Pieces `x_{T_j} = M(x, jK) − M(x, (j−1)K)`; they have disjoint supports
/// and sum to `x`.
pub fn residual_partition(x: &[f64], model: &ModelKind, k: usize) -> Result<Vec<DenseVector>> {
    let supports = nested_approximations(x, model, k)?;
    let mut prev = SupportSet::empty();
    let mut pieces = Vec::with_capacity(supports.len());
    for s in supports {
        let mut piece = vec![0.0; x.len()];
        for i in s.difference(&prev).iter() {
            piece[i] = x[i];
        }
        pieces.push(DenseVector::new(piece));
        prev = s;
    }
    Ok(pieces)
}

/// Fitted structured-compressibility parameters `σ_{M_K}(x) ≤ G·K^{−s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressibilityFit {
    /// Decay exponent `s`; `f64::INFINITY` when `x` is exactly model-sparse
    /// at `K = 1`.
    pub exponent: f64,
    /// Smallest `G` satisfying the bound at the fitted exponent.
    pub scale: f64,
    /// First `K` with `σ_{M_K}(x) = 0`, if any within the fitted range.
    pub exact_sparsity: Option<usize>,
}

/// Least-squares fit of `log σ_{M_K}(x)` against `log K` over
/// `K = 1..=capacity/2`, ignoring zero errors.
pub fn structured_compressibility_fit(x: &[f64], model: &ModelKind) -> Result<CompressibilityFit> {
    model.check_len(x.len())?;
    let cap = model.capacity(x.len());
    if x.len() < 4 || cap < 2 {
        return Err(Error::InvalidArgument(
            "compressibility fit needs at least 4 coefficients".into(),
        ));
    }
    let mut points = Vec::new();
    let mut exact_sparsity = None;
    for k in 1..=cap / 2 {
        let err = model_approx(x, model, k)?.error_l2;
        if err > 0.0 {
            points.push((k, err));
        } else if exact_sparsity.is_none() {
            exact_sparsity = Some(k);
        }
    }
    if points.is_empty() {
        return Ok(CompressibilityFit {
            exponent: f64::INFINITY,
            scale: 0.0,
            exact_sparsity,
        });
    }
    if points.len() == 1 {
        // A single nonzero error admits any decay; report the conservative
        // exponent 0 with G equal to that error.
        return Ok(CompressibilityFit {
            exponent: 0.0,
            scale: points[0].1,
            exact_sparsity,
        });
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(k, e)| {
        (a + (k as f64).ln(), b + e.ln())
    });
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(k, e) in &points {
        let dx = (k as f64).ln() - mx;
        sxx += dx * dx;
        sxy += dx * (e.ln() - my);
    }
    let exponent = -sxy / sxx;
    let scale = points
        .iter()
        .map(|&(k, e)| e * (k as f64).powf(exponent))
        .fold(0.0, f64::max);
    Ok(CompressibilityFit {
        exponent,
        scale,
        exact_sparsity,
    })
}

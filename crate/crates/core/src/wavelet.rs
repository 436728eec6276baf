//! Periodic orthonormal discrete wavelet transform and binary-tree indexing
//! of the resulting coefficients.
//!
//! Coefficients are laid out coarse to fine:
//! `[v₀, w₀,₀, w₁,₀, w₁,₁, w₂,₀, …]`, so `w_{i,j}` lives at flat index
//! `2^i + j`. In this heap layout the children of flat index `n ≥ 1` are
//! `2n` and `2n + 1`, and the scaling coefficient `v₀` sits above `w₀,₀`.

use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-10;

/// Lowpass filter of an orthonormal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    name: &'static str,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletFilter {
    /// Builds a filter from its lowpass taps, checking orthonormality.
    pub fn from_lowpass(name: &'static str, lowpass: Vec<f64>) -> Result<Self> {
        if lowpass.len() < 2 || lowpass.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "filter {name} must have an even number of taps"
            )));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - SQRT_2).abs() > ORTHO_TOL {
            return Err(Error::InvalidArgument(format!(
                "filter {name}: taps sum to {sum}, expected sqrt(2)"
            )));
        }
        let l = lowpass.len();
        for shift in (0..l).step_by(2) {
            let acc: f64 = (0..l - shift).map(|k| lowpass[k] * lowpass[k + shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if (acc - expected).abs() > ORTHO_TOL {
                return Err(Error::InvalidArgument(format!(
                    "filter {name} is not orthonormal at shift {shift} ({acc})"
                )));
            }
        }
        let highpass = (0..l)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[l - 1 - k]
            })
            .collect();
        Ok(WaveletFilter {
            name,
            lowpass,
            highpass,
        })
    }

    pub fn haar() -> Self {
        Self::from_lowpass("haar", vec![1.0 / SQRT_2, 1.0 / SQRT_2]).expect("haar taps")
    }

    /// Four-tap Daubechies filter (two vanishing moments).
    pub fn daubechies4() -> Self {
        let s3 = 3f64.sqrt();
        let d = 4.0 * SQRT_2;
        Self::from_lowpass(
            "db4",
            vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d],
        )
        .expect("db4 taps")
    }

    /// Six-tap Daubechies filter (three vanishing moments).
    pub fn daubechies6() -> Self {
        Self::from_lowpass(
            "db6",
            vec![
                0.332_670_552_950_082_6,
                0.806_891_509_311_092_6,
                0.459_877_502_118_491_6,
                -0.135_011_020_010_254_6,
                -0.085_441_273_882_026_66,
                0.035_226_291_885_709_54,
            ],
        )
        .expect("db6 taps")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db2" | "d2" => Ok(Self::haar()),
            "db4" | "d4" | "daubechies4" => Ok(Self::daubechies4()),
            "db6" | "d6" | "daubechies6" => Ok(Self::daubechies6()),
            other => Err(Error::InvalidArgument(format!("unknown wavelet filter `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }
}

impl fmt::Display for WaveletFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// `log₂ n` if `n` is a power of two.
pub fn log2_exact(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}

fn check_levels(n: usize, levels: usize) -> Result<()> {
    let max = log2_exact(n)?;
    if levels == 0 || levels > max {
        return Err(Error::InvalidArgument(format!(
            "levels must be in 1..={max} for length {n}, got {levels}"
        )));
    }
    Ok(())
}

/// Forward transform with periodic boundaries.
pub fn dwt(x: &[f64], filter: &WaveletFilter, levels: usize) -> Result<Vec<f64>> {
    let n = x.len();
    check_levels(n, levels)?;
    let h = filter.lowpass();
    let g = filter.highpass();
    let mut out = vec![0.0; n];
    let mut approx = x.to_vec();
    let mut len = n;
    for _ in 0..levels {
        let half = len / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for i in 0..half {
            let (mut sa, mut sd) = (0.0, 0.0);
            for (k, (hk, gk)) in h.iter().zip(g).enumerate() {
                let v = approx[(2 * i + k) % len];
                sa += hk * v;
                sd += gk * v;
            }
            a[i] = sa;
            d[i] = sd;
        }
        out[half..len].copy_from_slice(&d);
        approx = a;
        len = half;
    }
    out[..len].copy_from_slice(&approx);
    Ok(out)
}

/// Inverse of [`dwt`] for the same filter and level count.
pub fn idwt(alpha: &[f64], filter: &WaveletFilter, levels: usize) -> Result<Vec<f64>> {
    let n = alpha.len();
    check_levels(n, levels)?;
    let h = filter.lowpass();
    let g = filter.highpass();
    let mut len = n >> levels;
    let mut approx = alpha[..len].to_vec();
    for _ in 0..levels {
        let d = &alpha[len..2 * len];
        let full = 2 * len;
        let mut next = vec![0.0; full];
        for i in 0..len {
            let (a, w) = (approx[i], d[i]);
            for (k, (hk, gk)) in h.iter().zip(g).enumerate() {
                next[(2 * i + k) % full] += hk * a + gk * w;
            }
        }
        approx = next;
        len = full;
    }
    Ok(approx)
}

/// Position of a coefficient in the wavelet tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeIndex {
    /// The scaling coefficient `v₀` (flat index 0).
    Scaling,
    /// Wavelet coefficient `w_{scale,offset}`, `0 ≤ offset < 2^scale`.
    Wavelet { scale: u32, offset: usize },
}

impl TreeIndex {
    pub fn wavelet(scale: u32, offset: usize) -> Self {
        debug_assert!(offset < 1usize << scale);
        TreeIndex::Wavelet { scale, offset }
    }

    pub fn from_flat(index: usize) -> Self {
        if index == 0 {
            TreeIndex::Scaling
        } else {
            let scale = usize::BITS - 1 - index.leading_zeros();
            TreeIndex::Wavelet {
                scale,
                offset: index - (1usize << scale),
            }
        }
    }

    /// `1 + (2^i − 1) + j` for `w_{i,j}`, 0 for `v₀`.
    pub fn flat(self) -> usize {
        match self {
            TreeIndex::Scaling => 0,
            TreeIndex::Wavelet { scale, offset } => (1usize << scale) + offset,
        }
    }

    /// `w_{i−1,⌊j/2⌋}`; the parent of `w₀,₀` is `v₀`, and `v₀` has none.
    pub fn parent(self) -> Option<TreeIndex> {
        match self {
            TreeIndex::Scaling => None,
            TreeIndex::Wavelet { scale: 0, .. } => Some(TreeIndex::Scaling),
            TreeIndex::Wavelet { scale, offset } => Some(TreeIndex::Wavelet {
                scale: scale - 1,
                offset: offset / 2,
            }),
        }
    }

    /// `(w_{i+1,2j}, w_{i+1,2j+1})`, or `None` at the finest scale of a
    /// length-`n` transform (and for `v₀`, whose only child is `w₀,₀`).
    pub fn children(self, n: usize) -> Option<(TreeIndex, TreeIndex)> {
        match self {
            TreeIndex::Scaling => None,
            TreeIndex::Wavelet { scale, offset } => {
                let left = 2 * self.flat();
                if left + 1 < n {
                    Some((
                        TreeIndex::wavelet(scale + 1, 2 * offset),
                        TreeIndex::wavelet(scale + 1, 2 * offset + 1),
                    ))
                } else {
                    None
                }
            }
        }
    }
}

/// Flat index of the parent of `node` in the coefficient tree.
pub fn parent_flat(node: usize) -> Option<usize> {
    match node {
        0 => None,
        1 => Some(0),
        n => Some(n / 2),
    }
}

/// Flat indices of the children of `node` in a length-`n` coefficient tree.
pub fn children_flat(node: usize, n: usize) -> impl Iterator<Item = usize> {
    let (a, b) = if node == 0 { (1, 1) } else { (2 * node, 2 * node + 2) };
    (a..b.max(a + 1)).filter(move |&c| c < n && c != 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_filters_validate() {
        for f in [
            WaveletFilter::haar(),
            WaveletFilter::daubechies4(),
            WaveletFilter::daubechies6(),
        ] {
            let s: f64 = f.lowpass().iter().sum();
            assert!((s - SQRT_2).abs() < 1e-10, "{}", f.name());
            let g: f64 = f.highpass().iter().sum();
            assert!(g.abs() < 1e-10, "{} highpass has DC gain {g}", f.name());
        }
        assert!(WaveletFilter::from_lowpass("bad", vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn haar_constant_signal() {
        let a = dwt(&[1.0; 4], &WaveletFilter::haar(), 2).unwrap();
        for (got, want) in a.iter().zip([2.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn haar_scaling_function() {
        let mut e0 = vec![0.0; 4];
        e0[0] = 1.0;
        let x = idwt(&e0, &WaveletFilter::haar(), 2).unwrap();
        for v in x {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = WaveletFilter::daubechies6();
        assert!(dwt(&[0.0; 32], &f, 5).unwrap().iter().all(|&v| v == 0.0));
        assert!(idwt(&[0.0; 32], &f, 5).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_lengths_and_levels() {
        let f = WaveletFilter::haar();
        assert_eq!(dwt(&[0.0; 6], &f, 1), Err(Error::NotPowerOfTwo(6)));
        assert!(dwt(&[0.0; 8], &f, 4).is_err());
        assert!(idwt(&[0.0; 8], &f, 0).is_err());
    }

    #[test]
    fn partial_decomposition_round_trips() {
        let f = WaveletFilter::daubechies4();
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        for levels in 1..=6 {
            let a = dwt(&x, &f, levels).unwrap();
            let back = idwt(&a, &f, levels).unwrap();
            for (u, v) in x.iter().zip(&back) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tree_index_formulas() {
        assert_eq!(TreeIndex::wavelet(2, 3).parent(), Some(TreeIndex::wavelet(1, 1)));
        assert_eq!(
            TreeIndex::wavelet(1, 1).children(64),
            Some((TreeIndex::wavelet(2, 2), TreeIndex::wavelet(2, 3)))
        );
        assert_eq!(TreeIndex::wavelet(0, 0).parent(), Some(TreeIndex::Scaling));
        assert_eq!(TreeIndex::Scaling.parent(), None);
        assert_eq!(TreeIndex::wavelet(5, 0).children(64), None);
        assert_eq!(TreeIndex::wavelet(2, 3).flat(), 1 + 3 + 3);
    }

    #[test]
    fn tree_maps_are_mutually_inverse() {
        let n = 64;
        for flat in 1..n {
            let t = TreeIndex::from_flat(flat);
            assert_eq!(t.flat(), flat);
            if let Some((l, r)) = t.children(n) {
                assert_eq!(l.parent(), Some(t));
                assert_eq!(r.parent(), Some(t));
                assert_eq!(r.flat(), l.flat() + 1);
            }
            let p = t.parent().unwrap();
            assert_eq!(parent_flat(flat), Some(p.flat()));
            assert!(children_flat(p.flat(), n).any(|c| c == flat));
        }
        assert_eq!(children_flat(0, n).collect::<Vec<_>>(), vec![1]);
        assert_eq!(children_flat(3, n).collect::<Vec<_>>(), vec![6, 7]);
        assert_eq!(children_flat(40, n).count(), 0);
    }
}

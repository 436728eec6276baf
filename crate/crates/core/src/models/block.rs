//! Block sparsity: keep the `K` blocks with the largest ℓ₂ norms.

use super::{ApproxResult, SupportSet};
use crate::error::{Error, Result};

/// ℓ₂ norm of each length-`block_len` block.
pub fn block_norms(x: &[f64], block_len: usize) -> Vec<f64> {
    x.chunks(block_len)
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Block indices by decreasing norm, ties to the lower index.
pub(crate) fn block_order(x: &[f64], block_len: usize) -> Vec<usize> {
    let norms = block_norms(x, block_len);
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order
}

pub(crate) fn expand_blocks(blocks: &[usize], block_len: usize) -> SupportSet {
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable();
    SupportSet::from_unsorted(
        sorted
            .into_iter()
            .flat_map(|b| b * block_len..(b + 1) * block_len)
            .collect(),
    )
}

/// Best `K`-block approximation: column-wise hard thresholding of the
/// `J × N` block matrix by column norm.
pub fn block_approx(x: &[f64], block_len: usize, blocks: usize, k: usize) -> Result<ApproxResult> {
    if block_len == 0 || x.len() != block_len * blocks {
        return Err(Error::DimensionMismatch {
            expected: block_len * blocks,
            found: x.len(),
        });
    }
    if k > blocks {
        return Err(Error::InvalidArgument(format!(
            "K={k} exceeds block count {blocks}"
        )));
    }
    let mut order = block_order(x, block_len);
    order.truncate(k);
    Ok(ApproxResult::from_support(x, expand_blocks(&order, block_len)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngStream;

    #[test]
    fn keeps_largest_block() {
        let x = [3.0, 4.0, 1.0, 0.0, 0.0, 0.0];
        let r = block_approx(&x, 2, 3, 1).unwrap();
        assert_eq!(r.support.indices(), &[0, 1]);
        assert!((r.error_l2 - 1.0).abs() < 1e-12);

        let r = block_approx(&x, 2, 3, 3).unwrap();
        assert_eq!(r.approximation.as_slice(), &x);
        assert_eq!(r.error_l2, 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(block_approx(&[0.0; 5], 2, 3, 1).is_err());
        assert!(block_approx(&[0.0; 6], 2, 3, 4).is_err());
    }

    #[test]
    fn matches_exhaustive_pairs() {
        let mut rng = RngStream::new(31);
        for _ in 0..50 {
            let x: Vec<f64> = (0..18).map(|_| rng.normal()).collect();
            let r = block_approx(&x, 3, 6, 2).unwrap();
            let mut best = f64::INFINITY;
            for a in 0..6 {
                for b in a + 1..6 {
                    let kept = expand_blocks(&[a, b], 3);
                    best = best.min(ApproxResult::from_support(&x, kept).error_l2);
                }
            }
            assert!((r.error_l2 - best).abs() < 1e-12);
        }
    }
}

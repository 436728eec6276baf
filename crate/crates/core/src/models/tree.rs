//! Connected rooted subtree approximation on the wavelet coefficient tree.
//!
//! Node 0 is the scaling coefficient and the permanent root; its single
//! child is node 1 (`w₀,₀`), and node `m ≥ 1` has children `2m`, `2m + 1`.
//! An admissible support is a connected set of nodes containing the root.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ApproxResult, SupportSet};
use crate::error::{Error, Result};
use crate::wavelet::{children_flat, log2_exact, parent_flat};

/// Largest tree the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_N: usize = 64;
/// Largest subtree size the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_K: usize = 12;

/// `Σ_{i∈S} α_i²`, summed in index order so equal supports give equal bits.
pub fn captured_energy(alpha: &[f64], support: &SupportSet) -> f64 {
    support.iter().map(|i| alpha[i] * alpha[i]).sum()
}

/// True when every member's parent is also a member and the root is in.
pub fn is_rooted_subtree(support: &SupportSet) -> bool {
    if support.is_empty() {
        return true;
    }
    support.contains(0)
        && support
            .iter()
            .all(|i| parent_flat(i).is_none_or(|p| support.contains(p)))
}

fn check_tree_len(n: usize) -> Result<()> {
    log2_exact(n).map(|_| ())
}

/// Optimal connected rooted subtree of exactly `k` nodes.
///
/// Exact dynamic program over subtree sizes: for every node and budget it
/// keeps the best energy of a subtree rooted there, combining the two
/// children by trying every split of the remaining budget. Ties prefer the
/// left (lower-index) child.
pub fn optimal_tree_approx(alpha: &[f64], k: usize) -> Result<ApproxResult> {
    solve_tree(alpha, None, k)
}

/// Best rooted subtree of `k` nodes that contains `base`.
///
/// Growing a tree this way stage by stage yields nested supports.
pub fn optimal_tree_extension(alpha: &[f64], base: &SupportSet, k: usize) -> Result<ApproxResult> {
    if !is_rooted_subtree(base) {
        return Err(Error::InvalidArgument(
            "base support is not a connected rooted subtree".into(),
        ));
    }
    if base.len() > k {
        return Err(Error::InvalidArgument(format!(
            "base support has {} nodes, more than K={k}",
            base.len()
        )));
    }
    solve_tree(alpha, Some(base), k)
}

fn solve_tree(alpha: &[f64], forced: Option<&SupportSet>, k: usize) -> Result<ApproxResult> {
    let n = alpha.len();
    check_tree_len(n)?;
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "K={k} exceeds tree size {n}"
        )));
    }
    if let Some(base) = forced {
        if base.indices().last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidArgument("base support out of range".into()));
        }
    }

    // Subtree sizes, children before parents.
    let mut size = vec![1usize; n];
    for m in (1..n).rev() {
        if 2 * m + 1 < n {
            size[m] += size[2 * m] + size[2 * m + 1];
        }
    }
    if n > 1 {
        size[0] += size[1];
    }
    let cap: Vec<usize> = size.iter().map(|&s| s.min(k)).collect();
    let mut offset = Vec::with_capacity(n + 1);
    let mut total = 0;
    for &c in &cap {
        offset.push(total);
        total += c + 1;
    }
    let mut best = vec![f64::NEG_INFINITY; total];
    let mut split = vec![0u32; total];
    let is_forced = |m: usize| forced.is_some_and(|s| s.contains(m));

    for m in (0..n).rev() {
        let base = offset[m];
        let energy = alpha[m] * alpha[m];
        best[base] = if is_forced(m) { f64::NEG_INFINITY } else { 0.0 };
        if cap[m] == 0 {
            continue;
        }
        if m == 0 {
            if n == 1 {
                best[base + 1] = energy;
            } else {
                let c = offset[1];
                for kk in 1..=cap[0] {
                    best[base + kk] = energy + best[c + kk - 1];
                }
            }
        } else if 2 * m + 1 < n {
            let (l, r) = (2 * m, 2 * m + 1);
            let (ol, or) = (offset[l], offset[r]);
            for kk in 1..=cap[m] {
                let rem = kk - 1;
                let lo = rem.saturating_sub(cap[r]);
                let hi = rem.min(cap[l]);
                let mut top = f64::NEG_INFINITY;
                let mut arg = hi;
                for a in (lo..=hi).rev() {
                    let v = best[ol + a] + best[or + rem - a];
                    if v > top {
                        top = v;
                        arg = a;
                    }
                }
                best[base + kk] = energy + top;
                split[base + kk] = arg as u32;
            }
        } else {
            best[base + 1] = energy;
        }
    }

    if best[offset[0] + k] == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!(
            "no rooted subtree of size {k} contains the base support"
        )));
    }

    let mut support = Vec::with_capacity(k);
    let mut stack = vec![(0usize, k)];
    while let Some((m, kk)) = stack.pop() {
        if kk == 0 {
            continue;
        }
        support.push(m);
        if m == 0 {
            if n > 1 {
                stack.push((1, kk - 1));
            }
        } else if 2 * m + 1 < n {
            let a = split[offset[m] + kk] as usize;
            stack.push((2 * m, a));
            stack.push((2 * m + 1, kk - 1 - a));
        }
    }
    Ok(ApproxResult::from_support(
        alpha,
        SupportSet::from_unsorted(support),
    ))
}

/// Exhaustive search over all connected rooted subtrees of size `k`.
///
/// Reference implementation for small trees. Among equal energies the
/// lexicographically first sorted support wins.
pub fn brute_force_tree_approx(alpha: &[f64], k: usize) -> Result<ApproxResult> {
    let n = alpha.len();
    check_tree_len(n)?;
    if n > BRUTE_FORCE_MAX_N || k > BRUTE_FORCE_MAX_K {
        return Err(Error::GuardExceeded(format!(
            "exhaustive tree search limited to N ≤ {BRUTE_FORCE_MAX_N}, K ≤ {BRUTE_FORCE_MAX_K} (got N={n}, K={k})"
        )));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("K={k} exceeds tree size {n}")));
    }
    let mut best: Option<(f64, SupportSet)> = None;
    for_each_rooted_subtree(n, k, |nodes| {
        let s = SupportSet::from_unsorted(nodes.to_vec());
        let e = captured_energy(alpha, &s);
        let better = match &best {
            None => true,
            Some((be, bs)) => e > *be || (e == *be && s < *bs),
        };
        if better {
            best = Some((e, s));
        }
    });
    let (_, support) = best.expect("at least one subtree exists");
    Ok(ApproxResult::from_support(alpha, support))
}

/// Calls `visit` once for every connected rooted subtree with `k` nodes.
pub fn for_each_rooted_subtree<F: FnMut(&[usize])>(n: usize, k: usize, mut visit: F) {
    if k == 0 {
        visit(&[]);
        return;
    }
    let mut chosen = vec![0usize];
    let frontier: Vec<usize> = children_flat(0, n).collect();
    grow(n, k, &mut chosen, &frontier, &mut visit);
}

// Include frontier[i], permanently exclude frontier[..i]; every subtree is
// reached by exactly one such decision sequence.
fn grow<F: FnMut(&[usize])>(
    n: usize,
    k: usize,
    chosen: &mut Vec<usize>,
    frontier: &[usize],
    visit: &mut F,
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for (i, &node) in frontier.iter().enumerate() {
        let mut next: Vec<usize> = frontier[i + 1..].to_vec();
        next.extend(children_flat(node, n));
        chosen.push(node);
        grow(n, k, chosen, &next, visit);
        chosen.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    average: f64,
    top: usize,
    version: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.average
            .total_cmp(&other.average)
            .then_with(|| other.top.cmp(&self.top))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Supernode {
    members: Vec<usize>,
    energy: f64,
    selected: bool,
    version: u32,
}

/// Greedy condensing sort-and-select (CSSA) on squared magnitudes.
///
/// Every node starts as its own supernode and the root supernode is
/// selected. The unselected supernode with the largest average energy is
/// taken from a priority queue: if its parent supernode is already selected
/// it joins the tree, otherwise it is condensed into the parent supernode
/// and the merged average is requeued. A supernode that does not fit the
/// remaining budget contributes the prefix of its members in condensation
/// order, which is always connected.
///
/// The result coincides with plain `K`-term selection on monotone trees and
/// is optimal whenever `k` falls on a supernode boundary; a truncated
/// supernode can leave it short of [`optimal_tree_approx`].
pub fn cssa_tree_approx(alpha: &[f64], k: usize) -> Result<ApproxResult> {
    let n = alpha.len();
    check_tree_len(n)?;
    if k > n {
        return Err(Error::InvalidArgument(format!("K={k} exceeds tree size {n}")));
    }
    if k == 0 {
        return Ok(ApproxResult::from_support(alpha, SupportSet::empty()));
    }

    let mut owner: Vec<usize> = (0..n).collect();
    let mut nodes: Vec<Supernode> = (0..n)
        .map(|m| Supernode {
            members: vec![m],
            energy: alpha[m] * alpha[m],
            selected: false,
            version: 0,
        })
        .collect();
    nodes[0].selected = true;
    let mut support = vec![0usize];

    let mut heap: BinaryHeap<Candidate> = (1..n)
        .map(|m| Candidate {
            average: nodes[m].energy,
            top: m,
            version: 0,
        })
        .collect();

    while support.len() < k {
        let Some(c) = heap.pop() else { break };
        let s = &nodes[c.top];
        if s.selected || s.version != c.version || owner[c.top] != c.top {
            continue;
        }
        let parent = parent_flat(c.top).expect("non-root supernode has a parent");
        let p = find(&mut owner, parent);
        if nodes[p].selected {
            let room = k - support.len();
            let members = std::mem::take(&mut nodes[c.top].members);
            support.extend(members.iter().take(room));
            nodes[c.top].selected = true;
        } else {
            let moved = std::mem::take(&mut nodes[c.top].members);
            let energy = nodes[c.top].energy;
            owner[c.top] = p;
            let target = &mut nodes[p];
            target.members.extend(moved);
            target.energy += energy;
            target.version += 1;
            heap.push(Candidate {
                average: target.energy / target.members.len() as f64,
                top: p,
                version: target.version,
            });
        }
    }
    Ok(ApproxResult::from_support(
        alpha,
        SupportSet::from_unsorted(support),
    ))
}

fn find(owner: &mut [usize], mut m: usize) -> usize {
    while owner[m] != m {
        owner[m] = owner[owner[m]];
        m = owner[m];
    }
    m
}

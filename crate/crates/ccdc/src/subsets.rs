//! Lexicographic enumeration and ranking of node subsets.
//!
//! Placements, coded exchanges, and job assignment all index node subsets by
//! their position in the lexicographic enumeration, so the same subset maps
//! to the same rank everywhere. Nodes are labelled `1..=n`.

use num_integer::binomial as int_binomial;

use crate::error::{Error, Result};
use crate::model::NodeId;

/// Binomial coefficient over `u64`.
pub fn binomial(n: u64, k: u64) -> u64 {
    int_binomial(n, k)
}

/// All size-`subset_size` subsets of `{1, ..., universe_size}` in
/// lexicographic order. The position of a subset in this list is its rank.
pub fn lex_subsets(universe_size: u32, subset_size: u32) -> Result<Vec<Vec<NodeId>>> {
    if subset_size == 0 || subset_size > universe_size {
        return Err(Error::Parameter(format!(
            "subset size must satisfy 0 < size <= universe (got size={subset_size}, universe={universe_size})"
        )));
    }
    let k = subset_size as usize;
    let mut out = Vec::with_capacity(binomial(universe_size.into(), subset_size.into()) as usize);
    let mut current: Vec<NodeId> = (1..=subset_size).collect();
    loop {
        out.push(current.clone());
        // Advance to the lexicographic successor: bump the rightmost element
        // that still has room, then reset everything after it.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if current[i] < universe_size - (k - 1 - i) as u32 {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Lexicographic rank (0-based) of a sorted subset of `{1, ..., universe_size}`.
///
/// Inverse of indexing into [`lex_subsets`].
pub fn subset_rank(universe_size: u32, subset: &[NodeId]) -> Result<u64> {
    let k = subset.len() as u32;
    if k == 0 || k > universe_size {
        return Err(Error::Parameter(format!(
            "subset size must satisfy 0 < size <= universe (got size={k}, universe={universe_size})"
        )));
    }
    let mut rank = 0u64;
    let mut prev = 0u32;
    for (i, &a) in subset.iter().enumerate() {
        if a <= prev || a > universe_size {
            return Err(Error::Parameter(format!(
                "subset must be strictly increasing within 1..={universe_size} (got {subset:?})"
            )));
        }
        // Count subsets that agree on the first i elements but pick a smaller
        // element at position i.
        for v in prev + 1..a {
            rank += binomial(
                u64::from(universe_size - v),
                u64::from(k) - i as u64 - 1,
            );
        }
        prev = a;
    }
    Ok(rank)
}

/// Members of `superset` not in `subset`; both must be sorted.
pub fn complement_in(superset: &[NodeId], subset: &[NodeId]) -> Vec<NodeId> {
    superset
        .iter()
        .copied()
        .filter(|v| !subset.contains(v))
        .collect()
}

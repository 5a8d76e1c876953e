//! Pairwise co-membership comparison between two arrangements.
//!
//! Similarity is the Jaccard index of the co-grouped pair sets: it ignores
//! group numbering and ordering entirely and only asks who sits with whom.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::Arrangement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub similarity: f64,
    pub shared_pairs: usize,
    pub pairs_a: usize,
    pub pairs_b: usize,
}

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("arrangements cover different rosters")]
    RosterMismatch,
}

/// All unordered student pairs sharing a group.
pub fn co_grouped_pairs(arrangement: &Arrangement) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for group in &arrangement.groups {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                pairs.insert((lo.clone(), hi.clone()));
            }
        }
    }
    pairs
}

/// Jaccard similarity of two arrangements' co-grouped pair sets. Arrangements
/// of singleton groups have no pairs and compare as fully similar.
pub fn compare(a: &Arrangement, b: &Arrangement) -> Result<ComparisonReport, EvaluateError> {
    let roster_a: BTreeSet<&String> = a.groups.iter().flatten().collect();
    let roster_b: BTreeSet<&String> = b.groups.iter().flatten().collect();
    if roster_a != roster_b {
        return Err(EvaluateError::RosterMismatch);
    }
    let pairs_a = co_grouped_pairs(a);
    let pairs_b = co_grouped_pairs(b);
    let shared_pairs = pairs_a.intersection(&pairs_b).count();
    let union = pairs_a.len() + pairs_b.len() - shared_pairs;
    let similarity = if union > 0 {
        shared_pairs as f64 / union as f64
    } else {
        1.0
    };
    Ok(ComparisonReport {
        similarity,
        shared_pairs,
        pairs_a: pairs_a.len(),
        pairs_b: pairs_b.len(),
    })
}

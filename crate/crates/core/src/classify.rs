//! Six-way category labeling: primary cluster crossed with High/Low association.
//!
//! Within each cluster, members at or above the cluster's mean primary
//! membership are High association, the rest Low. The tie rule guarantees
//! every non-empty cluster keeps at least one High member.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcm::ClusterAssignment;
use crate::fis::Coefficients;

/// Guard against float noise when a membership sits exactly on the mean.
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Association {
    High,
    Low,
}

impl fmt::Display for Association {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Association::High => "High",
            Association::Low => "Low",
        })
    }
}

/// One of the six category labels: cluster (1..=3) crossed with association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CategoryLabel {
    pub cluster: u8,
    pub association: Association,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 6] = [
        CategoryLabel {
            cluster: 1,
            association: Association::High,
        },
        CategoryLabel {
            cluster: 1,
            association: Association::Low,
        },
        CategoryLabel {
            cluster: 2,
            association: Association::High,
        },
        CategoryLabel {
            cluster: 2,
            association: Association::Low,
        },
        CategoryLabel {
            cluster: 3,
            association: Association::High,
        },
        CategoryLabel {
            cluster: 3,
            association: Association::Low,
        },
    ];

    pub fn new(cluster: u8, association: Association) -> Self {
        debug_assert!((1..=3).contains(&cluster), "cluster must be 1..=3");
        Self {
            cluster,
            association,
        }
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}/{}", self.cluster, self.association)
    }
}

/// A fully labeled student, ready for seat assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStudent {
    pub student_id: String,
    pub label: CategoryLabel,
    pub coefficients: Coefficients,
    pub primary_membership: f64,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("cannot take an association threshold over an empty cluster")]
    EmptyCluster,
    #[error("cluster assignments and coefficients do not cover the same roster: {0}")]
    MismatchedRosters(String),
}

/// The High/Low split point for one cluster: the arithmetic mean of its
/// members' primary memberships.
pub fn association_threshold(primary_memberships: &[f64]) -> Result<f64, ClassifyError> {
    if primary_memberships.is_empty() {
        return Err(ClassifyError::EmptyCluster);
    }
    Ok(primary_memberships.iter().sum::<f64>() / primary_memberships.len() as f64)
}

/// Label every student. A member is High association iff its primary
/// membership is at least its cluster's mean primary membership (ties
/// resolve High); empty clusters contribute no labels.
pub fn classify(
    assignments: &[ClusterAssignment],
    coefficients: &[(String, Coefficients)],
) -> Result<Vec<LabeledStudent>, ClassifyError> {
    if assignments.len() != coefficients.len() {
        return Err(ClassifyError::MismatchedRosters(format!(
            "{} assignments vs {} coefficient rows",
            assignments.len(),
            coefficients.len()
        )));
    }
    let mut by_id: BTreeMap<&str, Coefficients> = BTreeMap::new();
    for (id, coeffs) in coefficients {
        if by_id.insert(id.as_str(), *coeffs).is_some() {
            return Err(ClassifyError::MismatchedRosters(format!(
                "duplicate coefficients for student `{id}`"
            )));
        }
    }

    let mut cluster_members: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for assignment in assignments {
        let cluster = (assignment.primary - 1) as usize;
        cluster_members[cluster].push(assignment.memberships[cluster]);
    }
    let mut thresholds = [0.0; 3];
    for (cluster, members) in cluster_members.iter().enumerate() {
        if !members.is_empty() {
            thresholds[cluster] = association_threshold(members)?;
        }
    }

    assignments
        .iter()
        .map(|assignment| {
            let coeffs = by_id
                .get(assignment.student_id.as_str())
                .copied()
                .ok_or_else(|| {
                    ClassifyError::MismatchedRosters(format!(
                        "no coefficients for student `{}`",
                        assignment.student_id
                    ))
                })?;
            let cluster = (assignment.primary - 1) as usize;
            let primary_membership = assignment.memberships[cluster];
            let association = if primary_membership >= thresholds[cluster] - THRESHOLD_SLACK {
                Association::High
            } else {
                Association::Low
            };
            Ok(LabeledStudent {
                student_id: assignment.student_id.clone(),
                label: CategoryLabel::new(assignment.primary, association),
                coefficients: coeffs,
                primary_membership,
            })
        })
        .collect()
}

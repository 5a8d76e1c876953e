//! Fuzzy c-means over the (D, d) plane with three sector-seeded clusters.
//!
//! Each student is a point in `[0, 1]^2`. Cluster 1 sits in the low-D/low-d
//! sector, cluster 2 in high-D/low-d, cluster 3 in high-D/high-d; the
//! low-D/high-d sector gets no seed because a student who distracts others
//! while never being distracted is not a configuration the survey produces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A (D, d) coordinate pair.
pub type Point = [f64; 2];

pub const CLUSTER_COUNT: usize = 3;

/// Sector seeds: C1 low-D/low-d, C2 high-D/low-d, C3 high-D/high-d.
pub fn seed_centers() -> [Point; 3] {
    [[0.2, 0.2], [0.8, 0.2], [0.8, 0.8]]
}

/// Whether clustering scores against fixed centers or iterates from the seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FcmMode {
    #[serde(rename = "fixed")]
    FixedCenters,
    #[serde(rename = "seeded")]
    SeededIteration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: [Point; 3],
    pub fuzzifier: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mode: FcmMode,
}

impl ClusterModel {
    pub fn seeded() -> Self {
        Self {
            centers: seed_centers(),
            fuzzifier: 2.0,
            tolerance: 1e-6,
            max_iterations: 300,
            mode: FcmMode::SeededIteration,
        }
    }

    pub fn fixed() -> Self {
        Self {
            mode: FcmMode::FixedCenters,
            ..Self::seeded()
        }
    }
}

impl Default for ClusterModel {
    fn default() -> Self {
        Self::seeded()
    }
}

#[derive(Debug, Error)]
pub enum FcmError {
    #[error("cluster centers {0} and {1} coincide")]
    DegenerateCenters(usize, usize),
    #[error("fuzzifier must be greater than 1, got {0}")]
    InvalidFuzzifier(f64),
    #[error("seeded iteration requires at least one point")]
    EmptyInput,
}

fn distance(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn check_centers(centers: &[Point; 3]) -> Result<(), FcmError> {
    for i in 0..CLUSTER_COUNT {
        for j in (i + 1)..CLUSTER_COUNT {
            if distance(centers[i], centers[j]) == 0.0 {
                return Err(FcmError::DegenerateCenters(i, j));
            }
        }
    }
    Ok(())
}

/// Standard FCM membership update with Euclidean distance:
/// `u_ij = 1 / sum_k (d_ij / d_ik)^(2/(m-1))`.
/// A point sitting exactly on a center gets crisp membership there.
pub fn memberships(
    points: &[Point],
    centers: &[Point; 3],
    fuzzifier: f64,
) -> Result<Vec<[f64; 3]>, FcmError> {
    if fuzzifier <= 1.0 {
        return Err(FcmError::InvalidFuzzifier(fuzzifier));
    }
    check_centers(centers)?;
    let exponent = 2.0 / (fuzzifier - 1.0);
    Ok(points
        .iter()
        .map(|&p| {
            let dists: Vec<f64> = centers.iter().map(|&c| distance(p, c)).collect();
            if let Some(hit) = dists.iter().position(|&d| d == 0.0) {
                let mut row = [0.0; 3];
                row[hit] = 1.0;
                return row;
            }
            let mut row = [0.0; 3];
            for j in 0..CLUSTER_COUNT {
                let total: f64 = dists.iter().map(|&dk| (dists[j] / dk).powf(exponent)).sum();
                row[j] = 1.0 / total;
            }
            row
        })
        .collect())
}

/// The FCM objective `J_m = sum_i sum_j u_ij^m ||x_i - c_j||^2`.
pub fn objective(points: &[Point], centers: &[Point; 3], u: &[[f64; 3]], fuzzifier: f64) -> f64 {
    points
        .iter()
        .zip(u)
        .map(|(&p, row)| {
            row.iter()
                .zip(centers)
                .map(|(&uij, &c)| {
                    let d = distance(p, c);
                    uij.powf(fuzzifier) * d * d
                })
                .sum::<f64>()
        })
        .sum()
}

fn update_centers(
    points: &[Point],
    u: &[[f64; 3]],
    fuzzifier: f64,
    previous: &[Point; 3],
) -> [Point; 3] {
    let mut centers = *previous;
    for j in 0..CLUSTER_COUNT {
        let mut num = [0.0; 2];
        let mut den = 0.0;
        for (&p, row) in points.iter().zip(u) {
            let w = row[j].powf(fuzzifier);
            num[0] += w * p[0];
            num[1] += w * p[1];
            den += w;
        }
        if den > 0.0 {
            centers[j] = [num[0] / den, num[1] / den];
        }
    }
    centers
}

/// Result of a clustering run. `converged` is false when the iteration cap
/// was hit before the membership change dropped below tolerance; the result
/// is still usable.
#[derive(Debug, Clone)]
pub struct FcmResult {
    pub centers: [Point; 3],
    pub memberships: Vec<[f64; 3]>,
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

/// Run clustering per the model's mode.
///
/// `FixedCenters` computes memberships once against `model.centers` and
/// returns those centers unchanged. `SeededIteration` alternates center and
/// membership updates from the seeds until `max |delta u| < tolerance` or the
/// iteration cap. The objective is recorded once per membership update.
pub fn fcm_fit(points: &[Point], model: &ClusterModel) -> Result<FcmResult, FcmError> {
    match model.mode {
        FcmMode::FixedCenters => {
            let u = memberships(points, &model.centers, model.fuzzifier)?;
            let j = objective(points, &model.centers, &u, model.fuzzifier);
            Ok(FcmResult {
                centers: model.centers,
                memberships: u,
                iterations: 0,
                objective_history: vec![j],
                converged: true,
            })
        }
        FcmMode::SeededIteration => {
            if points.is_empty() {
                return Err(FcmError::EmptyInput);
            }
            let mut centers = model.centers;
            let mut u = memberships(points, &centers, model.fuzzifier)?;
            let mut history = vec![objective(points, &centers, &u, model.fuzzifier)];
            for iteration in 1..=model.max_iterations {
                centers = update_centers(points, &u, model.fuzzifier, &centers);
                let next = memberships(points, &centers, model.fuzzifier)?;
                history.push(objective(points, &centers, &next, model.fuzzifier));
                let delta = u
                    .iter()
                    .zip(&next)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                    .fold(0.0, f64::max);
                u = next;
                if delta < model.tolerance {
                    return Ok(FcmResult {
                        centers,
                        memberships: u,
                        iterations: iteration,
                        objective_history: history,
                        converged: true,
                    });
                }
            }
            Ok(FcmResult {
                centers,
                memberships: u,
                iterations: model.max_iterations,
                objective_history: history,
                converged: false,
            })
        }
    }
}

/// One student's membership row plus the primary cluster (1-based); ties go
/// to the lowest cluster index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub student_id: String,
    pub memberships: [f64; 3],
    pub primary: u8,
}

/// Argmax with ties to the lowest index; returns a 1-based cluster number.
pub fn primary_cluster(memberships: &[f64; 3]) -> u8 {
    let mut best = 0;
    for j in 1..CLUSTER_COUNT {
        if memberships[j] > memberships[best] {
            best = j;
        }
    }
    (best + 1) as u8
}

/// Pair student ids with membership rows. Both slices must be aligned.
pub fn assign_clusters(ids: &[String], memberships: &[[f64; 3]]) -> Vec<ClusterAssignment> {
    assert_eq!(
        ids.len(),
        memberships.len(),
        "ids and memberships must align"
    );
    ids.iter()
        .zip(memberships)
        .map(|(id, &row)| ClusterAssignment {
            student_id: id.clone(),
            memberships: row,
            primary: primary_cluster(&row),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn seeds_are_distinct_and_avoid_the_implausible_sector() {
        let seeds = seed_centers();
        check_centers(&seeds).unwrap();
        for &[d_big, d_small] in &seeds {
            assert!(
                !(d_big < 0.5 && d_small > 0.5),
                "seed ({d_big}, {d_small}) sits in the low-D/high-d sector"
            );
        }
        // C1 is the only low-D seed; C2 and C3 share D = 0.8
        assert!(seeds[0][0] < seeds[1][0] && seeds[0][0] < seeds[2][0]);
        assert_eq!(seeds[1][0], seeds[2][0]);
    }

    #[test]
    fn membership_on_a_center_is_crisp() {
        let u = memberships(&[[0.8, 0.2]], &seed_centers(), 2.0).unwrap();
        assert_eq!(u[0], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn membership_equidistant_point_is_uniform() {
        // (0.5, 0.5) is the circumcenter of the three seeds
        let u = memberships(&[[0.5, 0.5]], &seed_centers(), 2.0).unwrap();
        for &uj in &u[0] {
            assert!((uj - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_hand_check_distances_one_two_two() {
        // point at distance 1 from the first center and 2 from the others
        let centers = [[1.0, 0.0], [0.0, 2.0], [0.0, -2.0]];
        let u = memberships(&[[0.0, 0.0]], &centers, 2.0).unwrap();
        assert!((u[0][0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((u[0][1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((u[0][2] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_centers_are_rejected() {
        let centers = [[0.2, 0.2], [0.2, 0.2], [0.8, 0.8]];
        assert!(matches!(
            memberships(&[[0.5, 0.5]], &centers, 2.0),
            Err(FcmError::DegenerateCenters(0, 1))
        ));
    }

    #[test]
    fn invalid_fuzzifier_is_rejected() {
        assert!(matches!(
            memberships(&[[0.5, 0.5]], &seed_centers(), 1.0),
            Err(FcmError::InvalidFuzzifier(_))
        ));
    }

    #[test]
    fn rows_sum_to_one_for_random_points() {
        let mut rng = StdRng::seed_from_u64(7);
        let points: Vec<Point> = (0..200).map(|_| [rng.random(), rng.random()]).collect();
        let u = memberships(&points, &seed_centers(), 2.0).unwrap();
        for row in &u {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row sums to {sum}");
            assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn memberships_are_independent_of_point_order() {
        let mut rng = StdRng::seed_from_u64(11);
        let points: Vec<Point> = (0..50).map(|_| [rng.random(), rng.random()]).collect();
        let mut reversed = points.clone();
        reversed.reverse();
        let forward = memberships(&points, &seed_centers(), 2.0).unwrap();
        let backward = memberships(&reversed, &seed_centers(), 2.0).unwrap();
        for (i, row) in forward.iter().enumerate() {
            assert_eq!(*row, backward[points.len() - 1 - i]);
        }
    }

    #[test]
    fn points_on_seeds_converge_immediately() {
        let points: Vec<Point> = seed_centers().to_vec();
        let result = fcm_fit(&points, &ClusterModel::seeded()).unwrap();
        assert!(result.converged);
        assert!(
            result.iterations <= 2,
            "took {} iterations",
            result.iterations
        );
        for (found, expected) in result.centers.iter().zip(seed_centers()) {
            assert!(distance(*found, expected) < 1e-9);
        }
    }

    #[test]
    fn fixed_mode_returns_centers_verbatim_even_for_one_point() {
        let result = fcm_fit(&[[0.33, 0.44]], &ClusterModel::fixed()).unwrap();
        assert_eq!(result.centers, seed_centers());
        assert_eq!(result.memberships.len(), 1);
        assert_eq!(result.iterations, 0);
        let sum: f64 = result.memberships[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_mode_rejects_empty_input() {
        assert!(matches!(
            fcm_fit(&[], &ClusterModel::seeded()),
            Err(FcmError::EmptyInput)
        ));
    }

    #[test]
    fn seeded_mode_reports_center_collapse_on_one_point() {
        // a single point pulls every center onto itself; fixed mode is the
        // escape hatch for inputs smaller than the cluster count
        assert!(matches!(
            fcm_fit(&[[0.4, 0.3]], &ClusterModel::seeded()),
            Err(FcmError::DegenerateCenters(..))
        ));
        assert!(fcm_fit(&[[0.4, 0.3]], &ClusterModel::fixed()).is_ok());
    }

    #[test]
    fn objective_history_never_increases() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let points: Vec<Point> = (0..30).map(|_| [rng.random(), rng.random()]).collect();
            let result = fcm_fit(&points, &ClusterModel::seeded()).unwrap();
            for w in result.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "objective rose from {} to {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn seeded_iteration_recovers_well_separated_blobs() {
        let mut rng = StdRng::seed_from_u64(9);
        let sigma = 0.05;
        let blobs = seed_centers();
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (label, &center) in blobs.iter().enumerate() {
            for _ in 0..40 {
                let dx: f64 = rng.random::<f64>() * 2.0 - 1.0;
                let dy: f64 = rng.random::<f64>() * 2.0 - 1.0;
                points.push([
                    (center[0] + dx * sigma).clamp(0.0, 1.0),
                    (center[1] + dy * sigma).clamp(0.0, 1.0),
                ]);
                truth.push((label + 1) as u8);
            }
        }
        let result = fcm_fit(&points, &ClusterModel::seeded()).unwrap();
        let recovered = result
            .memberships
            .iter()
            .zip(&truth)
            .filter(|(row, &want)| primary_cluster(row) == want)
            .count();
        let fraction = recovered as f64 / points.len() as f64;
        assert!(fraction >= 0.95, "only {fraction} recovered");
    }

    #[test]
    fn primary_cluster_breaks_ties_to_lowest_index() {
        assert_eq!(primary_cluster(&[0.7, 0.2, 0.1]), 1);
        assert_eq!(primary_cluster(&[0.5, 0.5, 0.0]), 1);
        assert_eq!(primary_cluster(&[0.1, 0.1, 0.8]), 3);
        assert_eq!(primary_cluster(&[0.2, 0.4, 0.4]), 2);
    }

    #[test]
    fn assign_clusters_pairs_ids_with_rows() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let rows = vec![[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]];
        let assignments = assign_clusters(&ids, &rows);
        assert_eq!(assignments[0].student_id, "a");
        assert_eq!(assignments[0].primary, 1);
        assert_eq!(assignments[1].primary, 3);
    }
}

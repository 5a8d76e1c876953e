//! Group construction, swap-based local search, and arrangement rotation.
//!
//! The objective is total intra-group distraction: a pair of students costs
//! `D_a*d_b + D_b*d_a` using the (D, d) pair the cost model assigns them, so
//! seating a distractor next to an easily distracted student is the expensive
//! configuration. Minimizing this is maximally diverse grouping with the
//! negated cost as the diversity measure.
//!
//! Arrangements are built greedily, polished by best-improvement pair swaps,
//! and rotated by perturbing the previous arrangement with seeded random
//! swaps and re-optimizing under the constraint that no previously emitted
//! partition is revisited.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Association, CategoryLabel, LabeledStudent};
use crate::fcm::{seed_centers, Point};

/// RNG recipe recorded in rotation state files: ChaCha8 seeded with the run
/// seed, using one dedicated stream per rotation index so any rotation can be
/// reproduced without replaying the ones before it.
pub const RNG_ALGORITHM: &str = "chacha8/stream-per-rotation";

/// Perturbation attempts per constraint phase before relaxing.
pub const MAX_ROTATION_ATTEMPTS: usize = 50;

/// Roster ceiling for exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Default cap on swaps applied by one local-search run.
pub const DEFAULT_MAX_PASSES: usize = 10_000;

/// A swap must beat this margin to count as improving.
const IMPROVE_EPS: f64 = 1e-12;

/// Dominates any real cost difference, so repeat-pair removal always wins.
const REPEAT_PENALTY: f64 = 1e6;

/// Low-association representatives shift this far toward the global centroid.
const LOW_SHIFT_DISTANCE: f64 = 0.15;
const LOW_SHIFT_TARGET: Point = [0.6, 0.4];

/// Order-normalized partition: members ascending inside each group, groups
/// ordered by their first member.
pub type CanonicalGroups = Vec<Vec<String>>;

#[derive(Debug, Error)]
pub enum AssignError {
    #[error("a group spec needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group sizes must be positive")]
    ZeroGroupSize,
    #[error("group sizes sum to {sizes_sum}, roster has {roster_len} students")]
    SpecMismatch { sizes_sum: usize, roster_len: usize },
    #[error("groups do not partition the roster: {0}")]
    InvalidPartition(String),
    #[error("cost model must cover all 6 category labels")]
    IncompleteCostModel,
    #[error("perturbation swap count must be positive")]
    ZeroPerturbation,
    #[error("rotation state has no initial arrangement")]
    EmptyHistory,
    #[error("rotation history contains duplicate arrangements")]
    DuplicateHistory,
    #[error(
        "no unseen arrangement found after {attempts} perturbation attempts; \
         the roster is too small to rotate further"
    )]
    ExhaustedRetries { attempts: usize },
    #[error("exhaustive search handles at most {limit} students, roster has {roster_len}")]
    TooLarge { roster_len: usize, limit: usize },
}

/// Teacher-declared group sizes, in table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupSpec {
    sizes: Vec<usize>,
}

impl GroupSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self, AssignError> {
        if sizes.len() < 2 {
            return Err(AssignError::TooFewGroups(sizes.len()));
        }
        if sizes.contains(&0) {
            return Err(AssignError::ZeroGroupSize);
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate_roster(&self, roster_len: usize) -> Result<(), AssignError> {
        if self.total() != roster_len {
            return Err(AssignError::SpecMismatch {
                sizes_sum: self.total(),
                roster_len,
            });
        }
        Ok(())
    }
}

/// Maps category labels to the (D, d) pair the objective uses.
///
/// The label table gives High-association students their cluster seed exactly
/// and places Low-association students 0.15 closer to the global centroid
/// (low association means farther from the cluster center). `raw()` bypasses
/// the table and scores every student by their own coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    representatives: BTreeMap<CategoryLabel, Point>,
    use_raw_coefficients: bool,
}

impl CostModel {
    /// The default, label-driven model.
    pub fn label_based() -> Self {
        let seeds = seed_centers();
        let mut representatives = BTreeMap::new();
        for cluster in 1..=3u8 {
            let seed = seeds[(cluster - 1) as usize];
            representatives.insert(CategoryLabel::new(cluster, Association::High), seed);
            representatives.insert(
                CategoryLabel::new(cluster, Association::Low),
                shift_toward(seed, LOW_SHIFT_TARGET, LOW_SHIFT_DISTANCE),
            );
        }
        Self {
            representatives,
            use_raw_coefficients: false,
        }
    }

    /// Score students by their own (D, d) instead of label representatives.
    pub fn raw() -> Self {
        Self {
            use_raw_coefficients: true,
            ..Self::label_based()
        }
    }

    pub fn with_representatives(
        representatives: BTreeMap<CategoryLabel, Point>,
    ) -> Result<Self, AssignError> {
        if CategoryLabel::ALL
            .iter()
            .any(|label| !representatives.contains_key(label))
        {
            return Err(AssignError::IncompleteCostModel);
        }
        Ok(Self {
            representatives,
            use_raw_coefficients: false,
        })
    }

    pub fn uses_raw_coefficients(&self) -> bool {
        self.use_raw_coefficients
    }

    pub fn representative(&self, label: CategoryLabel) -> Point {
        self.representatives[&label]
    }

    /// The (D, d) pair the objective uses for one student.
    pub fn effective(&self, student: &LabeledStudent) -> Point {
        if self.use_raw_coefficients {
            [
                student.coefficients.distractibility,
                student.coefficients.distractiveness,
            ]
        } else {
            self.representatives[&student.label]
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self::label_based()
    }
}

fn shift_toward(from: Point, to: Point, dist: f64) -> Point {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let norm = (dx * dx + dy * dy).sqrt();
    if norm == 0.0 {
        return from;
    }
    [
        (from[0] + dx / norm * dist).clamp(0.0, 1.0),
        (from[1] + dy / norm * dist).clamp(0.0, 1.0),
    ]
}

/// A partition of the roster in canonical form, with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrangement {
    pub groups: CanonicalGroups,
    pub objective: f64,
}

/// Distraction cost of seating two students together (symmetric in a and b).
pub fn pair_cost(a: &LabeledStudent, b: &LabeledStudent, cost_model: &CostModel) -> f64 {
    let ea = cost_model.effective(a);
    let eb = cost_model.effective(b);
    ea[0] * eb[1] + eb[0] * ea[1]
}

/// Sum of pair costs over all unordered within-group pairs.
pub fn arrangement_objective(
    groups: &[Vec<String>],
    roster: &[LabeledStudent],
    cost_model: &CostModel,
) -> Result<f64, AssignError> {
    let index = roster_index(roster)?;
    let index_groups = groups_to_indices(groups, &index, roster.len())?;
    let eff = effective_table(roster, cost_model);
    Ok(groups_objective(&index_groups, &eff))
}

/// Normalize a partition: sort members within groups, then sort groups by
/// their first member. Equal canonical forms identify equal partitions.
pub fn canonicalize(groups: &[Vec<String>]) -> CanonicalGroups {
    let mut canonical: CanonicalGroups = groups
        .iter()
        .map(|group| {
            let mut group = group.clone();
            group.sort();
            group
        })
        .collect();
    canonical.sort_by(|a, b| a.first().cmp(&b.first()));
    canonical
}

/// Greedy construction: students ordered by descending d (ties: descending D,
/// then ascending id) are placed one by one into the open group that adds the
/// least cost (ties: lowest group index).
pub fn sequential_construct(
    roster: &[LabeledStudent],
    spec: &GroupSpec,
    cost_model: &CostModel,
) -> Result<Arrangement, AssignError> {
    spec.validate_roster(roster.len())?;
    roster_index(roster)?;
    let eff = effective_table(roster, cost_model);

    let mut order: Vec<usize> = (0..roster.len()).collect();
    order.sort_by(|&x, &y| {
        eff[y][1]
            .total_cmp(&eff[x][1])
            .then(eff[y][0].total_cmp(&eff[x][0]))
            .then(roster[x].student_id.cmp(&roster[y].student_id))
    });

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); spec.group_count()];
    for &student in &order {
        let mut best: Option<(f64, usize)> = None;
        for (g, members) in groups.iter().enumerate() {
            if members.len() >= spec.sizes()[g] {
                continue;
            }
            let marginal: f64 = members
                .iter()
                .map(|&other| pair_cost_indexed(&eff, student, other))
                .sum();
            if best.is_none_or(|(cost, _)| marginal < cost) {
                best = Some((marginal, g));
            }
        }
        let (_, g) = best.expect("spec totals match the roster, so a group is open");
        groups[g].push(student);
    }

    Ok(finish(&groups, roster, &eff))
}

/// Best-improvement local search over the cross-group pair-swap neighborhood.
/// Each pass applies the single swap with the largest objective decrease
/// (ties: lexicographically smallest student-id pair) until no improving swap
/// remains or `max_passes` swaps have been applied. The objective never
/// increases.
pub fn improve_swaps(
    arrangement: &Arrangement,
    roster: &[LabeledStudent],
    cost_model: &CostModel,
    max_passes: usize,
) -> Result<Arrangement, AssignError> {
    let index = roster_index(roster)?;
    let groups = groups_to_indices(&arrangement.groups, &index, roster.len())?;
    let eff = effective_table(roster, cost_model);
    let ids: Vec<&str> = roster.iter().map(|s| s.student_id.as_str()).collect();
    let mut search = SwapSearch::new(groups, &eff, &ids, None, None);
    search.improve(max_passes);
    Ok(finish(&search.groups, roster, &eff))
}

/// Rotation bookkeeping: every arrangement emitted so far (canonical forms)
/// plus the reproducibility knobs for the perturbation RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationState {
    pub history: Vec<CanonicalGroups>,
    pub rng_seed: u64,
    pub perturbation_swaps: usize,
    pub no_repeat_pairs: bool,
}

impl RotationState {
    pub fn new(
        first: &Arrangement,
        rng_seed: u64,
        perturbation_swaps: usize,
        no_repeat_pairs: bool,
    ) -> Result<Self, AssignError> {
        if perturbation_swaps == 0 {
            return Err(AssignError::ZeroPerturbation);
        }
        Ok(Self {
            history: vec![canonicalize(&first.groups)],
            rng_seed,
            perturbation_swaps,
            no_repeat_pairs,
        })
    }

    pub fn validate(&self) -> Result<(), AssignError> {
        if self.history.is_empty() {
            return Err(AssignError::EmptyHistory);
        }
        if self.perturbation_swaps == 0 {
            return Err(AssignError::ZeroPerturbation);
        }
        let distinct: BTreeSet<&CanonicalGroups> = self.history.iter().collect();
        if distinct.len() != self.history.len() {
            return Err(AssignError::DuplicateHistory);
        }
        Ok(())
    }
}

/// Produce the next arrangement in a rotation sequence.
///
/// Starting from the last arrangement, apply `perturbation_swaps` seeded
/// random cross-group swaps, then re-run the swap search with every history
/// entry excluded. With `no_repeat_pairs` set, the search additionally drives
/// out every pair that was co-grouped in the immediately previous arrangement
/// and the result is rejected if any such pair survives. Each constraint
/// phase retries with fresh perturbations up to [`MAX_ROTATION_ATTEMPTS`]
/// times; the pair constraint is then relaxed, distinctness never.
pub fn next_arrangement(
    state: &mut RotationState,
    roster: &[LabeledStudent],
    spec: &GroupSpec,
    cost_model: &CostModel,
) -> Result<Arrangement, AssignError> {
    state.validate()?;
    spec.validate_roster(roster.len())?;
    let last = state
        .history
        .last()
        .cloned()
        .ok_or(AssignError::EmptyHistory)?;

    let mut expected_sizes: Vec<usize> = spec.sizes().to_vec();
    expected_sizes.sort_unstable();
    let mut last_sizes: Vec<usize> = last.iter().map(|g| g.len()).collect();
    last_sizes.sort_unstable();
    if expected_sizes != last_sizes {
        return Err(AssignError::InvalidPartition(
            "rotation history does not match the group spec".into(),
        ));
    }

    let index = roster_index(roster)?;
    let base = groups_to_indices(&last, &index, roster.len())?;
    let eff = effective_table(roster, cost_model);
    let ids: Vec<&str> = roster.iter().map(|s| s.student_id.as_str()).collect();

    let rotation_index = state.history.len() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    rng.set_stream(rotation_index);

    let history: BTreeSet<CanonicalGroups> = state.history.iter().cloned().collect();
    let previous_pairs = co_grouped_index_pairs(&base);

    let mut phases = Vec::new();
    if state.no_repeat_pairs {
        phases.push(Some(&previous_pairs));
    }
    phases.push(None);

    let mut attempts = 0;
    for repeat_pairs in phases {
        for _ in 0..MAX_ROTATION_ATTEMPTS {
            attempts += 1;
            let mut groups = base.clone();
            perturb(
                &mut groups,
                roster.len(),
                state.perturbation_swaps,
                &mut rng,
            );
            let mut search = SwapSearch::new(groups, &eff, &ids, repeat_pairs, Some(&history));
            search.improve(DEFAULT_MAX_PASSES);
            let canonical = indices_to_canonical(&search.groups, &ids);
            if history.contains(&canonical) {
                continue;
            }
            if let Some(pairs) = repeat_pairs {
                if shares_any_pair(&search.groups, pairs) {
                    continue;
                }
            }
            let objective = groups_objective(&search.groups, &eff);
            state.history.push(canonical.clone());
            return Ok(Arrangement {
                groups: canonical,
                objective,
            });
        }
    }
    Err(AssignError::ExhaustedRetries { attempts })
}

/// Every partition of `ids` matching the spec, one representative per
/// partition: group-order permutations among equal-size groups are
/// deduplicated by requiring their smallest members to increase.
pub fn enumerate_partitions(
    ids: &[String],
    spec: &GroupSpec,
) -> Result<Vec<CanonicalGroups>, AssignError> {
    spec.validate_roster(ids.len())?;
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(AssignError::InvalidPartition(
            "duplicate student id in roster".into(),
        ));
    }

    fn fill(
        sorted: &[String],
        sizes: &[usize],
        slot: usize,
        available: &[usize],
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<CanonicalGroups>,
    ) {
        if slot == sizes.len() {
            let groups: Vec<Vec<String>> = current
                .iter()
                .map(|g| g.iter().map(|&i| sorted[i].clone()).collect())
                .collect();
            out.push(canonicalize(&groups));
            return;
        }
        if slot == sizes.len() - 1 {
            // last slot takes the remainder
            if slot > 0 && sizes[slot] == sizes[slot - 1] && available[0] < current[slot - 1][0] {
                return;
            }
            current.push(available.to_vec());
            fill(sorted, sizes, slot + 1, &[], current, out);
            current.pop();
            return;
        }
        for combo in combinations(available, sizes[slot]) {
            if slot > 0 && sizes[slot] == sizes[slot - 1] && combo[0] < current[slot - 1][0] {
                continue;
            }
            let rest: Vec<usize> = available
                .iter()
                .copied()
                .filter(|i| !combo.contains(i))
                .collect();
            current.push(combo);
            fill(sorted, sizes, slot + 1, &rest, current, out);
            current.pop();
        }
    }

    let available: Vec<usize> = (0..sorted.len()).collect();
    let mut out = Vec::new();
    fill(
        &sorted,
        spec.sizes(),
        0,
        &available,
        &mut Vec::new(),
        &mut out,
    );
    Ok(out)
}

/// All size-`k` subsets of `pool`, each in pool order.
fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn step(
        pool: &[usize],
        k: usize,
        start: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let needed = k - current.len();
        for i in start..=pool.len().saturating_sub(needed) {
            current.push(pool[i]);
            step(pool, k, i + 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    if k <= pool.len() {
        step(pool, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

/// Exhaustive minimum-objective arrangement, for rosters of at most
/// [`BRUTE_FORCE_LIMIT`] students. The verification oracle behind the swap
/// search and the CLI's `--verify` flag.
pub fn brute_force_optimal(
    roster: &[LabeledStudent],
    spec: &GroupSpec,
    cost_model: &CostModel,
) -> Result<Arrangement, AssignError> {
    if roster.len() > BRUTE_FORCE_LIMIT {
        return Err(AssignError::TooLarge {
            roster_len: roster.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let index = roster_index(roster)?;
    let eff = effective_table(roster, cost_model);
    let ids: Vec<String> = roster.iter().map(|s| s.student_id.clone()).collect();
    let mut best: Option<Arrangement> = None;
    for partition in enumerate_partitions(&ids, spec)? {
        let groups = groups_to_indices(&partition, &index, roster.len())?;
        let objective = groups_objective(&groups, &eff);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(Arrangement {
                groups: partition,
                objective,
            });
        }
    }
    Ok(best.expect("spec admits at least one partition"))
}

// ---------------------------------------------------------------------------
// internals
// ---------------------------------------------------------------------------

fn roster_index(roster: &[LabeledStudent]) -> Result<BTreeMap<&str, usize>, AssignError> {
    let mut index = BTreeMap::new();
    for (i, student) in roster.iter().enumerate() {
        if index.insert(student.student_id.as_str(), i).is_some() {
            return Err(AssignError::InvalidPartition(format!(
                "duplicate student id `{}` in roster",
                student.student_id
            )));
        }
    }
    Ok(index)
}

fn effective_table(roster: &[LabeledStudent], cost_model: &CostModel) -> Vec<Point> {
    roster.iter().map(|s| cost_model.effective(s)).collect()
}

fn groups_to_indices(
    groups: &[Vec<String>],
    index: &BTreeMap<&str, usize>,
    roster_len: usize,
) -> Result<Vec<Vec<usize>>, AssignError> {
    let mut seen = vec![false; roster_len];
    let mut total = 0;
    let mut result = Vec::with_capacity(groups.len());
    for group in groups {
        let mut members = Vec::with_capacity(group.len());
        for id in group {
            let &i = index.get(id.as_str()).ok_or_else(|| {
                AssignError::InvalidPartition(format!("student `{id}` is not on the roster"))
            })?;
            if seen[i] {
                return Err(AssignError::InvalidPartition(format!(
                    "student `{id}` appears in more than one group"
                )));
            }
            seen[i] = true;
            total += 1;
            members.push(i);
        }
        result.push(members);
    }
    if total != roster_len {
        return Err(AssignError::InvalidPartition(format!(
            "groups cover {total} of {roster_len} students"
        )));
    }
    Ok(result)
}

fn indices_to_canonical(groups: &[Vec<usize>], ids: &[&str]) -> CanonicalGroups {
    let named: Vec<Vec<String>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| ids[i].to_string()).collect())
        .collect();
    canonicalize(&named)
}

fn pair_cost_indexed(eff: &[Point], x: usize, y: usize) -> f64 {
    eff[x][0] * eff[y][1] + eff[y][0] * eff[x][1]
}

fn groups_objective(groups: &[Vec<usize>], eff: &[Point]) -> f64 {
    groups
        .iter()
        .map(|group| {
            let mut sum = 0.0;
            for (i, &x) in group.iter().enumerate() {
                for &y in &group[i + 1..] {
                    sum += pair_cost_indexed(eff, x, y);
                }
            }
            sum
        })
        .sum()
}

fn co_grouped_index_pairs(groups: &[Vec<usize>]) -> BTreeSet<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for group in groups {
        for (i, &x) in group.iter().enumerate() {
            for &y in &group[i + 1..] {
                pairs.insert((x.min(y), x.max(y)));
            }
        }
    }
    pairs
}

fn shares_any_pair(groups: &[Vec<usize>], pairs: &BTreeSet<(usize, usize)>) -> bool {
    groups.iter().any(|group| {
        group.iter().enumerate().any(|(i, &x)| {
            group[i + 1..]
                .iter()
                .any(|&y| pairs.contains(&(x.min(y), x.max(y))))
        })
    })
}

fn finish(groups: &[Vec<usize>], roster: &[LabeledStudent], eff: &[Point]) -> Arrangement {
    let ids: Vec<&str> = roster.iter().map(|s| s.student_id.as_str()).collect();
    Arrangement {
        groups: indices_to_canonical(groups, &ids),
        objective: groups_objective(groups, eff),
    }
}

/// Apply `swaps` uniformly random cross-group swaps.
fn perturb(groups: &mut [Vec<usize>], n: usize, swaps: usize, rng: &mut ChaCha8Rng) {
    let mut group_of = vec![0; n];
    for (g, members) in groups.iter().enumerate() {
        for &m in members {
            group_of[m] = g;
        }
    }
    for _ in 0..swaps {
        let x = rng.random_range(0..n);
        let y = loop {
            let y = rng.random_range(0..n);
            if group_of[y] != group_of[x] {
                break y;
            }
        };
        let (gx, gy) = (group_of[x], group_of[y]);
        let px = groups[gx].iter().position(|&m| m == x).unwrap();
        let py = groups[gy].iter().position(|&m| m == y).unwrap();
        groups[gx][px] = y;
        groups[gy][py] = x;
        group_of.swap(x, y);
    }
}

/// Best-improvement pair-swap search. `repeat_pairs`, when set, adds a large
/// penalty to each listed pair so the search drives them out before trading
/// plain cost; `forbidden` partitions are never accepted as a swap result.
struct SwapSearch<'a> {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    eff: &'a [Point],
    ids: &'a [&'a str],
    repeat_pairs: Option<&'a BTreeSet<(usize, usize)>>,
    forbidden: Option<&'a BTreeSet<CanonicalGroups>>,
}

impl<'a> SwapSearch<'a> {
    fn new(
        groups: Vec<Vec<usize>>,
        eff: &'a [Point],
        ids: &'a [&'a str],
        repeat_pairs: Option<&'a BTreeSet<(usize, usize)>>,
        forbidden: Option<&'a BTreeSet<CanonicalGroups>>,
    ) -> Self {
        let mut group_of = vec![0; eff.len()];
        for (g, members) in groups.iter().enumerate() {
            for &m in members {
                group_of[m] = g;
            }
        }
        Self {
            groups,
            group_of,
            eff,
            ids,
            repeat_pairs,
            forbidden,
        }
    }

    fn cost(&self, x: usize, y: usize) -> f64 {
        let mut cost = pair_cost_indexed(self.eff, x, y);
        if let Some(pairs) = self.repeat_pairs {
            if pairs.contains(&(x.min(y), x.max(y))) {
                cost += REPEAT_PENALTY;
            }
        }
        cost
    }

    /// Objective change from swapping `x` and `y` across their groups.
    fn swap_delta(&self, x: usize, y: usize) -> f64 {
        let mut delta = 0.0;
        for &z in &self.groups[self.group_of[x]] {
            if z != x {
                delta += self.cost(y, z) - self.cost(x, z);
            }
        }
        for &z in &self.groups[self.group_of[y]] {
            if z != y {
                delta += self.cost(x, z) - self.cost(y, z);
            }
        }
        delta
    }

    fn id_pair(&self, x: usize, y: usize) -> (&'a str, &'a str) {
        let (a, b) = (self.ids[x], self.ids[y]);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn swap_is_forbidden(&self, x: usize, y: usize) -> bool {
        let Some(forbidden) = self.forbidden else {
            return false;
        };
        if forbidden.is_empty() {
            return false;
        }
        let mut groups = self.groups.clone();
        let (gx, gy) = (self.group_of[x], self.group_of[y]);
        let px = groups[gx].iter().position(|&m| m == x).unwrap();
        let py = groups[gy].iter().position(|&m| m == y).unwrap();
        groups[gx][px] = y;
        groups[gy][py] = x;
        forbidden.contains(&indices_to_canonical(&groups, self.ids))
    }

    fn best_swap(&self) -> Option<(usize, usize)> {
        struct Candidate<'s> {
            delta: f64,
            key: (&'s str, &'s str),
            swap: (usize, usize),
        }
        let mut best: Option<Candidate> = None;
        for gx in 0..self.groups.len() {
            for gy in (gx + 1)..self.groups.len() {
                for &x in &self.groups[gx] {
                    for &y in &self.groups[gy] {
                        let delta = self.swap_delta(x, y);
                        if delta >= -IMPROVE_EPS {
                            continue;
                        }
                        let key = self.id_pair(x, y);
                        let better = match &best {
                            None => true,
                            Some(b) => match delta.total_cmp(&b.delta) {
                                std::cmp::Ordering::Less => true,
                                std::cmp::Ordering::Equal => key < b.key,
                                std::cmp::Ordering::Greater => false,
                            },
                        };
                        if better && !self.swap_is_forbidden(x, y) {
                            best = Some(Candidate {
                                delta,
                                key,
                                swap: (x, y),
                            });
                        }
                    }
                }
            }
        }
        best.map(|b| b.swap)
    }

    fn apply_swap(&mut self, x: usize, y: usize) {
        let (gx, gy) = (self.group_of[x], self.group_of[y]);
        let px = self.groups[gx].iter().position(|&m| m == x).unwrap();
        let py = self.groups[gy].iter().position(|&m| m == y).unwrap();
        self.groups[gx][px] = y;
        self.groups[gy][py] = x;
        self.group_of.swap(x, y);
    }

    /// Apply best swaps until none improves or the cap is hit; returns the
    /// number of swaps applied.
    fn improve(&mut self, max_passes: usize) -> usize {
        for pass in 0..max_passes {
            match self.best_swap() {
                Some((x, y)) => self.apply_swap(x, y),
                None => return pass,
            }
        }
        max_passes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fis::Coefficients;
    use rand::rngs::StdRng;

    fn student(id: &str, label: CategoryLabel, d_big: f64, d_small: f64) -> LabeledStudent {
        LabeledStudent {
            student_id: id.to_string(),
            label,
            coefficients: Coefficients {
                distractibility: d_big,
                distractiveness: d_small,
            },
            primary_membership: 0.8,
        }
    }

    fn raw_student(id: &str, d_big: f64, d_small: f64) -> LabeledStudent {
        student(id, CategoryLabel::new(1, Association::High), d_big, d_small)
    }

    fn random_raw_roster(n: usize, rng: &mut StdRng) -> Vec<LabeledStudent> {
        (0..n)
            .map(|i| raw_student(&format!("s{i:02}"), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn group_spec_validation() {
        assert!(matches!(
            GroupSpec::new(vec![4]),
            Err(AssignError::TooFewGroups(1))
        ));
        assert!(matches!(
            GroupSpec::new(vec![2, 0]),
            Err(AssignError::ZeroGroupSize)
        ));
        let spec = GroupSpec::new(vec![2, 2]).unwrap();
        assert!(spec.validate_roster(4).is_ok());
        match spec.validate_roster(5) {
            Err(AssignError::SpecMismatch {
                sizes_sum,
                roster_len,
            }) => {
                assert_eq!((sizes_sum, roster_len), (4, 5));
            }
            other => panic!("expected SpecMismatch, got {other:?}"),
        }
    }

    #[test]
    fn default_cost_model_covers_all_labels_and_stays_in_range() {
        let cm = CostModel::label_based();
        for label in CategoryLabel::ALL {
            let [d_big, d_small] = cm.representative(label);
            assert!((0.0..=1.0).contains(&d_big) && (0.0..=1.0).contains(&d_small));
        }
        // High representatives are the seeds themselves
        assert_eq!(
            cm.representative(CategoryLabel::new(1, Association::High)),
            [0.2, 0.2]
        );
        // Low representatives differ from the seeds
        for cluster in 1..=3u8 {
            assert_ne!(
                cm.representative(CategoryLabel::new(cluster, Association::High)),
                cm.representative(CategoryLabel::new(cluster, Association::Low)),
            );
        }
    }

    #[test]
    fn pair_cost_examples() {
        let cm = CostModel::raw();
        let zero_d = raw_student("a", 0.9, 0.0);
        let other = raw_student("b", 0.7, 0.0);
        assert_eq!(pair_cost(&zero_d, &other, &cm), 0.0);

        let pure_distractor = raw_student("a", 0.0, 1.0);
        let pure_distracted = raw_student("b", 1.0, 0.0);
        assert_eq!(pair_cost(&pure_distractor, &pure_distracted, &cm), 1.0);

        let mut reps = CostModel::label_based().representatives;
        reps.insert(CategoryLabel::new(1, Association::High), [0.15, 0.15]);
        let custom = CostModel::with_representatives(reps).unwrap();
        let a = student("a", CategoryLabel::new(1, Association::High), 0.0, 0.0);
        let b = student("b", CategoryLabel::new(1, Association::High), 0.0, 0.0);
        assert!((pair_cost(&a, &b, &custom) - 0.045).abs() < 1e-12);
    }

    #[test]
    fn objective_counts_within_group_pairs_only() {
        let cm = CostModel::raw();
        let roster = vec![
            raw_student("a", 0.5, 0.5),
            raw_student("b", 0.5, 0.5),
            raw_student("c", 0.5, 0.5),
            raw_student("d", 0.5, 0.5),
        ];
        // all singletons: no pairs
        let singletons: Vec<Vec<String>> =
            roster.iter().map(|s| vec![s.student_id.clone()]).collect();
        assert_eq!(
            arrangement_objective(&singletons, &roster, &cm).unwrap(),
            0.0
        );

        // one big group: C(4,2) = 6 pairs at 0.5 each
        let one_group = vec![roster.iter().map(|s| s.student_id.clone()).collect()];
        let expected = 6.0 * (0.5 * 0.5 + 0.5 * 0.5);
        assert!(
            (arrangement_objective(&one_group, &roster, &cm).unwrap() - expected).abs() < 1e-12
        );

        // 2 + 2 split: exactly 2 pair costs
        let split = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["c".to_string(), "d".to_string()],
        ];
        let expected = 2.0 * (0.5 * 0.5 + 0.5 * 0.5);
        assert!((arrangement_objective(&split, &roster, &cm).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_non_partitions() {
        let cm = CostModel::raw();
        let roster = vec![raw_student("a", 0.1, 0.1), raw_student("b", 0.1, 0.1)];
        let missing = vec![vec!["a".to_string()]];
        assert!(matches!(
            arrangement_objective(&missing, &roster, &cm),
            Err(AssignError::InvalidPartition(_))
        ));
        let duplicated = vec![
            vec!["a".to_string()],
            vec!["a".to_string(), "b".to_string()],
        ];
        assert!(matches!(
            arrangement_objective(&duplicated, &roster, &cm),
            Err(AssignError::InvalidPartition(_))
        ));
        let unknown = vec![vec!["a".to_string()], vec!["zz".to_string()]];
        assert!(matches!(
            arrangement_objective(&unknown, &roster, &cm),
            Err(AssignError::InvalidPartition(_))
        ));
    }

    #[test]
    fn canonicalize_sorts_members_and_groups() {
        let groups = vec![
            vec!["B".to_string(), "A".to_string()],
            vec!["C".to_string()],
        ];
        assert_eq!(
            canonicalize(&groups),
            vec![
                vec!["A".to_string(), "B".to_string()],
                vec!["C".to_string()]
            ]
        );
        let reordered = vec![
            vec!["C".to_string()],
            vec!["A".to_string(), "B".to_string()],
        ];
        assert_eq!(canonicalize(&groups), canonicalize(&reordered));
        let different = vec![
            vec!["A".to_string(), "C".to_string()],
            vec!["B".to_string()],
        ];
        assert_ne!(canonicalize(&groups), canonicalize(&different));
    }

    #[test]
    fn sequential_construct_spreads_distractors() {
        let cm = CostModel::raw();
        let roster = vec![
            raw_student("loud1", 0.9, 0.9),
            raw_student("loud2", 0.9, 0.9),
            raw_student("calm1", 0.0, 0.0),
            raw_student("calm2", 0.0, 0.0),
        ];
        let spec = GroupSpec::new(vec![2, 2]).unwrap();
        let arrangement = sequential_construct(&roster, &spec, &cm).unwrap();
        // the two distractors must land in different groups
        for group in &arrangement.groups {
            assert!(
                !(group.contains(&"loud1".to_string()) && group.contains(&"loud2".to_string())),
                "distractors grouped together: {:?}",
                arrangement.groups
            );
        }
        // hand-enumerated optimum over the 3 partitions of 4 students into 2+2
        let best = brute_force_optimal(&roster, &spec, &cm).unwrap();
        assert!((arrangement.objective - best.objective).abs() < 1e-12);
    }

    #[test]
    fn sequential_construct_is_deterministic_for_identical_students() {
        let cm = CostModel::label_based();
        let label = CategoryLabel::new(2, Association::High);
        let roster: Vec<LabeledStudent> = (0..6)
            .map(|i| student(&format!("s{i}"), label, 0.5, 0.5))
            .collect();
        let spec = GroupSpec::new(vec![3, 3]).unwrap();
        let a = sequential_construct(&roster, &spec, &cm).unwrap();
        let b = sequential_construct(&roster, &spec, &cm).unwrap();
        assert_eq!(a, b);
        spec.validate_roster(roster.len()).unwrap();
    }

    #[test]
    fn sequential_construct_rejects_mismatched_spec() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(5, &mut StdRng::seed_from_u64(1));
        let spec = GroupSpec::new(vec![2, 2]).unwrap();
        assert!(matches!(
            sequential_construct(&roster, &spec, &cm),
            Err(AssignError::SpecMismatch { .. })
        ));
    }

    #[test]
    fn improve_swaps_never_increases_objective() {
        let cm = CostModel::raw();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..25 {
            let roster = random_raw_roster(8, &mut rng);
            let spec = GroupSpec::new(vec![4, 4]).unwrap();
            let start = sequential_construct(&roster, &spec, &cm).unwrap();
            let improved = improve_swaps(&start, &roster, &cm, DEFAULT_MAX_PASSES).unwrap();
            assert!(improved.objective <= start.objective + 1e-12);
            let recomputed = arrangement_objective(&improved.groups, &roster, &cm).unwrap();
            assert!((improved.objective - recomputed).abs() < 1e-9);
        }
    }

    #[test]
    fn improve_swaps_leaves_local_optimum_unchanged() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(6, &mut StdRng::seed_from_u64(5));
        let spec = GroupSpec::new(vec![3, 3]).unwrap();
        let start = sequential_construct(&roster, &spec, &cm).unwrap();
        let once = improve_swaps(&start, &roster, &cm, DEFAULT_MAX_PASSES).unwrap();
        let twice = improve_swaps(&once, &roster, &cm, DEFAULT_MAX_PASSES).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn construct_plus_improve_matches_brute_force_on_six_students() {
        let cm = CostModel::raw();
        let mut rng = StdRng::seed_from_u64(7);
        let spec = GroupSpec::new(vec![3, 3]).unwrap();
        for _ in 0..40 {
            let roster = random_raw_roster(6, &mut rng);
            let start = sequential_construct(&roster, &spec, &cm).unwrap();
            let improved = improve_swaps(&start, &roster, &cm, DEFAULT_MAX_PASSES).unwrap();
            let optimal = brute_force_optimal(&roster, &spec, &cm).unwrap();
            assert!(
                (improved.objective - optimal.objective).abs() < 1e-9,
                "search {} vs optimum {}",
                improved.objective,
                optimal.objective
            );
        }
    }

    #[test]
    fn enumerate_partitions_counts() {
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let spec = GroupSpec::new(vec![2, 2]).unwrap();
        assert_eq!(enumerate_partitions(&ids, &spec).unwrap().len(), 3);

        let ids: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        let spec = GroupSpec::new(vec![3, 3]).unwrap();
        let partitions = enumerate_partitions(&ids, &spec).unwrap();
        assert_eq!(partitions.len(), 10);
        // all distinct
        let distinct: BTreeSet<&CanonicalGroups> = partitions.iter().collect();
        assert_eq!(distinct.len(), 10);

        // mixed sizes: C(5,2) = 10 partitions of 5 students into (2,3)
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let spec = GroupSpec::new(vec![2, 3]).unwrap();
        assert_eq!(enumerate_partitions(&ids, &spec).unwrap().len(), 10);
    }

    #[test]
    fn brute_force_rejects_large_rosters() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(13, &mut StdRng::seed_from_u64(11));
        let spec = GroupSpec::new(vec![6, 7]).unwrap();
        assert!(matches!(
            brute_force_optimal(&roster, &spec, &cm),
            Err(AssignError::TooLarge { roster_len: 13, .. })
        ));
    }

    #[test]
    fn rotation_produces_distinct_arrangements() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(8, &mut StdRng::seed_from_u64(13));
        let spec = GroupSpec::new(vec![4, 4]).unwrap();
        let first = improve_swaps(
            &sequential_construct(&roster, &spec, &cm).unwrap(),
            &roster,
            &cm,
            DEFAULT_MAX_PASSES,
        )
        .unwrap();
        let mut state = RotationState::new(&first, 42, 2, false).unwrap();
        for _ in 0..5 {
            next_arrangement(&mut state, &roster, &spec, &cm).unwrap();
        }
        assert_eq!(state.history.len(), 6);
        let distinct: BTreeSet<&CanonicalGroups> = state.history.iter().collect();
        assert_eq!(distinct.len(), 6);
        state.validate().unwrap();
    }

    #[test]
    fn rotation_is_reproducible() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(8, &mut StdRng::seed_from_u64(17));
        let spec = GroupSpec::new(vec![4, 4]).unwrap();
        let first = improve_swaps(
            &sequential_construct(&roster, &spec, &cm).unwrap(),
            &roster,
            &cm,
            DEFAULT_MAX_PASSES,
        )
        .unwrap();
        let run = |seed: u64| {
            let mut state = RotationState::new(&first, seed, 3, true).unwrap();
            for _ in 0..4 {
                next_arrangement(&mut state, &roster, &spec, &cm).unwrap();
            }
            state.history
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn rotation_exhausts_tiny_rosters() {
        let cm = CostModel::raw();
        let roster = vec![
            raw_student("a", 0.3, 0.6),
            raw_student("b", 0.8, 0.2),
            raw_student("c", 0.5, 0.5),
        ];
        let spec = GroupSpec::new(vec![2, 1]).unwrap();
        let first = sequential_construct(&roster, &spec, &cm).unwrap();
        let mut state = RotationState::new(&first, 7, 1, false).unwrap();
        // only 3 partitions of 3 students into (2,1) exist
        next_arrangement(&mut state, &roster, &spec, &cm).unwrap();
        next_arrangement(&mut state, &roster, &spec, &cm).unwrap();
        let err = next_arrangement(&mut state, &roster, &spec, &cm).unwrap_err();
        assert!(matches!(err, AssignError::ExhaustedRetries { .. }));
        assert_eq!(state.history.len(), 3);
    }

    #[test]
    fn no_repeat_pairs_clears_consecutive_overlap() {
        let cm = CostModel::raw();
        let roster = random_raw_roster(9, &mut StdRng::seed_from_u64(19));
        let spec = GroupSpec::new(vec![3, 3, 3]).unwrap();
        let first = improve_swaps(
            &sequential_construct(&roster, &spec, &cm).unwrap(),
            &roster,
            &cm,
            DEFAULT_MAX_PASSES,
        )
        .unwrap();
        let mut state = RotationState::new(&first, 42, 3, true).unwrap();
        next_arrangement(&mut state, &roster, &spec, &cm).unwrap();
        let index = roster_index(&roster).unwrap();
        let a = groups_to_indices(&state.history[0], &index, roster.len()).unwrap();
        let b = groups_to_indices(&state.history[1], &index, roster.len()).unwrap();
        let pairs_a = co_grouped_index_pairs(&a);
        assert!(
            !shares_any_pair(&b, &pairs_a),
            "consecutive arrangements share a pair:\n{:?}\n{:?}",
            state.history[0],
            state.history[1]
        );
    }
}

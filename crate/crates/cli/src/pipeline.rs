//! The shared pipeline stages and on-disk payload formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cub_core::assign::{Arrangement, CostModel, RotationState, RNG_ALGORITHM};
use cub_core::classify::{classify, Association, CategoryLabel, LabeledStudent};
use cub_core::fcm::{assign_clusters, fcm_fit, ClusterAssignment, ClusterModel, FcmResult, Point};
use cub_core::fis::{evaluate_student, Coefficients, RuleBase};
use cub_core::survey::{parse_survey, SurveyVocabulary, SURVEY_HEADER};

use crate::config::PipelineConfig;

pub const COEFFICIENTS_HEADER: &str = "student_id,D,d";

pub fn load_vocabulary(cfg: &PipelineConfig) -> Result<SurveyVocabulary> {
    let vocab = match &cfg.vocabulary {
        Some(path) => {
            let file = fs::File::open(path)
                .with_context(|| format!("cannot open vocabulary file {}", path.display()))?;
            SurveyVocabulary::from_json_reader(file)
                .with_context(|| format!("invalid vocabulary file {}", path.display()))?
        }
        None => SurveyVocabulary::default_vocabulary(),
    };
    vocab.validate(cfg.expected_rules)?;
    Ok(vocab)
}

pub fn load_rule_base(cfg: &PipelineConfig, vocab: &SurveyVocabulary) -> Result<RuleBase> {
    match &cfg.rule_base {
        Some(path) => {
            let file = fs::File::open(path)
                .with_context(|| format!("cannot open rule base file {}", path.display()))?;
            RuleBase::from_json_reader(file, vocab.input_sizes(), cfg.output_terms)
                .with_context(|| format!("invalid rule base file {}", path.display()))
        }
        None => Ok(RuleBase::with_default_rules(
            vocab.input_sizes(),
            cfg.output_terms,
        )?),
    }
}

/// Score every student in a survey file.
pub fn evaluate_survey_file(
    path: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<(String, Coefficients)>> {
    let vocab = load_vocabulary(cfg)?;
    let rule_base = load_rule_base(cfg, &vocab)?;
    let raw = fs::File::open(path)
        .with_context(|| format!("cannot open survey file {}", path.display()))?;
    let roster = parse_survey(raw, &vocab)?;
    roster
        .entries()
        .iter()
        .map(|entry| {
            let coeffs = evaluate_student(entry, &vocab, &rule_base)?;
            Ok((entry.student_id.clone(), coeffs))
        })
        .collect()
}

/// Accept either a survey CSV or a coefficients CSV, recognized by header.
pub fn read_survey_or_coefficients(
    path: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<(String, Coefficients)>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read input file {}", path.display()))?;
    let first_line = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if first_line == SURVEY_HEADER {
        evaluate_survey_file(path, cfg)
    } else if first_line == COEFFICIENTS_HEADER {
        parse_coefficients_csv(&text)
            .with_context(|| format!("invalid coefficients file {}", path.display()))
    } else {
        bail!(
            "input file {} has header `{first_line}`; expected `{SURVEY_HEADER}` or `{COEFFICIENTS_HEADER}`",
            path.display()
        )
    }
}

pub fn parse_coefficients_csv(text: &str) -> Result<Vec<(String, Coefficients)>> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("row {row}: expected 3 columns, found {}", fields.len());
        }
        let id = fields[0].trim().to_string();
        if id.is_empty() {
            bail!("row {row}: student id is empty");
        }
        if !seen.insert(id.clone()) {
            bail!("row {row}: duplicate student id `{id}`");
        }
        let parse = |name: &str, raw: &str| -> Result<f64> {
            let v: f64 = raw
                .trim()
                .parse()
                .with_context(|| format!("row {row}: {name} value `{raw}` is not a number"))?;
            if !(0.0..=1.0).contains(&v) {
                bail!("row {row}: {name} value {v} outside [0, 1]");
            }
            Ok(v)
        };
        out.push((
            id,
            Coefficients {
                distractibility: parse("D", fields[1])?,
                distractiveness: parse("d", fields[2])?,
            },
        ));
    }
    if out.is_empty() {
        bail!("coefficients file contains no student rows");
    }
    Ok(out)
}

pub fn cluster_model(cfg: &PipelineConfig) -> ClusterModel {
    let mut model = ClusterModel::seeded();
    model.mode = cfg.fcm_mode;
    model.fuzzifier = cfg.fuzzifier;
    model.tolerance = cfg.fcm_tolerance;
    model.max_iterations = cfg.fcm_max_iterations;
    model
}

pub fn cost_model(cfg: &PipelineConfig) -> CostModel {
    if cfg.use_raw_coefficients {
        CostModel::raw()
    } else {
        CostModel::label_based()
    }
}

pub struct ClassifiedRoster {
    pub fcm: FcmResult,
    pub assignments: Vec<ClusterAssignment>,
    pub labeled: Vec<LabeledStudent>,
}

pub fn cluster_and_classify(
    coefficients: &[(String, Coefficients)],
    cfg: &PipelineConfig,
) -> Result<ClassifiedRoster> {
    let points: Vec<Point> = coefficients
        .iter()
        .map(|(_, c)| [c.distractibility, c.distractiveness])
        .collect();
    let fcm = fcm_fit(&points, &cluster_model(cfg))?;
    let ids: Vec<String> = coefficients.iter().map(|(id, _)| id.clone()).collect();
    let assignments = assign_clusters(&ids, &fcm.memberships);
    let labeled = classify(&assignments, coefficients)?;
    Ok(ClassifiedRoster {
        fcm,
        assignments,
        labeled,
    })
}

// ---------------------------------------------------------------------------
// on-disk payloads
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ArrangementFile {
    pub groups: Vec<Vec<String>>,
    pub objective: f64,
    pub sequence_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_id: String,
    pub cluster: u8,
    pub association: Association,
    #[serde(rename = "D")]
    pub distractibility: f64,
    #[serde(rename = "d")]
    pub distractiveness: f64,
    pub primary_membership: f64,
}

impl From<&LabeledStudent> for StudentRecord {
    fn from(s: &LabeledStudent) -> Self {
        Self {
            student_id: s.student_id.clone(),
            cluster: s.label.cluster,
            association: s.label.association,
            distractibility: s.coefficients.distractibility,
            distractiveness: s.coefficients.distractiveness,
            primary_membership: s.primary_membership,
        }
    }
}

impl StudentRecord {
    pub fn to_labeled(&self) -> Result<LabeledStudent> {
        if !(1..=3).contains(&self.cluster) {
            bail!(
                "student `{}` has cluster {}, expected 1..=3",
                self.student_id,
                self.cluster
            );
        }
        Ok(LabeledStudent {
            student_id: self.student_id.clone(),
            label: CategoryLabel::new(self.cluster, self.association),
            coefficients: Coefficients {
                distractibility: self.distractibility,
                distractiveness: self.distractiveness,
            },
            primary_membership: self.primary_membership,
        })
    }
}

/// Everything a rotation needs to continue: the reproducibility knobs, the
/// labeled roster snapshot, and all emitted arrangements with objectives.
#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub rng_algorithm: String,
    pub rng_seed: u64,
    pub perturbation_swaps: usize,
    pub no_repeat_pairs: bool,
    pub use_raw_coefficients: bool,
    pub students: Vec<StudentRecord>,
    pub history: Vec<Vec<Vec<String>>>,
    pub objectives: Vec<f64>,
}

impl StateFile {
    pub fn new(
        first: &Arrangement,
        labeled: &[LabeledStudent],
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        let rotation =
            RotationState::new(first, cfg.seed, cfg.perturbation_swaps, cfg.no_repeat_pairs)?;
        Ok(Self {
            rng_algorithm: RNG_ALGORITHM.to_string(),
            rng_seed: rotation.rng_seed,
            perturbation_swaps: rotation.perturbation_swaps,
            no_repeat_pairs: rotation.no_repeat_pairs,
            use_raw_coefficients: cfg.use_raw_coefficients,
            students: labeled.iter().map(StudentRecord::from).collect(),
            history: rotation.history,
            objectives: vec![first.objective],
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read rotation state {}", path.display()))?;
        let state: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid rotation state {}", path.display()))?;
        if state.rng_algorithm != RNG_ALGORITHM {
            bail!(
                "rotation state {} uses rng algorithm `{}`, this build implements `{RNG_ALGORITHM}`",
                path.display(),
                state.rng_algorithm
            );
        }
        if state.students.is_empty() {
            bail!("rotation state {} has no students", path.display());
        }
        if state.objectives.len() != state.history.len() {
            bail!(
                "rotation state {} records {} objectives for {} arrangements",
                path.display(),
                state.objectives.len(),
                state.history.len()
            );
        }
        state.rotation_state()?.validate()?;
        Ok(state)
    }

    pub fn rotation_state(&self) -> Result<RotationState> {
        Ok(RotationState {
            history: self.history.clone(),
            rng_seed: self.rng_seed,
            perturbation_swaps: self.perturbation_swaps,
            no_repeat_pairs: self.no_repeat_pairs,
        })
    }

    pub fn labeled_roster(&self) -> Result<Vec<LabeledStudent>> {
        self.students
            .iter()
            .map(StudentRecord::to_labeled)
            .collect()
    }

    pub fn cost_model(&self) -> CostModel {
        if self.use_raw_coefficients {
            CostModel::raw()
        } else {
            CostModel::label_based()
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub objectives: Vec<f64>,
    pub degradation_ratios: Vec<f64>,
}

pub fn degradation_ratio(objective_0: f64, objective_t: f64) -> f64 {
    if objective_0 > 0.0 {
        objective_t / objective_0
    } else if objective_t.abs() <= 1e-12 {
        1.0
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// text renderings
// ---------------------------------------------------------------------------

pub fn coefficients_csv(coefficients: &[(String, Coefficients)]) -> String {
    let mut out = String::from(COEFFICIENTS_HEADER);
    out.push('\n');
    for (id, c) in coefficients {
        writeln!(out, "{id},{},{}", c.distractibility, c.distractiveness).unwrap();
    }
    out
}

pub fn clusters_csv(assignments: &[ClusterAssignment]) -> String {
    let mut out = String::from("student_id,u1,u2,u3,primary\n");
    for a in assignments {
        writeln!(
            out,
            "{},{},{},{},{}",
            a.student_id, a.memberships[0], a.memberships[1], a.memberships[2], a.primary
        )
        .unwrap();
    }
    out
}

pub fn labels_csv(labeled: &[LabeledStudent]) -> String {
    let mut out = String::from("student_id,cluster,association,D,d,primary_membership\n");
    for s in labeled {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.student_id,
            s.label.cluster,
            s.label.association,
            s.coefficients.distractibility,
            s.coefficients.distractiveness,
            s.primary_membership
        )
        .unwrap();
    }
    out
}

/// One line per group.
pub fn arrangement_text(groups: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (i, group) in groups.iter().enumerate() {
        writeln!(out, "group {}: {}", i + 1, group.join(", ")).unwrap();
    }
    out
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

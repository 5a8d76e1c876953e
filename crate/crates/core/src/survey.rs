//! Survey vocabularies, roster ingestion, and crisp score mapping.
//!
//! Teachers answer three questions per student with ordered linguistic terms.
//! Each answer maps onto the `[0, 1]` input universe of the inference engine:
//! the least problematic term scores 0, the most problematic scores 1, with
//! uniform spacing in between.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

/// Exact header a survey CSV must carry.
pub const SURVEY_HEADER: &str = "student_id,noise,focus,seated";

/// Rule count of the reference configuration (7 noise x 7 focus x 9 seated terms).
pub const DEFAULT_RULE_COUNT: usize = 441;

/// The three survey questions asked about every student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuestionId {
    Noise,
    Focus,
    Seated,
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestionId::Noise => "noise",
            QuestionId::Focus => "focus",
            QuestionId::Seated => "seated",
        })
    }
}

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("survey header must be `{SURVEY_HEADER}`, found `{0}`")]
    InvalidHeader(String),
    #[error("row {row}: expected 4 columns, found {found}")]
    MalformedRow { row: u64, found: usize },
    #[error("unknown {question} answer `{term}`{}", .row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    UnknownTerm {
        question: QuestionId,
        term: String,
        row: Option<u64>,
    },
    #[error("row {row}: duplicate student id `{id}`")]
    DuplicateStudentId { row: u64, id: String },
    #[error("row {row}: student id is empty")]
    EmptyStudentId { row: u64 },
    #[error("survey contains no student rows")]
    EmptyRoster,
    #[error("{question} vocabulary lists `{term}` more than once")]
    DuplicateTerm { question: QuestionId, term: String },
    #[error("{question} vocabulary needs at least 2 terms, found {found}")]
    TooFewTerms { question: QuestionId, found: usize },
    #[error("{question} vocabulary contains an empty term")]
    EmptyTerm { question: QuestionId },
    #[error("vocabulary sizes {sizes:?} produce {product} rules, expected {expected}")]
    RuleCountMismatch {
        sizes: [usize; 3],
        product: usize,
        expected: usize,
    },
    #[error("failed to read survey: {0}")]
    Csv(#[from] csv::Error),
    #[error("failed to parse vocabulary file: {0}")]
    VocabularyFormat(#[from] serde_json::Error),
}

/// Ordered answer vocabulary for one survey question, least problematic
/// behavior first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionVocabulary {
    question: QuestionId,
    terms: Vec<String>,
}

impl QuestionVocabulary {
    /// Terms are trimmed; duplicates are detected case-insensitively.
    pub fn new(question: QuestionId, terms: Vec<String>) -> Result<Self, SurveyError> {
        let terms: Vec<String> = terms.into_iter().map(|t| t.trim().to_string()).collect();
        if terms.len() < 2 {
            return Err(SurveyError::TooFewTerms {
                question,
                found: terms.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for term in &terms {
            if term.is_empty() {
                return Err(SurveyError::EmptyTerm { question });
            }
            if !seen.insert(term.to_lowercase()) {
                return Err(SurveyError::DuplicateTerm {
                    question,
                    term: term.clone(),
                });
            }
        }
        Ok(Self { question, terms })
    }

    pub fn question(&self) -> QuestionId {
        self.question
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Index of an answer, matched case-insensitively with surrounding
    /// whitespace ignored.
    pub fn index_of(&self, term: &str) -> Option<usize> {
        let needle = term.trim().to_lowercase();
        self.terms.iter().position(|t| t.to_lowercase() == needle)
    }

    /// Canonical (vocabulary) spelling of an answer.
    pub fn canonical(&self, term: &str) -> Result<&str, SurveyError> {
        self.index_of(term)
            .map(|i| self.terms[i].as_str())
            .ok_or_else(|| self.unknown(term))
    }

    /// Crisp score of an answer: term index divided by the maximum index, so
    /// the least problematic term maps to 0.0 and the most problematic to 1.0.
    pub fn crisp_score(&self, term: &str) -> Result<f64, SurveyError> {
        let idx = self.index_of(term).ok_or_else(|| self.unknown(term))?;
        Ok(idx as f64 / (self.terms.len() - 1) as f64)
    }

    fn unknown(&self, term: &str) -> SurveyError {
        SurveyError::UnknownTerm {
            question: self.question,
            term: term.trim().to_string(),
            row: None,
        }
    }
}

/// The complete three-question vocabulary a survey is validated against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyVocabulary {
    noise: QuestionVocabulary,
    focus: QuestionVocabulary,
    seated: QuestionVocabulary,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    noise: Vec<String>,
    focus: Vec<String>,
    seated: Vec<String>,
}

impl SurveyVocabulary {
    pub fn from_terms(
        noise: Vec<String>,
        focus: Vec<String>,
        seated: Vec<String>,
    ) -> Result<Self, SurveyError> {
        Ok(Self {
            noise: QuestionVocabulary::new(QuestionId::Noise, noise)?,
            focus: QuestionVocabulary::new(QuestionId::Focus, focus)?,
            seated: QuestionVocabulary::new(QuestionId::Seated, seated)?,
        })
    }

    /// Load from JSON: `{"noise": [...], "focus": [...], "seated": [...]}`.
    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self, SurveyError> {
        let file: VocabularyFile = serde_json::from_reader(reader)?;
        Self::from_terms(file.noise, file.focus, file.seated)
    }

    /// The shipped vocabulary: 7 noise terms, 7 focus terms, 9 seated terms,
    /// whose product matches [`DEFAULT_RULE_COUNT`].
    pub fn default_vocabulary() -> Self {
        let noise = [
            "Silent",
            "Whisper quiet",
            "Quiet",
            "Moderately talkative",
            "Talkative",
            "Loud",
            "Constantly loud",
        ];
        let focus = [
            "Always focused",
            "Usually focused",
            "Often focused",
            "Sometimes focused",
            "Rarely focused",
            "Almost never focused",
            "Never focused",
        ];
        let seated = [
            "Always seated",
            "Almost always seated",
            "Usually seated",
            "Often seated",
            "Sometimes wandering",
            "Often wandering",
            "Frequently out of seat",
            "Almost never seated",
            "Never seated",
        ];
        let owned = |terms: &[&str]| terms.iter().map(|t| t.to_string()).collect();
        Self::from_terms(owned(&noise), owned(&focus), owned(&seated))
            .expect("shipped vocabulary is valid")
    }

    pub fn question(&self, id: QuestionId) -> &QuestionVocabulary {
        match id {
            QuestionId::Noise => &self.noise,
            QuestionId::Focus => &self.focus,
            QuestionId::Seated => &self.seated,
        }
    }

    /// Term counts in (noise, focus, seated) order.
    pub fn input_sizes(&self) -> [usize; 3] {
        [
            self.noise.term_count(),
            self.focus.term_count(),
            self.seated.term_count(),
        ]
    }

    /// The product of term counts must equal the configured rule count; any
    /// factorization is accepted.
    pub fn validate(&self, expected_rule_count: usize) -> Result<(), SurveyError> {
        let sizes = self.input_sizes();
        let product: usize = sizes.iter().product();
        if product != expected_rule_count {
            return Err(SurveyError::RuleCountMismatch {
                sizes,
                product,
                expected: expected_rule_count,
            });
        }
        Ok(())
    }
}

impl Default for SurveyVocabulary {
    fn default() -> Self {
        Self::default_vocabulary()
    }
}

/// One student's three answers, stored in canonical vocabulary spelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyEntry {
    pub student_id: String,
    pub noise_answer: String,
    pub focus_answer: String,
    pub seated_answer: String,
}

impl SurveyEntry {
    pub fn answer(&self, question: QuestionId) -> &str {
        match question {
            QuestionId::Noise => &self.noise_answer,
            QuestionId::Focus => &self.focus_answer,
            QuestionId::Seated => &self.seated_answer,
        }
    }
}

/// All survey entries in file order, with pairwise-distinct student ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    entries: Vec<SurveyEntry>,
}

impl Roster {
    pub fn entries(&self) -> &[SurveyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.student_id.as_str())
    }
}

/// Parse a survey CSV (`student_id,noise,focus,seated`), validating every
/// answer against the vocabulary. Row order is preserved.
pub fn parse_survey<R: Read>(raw: R, vocab: &SurveyVocabulary) -> Result<Roster, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(raw);

    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != SURVEY_HEADER {
        return Err(SurveyError::InvalidHeader(header));
    }

    let mut entries = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(SurveyError::MalformedRow {
                row,
                found: record.len(),
            });
        }
        let student_id = record[0].trim().to_string();
        if student_id.is_empty() {
            return Err(SurveyError::EmptyStudentId { row });
        }
        if !seen_ids.insert(student_id.clone()) {
            return Err(SurveyError::DuplicateStudentId {
                row,
                id: student_id,
            });
        }
        entries.push(SurveyEntry {
            student_id,
            noise_answer: resolve(vocab.question(QuestionId::Noise), &record[1], row)?,
            focus_answer: resolve(vocab.question(QuestionId::Focus), &record[2], row)?,
            seated_answer: resolve(vocab.question(QuestionId::Seated), &record[3], row)?,
        });
    }
    if entries.is_empty() {
        return Err(SurveyError::EmptyRoster);
    }
    Ok(Roster { entries })
}

fn resolve(vocab: &QuestionVocabulary, raw: &str, row: u64) -> Result<String, SurveyError> {
    match vocab.canonical(raw) {
        Ok(term) => Ok(term.to_string()),
        Err(SurveyError::UnknownTerm { question, term, .. }) => Err(SurveyError::UnknownTerm {
            question,
            term,
            row: Some(row),
        }),
        Err(other) => Err(other),
    }
}

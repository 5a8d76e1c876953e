//! Type-1 Mamdani inference: three crisp answer scores in, two coefficients out.
//!
//! All variables live on `[0, 1]` with uniformly spaced triangular terms at
//! 50% overlap. Rules combine antecedent memberships with `min`, consequents
//! are clipped at the firing strength and aggregated pointwise with `max`,
//! and the crisp output is the centroid of the aggregate sampled on a uniform
//! grid.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survey::{QuestionId, SurveyEntry, SurveyError, SurveyVocabulary};

/// Grid resolution used for aggregation and centroid defuzzification.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Term count of each output variable.
pub const DEFAULT_OUTPUT_TERMS: usize = 5;

#[derive(Debug, Error)]
pub enum FisError {
    #[error("a linguistic variable needs at least 2 terms, got {0}")]
    InvalidSize(usize),
    #[error("triangular membership function requires a <= b <= c with a < c, got ({a}, {b}, {c})")]
    InvalidMf { a: f64, b: f64, c: f64 },
    #[error("input {0} lies outside the [0, 1] universe")]
    OutOfUniverse(f64),
    #[error("aggregated fuzzy set has zero area")]
    ZeroArea,
    #[error("rule base expects input sizes {expected:?} but the vocabulary provides {found:?}")]
    VocabularyMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },
    #[error("rule antecedent {antecedent:?} out of range for input sizes {sizes:?}")]
    AntecedentOutOfRange {
        antecedent: [usize; 3],
        sizes: [usize; 3],
    },
    #[error("rule consequent {consequent:?} out of range for {output_terms} output terms")]
    ConsequentOutOfRange {
        consequent: [usize; 2],
        output_terms: usize,
    },
    #[error("duplicate rule for antecedent {0:?}")]
    DuplicateRule([usize; 3]),
    #[error("rule base has {found} rules, a complete base over these inputs needs {expected}")]
    IncompleteRuleBase { found: usize, expected: usize },
    #[error("failed to parse rule base file: {0}")]
    RuleFormat(#[from] serde_json::Error),
    #[error(transparent)]
    Survey(#[from] SurveyError),
}

/// Triangular membership function on the `[0, 1]` universe.
///
/// `a = b` or `b = c` produce the shoulder ramps used at the universe edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularMf {
    a: f64,
    b: f64,
    c: f64,
}

impl TriangularMf {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, FisError> {
        let ordered = a <= b && b <= c && a < c;
        if !ordered || !a.is_finite() || !b.is_finite() || !c.is_finite() {
            return Err(FisError::InvalidMf { a, b, c });
        }
        Ok(Self { a, b, c })
    }

    pub fn peak(&self) -> f64 {
        self.b
    }

    pub fn feet(&self) -> (f64, f64) {
        (self.a, self.c)
    }

    pub fn membership(&self, x: f64) -> f64 {
        if x < self.a || x > self.c {
            return 0.0;
        }
        if x == self.b {
            return 1.0;
        }
        if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.c - x) / (self.c - self.b)
        }
    }
}

/// A named variable with uniformly partitioned triangular terms: `n` terms
/// peak at `i/(n-1)` and each foot sits on the neighboring peak.
#[derive(Debug, Clone)]
pub struct LinguisticVariable {
    name: String,
    terms: Vec<TriangularMf>,
}

impl LinguisticVariable {
    pub fn uniform(name: impl Into<String>, term_count: usize) -> Result<Self, FisError> {
        if term_count < 2 {
            return Err(FisError::InvalidSize(term_count));
        }
        let span = (term_count - 1) as f64;
        let terms = (0..term_count)
            .map(|i| {
                let peak = i as f64 / span;
                let a = if i == 0 { peak } else { (i - 1) as f64 / span };
                let c = if i == term_count - 1 {
                    peak
                } else {
                    (i + 1) as f64 / span
                };
                TriangularMf { a, b: peak, c }
            })
            .collect();
        Ok(Self {
            name: name.into(),
            terms,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[TriangularMf] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Membership of `value` in every term.
    pub fn fuzzify(&self, value: f64) -> Result<Vec<f64>, FisError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(FisError::OutOfUniverse(value));
        }
        Ok(self.terms.iter().map(|t| t.membership(value)).collect())
    }
}

/// One inference rule: antecedent term indices for (noise, focus, seated),
/// consequent term indices for (D, d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(rename = "if")]
    pub antecedent: [usize; 3],
    #[serde(rename = "then")]
    pub consequent: [usize; 2],
}

/// A complete rule base: exactly one rule per antecedent combination, plus the
/// input and output variables inference runs over.
#[derive(Debug, Clone)]
pub struct RuleBase {
    rules: Vec<Rule>,
    input_vars: [LinguisticVariable; 3],
    output_vars: [LinguisticVariable; 2],
}

impl RuleBase {
    /// Build the shipped rule base. The D consequent of antecedent `(i, j, k)`
    /// is driven by the focus and seated deficits, the d consequent by the
    /// noise and seated deficits:
    ///
    /// ```text
    /// D_idx = round((j/(n2-1) + k/(n3-1)) / 2 * (out-1))
    /// d_idx = round((i/(n1-1) + k/(n3-1)) / 2 * (out-1))
    /// ```
    ///
    /// with half-up rounding.
    pub fn with_default_rules(
        input_sizes: [usize; 3],
        output_terms: usize,
    ) -> Result<Self, FisError> {
        for &n in &input_sizes {
            if n < 2 {
                return Err(FisError::InvalidSize(n));
            }
        }
        if output_terms < 2 {
            return Err(FisError::InvalidSize(output_terms));
        }
        let [n1, n2, n3] = input_sizes;
        let out_span = (output_terms - 1) as f64;
        let mut rules = Vec::with_capacity(n1 * n2 * n3);
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let noise = i as f64 / (n1 - 1) as f64;
                    let focus = j as f64 / (n2 - 1) as f64;
                    let seated = k as f64 / (n3 - 1) as f64;
                    let d_big = round_half_up((focus + seated) / 2.0 * out_span);
                    let d_small = round_half_up((noise + seated) / 2.0 * out_span);
                    rules.push(Rule {
                        antecedent: [i, j, k],
                        consequent: [d_big, d_small],
                    });
                }
            }
        }
        Self::from_rules(rules, input_sizes, output_terms)
    }

    /// Assemble a rule base from explicit rules, enforcing completeness:
    /// every antecedent combination exactly once, all indices in range.
    pub fn from_rules(
        rules: Vec<Rule>,
        input_sizes: [usize; 3],
        output_terms: usize,
    ) -> Result<Self, FisError> {
        for &n in &input_sizes {
            if n < 2 {
                return Err(FisError::InvalidSize(n));
            }
        }
        if output_terms < 2 {
            return Err(FisError::InvalidSize(output_terms));
        }
        let expected = input_sizes.iter().product::<usize>();
        let mut seen = vec![false; expected];
        for rule in &rules {
            let [i, j, k] = rule.antecedent;
            if i >= input_sizes[0] || j >= input_sizes[1] || k >= input_sizes[2] {
                return Err(FisError::AntecedentOutOfRange {
                    antecedent: rule.antecedent,
                    sizes: input_sizes,
                });
            }
            if rule.consequent.iter().any(|&c| c >= output_terms) {
                return Err(FisError::ConsequentOutOfRange {
                    consequent: rule.consequent,
                    output_terms,
                });
            }
            let flat = (i * input_sizes[1] + j) * input_sizes[2] + k;
            if seen[flat] {
                return Err(FisError::DuplicateRule(rule.antecedent));
            }
            seen[flat] = true;
        }
        if rules.len() != expected {
            return Err(FisError::IncompleteRuleBase {
                found: rules.len(),
                expected,
            });
        }
        Ok(Self {
            rules,
            input_vars: [
                LinguisticVariable::uniform("noise", input_sizes[0])?,
                LinguisticVariable::uniform("focus", input_sizes[1])?,
                LinguisticVariable::uniform("seated", input_sizes[2])?,
            ],
            output_vars: [
                LinguisticVariable::uniform("D", output_terms)?,
                LinguisticVariable::uniform("d", output_terms)?,
            ],
        })
    }

    /// Load a rule base override from JSON: `[{"if": [i, j, k], "then": [D, d]}, ...]`.
    pub fn from_json_reader<R: Read>(
        reader: R,
        input_sizes: [usize; 3],
        output_terms: usize,
    ) -> Result<Self, FisError> {
        let rules: Vec<Rule> = serde_json::from_reader(reader)?;
        Self::from_rules(rules, input_sizes, output_terms)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn input_sizes(&self) -> [usize; 3] {
        [
            self.input_vars[0].term_count(),
            self.input_vars[1].term_count(),
            self.input_vars[2].term_count(),
        ]
    }

    pub fn output_terms(&self) -> usize {
        self.output_vars[0].term_count()
    }

    pub fn input_vars(&self) -> &[LinguisticVariable; 3] {
        &self.input_vars
    }

    pub fn output_vars(&self) -> &[LinguisticVariable; 2] {
        &self.output_vars
    }

    /// Minimum antecedent membership of every rule at the given crisp inputs.
    pub fn firing_strengths(&self, inputs: [f64; 3]) -> Result<Vec<f64>, FisError> {
        let memberships = [
            self.input_vars[0].fuzzify(inputs[0])?,
            self.input_vars[1].fuzzify(inputs[1])?,
            self.input_vars[2].fuzzify(inputs[2])?,
        ];
        Ok(self
            .rules
            .iter()
            .map(|rule| {
                memberships[0][rule.antecedent[0]]
                    .min(memberships[1][rule.antecedent[1]])
                    .min(memberships[2][rule.antecedent[2]])
            })
            .collect())
    }

    /// Mamdani inference on the default grid. Returns the aggregated fuzzy
    /// sets for D and d.
    pub fn infer(&self, inputs: [f64; 3]) -> Result<(SampledSet, SampledSet), FisError> {
        self.infer_on_grid(inputs, DEFAULT_GRID_POINTS)
    }

    pub fn infer_on_grid(
        &self,
        inputs: [f64; 3],
        grid_points: usize,
    ) -> Result<(SampledSet, SampledSet), FisError> {
        if grid_points < 2 {
            return Err(FisError::InvalidSize(grid_points));
        }
        let strengths = self.firing_strengths(inputs)?;
        let span = (grid_points - 1) as f64;
        let mut aggregates = [vec![0.0; grid_points], vec![0.0; grid_points]];
        for (rule, &strength) in self.rules.iter().zip(&strengths) {
            if strength <= 0.0 {
                continue;
            }
            for (out, aggregate) in aggregates.iter_mut().enumerate() {
                let mf = &self.output_vars[out].terms()[rule.consequent[out]];
                for (g, slot) in aggregate.iter_mut().enumerate() {
                    let clipped = mf.membership(g as f64 / span).min(strength);
                    if clipped > *slot {
                        *slot = clipped;
                    }
                }
            }
        }
        let [d_big, d_small] = aggregates;
        Ok((SampledSet::new(d_big), SampledSet::new(d_small)))
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// A fuzzy set sampled on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSet {
    values: Vec<f64>,
}

impl SampledSet {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid coordinate of sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.values.len() - 1) as f64
    }

    pub fn max_height(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Crisp value of an aggregated set: the sample-weighted centroid
/// `sum(x_i * mu_i) / sum(mu_i)`.
pub fn defuzzify_centroid(set: &SampledSet) -> Result<f64, FisError> {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (i, &mu) in set.values().iter().enumerate() {
        numerator += set.x(i) * mu;
        denominator += mu;
    }
    if denominator <= 0.0 {
        return Err(FisError::ZeroArea);
    }
    Ok(numerator / denominator)
}

/// The two coefficients inferred for one student: `D` (how prone the student
/// is to being distracted) and `d` (how likely the student is to distract
/// others). Both lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    #[serde(rename = "D")]
    pub distractibility: f64,
    #[serde(rename = "d")]
    pub distractiveness: f64,
}

/// Full evaluation of one survey entry: crisp scores, inference, centroid
/// defuzzification of both outputs.
pub fn evaluate_student(
    entry: &SurveyEntry,
    vocab: &SurveyVocabulary,
    rule_base: &RuleBase,
) -> Result<Coefficients, FisError> {
    let found = vocab.input_sizes();
    let expected = rule_base.input_sizes();
    if found != expected {
        return Err(FisError::VocabularyMismatch { expected, found });
    }
    let inputs = [
        vocab
            .question(QuestionId::Noise)
            .crisp_score(&entry.noise_answer)?,
        vocab
            .question(QuestionId::Focus)
            .crisp_score(&entry.focus_answer)?,
        vocab
            .question(QuestionId::Seated)
            .crisp_score(&entry.seated_answer)?,
    ];
    let (agg_d_big, agg_d_small) = rule_base.infer(inputs)?;
    Ok(Coefficients {
        distractibility: defuzzify_centroid(&agg_d_big)?,
        distractiveness: defuzzify_centroid(&agg_d_small)?,
    })
}

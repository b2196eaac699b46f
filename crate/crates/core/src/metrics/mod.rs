//! Readability, cohesion, structural adherence and manuscript comparison.

pub mod text;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article::{ManuscriptDraft, SectionId, CANONICAL_ORDER, PROSE_SECTIONS};
use crate::scalar::{clamp, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("degenerate text: {0}")]
    DegenerateText(String),
}

/// Flesch Reading Ease and Flesch-Kincaid Grade with the raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readability<T> {
    pub flesch_reading_ease: T,
    pub fk_grade: T,
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

pub fn readability<T: Scalar>(text: &str) -> Result<Readability<T>, MetricsError> {
    let words = text::words(text);
    if words.is_empty() {
        return Err(MetricsError::DegenerateText("no words".into()));
    }
    let sentences = text::sentence_count(text);
    if sentences == 0 {
        return Err(MetricsError::DegenerateText("no complete sentence".into()));
    }
    let syllables: usize = words.iter().map(|w| text::syllables(w)).sum();
    let wps = T::count(words.len()) / T::count(sentences);
    let spw = T::count(syllables) / T::count(words.len());
    Ok(Readability {
        flesch_reading_ease: T::lit(206.835) - T::lit(1.015) * wps - T::lit(84.6) * spw,
        fk_grade: T::lit(0.39) * wps + T::lit(11.8) * spw - T::lit(15.59),
        words: words.len(),
        sentences,
        syllables,
    })
}

/// Mean Jaccard similarity of content-word sets of adjacent paragraphs.
/// A single paragraph scores 1; two paragraphs without content words are
/// treated as identical.
pub fn cohesion<T: Scalar>(text: &str) -> Result<T, MetricsError> {
    let paras = text::paragraphs(text);
    if paras.is_empty() {
        return Err(MetricsError::DegenerateText("no paragraphs".into()));
    }
    if paras.len() == 1 {
        return Ok(T::one());
    }
    let sets: Vec<_> = paras.iter().map(|p| text::content_words(p)).collect();
    let mut total = T::zero();
    for pair in sets.windows(2) {
        let inter = pair[0].intersection(&pair[1]).count();
        let union = pair[0].union(&pair[1]).count();
        total = total
            + if union == 0 {
                T::one()
            } else {
                T::count(inter) / T::count(union)
            };
    }
    Ok(total / T::count(sets.len() - 1))
}

pub const PRESENCE_WEIGHT: u32 = 3;
const STRUCTURE_TOTAL: u32 = PRESENCE_WEIGHT * CANONICAL_ORDER.len() as u32 + 4;

/// Weighted share of passing structural checks.
///
/// Each canonical section's presence weighs [`PRESENCE_WEIGHT`]; the
/// remaining checks weigh 1: present sections are non-empty, present
/// sections follow canonical order without repeats, the abstract is within
/// half to twice its word target, and no two sections share their text.
/// Presence outweighs everything a removal could fix, so dropping a section
/// never raises the score.
pub fn structure_adherence(manuscript: &ManuscriptDraft, abstract_word_target: u32) -> f64 {
    let mut score = 0;
    for id in CANONICAL_ORDER {
        if manuscript.sections.iter().any(|s| s.id == id) {
            score += PRESENCE_WEIGHT;
        }
    }
    if manuscript.sections.iter().all(|s| !s.text.trim().is_empty()) {
        score += 1;
    }
    let indices: Vec<usize> = manuscript
        .sections
        .iter()
        .map(|s| s.id.canonical_index())
        .collect();
    if indices.windows(2).all(|w| w[0] < w[1]) {
        score += 1;
    }
    if let Some(abs) = manuscript.section(SectionId::Abstract) {
        let n = text::words(abs).len() as f64;
        let t = f64::from(abstract_word_target);
        if n >= 0.5 * t && n <= 2.0 * t {
            score += 1;
        }
    }
    let texts: Vec<&str> = manuscript
        .sections
        .iter()
        .map(|s| s.text.trim())
        .filter(|t| !t.is_empty())
        .collect();
    let unique: std::collections::BTreeSet<&str> = texts.iter().copied().collect();
    if unique.len() == texts.len() {
        score += 1;
    }
    f64::from(score) / f64::from(STRUCTURE_TOTAL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeWeights {
    pub readability: f64,
    pub cohesion: f64,
    pub structure: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self {
            readability: 0.3,
            cohesion: 0.35,
            structure: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub flesch_reading_ease: f64,
    pub cohesion: f64,
    pub structure: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            flesch_reading_ease: 30.0,
            cohesion: 0.15,
            structure: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityPolicy {
    pub weights: CompositeWeights,
    pub thresholds: Thresholds,
    pub abstract_word_target: u32,
}

impl Default for QualityPolicy {
    fn default() -> Self {
        Self {
            weights: CompositeWeights::default(),
            thresholds: Thresholds::default(),
            abstract_word_target: 200,
        }
    }
}

/// Metric names in their fixed reporting order.
pub const SECTION_METRICS: [&str; 2] = ["flesch_reading_ease", "cohesion"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingMetric {
    pub metric: String,
    /// None when the text was degenerate.
    pub value: Option<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionScores {
    pub readability: Option<Readability<f64>>,
    pub cohesion: Option<f64>,
    pub failing: Vec<FailingMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_section: BTreeMap<SectionId, SectionScores>,
    pub readability: f64,
    pub cohesion: f64,
    pub structure_score: f64,
    pub composite: f64,
    pub thresholds: QualityPolicy,
    pub passed: bool,
}

impl QualityReport {
    /// Sections with at least one failing metric.
    pub fn failing_sections(&self) -> Vec<SectionId> {
        self.per_section
            .iter()
            .filter(|(_, s)| !s.failing.is_empty())
            .map(|(id, _)| *id)
            .collect()
    }
}

pub fn score_section(text: &str, thresholds: &Thresholds) -> SectionScores {
    let readability = readability::<f64>(text).ok();
    let cohesion = cohesion::<f64>(text).ok();
    let mut failing = Vec::new();
    let fre = readability.map(|r| r.flesch_reading_ease);
    if fre.is_none_or(|v| v < thresholds.flesch_reading_ease) {
        failing.push(FailingMetric {
            metric: "flesch_reading_ease".into(),
            value: fre,
            threshold: thresholds.flesch_reading_ease,
        });
    }
    if cohesion.is_none_or(|v| v < thresholds.cohesion) {
        failing.push(FailingMetric {
            metric: "cohesion".into(),
            value: cohesion,
            threshold: thresholds.cohesion,
        });
    }
    SectionScores {
        readability,
        cohesion,
        failing,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate(manuscript: &ManuscriptDraft, policy: &QualityPolicy) -> QualityReport {
    let mut per_section = BTreeMap::new();
    for id in PROSE_SECTIONS {
        if let Some(text) = manuscript.section(id) {
            per_section.insert(id, score_section(text, &policy.thresholds));
        }
    }
    let readability = mean(per_section.values().map(|s| {
        s.readability
            .map_or(0.0, |r| clamp(r.flesch_reading_ease, 0.0, 100.0) / 100.0)
    }));
    let cohesion = mean(per_section.values().map(|s| s.cohesion.unwrap_or(0.0)));
    let structure_score = structure_adherence(manuscript, policy.abstract_word_target);
    let w = &policy.weights;
    let weight_sum = w.readability + w.cohesion + w.structure;
    let composite = if weight_sum > 0.0 {
        clamp(
            (w.readability * readability + w.cohesion * cohesion + w.structure * structure_score)
                / weight_sum,
            0.0,
            1.0,
        )
    } else {
        0.0
    };
    let passed = structure_score >= policy.thresholds.structure
        && per_section.values().all(|s| s.failing.is_empty());
    QualityReport {
        per_section,
        readability,
        cohesion,
        structure_score,
        composite,
        thresholds: policy.clone(),
        passed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Left,
    Right,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{side:?} manuscript: {error}")]
pub struct CompareError {
    pub side: Side,
    pub error: MetricsError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub left_id: String,
    pub right_id: String,
    pub left_values: BTreeMap<String, f64>,
    pub right_values: BTreeMap<String, f64>,
    pub per_metric_delta: BTreeMap<String, f64>,
    pub winner_per_metric: BTreeMap<String, Winner>,
    pub summary: String,
}

/// Metrics compared, all higher-is-better.
pub const COMPARED_METRICS: [&str; 5] = [
    "composite",
    "flesch_reading_ease",
    "readability",
    "cohesion",
    "structure",
];

fn comparison_values(
    m: &ManuscriptDraft,
    policy: &QualityPolicy,
    side: Side,
) -> Result<BTreeMap<String, f64>, CompareError> {
    let mut fre = Vec::new();
    for id in PROSE_SECTIONS {
        if let Some(text) = m.section(id) {
            let r = readability::<f64>(text).map_err(|error| CompareError { side, error })?;
            fre.push(r.flesch_reading_ease);
        }
    }
    let report = evaluate(m, policy);
    Ok(BTreeMap::from([
        ("composite".to_string(), report.composite),
        ("flesch_reading_ease".to_string(), mean(fre.into_iter())),
        ("readability".to_string(), report.readability),
        ("cohesion".to_string(), report.cohesion),
        ("structure".to_string(), report.structure_score),
    ]))
}

pub fn compare(
    left_id: &str,
    left: &ManuscriptDraft,
    right_id: &str,
    right: &ManuscriptDraft,
    policy: &QualityPolicy,
) -> Result<ComparisonReport, CompareError> {
    let lv = comparison_values(left, policy, Side::Left)?;
    let rv = comparison_values(right, policy, Side::Right)?;
    let mut per_metric_delta = BTreeMap::new();
    let mut winner_per_metric = BTreeMap::new();
    let mut summary = format!(
        "{:<22}{:>14}{:>14}{:>14}  winner\n",
        "metric", left_id, right_id, "delta"
    );
    for name in COMPARED_METRICS {
        let (l, r) = (lv[name], rv[name]);
        let delta = l - r;
        let winner = if l > r {
            Winner::Left
        } else if r > l {
            Winner::Right
        } else {
            Winner::Tie
        };
        let label = match winner {
            Winner::Left => "left",
            Winner::Right => "right",
            Winner::Tie => "tie",
        };
        let _ = writeln!(summary, "{name:<22}{l:>14.6}{r:>14.6}{delta:>+14.6}  {label}");
        per_metric_delta.insert(name.to_string(), delta);
        winner_per_metric.insert(name.to_string(), winner);
    }
    Ok(ComparisonReport {
        left_id: left_id.to_string(),
        right_id: right_id.to_string(),
        left_values: lv,
        right_values: rv,
        per_metric_delta,
        winner_per_metric,
        summary,
    })
}

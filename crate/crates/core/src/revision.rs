//! Metric-driven hill-climbing revision of a drafted manuscript.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article::{ManuscriptDraft, SectionId, TraceEntry, SYSTEM_PROMPT};
use crate::gateway::{estimate_tokens, Gateway, GatewayError, PromptRequest};
use crate::metrics::{evaluate, FailingMetric, QualityPolicy, QualityReport, SECTION_METRICS};

pub const MAX_ITERATIONS_CAP: u32 = 20;

#[derive(Debug, Error)]
pub enum RevisionError {
    #[error("max_iterations {0} exceeds the cap of {MAX_ITERATIONS_CAP}")]
    TooManyIterations(u32),
    #[error("revision request for {0} has no failing metrics")]
    NothingToRevise(SectionId),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionPolicy {
    pub max_iterations: u32,
    pub temperature: f64,
    /// Thresholds and composite weights, shared with evaluation.
    pub quality: QualityPolicy,
}

impl Default for RevisionPolicy {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            temperature: 0.7,
            quality: QualityPolicy::default(),
        }
    }
}

impl RevisionPolicy {
    pub fn validate(&self) -> Result<(), RevisionError> {
        if self.max_iterations > MAX_ITERATIONS_CAP {
            return Err(RevisionError::TooManyIterations(self.max_iterations));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionAttempt {
    pub section: SectionId,
    pub request_digest: String,
    /// Composite the manuscript would have with the candidate, when scored.
    pub candidate_composite: Option<f64>,
    pub accepted: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionIteration {
    /// Sections whose candidate replaced the previous text.
    pub sections_revised: Vec<SectionId>,
    pub composite_before: f64,
    pub composite_after: f64,
    pub accepted: bool,
    pub attempts: Vec<RevisionAttempt>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RevisionTrace {
    pub iterations: Vec<RevisionIteration>,
}

#[derive(Debug, Error)]
#[error("{error}")]
pub struct RevisionFailure {
    #[source]
    pub error: RevisionError,
    pub manuscript: Box<ManuscriptDraft>,
    pub partial_trace: RevisionTrace,
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn metric_order(name: &str) -> usize {
    SECTION_METRICS
        .iter()
        .position(|m| *m == name)
        .unwrap_or(SECTION_METRICS.len())
}

fn guidance(metric: &str) -> &'static str {
    match metric {
        "flesch_reading_ease" => "use shorter sentences and plainer words",
        "cohesion" => "carry the key terms of each paragraph into the next one",
        _ => "improve this measure",
    }
}

pub fn build_revision_prompt(
    section: SectionId,
    text: &str,
    failing: &[FailingMetric],
    temperature: f64,
) -> Result<PromptRequest, RevisionError> {
    if failing.is_empty() {
        return Err(RevisionError::NothingToRevise(section));
    }
    let mut ordered: Vec<&FailingMetric> = failing.iter().collect();
    ordered.sort_by(|a, b| {
        metric_order(&a.metric)
            .cmp(&metric_order(&b.metric))
            .then_with(|| a.metric.cmp(&b.metric))
    });
    let mut user = format!(
        "Revise the {} section below. Keep its claims and its place in the paper. \
Do not add headings, and do not merge or split sections.\n\nFailing checks:\n",
        section.heading().to_lowercase()
    );
    for m in ordered {
        let value = m.value.map_or_else(|| "unmeasurable".to_string(), fmt_num);
        let _ = writeln!(
            user,
            "- {}: {} (threshold {}); {}",
            m.metric,
            value,
            fmt_num(m.threshold),
            guidance(&m.metric)
        );
    }
    let _ = write!(
        user,
        "\nReturn only the revised section text.\n\n<section_id>{}</section_id>\n<section>\n{}\n</section>",
        section.as_str(),
        text.trim()
    );
    let max_tokens = (estimate_tokens(text) * 2).clamp(256, u64::from(u32::MAX)) as u32;
    Ok(PromptRequest::new(
        SYSTEM_PROMPT,
        user,
        temperature,
        max_tokens,
        "revise",
    )?)
}

/// Sum of relative shortfalls; an unmeasurable metric counts as a full miss.
fn severity(failing: &[FailingMetric]) -> f64 {
    failing
        .iter()
        .map(|m| match m.value {
            Some(v) if m.threshold.abs() > f64::EPSILON => {
                ((m.threshold - v) / m.threshold.abs()).max(0.0)
            }
            Some(v) => (m.threshold - v).max(0.0),
            None => 1.0,
        })
        .sum()
}

/// Failing sections, worst first.
pub fn revision_order(report: &QualityReport) -> Vec<(SectionId, Vec<FailingMetric>)> {
    let mut out: Vec<(SectionId, Vec<FailingMetric>)> = report
        .per_section
        .iter()
        .filter(|(_, s)| !s.failing.is_empty())
        .map(|(id, s)| (*id, s.failing.clone()))
        .collect();
    out.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then_with(|| {
                severity(&b.1)
                    .partial_cmp(&severity(&a.1))
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| a.0.canonical_index().cmp(&b.0.canonical_index()))
    });
    out
}

fn is_structural(candidate: &str) -> bool {
    candidate.lines().any(|l| l.trim_start().starts_with('#'))
}

/// Revises failing prose sections until the quality policy passes or the
/// iteration limit is reached. A candidate is kept only when the composite
/// does not drop.
pub fn revise(
    manuscript: &ManuscriptDraft,
    policy: &RevisionPolicy,
    gateway: &Gateway,
) -> Result<(ManuscriptDraft, RevisionTrace), RevisionFailure> {
    let mut current = manuscript.clone();
    let mut trace = RevisionTrace::default();
    if let Err(error) = policy.validate() {
        return Err(RevisionFailure {
            error,
            manuscript: Box::new(current),
            partial_trace: trace,
        });
    }
    for _ in 0..policy.max_iterations {
        let report = evaluate(&current, &policy.quality);
        if report.passed {
            break;
        }
        let order = revision_order(&report);
        if order.is_empty() {
            // Only structure fails, which revision may not change.
            break;
        }
        let composite_before = report.composite;
        let mut composite = composite_before;
        let mut iteration = RevisionIteration {
            sections_revised: Vec::new(),
            composite_before,
            composite_after: composite_before,
            accepted: false,
            attempts: Vec::new(),
        };
        for (id, failing) in order {
            let text = current.section(id).unwrap_or_default().to_string();
            let step = build_revision_prompt(id, &text, &failing, policy.temperature)
                .and_then(|req| Ok((gateway.complete(&req)?, req)));
            let (result, request) = match step {
                Ok(v) => v,
                Err(error) => {
                    iteration.composite_after = composite;
                    iteration.accepted = !iteration.sections_revised.is_empty();
                    trace.iterations.push(iteration);
                    return Err(RevisionFailure {
                        error,
                        manuscript: Box::new(current),
                        partial_trace: trace,
                    });
                }
            };
            let candidate_text = result.text.trim().to_string();
            let mut attempt = RevisionAttempt {
                section: id,
                request_digest: request.digest(),
                candidate_composite: None,
                accepted: false,
                reason: String::new(),
            };
            if candidate_text.is_empty() {
                attempt.reason = "empty candidate".into();
            } else if is_structural(&candidate_text) {
                attempt.reason = "candidate adds headings".into();
            } else {
                let mut candidate = current.clone();
                candidate.set_section(id, candidate_text);
                let score = evaluate(&candidate, &policy.quality).composite;
                attempt.candidate_composite = Some(score);
                if score >= composite {
                    attempt.accepted = true;
                    attempt.reason = "composite did not decrease".into();
                    candidate.trace.push(TraceEntry {
                        section: id,
                        stage: "revise".into(),
                        request_digest: request.digest(),
                        result_digest: result.digest(),
                        rule: result.rule.clone(),
                        request,
                    });
                    current = candidate;
                    composite = score;
                    iteration.sections_revised.push(id);
                } else {
                    attempt.reason = "composite decreased".into();
                }
            }
            iteration.attempts.push(attempt);
        }
        iteration.composite_after = composite;
        iteration.accepted = !iteration.sections_revised.is_empty();
        trace.iterations.push(iteration);
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_names_metrics_in_fixed_order() {
        let failing = vec![
            FailingMetric {
                metric: "cohesion".into(),
                value: Some(0.1),
                threshold: 0.3,
            },
            FailingMetric {
                metric: "flesch_reading_ease".into(),
                value: Some(12.25),
                threshold: 30.0,
            },
        ];
        let req = build_revision_prompt(SectionId::Methods, "Body text.", &failing, 0.7).unwrap();
        assert_eq!(req.tag, "revise");
        let fre = req.user_text.find("- flesch_reading_ease: 12.25 (threshold 30)").unwrap();
        let coh = req.user_text.find("- cohesion: 0.1 (threshold 0.3)").unwrap();
        assert!(fre < coh);
        assert!(req.user_text.contains("<section>\nBody text.\n</section>"));
        let again = build_revision_prompt(SectionId::Methods, "Body text.", &failing, 0.7).unwrap();
        assert_eq!(req, again);
    }

    #[test]
    fn empty_failing_is_rejected() {
        assert!(matches!(
            build_revision_prompt(SectionId::Results, "x.", &[], 0.7),
            Err(RevisionError::NothingToRevise(SectionId::Results))
        ));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(30.0), "30");
        assert_eq!(fmt_num(-0.00001), "0");
        assert_eq!(fmt_num(116.145), "116.145");
    }

    #[test]
    fn policy_cap() {
        let p = RevisionPolicy {
            max_iterations: 21,
            ..RevisionPolicy::default()
        };
        assert!(p.validate().is_err());
    }
}

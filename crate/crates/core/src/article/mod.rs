//! Drafting the manuscript sections from repository context.

mod context;
mod section;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{assemble_context, ContextBundle, FileOutline, PromptDigest, RepoDigest, TrimDecision};
pub use section::{
    ContextSource, SectionId, SectionSpec, ALWAYS_BOUND, CANONICAL_ORDER, GENERATION_ORDER,
    PROSE_SECTIONS,
};

use crate::analysis::CodeSummary;
use crate::digest::{sha256_hex, short};
use crate::gateway::{Gateway, GatewayError, PromptRequest};

#[derive(Debug, Error)]
pub enum ArticleError {
    #[error("no analyzed source files; nothing to write about")]
    EmptyRepository,
    #[error("context needs {needed} tokens even after trimming; budget is {budget}")]
    ContextOverBudget { needed: u64, budget: u64 },
    #[error("section {section}: placeholder {{{placeholder}}} is not bound by its inputs")]
    UnboundPlaceholder { section: SectionId, placeholder: String },
    #[error("invalid section specs: {0}")]
    InvalidSections(String),
    #[error("section {section}: prompt estimate {estimate} exceeds context budget {budget}")]
    PromptOverBudget {
        section: SectionId,
        estimate: u64,
        budget: u64,
    },
    #[error("section {0}: backend returned an empty response")]
    EmptyResponse(SectionId),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub const SYSTEM_PROMPT: &str = "You are an academic writing assistant. Write clear, formal prose \
grounded only in the supplied material. Do not invent citations, numbers or experiments.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub id: SectionId,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptMeta {
    pub source_root: String,
    pub timestamp: String,
    pub config_digest: String,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub section: SectionId,
    /// "generate" or "revise".
    pub stage: String,
    pub request_digest: String,
    pub result_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    pub request: PromptRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManuscriptDraft {
    pub title: String,
    pub sections: Vec<Section>,
    pub metadata: ManuscriptMeta,
    pub trace: Vec<TraceEntry>,
}

impl ManuscriptDraft {
    pub fn section(&self, id: SectionId) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.text.as_str())
    }

    /// Replaces the text of an existing section. Returns false when absent.
    pub fn set_section(&mut self, id: SectionId, text: String) -> bool {
        match self.sections.iter_mut().find(|s| s.id == id) {
            Some(s) => {
                if id == SectionId::Title {
                    self.title = text.clone();
                }
                s.text = text;
                true
            }
            None => false,
        }
    }

    pub fn without_section(&self, id: SectionId) -> Self {
        let mut m = self.clone();
        m.sections.retain(|s| s.id != id);
        m
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}\n", self.title.trim());
        for s in &self.sections {
            if s.id == SectionId::Title {
                continue;
            }
            let _ = writeln!(out, "## {}\n\n{}\n", s.id.heading(), s.text.trim());
        }
        out.push_str("## References\n\n");
        let root = if self.metadata.source_root.is_empty() {
            "the analyzed repository"
        } else {
            self.metadata.source_root.as_str()
        };
        let _ = writeln!(
            out,
            "1. Source repository `{root}`, the software artifact described in this manuscript."
        );
        out
    }

    /// Reads a manuscript rendered by [`ManuscriptDraft::to_markdown`] or
    /// written by hand with `#`/`##` headings. Unknown headings are ignored.
    pub fn from_markdown(text: &str) -> Self {
        let mut title = String::new();
        let mut sections: Vec<Section> = Vec::new();
        let mut current: Option<(Option<SectionId>, String)> = None;
        let flush = |cur: &mut Option<(Option<SectionId>, String)>, sections: &mut Vec<Section>| {
            if let Some((Some(id), body)) = cur.take() {
                sections.push(Section {
                    id,
                    text: body.trim().to_string(),
                });
            }
        };
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("## ") {
                flush(&mut current, &mut sections);
                current = Some((h.parse().ok(), String::new()));
            } else if let Some(h) = line.strip_prefix("# ") {
                flush(&mut current, &mut sections);
                title = h.trim().to_string();
                current = None;
            } else if let Some((_, body)) = current.as_mut() {
                body.push_str(line);
                body.push('\n');
            }
        }
        flush(&mut current, &mut sections);
        if !title.is_empty() {
            sections.insert(
                0,
                Section {
                    id: SectionId::Title,
                    text: title.clone(),
                },
            );
        }
        Self {
            title,
            sections,
            metadata: ManuscriptMeta::default(),
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub context_budget: u64,
    pub sections: Vec<SectionSpec>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            context_budget: 16_000,
            sections: SectionSpec::defaults(),
        }
    }
}

impl GenerationConfig {
    /// Fail-fast checks run before any backend call.
    pub fn validate(&self) -> Result<(), ArticleError> {
        for id in CANONICAL_ORDER {
            let n = self.sections.iter().filter(|s| s.id == id).count();
            if n != 1 {
                return Err(ArticleError::InvalidSections(format!(
                    "section {id} is specified {n} times"
                )));
            }
        }
        for spec in &self.sections {
            if let Some(placeholder) = spec.unbound_placeholder() {
                return Err(ArticleError::UnboundPlaceholder {
                    section: spec.id,
                    placeholder,
                });
            }
        }
        Ok(())
    }

    pub fn spec(&self, id: SectionId) -> Option<&SectionSpec> {
        self.sections.iter().find(|s| s.id == id)
    }
}

fn render_prior(prior: &[Section]) -> String {
    let mut out = String::from("<prior_sections>\n");
    for s in prior {
        let digest = sha256_hex(s.text.as_bytes());
        let _ = writeln!(
            out,
            "### {} [sha256:{}]\n{}\n",
            s.id.heading(),
            short(&digest, 12),
            s.text.trim()
        );
    }
    out.push_str("</prior_sections>");
    out
}

/// Short digest label used for a prior section inside later prompts.
pub fn section_label_digest(text: &str) -> String {
    short(&sha256_hex(text.as_bytes()), 12).to_string()
}

pub fn build_section_request(
    spec: &SectionSpec,
    context: &ContextBundle,
    prior: &[Section],
) -> Result<PromptRequest, ArticleError> {
    if let Some(placeholder) = spec.unbound_placeholder() {
        return Err(ArticleError::UnboundPlaceholder {
            section: spec.id,
            placeholder,
        });
    }
    let user = section::placeholder_re()
        .replace_all(&spec.prompt_template, |c: &regex::Captures<'_>| match &c[1] {
            "word_target" => spec.word_target.to_string(),
            "section_name" => spec.id.heading().to_lowercase(),
            "repo_digest" => context.render_repo_digest(),
            "outlines" => context.render_outlines(),
            "prompts" => context.render_prompts(),
            "prior_sections" => render_prior(prior),
            other => format!("{{{other}}}"),
        })
        .into_owned();
    Ok(PromptRequest::new(
        SYSTEM_PROMPT,
        user,
        spec.temperature,
        spec.max_tokens,
        spec.id.tag(),
    )?)
}

fn clean_response(id: SectionId, text: &str) -> String {
    match id {
        SectionId::Title => text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or("")
            .trim_start_matches('#')
            .trim()
            .trim_matches(|c| c == '"' || c == '*')
            .trim()
            .to_string(),
        SectionId::Keywords => text.split_whitespace().collect::<Vec<_>>().join(" "),
        _ => text.trim().to_string(),
    }
}

pub fn generate_section(
    spec: &SectionSpec,
    context: &ContextBundle,
    prior: &[Section],
    gateway: &Gateway,
    context_budget: u64,
) -> Result<(String, TraceEntry), ArticleError> {
    let request = build_section_request(spec, context, prior)?;
    let estimate = request.estimated_prompt_tokens();
    if estimate > context_budget {
        return Err(ArticleError::PromptOverBudget {
            section: spec.id,
            estimate,
            budget: context_budget,
        });
    }
    let result = gateway.complete(&request)?;
    let text = clean_response(spec.id, &result.text);
    if text.is_empty() {
        return Err(ArticleError::EmptyResponse(spec.id));
    }
    let entry = TraceEntry {
        section: spec.id,
        stage: "generate".into(),
        request_digest: request.digest(),
        result_digest: result.digest(),
        rule: result.rule.clone(),
        request,
    };
    Ok((text, entry))
}

#[derive(Debug, Error)]
#[error("{error}")]
pub struct GenerationFailure {
    #[source]
    pub error: ArticleError,
    pub partial_trace: Vec<TraceEntry>,
}

impl From<ArticleError> for GenerationFailure {
    fn from(error: ArticleError) -> Self {
        Self {
            error,
            partial_trace: Vec::new(),
        }
    }
}

/// Drafts every canonical section. Half of the context budget goes to the
/// repository context; the rest is headroom for templates and prior sections.
pub fn generate_manuscript(
    summaries: &[CodeSummary],
    prompts: &[PromptDigest],
    config: &GenerationConfig,
    gateway: &Gateway,
    metadata: ManuscriptMeta,
) -> Result<ManuscriptDraft, GenerationFailure> {
    config.validate()?;
    let context = assemble_context(summaries, prompts, config.context_budget / 2)?;

    let mut order: Vec<&SectionSpec> = config.sections.iter().collect();
    order.sort_by_key(|s| (s.generation_order, s.id.canonical_index()));

    let mut generated: Vec<Section> = Vec::new();
    let mut trace = Vec::new();
    for spec in order {
        match generate_section(spec, &context, &generated, gateway, config.context_budget) {
            Ok((text, entry)) => {
                trace.push(entry);
                generated.push(Section { id: spec.id, text });
            }
            Err(error) => {
                return Err(GenerationFailure {
                    error,
                    partial_trace: trace,
                })
            }
        }
    }
    generated.sort_by_key(|s| s.id.canonical_index());
    let title = generated
        .iter()
        .find(|s| s.id == SectionId::Title)
        .map(|s| s.text.clone())
        .unwrap_or_default();
    Ok(ManuscriptDraft {
        title,
        sections: generated,
        metadata,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_round_trip() {
        let sections: Vec<Section> = CANONICAL_ORDER
            .iter()
            .map(|&id| Section {
                id,
                text: format!("Text of {id}."),
            })
            .collect();
        let m = ManuscriptDraft {
            title: "Text of title.".into(),
            sections,
            metadata: ManuscriptMeta::default(),
            trace: vec![],
        };
        let md = m.to_markdown();
        assert!(md.starts_with("# Text of title.\n\n## Abstract\n"));
        assert!(md.contains("## References"));
        let back = ManuscriptDraft::from_markdown(&md);
        assert_eq!(back.sections, m.sections);
        assert_eq!(back.title, m.title);
    }

    #[test]
    fn title_cleanup() {
        assert_eq!(clean_response(SectionId::Title, "\n# \"A Title\"\nextra"), "A Title");
        assert_eq!(clean_response(SectionId::Keywords, "a,\n b"), "a, b");
    }
}

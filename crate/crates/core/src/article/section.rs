use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionId {
    Title,
    Abstract,
    Keywords,
    Introduction,
    Methods,
    Results,
    Discussion,
}

/// Presentation order.
pub const CANONICAL_ORDER: [SectionId; 7] = [
    SectionId::Title,
    SectionId::Abstract,
    SectionId::Keywords,
    SectionId::Introduction,
    SectionId::Methods,
    SectionId::Results,
    SectionId::Discussion,
];

/// Drafting order: body first, then the parts that summarize it.
pub const GENERATION_ORDER: [SectionId; 7] = [
    SectionId::Introduction,
    SectionId::Methods,
    SectionId::Results,
    SectionId::Discussion,
    SectionId::Keywords,
    SectionId::Title,
    SectionId::Abstract,
];

/// Sections scored as running prose.
pub const PROSE_SECTIONS: [SectionId; 5] = [
    SectionId::Abstract,
    SectionId::Introduction,
    SectionId::Methods,
    SectionId::Results,
    SectionId::Discussion,
];

impl SectionId {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionId::Title => "title",
            SectionId::Abstract => "abstract",
            SectionId::Keywords => "keywords",
            SectionId::Introduction => "introduction",
            SectionId::Methods => "methods",
            SectionId::Results => "results",
            SectionId::Discussion => "discussion",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            SectionId::Title => "Title",
            SectionId::Abstract => "Abstract",
            SectionId::Keywords => "Keywords",
            SectionId::Introduction => "Introduction",
            SectionId::Methods => "Methods",
            SectionId::Results => "Results",
            SectionId::Discussion => "Discussion",
        }
    }

    pub fn canonical_index(self) -> usize {
        CANONICAL_ORDER.iter().position(|&s| s == self).unwrap()
    }

    pub fn tag(self) -> String {
        format!("section:{}", self.as_str())
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CANONICAL_ORDER
            .iter()
            .copied()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown section {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    RepoDigest,
    Outlines,
    Prompts,
    PriorSections,
}

impl ContextSource {
    pub fn placeholder(self) -> &'static str {
        match self {
            ContextSource::RepoDigest => "repo_digest",
            ContextSource::Outlines => "outlines",
            ContextSource::Prompts => "prompts",
            ContextSource::PriorSections => "prior_sections",
        }
    }
}

/// Placeholders every template may use regardless of its inputs.
pub const ALWAYS_BOUND: [&str; 2] = ["word_target", "section_name"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub id: SectionId,
    pub prompt_template: String,
    pub inputs: Vec<ContextSource>,
    pub word_target: u32,
    pub generation_order: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub(crate) fn placeholder_re() -> Regex {
    Regex::new(r"\{([a-z_]+)\}").expect("static regex")
}

impl SectionSpec {
    pub fn placeholders(&self) -> Vec<String> {
        placeholder_re()
            .captures_iter(&self.prompt_template)
            .map(|c| c[1].to_string())
            .collect()
    }

    /// First placeholder that no input binds.
    pub fn unbound_placeholder(&self) -> Option<String> {
        self.placeholders().into_iter().find(|p| {
            !ALWAYS_BOUND.contains(&p.as_str())
                && !self.inputs.iter().any(|i| i.placeholder() == p)
        })
    }

    pub fn default_for(id: SectionId) -> Self {
        use ContextSource::*;
        let (word_target, inputs, template): (u32, Vec<ContextSource>, &str) = match id {
            SectionId::Introduction => (
                500,
                vec![RepoDigest, Outlines],
                "Write the {section_name} of an academic article describing the software below. \
                 Motivate the problem the code addresses and state the contribution. \
                 Aim for about {word_target} words of plain prose.\n\n{repo_digest}\n\n{outlines}",
            ),
            SectionId::Methods => (
                700,
                vec![RepoDigest, Outlines, Prompts],
                "Write the {section_name} section of an academic article. Describe the architecture, \
                 the main units and how data flows between them, using only facts present in the \
                 material. Aim for about {word_target} words.\n\n{repo_digest}\n\n{outlines}\n\n{prompts}",
            ),
            SectionId::Results => (
                500,
                vec![RepoDigest, PriorSections],
                "Write the {section_name} section. Report what the software produces and the \
                 structural measurements below. Do not invent experiments. Aim for about \
                 {word_target} words.\n\n{repo_digest}\n\n{prior_sections}",
            ),
            SectionId::Discussion => (
                600,
                vec![RepoDigest, PriorSections],
                "Write the {section_name} section. Interpret the results, state limitations and \
                 future work. Aim for about {word_target} words.\n\n{repo_digest}\n\n{prior_sections}",
            ),
            SectionId::Keywords => (
                8,
                vec![PriorSections],
                "List about {word_target} comma-separated keywords for the article whose sections \
                 follow. Return one line.\n\n{prior_sections}",
            ),
            SectionId::Title => (
                15,
                vec![PriorSections],
                "Propose a concise academic title of at most {word_target} words for the article \
                 whose sections follow. Return only the title.\n\n{prior_sections}",
            ),
            SectionId::Abstract => (
                200,
                vec![PriorSections],
                "Write the {section_name} for the article whose sections follow, in about \
                 {word_target} words, as one paragraph.\n\n{prior_sections}",
            ),
        };
        let generation_order = GENERATION_ORDER.iter().position(|&s| s == id).unwrap() as u32;
        let creative = !matches!(id, SectionId::Title | SectionId::Keywords);
        Self {
            id,
            prompt_template: template.to_string(),
            inputs,
            word_target,
            generation_order,
            temperature: if creative { 0.7 } else { 0.0 },
            max_tokens: (word_target * 3).max(64),
        }
    }

    pub fn defaults() -> Vec<Self> {
        GENERATION_ORDER.iter().map(|&id| Self::default_for(id)).collect()
    }
}

//! Comment augmentation, reconstruction prompts and round-trip scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    parse_source, strip_comments_normalized, to_outline, CodeSummary, ParseStatus, UnitKind,
};
use crate::digest::sha256_hex;
use crate::gateway::{code_block, estimate_tokens, fragment, Gateway, GatewayError, PromptRequest};
use crate::ingest::SourceText;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("{path}: reconstruction prompt is stale (source or summary changed since distillation)")]
    StalePrompt { path: String },
    #[error("{0}: backend returned an empty response")]
    EmptyResponse(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    /// Augment when comment density is strictly below this.
    pub augmentation_threshold: f64,
    /// Round trip passes when similarity is at least this.
    pub pass_threshold: f64,
    /// Fraction of verbatim source lines in a prompt that triggers a warning.
    pub verbatim_limit: f64,
    pub temperature: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            augmentation_threshold: 0.15,
            pass_threshold: 0.8,
            verbatim_limit: 0.6,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentAction {
    Skipped,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationOutcome {
    pub action: AugmentAction,
    pub augmented_text: Option<String>,
    pub reason: String,
}

impl AugmentationOutcome {
    /// Text to carry downstream: the augmented text when accepted.
    pub fn effective_text<'a>(&'a self, original: &'a str) -> &'a str {
        match (&self.action, &self.augmented_text) {
            (AugmentAction::Accepted, Some(t)) => t,
            _ => original,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionPrompt {
    pub target_path: String,
    pub prompt_text: String,
    pub source_hash: String,
    pub summary_digest: String,
    pub verbatim_fraction: f64,
    pub verbatim_warning: bool,
    /// Built locally from the raw text because the source did not parse.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub similarity: f64,
    pub passed: bool,
    pub missing_units: Vec<String>,
    pub extra_units: Vec<String>,
    pub regenerated_status: ParseStatus,
}

pub fn needs_augmentation(summary: &CodeSummary, threshold: f64) -> bool {
    summary.comment_density < threshold
}

/// Code carried by an LLM response: a fenced block, a `<source>` fragment,
/// or the whole text.
pub fn extract_code(response: &str) -> String {
    if response.contains("```") || response.contains("<source>") {
        if let Some(code) = code_block(response) {
            return code.to_string();
        }
    }
    response.to_string()
}

fn match_trailing_newline(original: &str, mut candidate: String) -> String {
    if original.ends_with('\n') && !candidate.ends_with('\n') {
        candidate.push('\n');
    }
    candidate
}

pub fn augmentation_request(text: &SourceText, temperature: f64) -> Result<PromptRequest, GatewayError> {
    let user = format!(
        "Add explanatory comments and docstrings to the Python file {path}. Do not change any \
         code: keep every statement, name, literal and the order of definitions exactly as \
         they are. Return the complete file.\n\n<source>\n{code}\n</source>\n",
        path = text.path,
        code = text.text.trim_end_matches('\n'),
    );
    PromptRequest::new(
        "You annotate source code without modifying it.",
        user,
        temperature,
        (estimate_tokens(&text.text) * 2 + 256) as u32,
        "augment",
    )
}

/// Asks the backend to comment the file; keeps the answer only when it is
/// the same code under comment-stripping normalization.
pub fn augment_comments(
    text: &SourceText,
    summary: &CodeSummary,
    gateway: &Gateway,
    temperature: f64,
) -> Result<AugmentationOutcome, DistillError> {
    let request = augmentation_request(text, temperature)?;
    let result = gateway.complete(&request)?;
    let candidate = match_trailing_newline(&text.text, extract_code(&result.text));
    if strip_comments_normalized(&candidate) != strip_comments_normalized(&text.text) {
        return Ok(AugmentationOutcome {
            action: AugmentAction::Rejected,
            augmented_text: None,
            reason: "response changed code outside comments and docstrings".into(),
        });
    }
    let after = parse_source(&candidate, &text.path);
    let before = summary.comment_lines + summary.docstring_lines;
    let added = (after.comment_lines + after.docstring_lines).saturating_sub(before);
    let reason = if added == 0 {
        "no-op: no comment lines added".to_string()
    } else {
        format!("added {added} comment or docstring lines")
    };
    Ok(AugmentationOutcome {
        action: AugmentAction::Accepted,
        augmented_text: Some(candidate),
        reason,
    })
}

/// Runs [`augment_comments`] only when the file is sparse.
pub fn maybe_augment(
    text: &SourceText,
    summary: &CodeSummary,
    gateway: &Gateway,
    config: &DistillConfig,
) -> Result<AugmentationOutcome, DistillError> {
    if summary.parse_status == ParseStatus::Opaque {
        return Ok(AugmentationOutcome {
            action: AugmentAction::Skipped,
            augmented_text: None,
            reason: "unparsed file".into(),
        });
    }
    if !needs_augmentation(summary, config.augmentation_threshold) {
        return Ok(AugmentationOutcome {
            action: AugmentAction::Skipped,
            augmented_text: None,
            reason: format!(
                "comment density {:.3} is not below {:.3}",
                summary.comment_density, config.augmentation_threshold
            ),
        });
    }
    augment_comments(text, summary, gateway, config.temperature)
}

/// Share of non-blank source lines that appear verbatim as prompt lines.
pub fn verbatim_fraction(source: &str, prompt: &str) -> f64 {
    let prompt_lines: std::collections::HashSet<&str> =
        prompt.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let source_lines: Vec<&str> = source.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if source_lines.is_empty() {
        return 0.0;
    }
    let copied = source_lines.iter().filter(|l| prompt_lines.contains(*l)).count();
    copied as f64 / source_lines.len() as f64
}

fn fallback_prompt(text: &SourceText) -> String {
    format!(
        "Reproduce the following file {path} exactly, character for character, in a single \
         response. It could not be parsed, so keep it as written.\n\n<source>\n{code}\n</source>\n",
        path = text.path,
        code = text.text.trim_end_matches('\n'),
    )
}

pub fn distill_request(text: &SourceText, summary: &CodeSummary, temperature: f64) -> Result<PromptRequest, GatewayError> {
    let user = format!(
        "Read the Python file {path} and write a prompt that would let a language model \
         regenerate the original code in a single shot. The prompt must name every class, \
         function and method with its parameters and describe its behaviour. Return only \
         the prompt.\n\n<outline>\n{outline}</outline>\n\n<source>\n{code}\n</source>\n",
        path = text.path,
        outline = to_outline(summary),
        code = text.text.trim_end_matches('\n'),
    );
    PromptRequest::new(
        "You distill source code into reconstruction prompts.",
        user,
        temperature,
        (estimate_tokens(&text.text) * 2 + 512) as u32,
        "distill",
    )
}

pub fn distill(
    text: &SourceText,
    summary: &CodeSummary,
    gateway: &Gateway,
    config: &DistillConfig,
) -> Result<ReconstructionPrompt, DistillError> {
    let (prompt_text, fallback) = if summary.parse_status == ParseStatus::Opaque {
        (fallback_prompt(text), true)
    } else {
        let request = distill_request(text, summary, config.temperature)?;
        let result = gateway.complete(&request)?;
        let prompt = result.text.trim().to_string();
        if prompt.is_empty() {
            return Err(DistillError::EmptyResponse(text.path.clone()));
        }
        (prompt, false)
    };
    let verbatim = verbatim_fraction(&text.text, &prompt_text);
    Ok(ReconstructionPrompt {
        target_path: text.path.clone(),
        source_hash: sha256_hex(text.text.as_bytes()),
        summary_digest: summary.digest(),
        verbatim_fraction: verbatim,
        verbatim_warning: !fallback && verbatim > config.verbatim_limit,
        fallback,
        prompt_text,
    })
}

/// Identity of a unit for structural matching.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnitKey {
    pub kind: UnitKind,
    pub name: String,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatch<T> {
    pub similarity: T,
    pub matched: usize,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

fn keyed(summary: &CodeSummary) -> Vec<(UnitKey, String)> {
    summary
        .definitions()
        .map(|u| {
            (
                UnitKey {
                    kind: u.kind,
                    name: u.name.clone(),
                    param_count: u.param_count,
                },
                format!("{}:{}/{}", u.kind.as_str(), u.qualified_name, u.param_count),
            )
        })
        .collect()
}

/// F1 over the multisets of (kind, name, parameter count) of non-module
/// units. Two summaries without definitions score 1.
pub fn structural_similarity<T: Scalar>(original: &CodeSummary, regenerated: &CodeSummary) -> StructuralMatch<T> {
    let orig = keyed(original);
    let regen = keyed(regenerated);
    let mut available: BTreeMap<&UnitKey, usize> = BTreeMap::new();
    for (k, _) in &regen {
        *available.entry(k).or_insert(0) += 1;
    }
    let mut matched = 0;
    let mut missing = Vec::new();
    for (k, label) in &orig {
        match available.get_mut(k) {
            Some(n) if *n > 0 => {
                *n -= 1;
                matched += 1;
            }
            _ => missing.push(label.clone()),
        }
    }
    let mut pending: BTreeMap<&UnitKey, usize> = BTreeMap::new();
    for (k, _) in &orig {
        *pending.entry(k).or_insert(0) += 1;
    }
    let mut extra = Vec::new();
    for (k, label) in &regen {
        match pending.get_mut(k) {
            Some(n) if *n > 0 => *n -= 1,
            _ => extra.push(label.clone()),
        }
    }
    let total = orig.len() + regen.len();
    let similarity = if total == 0 {
        T::one()
    } else {
        T::count(2 * matched) / T::count(total)
    };
    StructuralMatch {
        similarity,
        matched,
        missing,
        extra,
    }
}

pub fn reconstruction_request(prompt: &ReconstructionPrompt, source_len_hint: &str, temperature: f64) -> Result<PromptRequest, GatewayError> {
    PromptRequest::new(
        "You write Python code. Return only the code.",
        prompt.prompt_text.clone(),
        temperature,
        (estimate_tokens(source_len_hint) * 2 + 256) as u32,
        "reconstruct",
    )
}

/// Sends the prompt back to the backend and scores the regenerated code.
/// Stale prompts are refused before any backend call.
pub fn round_trip_verify(
    prompt: &ReconstructionPrompt,
    current: &SourceText,
    original_summary: &CodeSummary,
    gateway: &Gateway,
    config: &DistillConfig,
) -> Result<RoundTripReport, DistillError> {
    if sha256_hex(current.text.as_bytes()) != prompt.source_hash
        || original_summary.digest() != prompt.summary_digest
    {
        return Err(DistillError::StalePrompt {
            path: prompt.target_path.clone(),
        });
    }
    let request = reconstruction_request(prompt, &current.text, config.temperature)?;
    let result = gateway.complete(&request)?;
    let code = extract_code(&result.text);
    let regenerated = parse_source(&code, &prompt.target_path);

    let (similarity, missing_units, extra_units) =
        if original_summary.parse_status == ParseStatus::Opaque {
            let same = strip_comments_normalized(&code) == strip_comments_normalized(&current.text);
            (if same { 1.0 } else { 0.0 }, Vec::new(), Vec::new())
        } else if regenerated.parse_status == ParseStatus::Opaque {
            let missing = keyed(original_summary).into_iter().map(|(_, l)| l).collect();
            (0.0, missing, Vec::new())
        } else {
            let m = structural_similarity::<f64>(original_summary, &regenerated);
            (m.similarity, m.missing, m.extra)
        };
    Ok(RoundTripReport {
        passed: similarity >= config.pass_threshold,
        similarity,
        missing_units,
        extra_units,
        regenerated_status: regenerated.parse_status,
    })
}

/// The `<source>` fragment a prompt embeds, if any.
pub fn embedded_source(prompt_text: &str) -> Option<&str> {
    fragment(prompt_text, "source")
}

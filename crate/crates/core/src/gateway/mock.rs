//! Deterministic rule-table backend for offline runs and tests.

use std::collections::BTreeSet;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{estimate_tokens, Backend, PromptRequest, RawCompletion, TransportError};
use crate::digest::{sha256_hex, short};

#[derive(Debug, Error)]
pub enum MockRuleError {
    #[error("mock rules have no default rule")]
    MissingDefaultRule,
    #[error("duplicate mock rule for tag {tag:?} and pattern {pattern:?}")]
    DuplicateRule {
        tag: String,
        pattern: Option<String>,
    },
    #[error("invalid mock rule {rule}: {reason}")]
    Invalid { rule: String, reason: String },
    #[error("cannot read mock rules: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub find: String,
    #[serde(default)]
    pub replace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Exact tag, or a prefix followed by `*`.
    pub tag: String,
    /// Regex over the request's user text.
    #[serde(default)]
    pub pattern: Option<String>,
    pub response: String,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultSpec {
    pub response: String,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

/// On-disk rules document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRulesFile {
    #[serde(default)]
    pub default: Option<DefaultSpec>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

#[derive(Debug)]
struct CompiledTransform {
    find: Regex,
    replace: String,
}

#[derive(Debug)]
struct CompiledRule {
    name: String,
    tag: String,
    pattern: Option<Regex>,
    template: String,
    transforms: Vec<CompiledTransform>,
}

/// Loaded mock backend state. Lookup is total and pure.
#[derive(Debug)]
pub struct MockRules {
    rules: Vec<CompiledRule>,
    default: CompiledRule,
}

const BUNDLED: &str = include_str!("../../assets/mock_rules.json");

fn placeholder_re() -> Regex {
    Regex::new(r"\{\{([a-z_]+(?::[A-Za-z0-9_-]+)?)\}\}").expect("static regex")
}

fn check_template(rule: &str, template: &str) -> Result<(), MockRuleError> {
    for cap in placeholder_re().captures_iter(template) {
        let name = &cap[1];
        let known = matches!(
            name,
            "user_text" | "system_text" | "tag" | "digest" | "code" | "section_id"
        ) || name.starts_with("fragment:");
        if !known {
            return Err(MockRuleError::Invalid {
                rule: rule.to_string(),
                reason: format!("unknown placeholder {{{{{name}}}}}"),
            });
        }
    }
    Ok(())
}

fn compile_transforms(rule: &str, ts: &[Transform]) -> Result<Vec<CompiledTransform>, MockRuleError> {
    ts.iter()
        .map(|t| {
            Ok(CompiledTransform {
                find: Regex::new(&t.find).map_err(|e| MockRuleError::Invalid {
                    rule: rule.to_string(),
                    reason: e.to_string(),
                })?,
                replace: t.replace.clone(),
            })
        })
        .collect()
}

/// Text between `<name>` and `</name>` in `text`, trimmed of the newline
/// padding the prompt builders add.
pub fn fragment<'t>(text: &'t str, name: &str) -> Option<&'t str> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let start = text.find(&open)? + open.len();
    let end = start + text[start..].find(&close)?;
    let body = &text[start..end];
    let body = body.strip_prefix('\n').unwrap_or(body);
    Some(body.strip_suffix('\n').unwrap_or(body))
}

/// First fenced code block, or the `<source>` fragment.
pub fn code_block(text: &str) -> Option<&str> {
    if let Some(src) = fragment(text, "source") {
        return Some(src);
    }
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(body[..end].strip_suffix('\n').unwrap_or(&body[..end]))
}

impl MockRules {
    pub fn from_file(file: &MockRulesFile) -> Result<Self, MockRuleError> {
        let default = file.default.as_ref().ok_or(MockRuleError::MissingDefaultRule)?;
        check_template("default", &default.response)?;
        let default = CompiledRule {
            name: "default".into(),
            tag: "*".into(),
            pattern: None,
            template: default.response.clone(),
            transforms: compile_transforms("default", &default.transforms)?,
        };
        let mut seen = BTreeSet::new();
        let mut rules = Vec::new();
        for (i, r) in file.rules.iter().enumerate() {
            let name = r.name.clone().unwrap_or_else(|| format!("rule-{i}"));
            if !seen.insert((r.tag.clone(), r.pattern.clone())) {
                return Err(MockRuleError::DuplicateRule {
                    tag: r.tag.clone(),
                    pattern: r.pattern.clone(),
                });
            }
            check_template(&name, &r.response)?;
            let pattern = r
                .pattern
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| MockRuleError::Invalid {
                    rule: name.clone(),
                    reason: e.to_string(),
                })?;
            rules.push(CompiledRule {
                transforms: compile_transforms(&name, &r.transforms)?,
                name,
                tag: r.tag.clone(),
                pattern,
                template: r.response.clone(),
            });
        }
        Ok(Self { rules, default })
    }

    pub fn from_json(json: &str) -> Result<Self, MockRuleError> {
        let file: MockRulesFile =
            serde_json::from_str(json).map_err(|e| MockRuleError::Io(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self, MockRuleError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| MockRuleError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    /// The rule table shipped with the crate; answers every pipeline stage.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled mock rules are valid")
    }

    pub fn bundled_json() -> &'static str {
        BUNDLED
    }

    fn select(&self, req: &PromptRequest) -> &CompiledRule {
        self.rules
            .iter()
            .find(|r| {
                let tag_ok = match r.tag.strip_suffix('*') {
                    Some(prefix) => req.tag.starts_with(prefix),
                    None => r.tag == req.tag,
                };
                tag_ok && r.pattern.as_ref().is_none_or(|p| p.is_match(&req.user_text))
            })
            .unwrap_or(&self.default)
    }

    /// Response text and the name of the rule that produced it.
    pub fn respond(&self, req: &PromptRequest) -> (String, String) {
        let rule = self.select(req);
        let digest = sha256_hex(req.user_text.as_bytes());
        let rendered = placeholder_re()
            .replace_all(&rule.template, |cap: &regex::Captures<'_>| {
                let name = &cap[1];
                match name {
                    "user_text" => req.user_text.clone(),
                    "system_text" => req.system_text.clone(),
                    "tag" => req.tag.clone(),
                    "digest" => short(&digest, 12).to_string(),
                    "code" => code_block(&req.user_text).unwrap_or("").to_string(),
                    "section_id" => req.tag.strip_prefix("section:").unwrap_or("").to_string(),
                    _ => name
                        .strip_prefix("fragment:")
                        .and_then(|f| fragment(&req.user_text, f))
                        .unwrap_or("")
                        .to_string(),
                }
            })
            .into_owned();
        let text = rule
            .transforms
            .iter()
            .fold(rendered, |acc, t| t.find.replace_all(&acc, t.replace.as_str()).into_owned());
        (text, rule.name.clone())
    }
}

/// [`Backend`] over a [`MockRules`] table.
#[derive(Debug)]
pub struct MockBackend {
    rules: MockRules,
}

impl MockBackend {
    pub fn new(rules: MockRules) -> Self {
        Self { rules }
    }
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn send(&self, req: &PromptRequest) -> Result<RawCompletion, TransportError> {
        let (mut text, rule) = self.rules.respond(req);
        // Honor max_tokens like a real endpoint would (finish_reason=length).
        let limit = req.max_tokens as usize * 4;
        if text.chars().count() > limit {
            text = text.chars().take(limit).collect();
        }
        Ok(RawCompletion {
            prompt_tokens: Some(req.estimated_prompt_tokens()),
            completion_tokens: Some(estimate_tokens(&text)),
            text,
            rule: Some(rule),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(tag: &str, user: &str) -> PromptRequest {
        PromptRequest::new("sys", user, 0.0, 1000, tag).unwrap()
    }

    #[test]
    fn default_required() {
        let err = MockRules::from_json(r#"{"rules": []}"#).unwrap_err();
        assert!(matches!(err, MockRuleError::MissingDefaultRule));
    }

    #[test]
    fn duplicates_rejected() {
        let err = MockRules::from_json(
            r#"{"default": {"response": "d"},
                "rules": [{"tag": "revise", "response": "a"}, {"tag": "revise", "response": "b"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, MockRuleError::DuplicateRule { .. }));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        let err = MockRules::from_json(r#"{"default": {"response": "{{nope}}"}}"#).unwrap_err();
        assert!(matches!(err, MockRuleError::Invalid { .. }));
    }

    #[test]
    fn selection_and_splicing() {
        let rules = MockRules::from_json(
            r##"{"default": {"response": "fallback {{tag}}"},
                "rules": [
                  {"name": "m", "tag": "section:*", "pattern": "special", "response": "S {{section_id}}"},
                  {"tag": "augment", "response": "{{code}}", "transforms": [{"find": "(?m)^def ", "replace": "# added\ndef "}]}
                ]}"##,
        )
        .unwrap();
        assert_eq!(rules.respond(&req("section:methods", "a special one")).0, "S methods");
        let (t, name) = rules.respond(&req("section:methods", "plain"));
        assert_eq!((t.as_str(), name.as_str()), ("fallback section:methods", "default"));
        let (t, _) = rules.respond(&req("augment", "Add comments.\n<source>\ndef f():\n    pass\n</source>\n"));
        assert_eq!(t, "# added\ndef f():\n    pass");
    }

    #[test]
    fn code_block_from_fence() {
        assert_eq!(code_block("x\n```python\na = 1\n```\ny"), Some("a = 1"));
        assert_eq!(code_block("no code"), None);
    }

    #[test]
    fn bundled_rules_load() {
        let _ = MockRules::bundled();
    }
}

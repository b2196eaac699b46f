//! Per-repository context handed to every section prompt.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ArticleError;
use crate::analysis::{to_outline, CodeSummary, ParseStatus};
use crate::gateway::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoDigest {
    pub files: usize,
    pub total_loc: usize,
    pub unit_counts: BTreeMap<String, usize>,
    pub status_counts: BTreeMap<String, usize>,
    /// (file, imported module)
    pub import_edges: Vec<(String, String)>,
    pub mean_density: f64,
}

impl RepoDigest {
    pub fn from_summaries(summaries: &[CodeSummary]) -> Self {
        let mut unit_counts = BTreeMap::new();
        let mut status_counts = BTreeMap::new();
        let mut import_edges = Vec::new();
        for s in summaries {
            for u in s.definitions() {
                *unit_counts.entry(u.kind.as_str().to_string()).or_insert(0) += 1;
            }
            let status = match s.parse_status {
                ParseStatus::Clean => "clean",
                ParseStatus::Recovered => "recovered",
                ParseStatus::Opaque => "opaque",
            };
            *status_counts.entry(status.to_string()).or_insert(0) += 1;
            import_edges.extend(s.imports.iter().map(|i| (s.file.clone(), i.clone())));
        }
        let mean_density = if summaries.is_empty() {
            0.0
        } else {
            summaries.iter().map(|s| s.comment_density).sum::<f64>() / summaries.len() as f64
        };
        Self {
            files: summaries.len(),
            total_loc: summaries.iter().map(|s| s.loc).sum(),
            unit_counts,
            status_counts,
            import_edges,
            mean_density,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "files: {}", self.files);
        let _ = writeln!(out, "lines: {}", self.total_loc);
        let _ = writeln!(out, "mean comment density: {:.3}", self.mean_density);
        let units: Vec<String> = self
            .unit_counts
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(out, "units: {}", units.join(" "));
        let status: Vec<String> = self
            .status_counts
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(out, "parse status: {}", status.join(" "));
        if !self.import_edges.is_empty() {
            out.push_str("imports:\n");
            for (file, module) in &self.import_edges {
                let _ = writeln!(out, "  {file} -> {module}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileOutline {
    pub file: String,
    pub loc: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDigest {
    pub target_path: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimDecision {
    pub item: String,
    pub path: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub repo_digest: RepoDigest,
    pub outlines: Vec<FileOutline>,
    pub prompts_digest: Vec<PromptDigest>,
    pub token_estimate: u64,
    pub trimmed: Vec<TrimDecision>,
}

impl ContextBundle {
    /// Sum of per-item estimates: digest text, each outline, each prompt.
    pub fn estimate(digest: &RepoDigest, outlines: &[FileOutline], prompts: &[PromptDigest]) -> u64 {
        estimate_tokens(&digest.render())
            + outlines.iter().map(|o| estimate_tokens(&o.text)).sum::<u64>()
            + prompts.iter().map(|p| estimate_tokens(&p.text)).sum::<u64>()
    }

    pub fn render_repo_digest(&self) -> String {
        format!("<repo_digest>\n{}</repo_digest>", self.repo_digest.render())
    }

    pub fn render_outlines(&self) -> String {
        let mut out = String::from("<outlines>\n");
        for o in &self.outlines {
            out.push_str(&o.text);
        }
        out.push_str("</outlines>");
        out
    }

    pub fn render_prompts(&self) -> String {
        let mut out = String::from("<prompts>\n");
        for p in &self.prompts_digest {
            let _ = writeln!(out, "### {}\n{}", p.target_path, p.text.trim_end());
        }
        out.push_str("</prompts>");
        out
    }
}

/// Builds the context, trimming reconstruction prompts (largest first) and
/// then outlines of the smallest files until the estimate fits `budget`.
pub fn assemble_context(
    summaries: &[CodeSummary],
    prompts: &[PromptDigest],
    budget: u64,
) -> Result<ContextBundle, ArticleError> {
    if summaries.is_empty() {
        return Err(ArticleError::EmptyRepository);
    }
    let repo_digest = RepoDigest::from_summaries(summaries);
    let mut outlines: Vec<FileOutline> = summaries
        .iter()
        .map(|s| FileOutline {
            file: s.file.clone(),
            loc: s.loc,
            text: to_outline(s),
        })
        .collect();
    let mut prompts_digest: Vec<PromptDigest> = prompts.to_vec();
    let mut trimmed = Vec::new();

    let mut estimate = ContextBundle::estimate(&repo_digest, &outlines, &prompts_digest);
    while estimate > budget && !prompts_digest.is_empty() {
        let (idx, _) = prompts_digest
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                estimate_tokens(&a.text)
                    .cmp(&estimate_tokens(&b.text))
                    .then_with(|| b.target_path.cmp(&a.target_path))
            })
            .unwrap();
        let p = prompts_digest.remove(idx);
        let tokens = estimate_tokens(&p.text);
        estimate -= tokens;
        trimmed.push(TrimDecision {
            item: "prompt".into(),
            path: p.target_path,
            tokens,
        });
    }
    while estimate > budget && !outlines.is_empty() {
        let (idx, _) = outlines
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.loc.cmp(&b.loc).then_with(|| a.file.cmp(&b.file)))
            .unwrap();
        let o = outlines.remove(idx);
        let tokens = estimate_tokens(&o.text);
        estimate -= tokens;
        trimmed.push(TrimDecision {
            item: "outline".into(),
            path: o.file,
            tokens,
        });
    }
    if estimate > budget {
        return Err(ArticleError::ContextOverBudget {
            needed: estimate,
            budget,
        });
    }
    Ok(ContextBundle {
        repo_digest,
        outlines,
        prompts_digest,
        token_estimate: estimate,
        trimmed,
    })
}

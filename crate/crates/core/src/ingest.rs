//! Repository walking and the deterministic source inventory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::digest::sha256_hex;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("repository root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("repository root is not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("invalid ingest rules: {0}")]
    InvalidRules(String),
    #[error("{path} changed or vanished since scan (expected {expected}, found {found})")]
    FileVanished {
        path: String,
        expected: String,
        found: String,
    },
}

/// Which files count as subject-language sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestRules {
    pub include_extensions: Vec<String>,
    pub exclude_dirs: Vec<String>,
    pub max_file_bytes: u64,
    pub follow_symlinks: bool,
}

impl Default for IngestRules {
    fn default() -> Self {
        Self {
            include_extensions: vec![".py".into()],
            exclude_dirs: [".git", "__pycache__", ".venv", "node_modules"]
                .into_iter()
                .map(String::from)
                .collect(),
            max_file_bytes: 1024 * 1024,
            follow_symlinks: false,
        }
    }
}

impl IngestRules {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.include_extensions.is_empty() {
            return Err(IngestError::InvalidRules(
                "include_extensions must not be empty".into(),
            ));
        }
        if self.max_file_bytes == 0 {
            return Err(IngestError::InvalidRules("max_file_bytes must be > 0".into()));
        }
        Ok(())
    }

    fn matches(&self, file_name: &str) -> bool {
        self.include_extensions
            .iter()
            .any(|ext| file_name.ends_with(ext.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Repository-relative, `/`-separated.
    pub path: String,
    pub byte_size: u64,
    pub content_hash: String,
    pub line_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipReason {
    Size,
    Unreadable,
    Decode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoInventory {
    pub root: PathBuf,
    pub files: Vec<FileRecord>,
    pub skipped: Vec<Skipped>,
    pub total_lines: usize,
}

impl RepoInventory {
    /// Digest over the file list only, so it does not depend on where the
    /// tree is checked out.
    pub fn content_digest(&self) -> String {
        crate::digest::json_digest(&(&self.files, &self.skipped))
    }
}

/// Decoded contents of one inventoried file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub path: String,
    pub text: String,
    /// Some bytes were not valid UTF-8 and were replaced.
    pub lossy: bool,
}

impl SourceText {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
            lossy: false,
        }
    }
}

/// Lines are LF-terminated; a trailing unterminated fragment is one more line.
pub fn count_lines(bytes: &[u8]) -> usize {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count();
    match bytes.last() {
        Some(b'\n') | None => newlines,
        Some(_) => newlines + 1,
    }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn scan_repository(root: &Path, rules: &IngestRules) -> Result<RepoInventory, IngestError> {
    rules.validate()?;
    if !root.exists() {
        return Err(IngestError::RootNotFound(root.to_path_buf()));
    }
    if !root.is_dir() {
        return Err(IngestError::NotADirectory(root.to_path_buf()));
    }
    let root = fs::canonicalize(root).map_err(|_| IngestError::RootNotFound(root.to_path_buf()))?;

    let mut files = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();

    // walkdir reports symlink loops as errors when following links; those
    // entries are dropped, which breaks cycles.
    let walker = WalkDir::new(&root)
        .follow_links(rules.follow_symlinks)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !e.file_type().is_dir()
                || !rules
                    .exclude_dirs
                    .iter()
                    .any(|d| e.file_name().to_string_lossy() == d.as_str())
        });

    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                if err.loop_ancestor().is_some() {
                    continue;
                }
                // Unreadable directory or file metadata.
                if let Some(path) = err.path() {
                    let rel = relative_path(&root, path);
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
                    if name.is_some_and(|n| rules.matches(&n)) && seen.insert(rel.clone()) {
                        skipped.push(Skipped {
                            path: rel,
                            reason: SkipReason::Unreadable,
                        });
                    }
                }
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if !rules.matches(&name) {
            continue;
        }
        let rel = relative_path(&root, entry.path());
        if !seen.insert(rel.clone()) {
            continue;
        }
        let size = match entry.metadata() {
            Ok(m) => m.len(),
            Err(_) => {
                skipped.push(Skipped {
                    path: rel,
                    reason: SkipReason::Unreadable,
                });
                continue;
            }
        };
        if size > rules.max_file_bytes {
            skipped.push(Skipped {
                path: rel,
                reason: SkipReason::Size,
            });
            continue;
        }
        let bytes = match fs::read(entry.path()) {
            Ok(b) => b,
            Err(_) => {
                skipped.push(Skipped {
                    path: rel,
                    reason: SkipReason::Unreadable,
                });
                continue;
            }
        };
        // NUL bytes mark binary content; other invalid UTF-8 is read lossily.
        if bytes.contains(&0) {
            skipped.push(Skipped {
                path: rel,
                reason: SkipReason::Decode,
            });
            continue;
        }
        files.push(FileRecord {
            path: rel,
            byte_size: bytes.len() as u64,
            content_hash: sha256_hex(&bytes),
            line_count: count_lines(&bytes),
        });
    }

    files.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
    skipped.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
    let total_lines = files.iter().map(|f| f.line_count).sum();
    Ok(RepoInventory {
        root,
        files,
        skipped,
        total_lines,
    })
}

pub fn read_source(record: &FileRecord, root: &Path) -> Result<SourceText, IngestError> {
    let full = root.join(&record.path);
    let bytes = fs::read(&full).map_err(|_| IngestError::FileVanished {
        path: record.path.clone(),
        expected: record.content_hash.clone(),
        found: "missing".into(),
    })?;
    let found = sha256_hex(&bytes);
    if found != record.content_hash {
        return Err(IngestError::FileVanished {
            path: record.path.clone(),
            expected: record.content_hash.clone(),
            found,
        });
    }
    let (text, lossy) = match String::from_utf8(bytes) {
        Ok(s) => (s, false),
        Err(e) => (String::from_utf8_lossy(e.as_bytes()).into_owned(), true),
    };
    Ok(SourceText {
        path: record.path.clone(),
        text,
        lossy,
    })
}

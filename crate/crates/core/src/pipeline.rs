//! Stage commands and the end-to-end run.
//!
//! Every command validates its configuration and builds its backend before
//! touching the filesystem, and writes only fixed file names inside the
//! output directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{parse_source, CodeSummary};
use crate::article::{
    generate_manuscript, ArticleError, ManuscriptDraft, ManuscriptMeta, PromptDigest, RepoDigest,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::digest::sha256_hex;
use crate::distill::{
    distill, maybe_augment, round_trip_verify, AugmentAction, AugmentationOutcome, DistillError,
    ReconstructionPrompt, RoundTripReport,
};
use crate::gateway::{Gateway, GatewayError, LedgerTotals, MockRules};
use crate::ingest::{read_source, scan_repository, IngestError, RepoInventory, SourceText};
use crate::metrics::{compare, evaluate, CompareError, ComparisonReport, QualityReport};
use crate::revision::{revise, RevisionError, RevisionTrace};

pub const INVENTORY_FILE: &str = "inventory.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const DISTILL_FILE: &str = "distill.json";
pub const MANUSCRIPT_FILE: &str = "manuscript.md";
pub const SIDECAR_FILE: &str = "manuscript.sidecar.json";
pub const QUALITY_FILE: &str = "quality.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARISON_FILE: &str = "comparison.json";

pub const FIXED_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Input,
    Gateway,
    Budget,
    Output,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Output => 1,
            ErrorKind::Config => 2,
            ErrorKind::Input => 3,
            ErrorKind::Gateway => 4,
            ErrorKind::Budget => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub kind: ErrorKind,
    pub stage: String,
    pub message: String,
}

impl PipelineError {
    pub fn new(kind: ErrorKind, stage: &str, message: impl Into<String>) -> Self {
        Self {
            kind,
            stage: stage.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON for the error stream.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "exit_code": self.exit_code(),
            "stage": self.stage,
            "message": self.message,
        })
        .to_string()
    }

    fn config(stage: &str, e: ConfigError) -> Self {
        Self::new(ErrorKind::Config, stage, e.to_string())
    }

    fn ingest(stage: &str, e: IngestError) -> Self {
        let kind = match e {
            IngestError::InvalidRules(_) => ErrorKind::Config,
            _ => ErrorKind::Input,
        };
        Self::new(kind, stage, e.to_string())
    }

    fn gateway(stage: &str, e: GatewayError) -> Self {
        let kind = match e {
            GatewayError::BudgetExceeded { .. } => ErrorKind::Budget,
            GatewayError::AuthMissing(_) | GatewayError::Config(_) | GatewayError::MockRules(_) => {
                ErrorKind::Config
            }
            _ => ErrorKind::Gateway,
        };
        Self::new(kind, stage, e.to_string())
    }

    fn distill(stage: &str, e: DistillError) -> Self {
        match e {
            DistillError::Gateway(g) => Self::gateway(stage, g),
            DistillError::StalePrompt { .. } => Self::new(ErrorKind::Input, stage, e.to_string()),
            DistillError::EmptyResponse(_) => Self::new(ErrorKind::Gateway, stage, e.to_string()),
        }
    }

    fn article(stage: &str, e: ArticleError) -> Self {
        match e {
            ArticleError::Gateway(g) => Self::gateway(stage, g),
            ArticleError::EmptyRepository => Self::new(ErrorKind::Input, stage, e.to_string()),
            ArticleError::ContextOverBudget { .. } | ArticleError::PromptOverBudget { .. } => {
                Self::new(ErrorKind::Budget, stage, e.to_string())
            }
            ArticleError::UnboundPlaceholder { .. } | ArticleError::InvalidSections(_) => {
                Self::new(ErrorKind::Config, stage, e.to_string())
            }
            ArticleError::EmptyResponse(_) => Self::new(ErrorKind::Gateway, stage, e.to_string()),
        }
    }

    fn revision(stage: &str, e: RevisionError) -> Self {
        match e {
            RevisionError::Gateway(g) => Self::gateway(stage, g),
            other => Self::new(ErrorKind::Config, stage, other.to_string()),
        }
    }
}

/// Everything a command needs besides its positional arguments.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub mock_rules: Option<PathBuf>,
    pub fixed_clock: bool,
}

impl RunOptions {
    pub fn new(config: PipelineConfig) -> Self {
        let out_dir = config.output.dir.clone();
        Self {
            config,
            out_dir,
            mock_rules: None,
            fixed_clock: false,
        }
    }

    fn timestamp(&self) -> String {
        if self.fixed_clock {
            FIXED_TIMESTAMP.to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        }
    }

    fn validate(&self, stage: &str) -> Result<(), PipelineError> {
        self.config
            .validate()
            .map_err(|e| PipelineError::config(stage, e))
    }

    fn gateway(&self, stage: &str) -> Result<Gateway, PipelineError> {
        let rules = match &self.mock_rules {
            Some(path) => Some(
                MockRules::load(path)
                    .map_err(|e| PipelineError::gateway(stage, GatewayError::MockRules(e)))?,
            ),
            None => None,
        };
        Gateway::from_config(&self.config.backend, rules).map_err(|e| PipelineError::gateway(stage, e))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<String, PipelineError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            PipelineError::new(
                ErrorKind::Output,
                "output",
                format!("{}: {e}", self.out_dir.display()),
            )
        })?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| {
            PipelineError::new(ErrorKind::Output, "output", format!("{}: {e}", path.display()))
        })?;
        Ok(sha256_hex(bytes))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// A prior-stage artifact in the output directory, if present.
    fn read_artifact<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, PipelineError> {
        let path = self.out_dir.join(name);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| {
            PipelineError::new(ErrorKind::Input, name, format!("{}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| PipelineError::new(ErrorKind::Input, name, format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDocument {
    pub inventory_digest: String,
    pub files: Vec<CodeSummary>,
    pub rollup: RepoDigest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripRecord {
    pub similarity: f64,
    pub passed: bool,
    pub missing_units: Vec<String>,
    pub extra_units: Vec<String>,
}

impl From<&RoundTripReport> for RoundTripRecord {
    fn from(r: &RoundTripReport) -> Self {
        Self {
            similarity: r.similarity,
            passed: r.passed,
            missing_units: r.missing_units.clone(),
            extra_units: r.extra_units.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub target_path: String,
    pub prompt_text: String,
    pub source_hash: String,
    pub round_trip: RoundTripRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub path: String,
    pub action: AugmentAction,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillDocument {
    pub records: Vec<DistillRecord>,
    pub augmentation: Vec<AugmentationRecord>,
    pub verbatim_warnings: Vec<String>,
}

impl DistillDocument {
    pub fn prompt_digests(&self) -> Vec<PromptDigest> {
        self.records
            .iter()
            .map(|r| PromptDigest {
                target_path: r.target_path.clone(),
                text: r.prompt_text.clone(),
            })
            .collect()
    }
}

/// JSON companion of the Markdown manuscript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub manuscript: ManuscriptDraft,
    #[serde(default)]
    pub revision: Option<RevisionTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageState {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub status: StageState,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub inventory_digest: String,
    pub timestamp: String,
    pub stages: Vec<StageStatus>,
    pub tokens: LedgerTotals,
    /// Every emitted file. The manifest's own entry is the digest of the
    /// manifest serialized with that entry's digest left empty.
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    fn record(&mut self, stage: &str, status: StageState, detail: impl Into<String>) {
        self.stages.push(StageStatus {
            stage: stage.to_string(),
            status,
            detail: detail.into(),
        });
    }

    fn serialized(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// Recomputes the manifest's self-digest from its own content.
    pub fn self_digest(&self) -> String {
        let mut blank = self.clone();
        for o in &mut blank.outputs {
            if o.path == MANIFEST_FILE {
                o.sha256.clear();
            }
        }
        sha256_hex(blank.serialized().as_bytes())
    }
}

/// The inventory keeps the root as given, so artifacts do not embed the
/// checkout location.
fn scan_stage(root: &Path, opts: &RunOptions) -> Result<RepoInventory, PipelineError> {
    let mut inv =
        scan_repository(root, &opts.config.ingest).map_err(|e| PipelineError::ingest("scan", e))?;
    inv.root = root.to_path_buf();
    Ok(inv)
}

fn inventory_for(root: &Path, opts: &RunOptions) -> Result<RepoInventory, PipelineError> {
    if let Some(inv) = opts.read_artifact::<RepoInventory>(INVENTORY_FILE)? {
        if inv.root == root {
            return Ok(inv);
        }
    }
    scan_stage(root, opts)
}

fn read_sources(inv: &RepoInventory) -> Result<Vec<SourceText>, PipelineError> {
    inv.files
        .iter()
        .map(|f| read_source(f, &inv.root).map_err(|e| PipelineError::ingest("analyze", e)))
        .collect()
}

fn analyze_sources(inv: &RepoInventory, sources: &[SourceText]) -> AnalysisDocument {
    let files: Vec<CodeSummary> = sources.iter().map(|s| parse_source(&s.text, &s.path)).collect();
    AnalysisDocument {
        inventory_digest: inv.content_digest(),
        rollup: RepoDigest::from_summaries(&files),
        files,
    }
}

fn analysis_for(
    inv: &RepoInventory,
    sources: &[SourceText],
    opts: &RunOptions,
) -> Result<AnalysisDocument, PipelineError> {
    if let Some(doc) = opts.read_artifact::<AnalysisDocument>(ANALYSIS_FILE)? {
        if doc.inventory_digest == inv.content_digest() && doc.files.len() == sources.len() {
            return Ok(doc);
        }
    }
    Ok(analyze_sources(inv, sources))
}

struct FileDistillation {
    augmentation: AugmentationOutcome,
    prompt: ReconstructionPrompt,
    round_trip: RoundTripReport,
}

fn distill_one(
    source: &SourceText,
    summary: &CodeSummary,
    gateway: &Gateway,
    opts: &RunOptions,
) -> Result<FileDistillation, PipelineError> {
    let cfg = &opts.config.distill;
    let augmentation =
        maybe_augment(source, summary, gateway, cfg).map_err(|e| PipelineError::distill("augment", e))?;
    let (text, summary) = match augmentation.action {
        AugmentAction::Accepted => {
            let text = augmentation.effective_text(&source.text).to_string();
            let summary = parse_source(&text, &source.path);
            (
                SourceText {
                    path: source.path.clone(),
                    text,
                    lossy: source.lossy,
                },
                summary,
            )
        }
        _ => (source.clone(), summary.clone()),
    };
    let prompt = distill(&text, &summary, gateway, cfg).map_err(|e| PipelineError::distill("distill", e))?;
    let round_trip = round_trip_verify(&prompt, &text, &summary, gateway, cfg)
        .map_err(|e| PipelineError::distill("verify", e))?;
    Ok(FileDistillation {
        augmentation,
        prompt,
        round_trip,
    })
}

/// Distills every file, `max_in_flight` files at a time. Results keep file
/// order; the first failure in file order is reported.
fn distill_all(
    sources: &[SourceText],
    summaries: &[CodeSummary],
    gateway: &Gateway,
    opts: &RunOptions,
) -> Result<DistillDocument, PipelineError> {
    let n = sources.len();
    let workers = opts.config.backend.max_in_flight.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<FileDistillation, PipelineError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = distill_one(&sources[i], &summaries[i], gateway, opts);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut doc = DistillDocument {
        records: Vec::with_capacity(n),
        augmentation: Vec::with_capacity(n),
        verbatim_warnings: Vec::new(),
    };
    for slot in results {
        let d = slot.into_inner().unwrap().expect("every file is processed")?;
        doc.augmentation.push(AugmentationRecord {
            path: d.prompt.target_path.clone(),
            action: d.augmentation.action,
            reason: d.augmentation.reason,
        });
        if d.prompt.verbatim_warning {
            doc.verbatim_warnings.push(d.prompt.target_path.clone());
        }
        doc.records.push(DistillRecord {
            target_path: d.prompt.target_path,
            prompt_text: d.prompt.prompt_text,
            source_hash: d.prompt.source_hash,
            round_trip: RoundTripRecord::from(&d.round_trip),
        });
    }
    Ok(doc)
}

fn metadata(root: &Path, opts: &RunOptions, gateway: &Gateway) -> ManuscriptMeta {
    ManuscriptMeta {
        source_root: root.display().to_string(),
        timestamp: opts.timestamp(),
        config_digest: opts.config.digest(),
        backend_id: gateway.backend_id(),
    }
}

fn generate_stage(
    root: &Path,
    summaries: &[CodeSummary],
    prompts: &[PromptDigest],
    gateway: &Gateway,
    opts: &RunOptions,
) -> Result<ManuscriptDraft, PipelineError> {
    generate_manuscript(
        summaries,
        prompts,
        &opts.config.generation,
        gateway,
        metadata(root, opts, gateway),
    )
    .map_err(|f| PipelineError::article("generate", f.error))
}

fn sidecar_bytes(sidecar: &Sidecar) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    text.push('\n');
    text.into_bytes()
}

/// Writes `inventory.json`.
pub fn cmd_scan(root: &Path, opts: &RunOptions) -> Result<RepoInventory, PipelineError> {
    opts.validate("scan")?;
    let inv = scan_stage(root, opts)?;
    opts.write_json(INVENTORY_FILE, &inv)?;
    Ok(inv)
}

/// Writes `analysis.json`: one summary per file and a repository roll-up.
pub fn cmd_analyze(root: &Path, opts: &RunOptions) -> Result<AnalysisDocument, PipelineError> {
    opts.validate("analyze")?;
    let inv = inventory_for(root, opts)?;
    let sources = read_sources(&inv)?;
    let doc = analyze_sources(&inv, &sources);
    opts.write_json(ANALYSIS_FILE, &doc)?;
    Ok(doc)
}

/// Writes `distill.json`: augmentation, reconstruction prompt and
/// round-trip score for every file.
pub fn cmd_distill(root: &Path, opts: &RunOptions) -> Result<DistillDocument, PipelineError> {
    opts.validate("distill")?;
    let gateway = opts.gateway("distill")?;
    let inv = inventory_for(root, opts)?;
    let sources = read_sources(&inv)?;
    let analysis = analysis_for(&inv, &sources, opts)?;
    let doc = distill_all(&sources, &analysis.files, &gateway, opts)?;
    opts.write_json(DISTILL_FILE, &doc)?;
    Ok(doc)
}

/// Writes the unrevised `manuscript.md` and its sidecar.
pub fn cmd_generate(root: &Path, opts: &RunOptions) -> Result<ManuscriptDraft, PipelineError> {
    opts.validate("generate")?;
    let gateway = opts.gateway("generate")?;
    let inv = inventory_for(root, opts)?;
    let sources = read_sources(&inv)?;
    let analysis = analysis_for(&inv, &sources, opts)?;
    let prompts = opts
        .read_artifact::<DistillDocument>(DISTILL_FILE)?
        .map(|d| d.prompt_digests())
        .unwrap_or_default();
    let manuscript = generate_stage(root, &analysis.files, &prompts, &gateway, opts)?;
    opts.write(MANUSCRIPT_FILE, manuscript.to_markdown().as_bytes())?;
    opts.write(
        SIDECAR_FILE,
        &sidecar_bytes(&Sidecar {
            manuscript: manuscript.clone(),
            revision: None,
        }),
    )?;
    Ok(manuscript)
}

/// A manuscript from a sidecar JSON file or from Markdown.
pub fn load_manuscript(path: &Path) -> Result<ManuscriptDraft, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        PipelineError::new(ErrorKind::Input, "load", format!("{}: {e}", path.display()))
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<Sidecar>(&text)
            .map(|s| s.manuscript)
            .map_err(|e| PipelineError::new(ErrorKind::Input, "load", format!("{}: {e}", path.display())))
    } else {
        Ok(ManuscriptDraft::from_markdown(&text))
    }
}

/// Writes `quality.json` for a manuscript file, by default the sidecar in
/// the output directory.
pub fn cmd_evaluate(manuscript: Option<&Path>, opts: &RunOptions) -> Result<QualityReport, PipelineError> {
    opts.validate("evaluate")?;
    let path = manuscript
        .map(Path::to_path_buf)
        .unwrap_or_else(|| opts.out_dir.join(SIDECAR_FILE));
    let m = load_manuscript(&path)?;
    let report = evaluate(&m, &opts.config.quality);
    opts.write_json(QUALITY_FILE, &report)?;
    Ok(report)
}

/// Writes `comparison.json`.
pub fn cmd_compare(left: &Path, right: &Path, opts: &RunOptions) -> Result<ComparisonReport, PipelineError> {
    opts.validate("compare")?;
    let a = load_manuscript(left)?;
    let b = load_manuscript(right)?;
    let report = compare(
        &left.display().to_string(),
        &a,
        &right.display().to_string(),
        &b,
        &opts.config.quality,
    )
    .map_err(|e: CompareError| PipelineError::new(ErrorKind::Input, "compare", e.to_string()))?;
    opts.write_json(COMPARISON_FILE, &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub manuscript: ManuscriptDraft,
    pub quality: QualityReport,
    pub revision: RevisionTrace,
}

/// Failure of a full run, with the manifest written so far.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct PipelineFailure {
    pub error: PipelineError,
    pub manifest: Option<Box<RunManifest>>,
}

impl From<PipelineError> for PipelineFailure {
    fn from(error: PipelineError) -> Self {
        Self {
            error,
            manifest: None,
        }
    }
}

const STAGES: [&str; 8] = [
    "scan", "analyze", "augment", "distill", "verify", "generate", "revise", "evaluate",
];

fn finish_manifest(manifest: &mut RunManifest, opts: &RunOptions) -> Result<(), PipelineError> {
    manifest.outputs.push(OutputFile {
        path: MANIFEST_FILE.to_string(),
        sha256: String::new(),
    });
    let digest = manifest.self_digest();
    manifest.outputs.last_mut().unwrap().sha256 = digest;
    opts.write(MANIFEST_FILE, manifest.serialized().as_bytes())?;
    Ok(())
}

fn fail(
    mut manifest: RunManifest,
    gateway: &Gateway,
    error: PipelineError,
    opts: &RunOptions,
) -> PipelineFailure {
    let done = manifest.stages.len();
    let failed = STAGES
        .iter()
        .position(|s| *s == error.stage)
        .filter(|&i| i >= done)
        .unwrap_or(done);
    for (i, stage) in STAGES.iter().enumerate().skip(done) {
        let (status, detail) = match i.cmp(&failed) {
            std::cmp::Ordering::Less => (StageState::Ok, String::new()),
            std::cmp::Ordering::Equal => (StageState::Failed, error.message.clone()),
            std::cmp::Ordering::Greater => (StageState::Skipped, String::new()),
        };
        manifest.record(stage, status, detail);
    }
    manifest.tokens = gateway.ledger().totals();
    let written = finish_manifest(&mut manifest, opts);
    PipelineFailure {
        error,
        manifest: written.ok().map(|_| Box::new(manifest)),
    }
}

/// scan, analyze, augment, distill and verify, generate, revise, evaluate;
/// then writes the manuscript, its sidecar, the quality report and the run
/// manifest.
pub fn cmd_pipeline(root: &Path, opts: &RunOptions) -> Result<PipelineOutcome, PipelineFailure> {
    opts.validate("config")?;
    let gateway = opts.gateway("config")?;
    let mut manifest = RunManifest {
        config_digest: opts.config.digest(),
        inventory_digest: String::new(),
        timestamp: opts.timestamp(),
        stages: Vec::new(),
        tokens: LedgerTotals::default(),
        outputs: Vec::new(),
    };

    // Nothing was read, so nothing is written for a bad input root.
    let inv = scan_stage(root, opts)?;
    manifest.inventory_digest = inv.content_digest();
    manifest.record("scan", StageState::Ok, format!("{} files", inv.files.len()));

    let sources = match read_sources(&inv) {
        Ok(s) => s,
        Err(e) => return Err(fail(manifest, &gateway, e, opts)),
    };
    let analysis = analyze_sources(&inv, &sources);
    manifest.record("analyze", StageState::Ok, format!("{} summaries", analysis.files.len()));

    let distilled = match distill_all(&sources, &analysis.files, &gateway, opts) {
        Ok(d) => d,
        Err(e) => return Err(fail(manifest, &gateway, e, opts)),
    };
    let accepted = distilled
        .augmentation
        .iter()
        .filter(|a| a.action == AugmentAction::Accepted)
        .count();
    let rejected = distilled
        .augmentation
        .iter()
        .filter(|a| a.action == AugmentAction::Rejected)
        .count();
    manifest.record(
        "augment",
        StageState::Ok,
        format!("{accepted} accepted, {rejected} rejected"),
    );
    manifest.record("distill", StageState::Ok, format!("{} prompts", distilled.records.len()));
    let passed = distilled.records.iter().filter(|r| r.round_trip.passed).count();
    manifest.record(
        "verify",
        StageState::Ok,
        format!("{passed}/{} round trips passed", distilled.records.len()),
    );

    let draft = match generate_stage(root, &analysis.files, &distilled.prompt_digests(), &gateway, opts) {
        Ok(m) => m,
        Err(e) => return Err(fail(manifest, &gateway, e, opts)),
    };
    manifest.record("generate", StageState::Ok, format!("{} sections", draft.sections.len()));

    let (manuscript, revision) = match revise(&draft, &opts.config.revision_policy(), &gateway) {
        Ok(r) => r,
        Err(f) => return Err(fail(manifest, &gateway, PipelineError::revision("revise", f.error), opts)),
    };
    manifest.record(
        "revise",
        StageState::Ok,
        format!("{} iterations", revision.iterations.len()),
    );

    let quality = evaluate(&manuscript, &opts.config.quality);
    manifest.record(
        "evaluate",
        StageState::Ok,
        format!("composite {:.4}, passed {}", quality.composite, quality.passed),
    );
    manifest.tokens = gateway.ledger().totals();

    let sidecar = Sidecar {
        manuscript: manuscript.clone(),
        revision: Some(revision.clone()),
    };
    let mut quality_text = serde_json::to_string_pretty(&quality).expect("report serializes");
    quality_text.push('\n');
    for (name, bytes) in [
        (MANUSCRIPT_FILE, manuscript.to_markdown().into_bytes()),
        (SIDECAR_FILE, sidecar_bytes(&sidecar)),
        (QUALITY_FILE, quality_text.into_bytes()),
    ] {
        let sha256 = opts.write(name, &bytes)?;
        manifest.outputs.push(OutputFile {
            path: name.to_string(),
            sha256,
        });
    }
    finish_manifest(&mut manifest, opts)?;
    Ok(PipelineOutcome {
        manifest,
        manuscript,
        quality,
        revision,
    })
}

//! Turns a Python repository into a draft research manuscript: scan, parse,
//! distill reconstruction prompts, draft sections through an LLM gateway,
//! score and revise.

pub mod analysis;
pub mod article;
pub mod config;
pub mod digest;
pub mod distill;
pub mod gateway;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod revision;
pub mod scalar;

pub use analysis::{parse_source, CodeSummary, CodeUnit, ParseStatus, UnitKind};
pub use article::{ManuscriptDraft, Section, SectionId, SectionSpec};
pub use config::PipelineConfig;
pub use gateway::{CompletionResult, Gateway, GatewayError, MockRules, PromptRequest};
pub use ingest::{scan_repository, IngestRules, RepoInventory};
pub use metrics::{ComparisonReport, QualityPolicy, QualityReport};
pub use pipeline::{PipelineError, RunManifest, RunOptions};
pub use revision::{RevisionPolicy, RevisionTrace};
pub use scalar::Scalar;

pub type Readability = metrics::Readability<f64>;
pub type Readability32 = metrics::Readability<f32>;
pub type StructuralMatch = distill::StructuralMatch<f64>;
pub type StructuralMatch32 = distill::StructuralMatch<f32>;

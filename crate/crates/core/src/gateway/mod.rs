//! Uniform access to chat-completion backends.
//!
//! A [`Gateway`] wraps one [`Backend`] with request validation, token
//! budgeting, an in-flight cap and retry with exponential backoff.

mod http;
mod ledger;
mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpBackend;
pub use ledger::{LedgerTotals, Reservation, TokenLedger};
pub use mock::{
    code_block, fragment, DefaultSpec, MockBackend, MockRuleError, MockRules, MockRulesFile,
    RuleSpec, Transform,
};

use crate::article::SectionId;
use crate::digest::json_digest;

pub const BACKOFF_BASE_MS: u64 = 500;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("token budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: u64, remaining: u64 },
    #[error("network failure after {attempts} attempts: {message}")]
    NetworkFailure { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("API key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    MockRules(#[from] MockRuleError),
}

/// Characters / 4, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Stage labels a request may carry.
pub fn is_registered_tag(tag: &str) -> bool {
    matches!(tag, "augment" | "distill" | "reconstruct" | "revise")
        || tag
            .strip_prefix("section:")
            .is_some_and(|id| id.parse::<SectionId>().is_ok())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: String,
}

impl PromptRequest {
    pub fn new(
        system_text: impl Into<String>,
        user_text: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
        tag: impl Into<String>,
    ) -> Result<Self, GatewayError> {
        let req = Self {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature,
            max_tokens,
            tag: tag.into(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user_text is empty".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be > 0".into()));
        }
        if !is_registered_tag(&self.tag) {
            return Err(GatewayError::InvalidRequest(format!(
                "unregistered stage tag {:?}",
                self.tag
            )));
        }
        Ok(())
    }

    pub fn estimated_prompt_tokens(&self) -> u64 {
        estimate_tokens(&self.system_text) + estimate_tokens(&self.user_text)
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub backend_id: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    /// Mock rule that answered, when the backend is a rule table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
}

impl CompletionResult {
    /// Digest over everything except latency.
    pub fn digest(&self) -> String {
        json_digest(&(
            &self.text,
            self.prompt_tokens,
            self.completion_tokens,
            &self.backend_id,
            self.attempt_count,
            &self.rule,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub token_budget: Option<u64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: "mock".into(),
            api_key_env: None,
            timeout_ms: 60_000,
            max_retries: 3,
            max_in_flight: 4,
            token_budget: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be >= 1".into()));
        }
        if self.kind == BackendKind::Http {
            if self.endpoint_url.as_deref().is_none_or(str::is_empty) {
                return Err(GatewayError::Config("http backend requires endpoint_url".into()));
            }
            if self.api_key_env.as_deref().is_none_or(str::is_empty) {
                return Err(GatewayError::Config("http backend requires api_key_env".into()));
            }
        }
        Ok(())
    }

    /// Reads the API key for an http backend. Fails before any request.
    pub fn resolve_api_key(&self) -> Result<Option<String>, GatewayError> {
        if self.kind != BackendKind::Http {
            return Ok(None);
        }
        let var = self.api_key_env.clone().unwrap_or_default();
        match std::env::var(&var) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(GatewayError::AuthMissing(var)),
        }
    }
}

/// Raw transport answer before accounting.
#[derive(Debug, Clone)]
pub struct RawCompletion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub rule: Option<String>,
}

#[derive(Debug)]
pub enum TransportError {
    /// Network failure, throttling or a server error.
    Retryable(String),
    Fatal(GatewayError),
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn send(&self, req: &PromptRequest) -> Result<RawCompletion, TransportError>;
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Upper bound of the full-jitter window before retry number `retry` (1-based).
pub fn backoff_ceiling_ms(retry: u32) -> u64 {
    BACKOFF_BASE_MS.saturating_mul(1u64 << (retry - 1).min(20))
}

#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    config: BackendConfig,
    ledger: Arc<TokenLedger>,
    slots: Slots,
    sleeper: Arc<dyn Sleeper>,
    jitter: Mutex<StdRng>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.id())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Builds the backend named by `config`. For http backends the API key
    /// is resolved here, so a missing secret fails before any request.
    pub fn from_config(config: &BackendConfig, mock_rules: Option<MockRules>) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend: Arc<dyn Backend> = match config.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(mock_rules.unwrap_or_else(MockRules::bundled))),
            BackendKind::Http => {
                let key = config.resolve_api_key()?.unwrap_or_default();
                Arc::new(HttpBackend::new(
                    config.endpoint_url.as_deref().unwrap_or_default(),
                    &config.model_name,
                    key,
                    config.timeout_ms,
                ))
            }
        };
        Self::with_backend(backend, config.clone())
    }

    pub fn with_backend(backend: Arc<dyn Backend>, config: BackendConfig) -> Result<Self, GatewayError> {
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be >= 1".into()));
        }
        Ok(Self {
            backend,
            ledger: Arc::new(TokenLedger::new(config.token_budget)),
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            config,
            sleeper: Arc::new(ThreadSleeper),
            jitter: Mutex::new(StdRng::seed_from_u64(0x5eed)),
        })
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        let reservation = self
            .ledger
            .reserve(request.estimated_prompt_tokens() + u64::from(request.max_tokens))?;
        let _slot = self.slots.acquire();
        let started = Instant::now();
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.send(request) {
                Ok(raw) => {
                    let prompt_tokens = raw
                        .prompt_tokens
                        .unwrap_or_else(|| request.estimated_prompt_tokens());
                    let completion_tokens =
                        raw.completion_tokens.unwrap_or_else(|| estimate_tokens(&raw.text));
                    self.ledger.settle(reservation, prompt_tokens, completion_tokens);
                    return Ok(CompletionResult {
                        text: raw.text,
                        prompt_tokens,
                        completion_tokens,
                        backend_id: self.backend.id(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                        rule: raw.rule,
                    });
                }
                Err(TransportError::Fatal(e)) => {
                    self.ledger.release(reservation);
                    return Err(e);
                }
                Err(TransportError::Retryable(message)) => {
                    if attempt >= max_attempts {
                        self.ledger.release(reservation);
                        return Err(GatewayError::NetworkFailure {
                            attempts: attempt,
                            message,
                        });
                    }
                    let ceiling = backoff_ceiling_ms(attempt);
                    let wait = self.jitter.lock().unwrap().random_range(0..=ceiling);
                    self.sleeper.sleep(Duration::from_millis(wait));
                }
            }
        }
    }
}

//! Adapter abstraction and the versioned HTTP wire format.
//!
//! Every synthesis tool, mock or remote, sits behind [`Adapter`]. The request
//! and response types here are exactly the JSON bodies of the `/v1` protocol:
//!
//! | method | path            | request                                                   | response                 |
//! |--------|-----------------|-----------------------------------------------------------|--------------------------|
//! | POST   | `/v1/generate`  | `{prompt, max_new_sentences, decoding, temperature, ...}` | `{text}`                 |
//! | POST   | `/v1/paraphrase`| `{text}`                                                  | `{text}`                 |
//! | POST   | `/v1/translate` | `{text, source_lang, target_lang}`                        | `{text}`                 |
//! | GET    | `/v1/health`    |                                                           | `{status, model_name}`   |
//!
//! Extra decoding options (top-k, nucleus, a sampling seed, ...) are
//! flattened into the generate request and passed through untouched.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::taxonomy::TechnologyType;

pub const PROTOCOL_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("transport error on endpoint {endpoint}{}: {message}", leg.as_ref().map(|l| format!(" ({l} leg)")).unwrap_or_default())]
    Transport {
        endpoint: String,
        leg: Option<String>,
        message: String,
    },
    #[error("generation stalled on endpoint {endpoint}: no usable output in two consecutive calls")]
    GenerationStalled { endpoint: String },
    #[error("endpoint {endpoint} returned an empty {operation} response")]
    EmptyResponse {
        endpoint: String,
        operation: &'static str,
    },
    #[error("endpoint {endpoint} does not support {operation}")]
    Unsupported {
        endpoint: String,
        operation: &'static str,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("document too short for extraction: {sentences} sentence(s), need {min}")]
    TooShort { sentences: usize, min: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    #[default]
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_new_sentences: usize,
    pub decoding: Decoding,
    pub temperature: f64,
    #[serde(flatten)]
    pub options: BTreeMap<String, Value>,
}

impl GenerateRequest {
    /// The optional integer `seed` option that mock adapters sample from.
    pub fn seed_option(&self) -> Option<u64> {
        self.options.get("seed").and_then(Value::as_u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslateRequest {
    pub text: String,
    pub source_lang: String,
    pub target_lang: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_name: String,
}

/// A synthesis tool. Operations a tool does not offer return
/// [`SynthError::Unsupported`].
pub trait Adapter: Send + Sync {
    fn generate(&self, request: &GenerateRequest) -> Result<TextResponse, SynthError> {
        let _ = request;
        Err(self.unsupported("generate"))
    }

    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<TextResponse, SynthError> {
        let _ = request;
        Err(self.unsupported("paraphrase"))
    }

    fn translate(&self, request: &TranslateRequest) -> Result<TextResponse, SynthError> {
        let _ = request;
        Err(self.unsupported("translate"))
    }

    fn health(&self) -> Result<HealthResponse, SynthError>;

    fn unsupported(&self, operation: &'static str) -> SynthError {
        SynthError::Unsupported {
            endpoint: self
                .health()
                .map(|h| h.model_name)
                .unwrap_or_else(|_| "unknown".into()),
            operation,
        }
    }
}

fn default_source_language() -> String {
    "en".into()
}

fn default_max_in_flight() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_retries() -> u32 {
    3
}

/// Where and what a synthesis tool is. Endpoints are listed in the adapters
/// file and referenced from build plans by `id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterEndpoint {
    pub id: String,
    pub kind: TechnologyType,
    /// `http(s)://...` or `mock:<kind>`.
    pub base_url: String,
    pub model_name: String,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_language: Option<String>,
    #[serde(default = "default_source_language")]
    pub source_language: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

impl AdapterEndpoint {
    /// An endpoint description for an in-process mock adapter.
    pub fn mock(id: &str, kind: TechnologyType, mock_kind: &str) -> Self {
        Self {
            id: id.into(),
            kind,
            base_url: format!("mock:{mock_kind}"),
            model_name: mock_kind.into(),
            family: "mock".into(),
            pivot_language: (kind == TechnologyType::Translate).then(|| "es".into()),
            source_language: default_source_language(),
            max_in_flight: default_max_in_flight(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
        }
    }

    pub fn with_pivot(mut self, pivot: Option<&str>) -> Self {
        self.pivot_language = pivot.map(str::to_string);
        self
    }

    pub fn is_mock(&self) -> bool {
        self.base_url.starts_with("mock:")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kind == TechnologyType::Real {
            return Err(format!("endpoint {}: kind must not be real", self.id));
        }
        if self.kind == TechnologyType::Translate && self.pivot_language.is_none() {
            return Err(format!("endpoint {}: translate endpoints need a pivot_language", self.id));
        }
        if self.max_in_flight == 0 {
            return Err(format!("endpoint {}: max_in_flight must be positive", self.id));
        }
        if !self.is_mock()
            && !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://"))
        {
            return Err(format!(
                "endpoint {}: base_url must be http(s)://... or mock:<kind>",
                self.id
            ));
        }
        Ok(())
    }
}

/// An endpoint description paired with the client that serves it.
#[derive(Clone)]
pub struct AdapterHandle {
    pub endpoint: AdapterEndpoint,
    pub client: Arc<dyn Adapter>,
}

impl std::fmt::Debug for AdapterHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterHandle")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

impl AdapterHandle {
    pub fn new(endpoint: AdapterEndpoint, client: Arc<dyn Adapter>) -> Self {
        Self { endpoint, client }
    }

    pub fn id(&self) -> &str {
        &self.endpoint.id
    }
}

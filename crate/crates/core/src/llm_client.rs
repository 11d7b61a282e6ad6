//! Client for OpenAI-compatible chat-completion endpoints and the
//! evaluation loop on top of it.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evalkit::{score, ConfusionMatrix, EvalError, EvalReport, LabelMapper};
use crate::promptgen::{PromptRecord, Scheme};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "FDLLM_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid inference config: {0}")]
    Config(String),
}

/// Bearer token; never serialized or printed.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()).map(ApiKey)
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the 2nd, 3rd, ... attempt; the last entry repeats.
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: vec![500, 2000, 8000],
        }
    }
}

impl RetryPolicy {
    fn delay(&self, retry: u32) -> Duration {
        let ms = self
            .backoff_ms
            .get(retry as usize)
            .or(self.backoff_ms.last())
            .copied()
            .unwrap_or(0);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(skip)]
    pub api_key: Option<ApiKey>,
}

fn default_max_tokens() -> u32 {
    32
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> f64 {
    60.0
}

impl InferenceConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            max_concurrency: default_concurrency(),
            timeout_s: default_timeout(),
            retry: RetryPolicy::default(),
            api_key: None,
        }
    }

    pub fn with_env_key(mut self) -> Self {
        self.api_key = ApiKey::from_env();
        self
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: &str| Err(ClientError::Config(m.to_string()));
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be >= 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be >= 1");
        }
        Ok(())
    }

    /// Full URL of the chat-completions route.
    pub fn completions_url(&self) -> String {
        let base = self.endpoint_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    id: String,
    prompt_sha256: String,
    text: String,
}

/// Raw responses keyed by (model, record id, prompt hash), optionally
/// persisted as JSONL.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<(String, String, String), String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing entries from `path` (if present) and appends new ones to it.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if let Ok(e) = serde_json::from_str::<CacheEntry>(&line) {
                    entries.insert((e.model, e.id, e.prompt_sha256), e.text);
                }
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, model: &str, record: &PromptRecord) -> Option<String> {
        let key = (
            model.to_string(),
            record.id().to_string(),
            prompt_hash(&record.prompt()),
        );
        self.entries.lock().unwrap().get(&key).cloned()
    }

    fn put(&self, model: &str, record: &PromptRecord, text: &str) {
        let entry = CacheEntry {
            model: model.to_string(),
            id: record.id().to_string(),
            prompt_sha256: prompt_hash(&record.prompt()),
            text: text.to_string(),
        };
        let mut entries = self.entries.lock().unwrap();
        if let Some(path) = &self.path {
            // best effort: a failed append only costs a re-query later
            if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
                let _ = writeln!(f, "{}", serde_json::to_string(&entry).unwrap());
            }
        }
        entries.insert((entry.model, entry.id, entry.prompt_sha256), entry.text);
    }
}

pub struct LlmClient {
    cfg: InferenceConfig,
    http: reqwest::Client,
}

impl LlmClient {
    pub fn new(cfg: InferenceConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { cfg, http })
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.cfg
    }

    fn request_body(&self, record: &PromptRecord) -> serde_json::Value {
        json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": record.prompt()}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        })
    }

    async fn attempt(&self, url: &str, body: &serde_json::Value) -> Result<String, (ClientError, bool)> {
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(&key.0);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| (ClientError::Transport(e.without_url().to_string()), true))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            return Err((ClientError::HttpStatus(status.as_u16()), retry));
        }
        let value: serde_json::Value = resp
            .json()
            .await
            .map_err(|e| (ClientError::MalformedResponse(e.without_url().to_string()), false))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                (
                    ClientError::MalformedResponse("missing choices[0].message.content".into()),
                    false,
                )
            })
    }

    /// Sends one record as a single user message and returns the assistant
    /// text verbatim. Transport failures, 429 and 5xx responses are retried.
    pub async fn infer_one(&self, record: &PromptRecord) -> Result<String, ClientError> {
        let url = self.cfg.completions_url();
        let body = self.request_body(record);
        let mut attempt = 0;
        loop {
            match self.attempt(&url, &body).await {
                Ok(text) => return Ok(text),
                Err((err, retryable)) => {
                    attempt += 1;
                    if !retryable || attempt >= self.cfg.retry.max_attempts {
                        return Err(err);
                    }
                    tokio::time::sleep(self.cfg.retry.delay(attempt - 1)).await;
                }
            }
        }
    }

    async fn infer_cached(&self, record: &PromptRecord, cache: Option<&ResponseCache>) -> Result<String, ClientError> {
        if let Some(hit) = cache.and_then(|c| c.get(&self.cfg.model_name, record)) {
            return Ok(hit);
        }
        let text = self.infer_one(record).await?;
        if let Some(c) = cache {
            c.put(&self.cfg.model_name, record, &text);
        }
        Ok(text)
    }

    /// Runs every record with at most `max_concurrency` requests in flight.
    /// Results are in input order; failures are reported per record.
    pub async fn infer_batch(
        &self,
        records: &[PromptRecord],
        cache: Option<&ResponseCache>,
    ) -> Vec<(String, Result<String, ClientError>)> {
        stream::iter(records)
            .map(|r| async move { (r.id().to_string(), self.infer_cached(r, cache).await) })
            .buffered(self.cfg.max_concurrency)
            .collect()
            .await
    }
}

/// One answered (or failed) record of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub id: String,
    pub truth: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Mapped label code, absent when unmapped.
    pub mapped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointEvaluation {
    pub report: EvalReport,
    pub confusion: ConfusionMatrix,
    pub responses: Vec<ResponseEntry>,
}

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("record {id}: {message}")]
    BadRecord { id: String, message: String },
}

/// Queries the endpoint for every record, maps the answers and scores them.
/// Failed requests count as unmapped.
pub async fn evaluate_endpoint(
    client: &LlmClient,
    eval_set: &[PromptRecord],
    scheme: Scheme,
    mapper: &LabelMapper,
    cache: Option<&ResponseCache>,
) -> Result<EndpointEvaluation, EvaluateError> {
    if eval_set.is_empty() {
        return Err(EvalError::EmptyInput.into());
    }
    let truths = eval_set
        .iter()
        .map(|r| {
            crate::promptgen::Label::from_code(&r.meta.label, scheme).map_err(|e| EvaluateError::BadRecord {
                id: r.id().to_string(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let answers = client.infer_batch(eval_set, cache).await;

    let mut pairs = Vec::with_capacity(answers.len());
    let mut responses = Vec::with_capacity(answers.len());
    for ((id, answer), truth) in answers.into_iter().zip(truths) {
        let (raw, error, mapped) = match answer {
            Ok(text) => {
                let mapped = mapper.map(&text, scheme);
                (Some(text), None, mapped)
            }
            Err(e) => (None, Some(e.to_string()), None),
        };
        pairs.push((truth, mapped));
        responses.push(ResponseEntry {
            id,
            truth: truth.code(),
            raw,
            error,
            mapped: mapped.map(|l| l.code()),
        });
    }
    let (report, confusion) = score(&pairs)?;
    Ok(EndpointEvaluation {
        report,
        confusion,
        responses,
    })
}

//! Live provider backends and the wrappers that make them safe to batch:
//! HTTP clients for the three commercial wire formats, a persistent
//! response cache, an in-flight limiter, and call counters for manifests.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use personaforge_core::provider::{
    cache_key, ChatProvider, ChatRequest, ChatResponse, ProviderConfig, ProviderError, ProviderKind,
};

/// Counters surfaced in run manifests.
#[derive(Debug, Default)]
pub struct Counters {
    pub provider_calls: AtomicU64,
    pub cache_hits: AtomicU64,
}

impl Counters {
    pub fn provider_calls(&self) -> u64 {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }
}

/// Blocking HTTP chat-completion client for one configured provider.
pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct OpenAiMessage<'a> {
    role: &'static str,
    content: &'a str,
}

/// OpenAI-style `/v1/chat/completions` body, also spoken by Mistral.
#[derive(Serialize)]
pub struct OpenAiRequestBody<'a> {
    pub model: &'a str,
    pub temperature: f64,
    messages: Vec<OpenAiMessage<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl<'a> OpenAiRequestBody<'a> {
    pub fn from_request(request: &'a ChatRequest) -> Self {
        OpenAiRequestBody {
            model: &request.model,
            temperature: request.temperature.value(),
            messages: vec![
                OpenAiMessage {
                    role: "system",
                    content: &request.system_prompt,
                },
                OpenAiMessage {
                    role: "user",
                    content: &request.user_prompt,
                },
            ],
            max_tokens: request.max_output_hint,
        }
    }
}

#[derive(Deserialize)]
struct OpenAiResponseBody {
    choices: Vec<OpenAiChoice>,
}

#[derive(Deserialize)]
struct OpenAiChoice {
    message: OpenAiChoiceMessage,
}

#[derive(Deserialize)]
struct OpenAiChoiceMessage {
    content: String,
}

/// Anthropic `/v1/messages` body; the system prompt is a top-level field
/// and an explicit output token limit is required.
#[derive(Serialize)]
pub struct AnthropicRequestBody<'a> {
    pub model: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
    pub system: &'a str,
    messages: Vec<OpenAiMessage<'a>>,
}

/// Output cap used when a request carries no explicit hint.
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;

impl<'a> AnthropicRequestBody<'a> {
    pub fn from_request(request: &'a ChatRequest) -> Self {
        AnthropicRequestBody {
            model: &request.model,
            max_tokens: request.max_output_hint.unwrap_or(DEFAULT_MAX_OUTPUT_TOKENS),
            temperature: request.temperature.value(),
            system: &request.system_prompt,
            messages: vec![OpenAiMessage {
                role: "user",
                content: &request.user_prompt,
            }],
        }
    }
}

#[derive(Deserialize)]
struct AnthropicResponseBody {
    content: Vec<AnthropicContent>,
}

#[derive(Deserialize)]
struct AnthropicContent {
    #[serde(default)]
    text: String,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build();
        Ok(HttpProvider {
            agent: ureq::Agent::new_with_config(agent_config),
            config,
        })
    }

    fn endpoint_url(&self) -> String {
        let base = self.config.endpoint.trim_end_matches('/');
        match self.config.kind {
            ProviderKind::OpenAi | ProviderKind::Mistral => {
                format!("{base}/v1/chat/completions")
            }
            ProviderKind::Anthropic => format!("{base}/v1/messages"),
            ProviderKind::Mock => base.to_string(),
        }
    }

    fn credential(&self) -> Result<String, ProviderError> {
        std::env::var(&self.config.credential_env).map_err(|_| {
            ProviderError::Auth(format!(
                "environment variable {} is not set",
                self.config.credential_env
            ))
        })
    }

    fn send_once(&self, url: &str, request: &ChatRequest, key: &str) -> Result<String, SendError> {
        let body = match self.config.kind {
            ProviderKind::Anthropic => {
                serde_json::to_value(AnthropicRequestBody::from_request(request))
            }
            _ => serde_json::to_value(OpenAiRequestBody::from_request(request)),
        }
        .map_err(|e| SendError::Fatal(ProviderError::Transport(e.to_string())))?;

        let mut http_request = self.agent.post(url);
        http_request = match self.config.kind {
            ProviderKind::Anthropic => http_request
                .header("x-api-key", key)
                .header("anthropic-version", "2023-06-01"),
            _ => http_request.header("authorization", &format!("Bearer {key}")),
        };
        let mut response = http_request
            .send_json(&body)
            .map_err(|e| SendError::Retryable(ProviderError::Transport(e.to_string())))?;

        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| SendError::Retryable(ProviderError::Transport(e.to_string())))?;
        match status {
            200..=299 => Ok(text),
            401 | 403 => Err(SendError::Fatal(ProviderError::Auth(format!(
                "status {status}: {text}"
            )))),
            429 | 500..=599 => Err(SendError::Retryable(ProviderError::Api {
                status,
                body: text,
            })),
            _ => Err(SendError::Fatal(ProviderError::Api { status, body: text })),
        }
    }

    fn extract_text(&self, payload: &str) -> Result<String, ProviderError> {
        match self.config.kind {
            ProviderKind::Anthropic => {
                let parsed: AnthropicResponseBody = serde_json::from_str(payload)
                    .map_err(|e| ProviderError::Transport(format!("bad response body: {e}")))?;
                parsed
                    .content
                    .first()
                    .map(|c| c.text.clone())
                    .ok_or_else(|| ProviderError::Transport("empty content array".into()))
            }
            _ => {
                let parsed: OpenAiResponseBody = serde_json::from_str(payload)
                    .map_err(|e| ProviderError::Transport(format!("bad response body: {e}")))?;
                parsed
                    .choices
                    .first()
                    .map(|c| c.message.content.clone())
                    .ok_or_else(|| ProviderError::Transport("empty choices array".into()))
            }
        }
    }
}

enum SendError {
    Retryable(ProviderError),
    Fatal(ProviderError),
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let key = self.credential()?;
        let url = self.endpoint_url();
        let started = Instant::now();
        let mut last_error = ProviderError::Transport("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                // Exponential backoff, capped at five seconds.
                let millis = 250u64.saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(millis.min(5_000)));
            }
            match self.send_once(&url, request, &key) {
                Ok(payload) => {
                    let text = self.extract_text(&payload)?;
                    return Ok(ChatResponse {
                        text,
                        model: request.model.clone(),
                        latency: started.elapsed(),
                        from_cache: false,
                    });
                }
                Err(SendError::Fatal(error)) => return Err(error),
                Err(SendError::Retryable(error)) => last_error = error,
            }
        }
        // Surface retry exhaustion as a transport failure, body preserved.
        Err(match last_error {
            ProviderError::Api { status, body } => {
                ProviderError::Transport(format!("retries exhausted; last status {status}: {body}"))
            }
            other => other,
        })
    }
}

/// Counting semaphore bounding in-flight requests per provider.
pub struct InFlightLimiter {
    permits: Mutex<u32>,
    released: Condvar,
}

impl InFlightLimiter {
    pub fn new(permits: u32) -> Self {
        InFlightLimiter {
            permits: Mutex::new(permits.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut available = self.permits.lock().unwrap();
        while *available == 0 {
            available = self.released.wait(available).unwrap();
        }
        *available -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.released.notify_one();
    }
}

/// Applies an in-flight bound around any provider.
pub struct LimitedProvider<P> {
    inner: P,
    limiter: InFlightLimiter,
}

impl<P: ChatProvider> LimitedProvider<P> {
    pub fn new(inner: P, max_in_flight: u32) -> Self {
        LimitedProvider {
            inner,
            limiter: InFlightLimiter::new(max_in_flight),
        }
    }
}

impl<P: ChatProvider> ChatProvider for LimitedProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.limiter.acquire();
        let result = self.inner.complete(request);
        self.limiter.release();
        result
    }
}

/// Counts calls that actually reach the wrapped provider.
pub struct CountingProvider<P> {
    inner: P,
    counters: Arc<Counters>,
}

impl<P: ChatProvider> CountingProvider<P> {
    pub fn new(inner: P, counters: Arc<Counters>) -> Self {
        CountingProvider { inner, counters }
    }
}

impl<P: ChatProvider> ChatProvider for CountingProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.counters.provider_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    model: String,
    text: String,
}

/// Content-addressed response cache: `cache/<model>/<key>.json`.
///
/// The cache is what makes long runs resumable and repeat runs free: a hit
/// returns the stored text with `from_cache = true` and never touches the
/// wrapped provider. Entries never cross model names because the key hashes
/// the model and the layout separates them per directory.
pub struct DiskCacheProvider<P> {
    inner: P,
    dir: PathBuf,
    counters: Arc<Counters>,
    write_lock: Mutex<()>,
}

fn sanitize_component(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "_".to_string()
    } else {
        cleaned
    }
}

impl<P: ChatProvider> DiskCacheProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>, counters: Arc<Counters>) -> Self {
        DiskCacheProvider {
            inner,
            dir: dir.into(),
            counters,
            write_lock: Mutex::new(()),
        }
    }

    fn entry_path(&self, request: &ChatRequest, key: &str) -> PathBuf {
        self.dir
            .join(sanitize_component(&request.model))
            .join(format!("{key}.json"))
    }

    fn read_entry(path: &Path, key: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(path).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.key == key).then_some(entry)
    }

    fn write_entry(&self, path: &Path, entry: &CacheEntry) {
        // Serialized writes plus rename keep entries whole even if a run is
        // interrupted; a failed cache write only costs a future re-fetch.
        let _guard = self.write_lock.lock().unwrap();
        if let Some(parent) = path.parent() {
            if std::fs::create_dir_all(parent).is_err() {
                return;
            }
        }
        let tmp = path.with_extension("tmp");
        if let Ok(body) = serde_json::to_vec(entry) {
            if std::fs::write(&tmp, body).is_ok() {
                let _ = std::fs::rename(&tmp, path);
            }
        }
    }
}

impl<P: ChatProvider> ChatProvider for DiskCacheProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let key = cache_key(request);
        let path = self.entry_path(request, &key);
        if let Some(entry) = Self::read_entry(&path, &key) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(ChatResponse {
                text: entry.text,
                model: entry.model,
                latency: Duration::ZERO,
                from_cache: true,
            });
        }
        let response = self.inner.complete(request)?;
        self.write_entry(
            &path,
            &CacheEntry {
                key,
                model: response.model.clone(),
                text: response.text.clone(),
            },
        );
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use personaforge_core::domain::Temperature;
    use personaforge_core::provider::MockProvider;

    fn request(user: &str) -> ChatRequest {
        ChatRequest::new("mock-model", "sys", user, Temperature::zero()).unwrap()
    }

    #[test]
    fn cache_serves_second_request_identically() {
        let dir = tempfile::tempdir().unwrap();
        let counters = Arc::new(Counters::default());
        let mock = MockProvider::new().with_default_reply("cached answer");
        let provider = DiskCacheProvider::new(
            CountingProvider::new(mock, counters.clone()),
            dir.path(),
            counters.clone(),
        );

        let first = provider.complete(&request("hello")).unwrap();
        assert!(!first.from_cache);
        let second = provider.complete(&request("hello")).unwrap();
        assert!(second.from_cache);
        assert_eq!(first.text, second.text);
        assert_eq!(counters.provider_calls(), 1);
        assert_eq!(counters.cache_hits(), 1);
    }

    #[test]
    fn cache_layout_separates_models() {
        let dir = tempfile::tempdir().unwrap();
        let counters = Arc::new(Counters::default());
        let mock = MockProvider::new().with_default_reply("x");
        let provider = DiskCacheProvider::new(mock, dir.path(), counters);

        let mut other = request("hello");
        other.model = "other-model".into();
        provider.complete(&request("hello")).unwrap();
        provider.complete(&other).unwrap();
        assert!(dir.path().join("mock-model").is_dir());
        assert!(dir.path().join("other-model").is_dir());
    }

    #[test]
    fn limiter_allows_reentry_after_release() {
        let mock = MockProvider::new().with_default_reply("ok");
        let provider = LimitedProvider::new(mock, 1);
        for _ in 0..3 {
            assert!(provider.complete(&request("x")).is_ok());
        }
    }

    #[test]
    fn openai_wire_format_shape() {
        let chat = ChatRequest::new(
            "gpt-test",
            "be brief",
            "hello there",
            Temperature::parse("0.5").unwrap(),
        )
        .unwrap()
        .with_max_output_hint(64);
        let body = serde_json::to_value(OpenAiRequestBody::from_request(&chat)).unwrap();
        assert_eq!(body["model"], "gpt-test");
        assert_eq!(body["temperature"], 0.5);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], "be brief");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["max_tokens"], 64);
    }

    #[test]
    fn anthropic_wire_format_shape() {
        let chat =
            ChatRequest::new("claude-test", "be brief", "hello", Temperature::zero()).unwrap();
        let body = serde_json::to_value(AnthropicRequestBody::from_request(&chat)).unwrap();
        assert_eq!(body["model"], "claude-test");
        assert_eq!(body["system"], "be brief");
        assert_eq!(body["max_tokens"], DEFAULT_MAX_OUTPUT_TOKENS);
        assert_eq!(body["messages"][0]["role"], "user");
        assert!(body.get("messages").unwrap().as_array().unwrap().len() == 1);
    }

    #[test]
    fn missing_credential_is_an_auth_error() {
        let mut config = ProviderConfig::new(ProviderKind::OpenAi, "http://127.0.0.1:1", "m");
        config.credential_env = "PERSONAFORGE_TEST_UNSET_VAR".into();
        let provider = HttpProvider::new(config).unwrap();
        let err = provider.complete(&request("x")).unwrap_err();
        assert!(matches!(err, ProviderError::Auth(_)));
    }
}

//! Provider-agnostic chat completion: the request/response types, the
//! [`ChatProvider`] trait every backend implements, stable cache keys, and a
//! scripted deterministic mock.
//!
//! HTTP backends and the persistent response cache live in the CLI crate;
//! everything downstream of a provider only ever sees this interface, which
//! is what makes whole pipelines runnable offline and bit-reproducible.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};
use core::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::Temperature;

/// Errors surfaced by chat providers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// Credential env var missing or rejected by the endpoint.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Network-level failure after exhausting retries.
    #[error("transport failed: {0}")]
    Transport(String),
    /// Non-2xx response; the body is preserved verbatim for diagnosis.
    #[error("provider returned status {status}: {body}")]
    Api { status: u16, body: String },
    /// Request construction failed validation.
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// One chat call: a system prompt, a user prompt, and sampling settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: Temperature,
    /// Soft output-size hint; providers that require an explicit token limit
    /// fall back to their own default when absent.
    pub max_output_hint: Option<u32>,
    /// Distinguishes repeated samples of an otherwise identical request so
    /// repetitions are not collapsed by the cache. Not sent to providers.
    pub sample_index: Option<u32>,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        temperature: Temperature,
    ) -> Result<Self, ProviderError> {
        let system_prompt = system_prompt.into();
        let user_prompt = user_prompt.into();
        if system_prompt.is_empty() || user_prompt.is_empty() {
            return Err(ProviderError::InvalidRequest(
                "prompts must be non-empty".to_string(),
            ));
        }
        Ok(ChatRequest {
            model: model.into(),
            system_prompt,
            user_prompt,
            temperature,
            max_output_hint: None,
            sample_index: None,
        })
    }

    pub fn with_sample_index(mut self, index: u32) -> Self {
        self.sample_index = Some(index);
        self
    }

    pub fn with_max_output_hint(mut self, hint: u32) -> Self {
        self.max_output_hint = Some(hint);
        self
    }
}

/// A provider answer, verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub model: String,
    pub latency: Duration,
    pub from_cache: bool,
}

/// The provider families the framework can reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// OpenAI-style `/chat/completions` wire format.
    OpenAi,
    /// Anthropic `/v1/messages` wire format.
    Anthropic,
    /// Mistral's OpenAI-compatible `/v1/chat/completions` wire format.
    Mistral,
    /// Scripted offline mock.
    Mock,
}

/// How to reach one provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the credential, e.g.
    /// `PERSONAFORGE_API_KEY_OPENAI`.
    pub credential_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Bound on concurrent in-flight requests to this provider.
    pub max_in_flight: u32,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let model = model.into();
        let credential_env = match kind {
            ProviderKind::OpenAi => "PERSONAFORGE_API_KEY_OPENAI",
            ProviderKind::Anthropic => "PERSONAFORGE_API_KEY_ANTHROPIC",
            ProviderKind::Mistral => "PERSONAFORGE_API_KEY_MISTRAL",
            ProviderKind::Mock => "",
        };
        ProviderConfig {
            kind,
            endpoint: endpoint.into(),
            model,
            credential_env: credential_env.to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            max_in_flight: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout.is_zero() {
            return Err(ProviderError::InvalidRequest(
                "timeout must be positive".to_string(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_in_flight must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// The uniform interface every backend implements. Implementations must be
/// safe for concurrent invocation.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for alloc::boxed::Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(request)
    }
}

/// Stable content hash identifying a request across runs and platforms.
///
/// Hashes (model, system prompt, user prompt, temperature as its exact
/// decimal string), each length-prefixed so field boundaries are
/// unambiguous. A sample index, when present, is hashed as a fifth field so
/// repeated samples stay distinct.
pub fn cache_key(request: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    let mut feed = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    feed(request.model.as_bytes());
    feed(request.system_prompt.as_bytes());
    feed(request.user_prompt.as_bytes());
    feed(request.temperature.as_str().as_bytes());
    if let Some(index) = request.sample_index {
        feed(alloc::format!("sample:{index}").as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push(HEX[(byte >> 4) as usize] as char);
        out.push(HEX[(byte & 0x0f) as usize] as char);
    }
    out
}

const HEX: &[u8; 16] = b"0123456789abcdef";

/// A scripted failure a mock rule can inject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockFailure {
    Auth,
    Transport,
    Status,
}

impl MockFailure {
    fn to_error(&self) -> ProviderError {
        match self {
            MockFailure::Auth => ProviderError::Auth("scripted auth failure".to_string()),
            MockFailure::Transport => {
                ProviderError::Transport("scripted transport failure".to_string())
            }
            MockFailure::Status => ProviderError::Api {
                status: 500,
                body: "scripted provider failure".to_string(),
            },
        }
    }
}

/// One reply in a scripted sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Fail { fail: MockFailure },
}

/// What part of a request a mock rule matches on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockMatcher {
    Any,
    UserContains(String),
    SystemContains(String),
    KeyEquals(String),
}

impl MockMatcher {
    fn matches(&self, request: &ChatRequest) -> bool {
        match self {
            MockMatcher::Any => true,
            MockMatcher::UserContains(needle) => request.user_prompt.contains(needle.as_str()),
            MockMatcher::SystemContains(needle) => request.system_prompt.contains(needle.as_str()),
            MockMatcher::KeyEquals(key) => cache_key(request) == *key,
        }
    }
}

/// What a matched rule answers with.
#[derive(Debug)]
pub enum MockBehavior {
    /// Always the same text.
    Reply(String),
    /// Replies consumed in order across calls; the last entry repeats once
    /// the sequence is exhausted.
    Sequence {
        replies: Vec<MockReply>,
        cursor: AtomicUsize,
    },
    /// Deterministic pick from a pool, keyed by the request's cache key, so
    /// repeated samples vary without losing reproducibility.
    HashPick(Vec<String>),
    /// Always the given failure.
    Fail(MockFailure),
}

/// One matcher/behavior pair of a mock script.
#[derive(Debug)]
pub struct MockRule {
    pub matcher: MockMatcher,
    pub behavior: MockBehavior,
}

/// Deterministic scripted provider. A fixed script makes any pipeline run
/// bit-reproducible, which is what every golden-file test in this workspace
/// leans on.
#[derive(Debug, Default)]
pub struct MockProvider {
    rules: Vec<MockRule>,
    default_reply: Option<String>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fallback text when no rule matches.
    pub fn with_default_reply(mut self, text: impl Into<String>) -> Self {
        self.default_reply = Some(text.into());
        self
    }

    pub fn rule(mut self, matcher: MockMatcher, behavior: MockBehavior) -> Self {
        self.rules.push(MockRule { matcher, behavior });
        self
    }

    /// Script an exact request (by cache key) to a fixed reply.
    pub fn script_request(self, request: &ChatRequest, text: impl Into<String>) -> Self {
        self.rule(
            MockMatcher::KeyEquals(cache_key(request)),
            MockBehavior::Reply(text.into()),
        )
    }

    fn reply_for(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        for rule in &self.rules {
            if !rule.matcher.matches(request) {
                continue;
            }
            return match &rule.behavior {
                MockBehavior::Reply(text) => Ok(text.clone()),
                MockBehavior::Fail(failure) => Err(failure.to_error()),
                MockBehavior::Sequence { replies, cursor } => {
                    let at = cursor.fetch_add(1, Ordering::Relaxed);
                    let reply = replies
                        .get(at.min(replies.len().saturating_sub(1)))
                        .cloned()
                        .unwrap_or(MockReply::Text(String::new()));
                    match reply {
                        MockReply::Text(text) => Ok(text),
                        MockReply::Fail { fail } => Err(fail.to_error()),
                    }
                }
                MockBehavior::HashPick(pool) => {
                    if pool.is_empty() {
                        Ok(String::new())
                    } else {
                        let key = cache_key(request);
                        // First 8 hex chars of the key, as an index seed.
                        let seed = u64::from_str_radix(&key[..16], 16).unwrap_or(0);
                        Ok(pool[(seed % pool.len() as u64) as usize].clone())
                    }
                }
            };
        }
        self.default_reply.clone().ok_or_else(|| {
            ProviderError::InvalidRequest("mock script has no matching rule".to_string())
        })
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let text = self.reply_for(request)?;
        Ok(ChatResponse {
            text,
            model: request.model.clone(),
            latency: Duration::ZERO,
            from_cache: false,
        })
    }
}

/// Serializable mock script, loadable from a JSON file. Rules apply in
/// order; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub rules: Vec<MockScriptRule>,
}

/// One rule of a serialized mock script. Exactly one matcher field and one
/// behavior field should be set; unset matchers mean "match anything".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MockScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<MockReply>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_pick: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<MockFailure>,
}

/// A mock script rule that defines no behavior.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("mock script rule {0} defines no reply, sequence, hash_pick, or fail")]
pub struct MockScriptError(pub usize);

impl MockScript {
    pub fn compile(&self) -> Result<MockProvider, MockScriptError> {
        let mut provider = MockProvider::new();
        if let Some(default) = &self.default {
            provider = provider.with_default_reply(default.clone());
        }
        for (index, rule) in self.rules.iter().enumerate() {
            let matcher = if let Some(needle) = &rule.user_contains {
                MockMatcher::UserContains(needle.clone())
            } else if let Some(needle) = &rule.system_contains {
                MockMatcher::SystemContains(needle.clone())
            } else if let Some(key) = &rule.key {
                MockMatcher::KeyEquals(key.clone())
            } else {
                MockMatcher::Any
            };
            let behavior = if let Some(text) = &rule.reply {
                MockBehavior::Reply(text.clone())
            } else if let Some(replies) = &rule.sequence {
                MockBehavior::Sequence {
                    replies: replies.clone(),
                    cursor: AtomicUsize::new(0),
                }
            } else if let Some(pool) = &rule.hash_pick {
                MockBehavior::HashPick(pool.clone())
            } else if let Some(failure) = &rule.fail {
                MockBehavior::Fail(failure.clone())
            } else {
                return Err(MockScriptError(index));
            };
            provider = provider.rule(matcher, behavior);
        }
        Ok(provider)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn request(user: &str) -> ChatRequest {
        ChatRequest::new("mock-model", "system text", user, Temperature::zero()).unwrap()
    }

    #[test]
    fn scripted_reply_is_verbatim() {
        let req = request("items to rate");
        let mock = MockProvider::new().script_request(&req, "agree strongly with the statement");
        let response = mock.complete(&req).unwrap();
        assert_eq!(response.text, "agree strongly with the statement");
        assert!(!response.from_cache);
    }

    #[test]
    fn no_matching_rule_without_default_is_an_error() {
        let mock = MockProvider::new();
        assert!(mock.complete(&request("anything")).is_err());
    }

    #[test]
    fn cache_key_identity_and_sensitivity() {
        let a = request("hello");
        let b = request("hello");
        assert_eq!(cache_key(&a), cache_key(&b));

        let mut warm = request("hello");
        warm.temperature = Temperature::parse("0.5").unwrap();
        assert_ne!(cache_key(&a), cache_key(&warm));

        let trailing = request("hello ");
        assert_ne!(cache_key(&a), cache_key(&trailing));
    }

    #[test]
    fn cache_key_distinguishes_samples_and_models() {
        let base = request("hello");
        let sampled = request("hello").with_sample_index(1);
        assert_ne!(cache_key(&base), cache_key(&sampled));

        let mut other_model = request("hello");
        other_model.model = "other".into();
        assert_ne!(cache_key(&base), cache_key(&other_model));
    }

    #[test]
    fn sequence_rule_consumes_replies_then_sticks() {
        let mock = MockProvider::new().rule(
            MockMatcher::Any,
            MockBehavior::Sequence {
                replies: vec![
                    MockReply::Text("first".into()),
                    MockReply::Fail {
                        fail: MockFailure::Transport,
                    },
                    MockReply::Text("last".into()),
                ],
                cursor: AtomicUsize::new(0),
            },
        );
        let req = request("x");
        assert_eq!(mock.complete(&req).unwrap().text, "first");
        assert!(matches!(
            mock.complete(&req),
            Err(ProviderError::Transport(_))
        ));
        assert_eq!(mock.complete(&req).unwrap().text, "last");
        assert_eq!(mock.complete(&req).unwrap().text, "last");
    }

    #[test]
    fn hash_pick_is_deterministic_but_varies_by_sample() {
        let pool: Vec<String> = vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()];
        let mock = MockProvider::new().rule(MockMatcher::Any, MockBehavior::HashPick(pool));
        let one = mock
            .complete(&request("hello").with_sample_index(1))
            .unwrap()
            .text;
        let one_again = mock
            .complete(&request("hello").with_sample_index(1))
            .unwrap()
            .text;
        assert_eq!(one, one_again);
        let picks: alloc::collections::BTreeSet<String> = (0..32)
            .map(|i| {
                mock.complete(&request("hello").with_sample_index(i))
                    .unwrap()
                    .text
            })
            .collect();
        assert!(picks.len() > 1, "samples should spread over the pool");
    }

    #[test]
    fn script_round_trips_and_compiles() {
        let json = r#"{
            "default": "fallback",
            "rules": [
                {"user_contains": "CHARACTERISTICS", "reply": "agree strongly with the statement"},
                {"system_contains": "Detect the score", "sequence": ["not json", "{\"score\": 1}"]},
                {"fail": "auth"}
            ]
        }"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        let round = serde_json::to_string(&script).unwrap();
        let back: MockScript = serde_json::from_str(&round).unwrap();
        assert_eq!(back, script);

        let mock = script.compile().unwrap();
        let req = ChatRequest::new(
            "m",
            "sys",
            "CHARACTERISTICS: something",
            Temperature::zero(),
        )
        .unwrap();
        assert_eq!(
            mock.complete(&req).unwrap().text,
            "agree strongly with the statement"
        );
    }

    #[test]
    fn empty_prompts_rejected() {
        assert!(ChatRequest::new("m", "", "user", Temperature::zero()).is_err());
        assert!(ChatRequest::new("m", "sys", "", Temperature::zero()).is_err());
    }
}

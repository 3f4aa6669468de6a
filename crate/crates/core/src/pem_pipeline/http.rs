//! Chat-completion and embedding endpoint adapters.
//!
//! Requests follow the common OpenAI-compatible JSON shapes
//! (`POST {base_url}/chat/completions`, `POST {base_url}/embeddings`). Media
//! references are forwarded as `audio_url` / `video_url` content parts
//! according to the probe setting.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::embedder::{EmbedError, TextEmbedder};
use super::sampler::{CotSampler, SamplingError};
use super::types::{Instance, ProbeSetting, Sample, SampleSet};

/// Default probing prompt; an editable copy lives in `prompts/probe.txt`.
pub const DEFAULT_PROBE_TEMPLATE: &str = include_str!("../../../../prompts/probe.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("connection failed: {0}")]
    Io(String),
    #[error("response is not valid JSON: {0}")]
    Decode(String),
    #[error("no recorded response left")]
    Exhausted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// Offline hashing embedder.
    #[default]
    Hashing,
    /// The embeddings endpoint.
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub embedding_model: String,
    pub embedder: EmbedderKind,
    /// Takes precedence over `api_key_env`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub retries: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Probe prompt template file; the built-in template when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_template: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            embedding_model: "default".into(),
            embedder: EmbedderKind::Hashing,
            api_key: None,
            api_key_env: "AVR_API_KEY".into(),
            timeout_secs: 60.0,
            retries: 2,
            temperature: None,
            top_p: None,
            max_tokens: None,
            prompt_template: None,
        }
    }
}

impl EndpointConfig {
    pub fn api_key(&self) -> Option<String> {
        self.api_key.clone().or_else(|| std::env::var(&self.api_key_env).ok()).filter(|k| !k.is_empty())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }
}

pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UreqTransport;

impl HttpTransport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(map_ureq_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_ureq_error)?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

fn map_ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Io(other.to_string()),
    }
}

/// Replays recorded responses in order and keeps the requests it was sent.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    responses: Mutex<std::collections::VecDeque<Result<Value, TransportError>>>,
    requests: Mutex<Vec<(String, Value)>>,
}

impl RecordedTransport {
    pub fn new(responses: impl IntoIterator<Item = Value>) -> Self {
        Self::with_results(responses.into_iter().map(Ok))
    }

    pub fn with_results(responses: impl IntoIterator<Item = Result<Value, TransportError>>) -> Self {
        RecordedTransport {
            responses: Mutex::new(responses.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<(String, Value)> {
        self.requests.lock().expect("poisoned").clone()
    }
}

impl HttpTransport for RecordedTransport {
    fn post_json(
        &self,
        url: &str,
        _bearer: Option<&str>,
        body: &Value,
        _timeout: Duration,
    ) -> Result<Value, TransportError> {
        self.requests.lock().expect("poisoned").push((url.to_string(), body.clone()));
        self.responses.lock().expect("poisoned").pop_front().unwrap_or(Err(TransportError::Exhausted))
    }
}

fn post_with_retries(
    transport: &dyn HttpTransport,
    cfg: &EndpointConfig,
    url: &str,
    body: &Value,
) -> Result<Value, TransportError> {
    let key = cfg.api_key();
    let mut last = TransportError::Exhausted;
    for _ in 0..=cfg.retries {
        match transport.post_json(url, key.as_deref(), body, cfg.timeout()) {
            Ok(v) => return Ok(v),
            // client errors will not get better on retry
            Err(e @ TransportError::Status { status: 400..=499, .. }) => return Err(e),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Probe prompt with `{modality}`, `{question}` and `{choices}` placeholders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate(pub String);

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate(DEFAULT_PROBE_TEMPLATE.to_string())
    }
}

impl PromptTemplate {
    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        std::fs::read_to_string(path).map(PromptTemplate)
    }

    pub fn render(&self, instance: &Instance, setting: ProbeSetting) -> String {
        let modality = match setting {
            ProbeSetting::A => "only the audio track",
            ProbeSetting::V => "only the video frames (no sound)",
            ProbeSetting::AV => "both the audio track and the video frames",
        };
        let choices =
            instance.choices.as_ref().map(|c| format!("Choices: {}", c.join(" | "))).unwrap_or_default();
        self.0
            .replace("{modality}", modality)
            .replace("{question}", &instance.question)
            .replace("{choices}", &choices)
    }
}

/// Extracts `(answer, cot)` from a completion: the answer is the last
/// `<answer>` element, the chain of thought is the `<think>` element or,
/// without one, the text before the answer.
pub fn parse_completion(text: &str) -> Result<Sample, SamplingError> {
    let ans_open = text
        .rfind("<answer>")
        .ok_or_else(|| SamplingError::MalformedCompletion("no <answer> element".into()))?;
    let body_start = ans_open + "<answer>".len();
    let ans_len = text[body_start..]
        .find("</answer>")
        .ok_or_else(|| SamplingError::MalformedCompletion("unterminated <answer>".into()))?;
    let answer = text[body_start..body_start + ans_len].trim().to_string();
    if answer.is_empty() {
        return Err(SamplingError::MalformedCompletion("empty answer".into()));
    }
    let cot = match (text.find("<think>"), text.find("</think>")) {
        (Some(o), Some(c)) if o < c => text[o + "<think>".len()..c].trim(),
        _ => text[..ans_open].trim(),
    };
    Ok(Sample::new(answer, cot))
}

/// Samples chains of thought from a chat-completion endpoint, one request
/// per sample.
pub struct ChatSampler {
    cfg: EndpointConfig,
    template: PromptTemplate,
    transport: Box<dyn HttpTransport>,
}

impl ChatSampler {
    pub fn new(cfg: EndpointConfig, template: PromptTemplate, transport: Box<dyn HttpTransport>) -> Self {
        ChatSampler { cfg, template, transport }
    }

    pub fn request_body(&self, instance: &Instance, setting: ProbeSetting) -> Value {
        let mut content = vec![json!({"type": "text", "text": self.template.render(instance, setting)})];
        if setting.includes_audio() {
            content.push(json!({"type": "audio_url", "audio_url": {"url": instance.media.audio_ref}}));
        }
        if setting.includes_video() {
            content.push(json!({"type": "video_url", "video_url": {"url": instance.media.video_ref}}));
        }
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": content}],
        });
        let obj = body.as_object_mut().expect("object");
        if let Some(t) = self.cfg.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(p) = self.cfg.top_p {
            obj.insert("top_p".into(), json!(p));
        }
        if let Some(m) = self.cfg.max_tokens {
            obj.insert("max_tokens".into(), json!(m));
        }
        body
    }
}

impl CotSampler for ChatSampler {
    fn sample(
        &self,
        instance: &Instance,
        setting: ProbeSetting,
        n: usize,
    ) -> Result<SampleSet, SamplingError> {
        if n == 0 {
            return Err(SamplingError::InvalidCount);
        }
        let url = self.cfg.url("chat/completions");
        let body = self.request_body(instance, setting);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let resp = post_with_retries(self.transport.as_ref(), &self.cfg, &url, &body)?;
            let text =
                resp.pointer("/choices/0/message/content").and_then(Value::as_str).ok_or_else(|| {
                    SamplingError::MalformedCompletion("missing choices[0].message.content".into())
                })?;
            samples.push(parse_completion(text)?);
        }
        Ok(SampleSet { setting, samples })
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbedder {
    cfg: EndpointConfig,
    transport: Box<dyn HttpTransport>,
}

impl HttpEmbedder {
    pub fn new(cfg: EndpointConfig, transport: Box<dyn HttpTransport>) -> Self {
        HttpEmbedder { cfg, transport }
    }
}

impl TextEmbedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({"model": self.cfg.embedding_model, "input": texts});
        let resp = post_with_retries(self.transport.as_ref(), &self.cfg, &self.cfg.url("embeddings"), &body)?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::Malformed("missing data array".into()))?;
        let mut rows: Vec<(usize, Vec<f64>)> = data
            .iter()
            .enumerate()
            .map(|(k, item)| {
                let index = item.get("index").and_then(Value::as_u64).map_or(k, |i| i as usize);
                let vec = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| EmbedError::Malformed(format!("item {k} has no embedding")))?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| EmbedError::Malformed(format!("item {k} has a non-numeric entry")))
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                Ok((index, vec))
            })
            .collect::<Result<_, EmbedError>>()?;
        rows.sort_by_key(|(i, _)| *i);
        if rows.len() != texts.len() {
            return Err(EmbedError::CountMismatch { expected: texts.len(), found: rows.len() });
        }
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

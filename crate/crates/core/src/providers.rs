//! HTTP clients for chat-completion and embedding endpoints, and the settings
//! that select between them and the offline mocks.
//!
//! Both speak the widely deployed JSON shapes: `POST {endpoint}` with
//! `{model, messages, temperature, max_tokens}` answered by
//! `{choices: [{message: {content}}]}`, and `{model, input: [..]}` answered
//! by `{data: [{index, embedding}]}`.

use std::env;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rewriter::{EchoClient, GenerationClient, GenerationRequest};
use crate::semantic::{EmbeddingClient, NgramHashEmbedder};

pub const GENERATION_KEY_ENV: &str = "GENERATION_API_KEY";
pub const EMBEDDING_KEY_ENV: &str = "EMBEDDING_API_KEY";
pub const GENERATION_ENDPOINT_ENV: &str = "GENERATION_ENDPOINT";
pub const EMBEDDING_ENDPOINT_ENV: &str = "EMBEDDING_ENDPOINT";

/// Which backend to use and how to reach it.
///
/// `provider` is `"http"` or a mock name (`"mock:echo"` for generation,
/// `"mock:ngram"` for embeddings). The endpoint can be overridden by the
/// matching `*_ENDPOINT` environment variable; the credential is always read
/// from the environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    pub provider: String,
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub system_prompt: Option<String>,
}

impl ProviderSettings {
    pub fn generation_default() -> Self {
        ProviderSettings {
            provider: "mock:echo".into(),
            endpoint: None,
            model: "gpt-4o".into(),
            api_key_env: GENERATION_KEY_ENV.into(),
            temperature: 0.0,
            timeout_secs: 120,
            system_prompt: None,
        }
    }

    pub fn embedding_default() -> Self {
        ProviderSettings {
            provider: "mock:ngram".into(),
            model: "Qwen3-Embedding-4B".into(),
            api_key_env: EMBEDDING_KEY_ENV.into(),
            ..Self::generation_default()
        }
    }

    fn resolve_endpoint(&self, env_var: &str) -> Result<String> {
        env::var(env_var)
            .ok()
            .filter(|s| !s.is_empty())
            .or_else(|| self.endpoint.clone())
            .ok_or_else(|| Error::Provider(format!("no endpoint configured (set it in the config or {env_var})")))
    }

    fn api_key(&self) -> Result<Option<String>> {
        if self.api_key_env.is_empty() {
            return Err(Error::Provider("api_key_env must name an environment variable".into()));
        }
        Ok(env::var(&self.api_key_env).ok().filter(|s| !s.is_empty()))
    }

    pub fn build_generation_client(&self) -> Result<Box<dyn GenerationClient>> {
        match self.provider.as_str() {
            "mock:echo" => Ok(Box::new(EchoClient)),
            "http" => Ok(Box::new(HttpGenerationClient {
                http: http_client(self.timeout_secs)?,
                endpoint: self.resolve_endpoint(GENERATION_ENDPOINT_ENV)?,
                api_key: self.api_key()?,
                model: self.model.clone(),
                temperature: self.temperature,
                system_prompt: self.system_prompt.clone(),
            })),
            other => Err(Error::Provider(format!("unknown generation provider `{other}`"))),
        }
    }

    pub fn build_embedding_client(&self) -> Result<Box<dyn EmbeddingClient>> {
        match self.provider.as_str() {
            "mock:ngram" => Ok(Box::new(NgramHashEmbedder::default())),
            "http" => Ok(Box::new(HttpEmbeddingClient {
                http: http_client(self.timeout_secs)?,
                endpoint: self.resolve_endpoint(EMBEDDING_ENDPOINT_ENV)?,
                api_key: self.api_key()?,
                model: self.model.clone(),
            })),
            other => Err(Error::Provider(format!("unknown embedding provider `{other}`"))),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.provider.starts_with("mock:")
    }
}

fn http_client(timeout_secs: u64) -> Result<Client> {
    Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| Error::Provider(e.to_string()))
}

fn post_json(http: &Client, endpoint: &str, api_key: Option<&str>, body: &Value) -> Result<Value> {
    let mut req = http.post(endpoint).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| Error::Provider(e.to_string()))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| Error::Provider(e.to_string()))?;
    if !status.is_success() {
        let snippet: String = text.chars().take(200).collect();
        return Err(Error::Provider(format!("HTTP {status}: {snippet}")));
    }
    serde_json::from_str(&text).map_err(|e| Error::Provider(format!("invalid JSON response: {e}")))
}

/// Output token bound for a request: roughly twice the input, at four
/// characters per token.
fn max_tokens(request: &GenerationRequest) -> usize {
    (request.max_output_chars / 4).max(64)
}

pub struct HttpGenerationClient {
    http: Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    system_prompt: Option<String>,
}

impl HttpGenerationClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Result<Self> {
        Ok(HttpGenerationClient {
            http: http_client(120)?,
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            temperature: 0.0,
            system_prompt: None,
        })
    }

    fn body(&self, request: &GenerationRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.prompt}));
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": max_tokens(request),
        })
    }
}

impl GenerationClient for HttpGenerationClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let resp = post_json(&self.http, &self.endpoint, self.api_key.as_deref(), &self.body(request))?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Provider("response has no choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        &self.model
    }
}

pub struct HttpEmbeddingClient {
    http: Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl HttpEmbeddingClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Result<Self> {
        Ok(HttpEmbeddingClient {
            http: http_client(120)?,
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl EmbeddingClient for HttpEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let body = json!({"model": self.model, "input": texts});
        let resp = post_json(&self.http, &self.endpoint, self.api_key.as_deref(), &body)?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_value(resp).map_err(|e| Error::Provider(format!("bad embedding response: {e}")))?;
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn model(&self) -> &str {
        &self.model
    }
}

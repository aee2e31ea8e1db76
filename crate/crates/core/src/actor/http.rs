//! Chat-completion transport over HTTP with retries and a shared token
//! bucket.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Actor, ActorError, CallKey, ChatMessage};

/// Default environment variable holding the API key.
pub const API_KEY_ENV: &str = "LOGIC_CRITIC_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub max_retries: usize,
    pub backoff_base_ms: u64,
    pub requests_per_minute: u32,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4-turbo".into(),
            api_key_env: API_KEY_ENV.into(),
            temperature: 0.0,
            max_tokens: None,
            max_retries: 3,
            backoff_base_ms: 500,
            requests_per_minute: 60,
            timeout_secs: 120,
        }
    }
}

/// Token bucket holding up to `per_minute` tokens, refilled continuously.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        let cap = f64::from(per_minute.max(1));
        RateLimiter { per_minute: cap, state: Mutex::new((cap, Instant::now())) }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut guard = self.state.lock().expect("rate limiter lock");
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.per_minute / 60.0)
                    .min(self.per_minute);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) * 60.0 / self.per_minute)
            };
            thread::sleep(wait);
        }
    }
}

/// An OpenAI-style chat-completion client.
#[derive(Debug)]
pub struct HttpActor {
    config: EndpointConfig,
    api_key: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

enum Attempt {
    Done(String),
    Retry(ActorError),
    Fatal(ActorError),
}

impl HttpActor {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: EndpointConfig) -> Result<Self, ActorError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| ActorError::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: EndpointConfig, api_key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = RateLimiter::new(config.requests_per_minute);
        HttpActor { config, api_key, agent, limiter }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        self.limiter.acquire();
        let sent = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(ActorError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(ActorError::Transport(e.to_string())),
        };
        match status {
            200..=299 => match extract_content(&text) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fatal(ActorError::Transport(format!("unexpected response body: {text}"))),
            },
            429 => Attempt::Retry(ActorError::RateLimited { attempts: 0 }),
            500..=599 => Attempt::Retry(ActorError::Transport(format!("HTTP {status}: {text}"))),
            _ => Attempt::Fatal(ActorError::Transport(format!("HTTP {status}: {text}"))),
        }
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

impl Actor for HttpActor {
    fn complete(&self, _key: &CallKey, messages: &[ChatMessage]) -> Result<String, ActorError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        if let Some(max) = self.config.max_tokens {
            body["max_tokens"] = json!(max);
        }
        let attempts = self.config.max_retries + 1;
        let mut last = ActorError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Attempt::Done(content) => return Ok(content),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(match last {
            ActorError::RateLimited { .. } => ActorError::RateLimited { attempts },
            other => other,
        })
    }

    fn parameters(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        p.insert("actor".into(), "http".into());
        p.insert("base_url".into(), self.config.base_url.clone());
        p.insert("model".into(), self.config.model.clone());
        p.insert("temperature".into(), self.config.temperature.to_string());
        if let Some(max) = self.config.max_tokens {
            p.insert("max_tokens".into(), max.to_string());
        }
        p
    }
}

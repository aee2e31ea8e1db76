//! The Actor side of the loop: prompt assembly, transport and response
//! parsing. Nothing here interprets logic.

mod http;
mod prompt;
mod replay;
mod stratify;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{EndpointConfig, HttpActor, RateLimiter, API_KEY_ENV};
pub use prompt::{build_prompt, reprompt_messages, PromptAssets, EXEMPLAR_COUNT};
pub use replay::{fixture_path, ReplayActor};
pub use stratify::{parse_clusters, stratify, Cluster, MAX_CLUSTER_EXEMPLARS};

pub const PROGRAM_HEADER: &str = "### PROGRAM";
pub const TESTS_HEADER: &str = "### TESTS";
pub const QUERY_HEADER: &str = "### QUERY";

#[derive(Debug, Error)]
pub enum ActorError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by the endpoint after {attempts} attempts")]
    RateLimited { attempts: usize },
    #[error("could not parse actor output: {reason}")]
    OutputParse { reason: String, raw: String },
    #[error("no fixture for problem `{problem_id}` iteration {iteration} at {path}")]
    MissingFixture { problem_id: String, iteration: usize, path: String },
    #[error("missing prompt asset {0}")]
    MissingAsset(String),
    #[error("invalid actor request: {0}")]
    InvalidRequest(String),
    #[error("endpoint configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Generate,
    FixCompile,
    FixTests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptProfile {
    #[default]
    #[serde(rename = "few_shot_8")]
    FewShot8,
    #[serde(rename = "few_shot_20")]
    FewShot20,
    TrainedBare,
}

impl PromptProfile {
    pub fn exemplar_count(self) -> usize {
        match self {
            PromptProfile::FewShot8 => 8,
            PromptProfile::FewShot20 => 20,
            PromptProfile::TrainedBare => 0,
        }
    }
}

impl std::str::FromStr for PromptProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "few_shot_8" => Ok(PromptProfile::FewShot8),
            "few_shot_20" => Ok(PromptProfile::FewShot20),
            "trained_bare" => Ok(PromptProfile::TrainedBare),
            other => Err(format!("unknown prompt profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorRequest {
    pub mode: Mode,
    pub problem_text: String,
    pub prior_program: Option<String>,
    pub prior_tests: Option<String>,
    pub prior_query: Option<String>,
    pub critic_feedback: Option<String>,
    pub prompt_profile: PromptProfile,
}

impl ActorRequest {
    pub fn generate(problem_text: &str, profile: PromptProfile) -> Self {
        ActorRequest {
            mode: Mode::Generate,
            problem_text: problem_text.to_string(),
            prior_program: None,
            prior_tests: None,
            prior_query: None,
            critic_feedback: None,
            prompt_profile: profile,
        }
    }

    pub fn validate(&self) -> Result<(), ActorError> {
        if self.mode != Mode::Generate && (self.prior_program.is_none() || self.critic_feedback.is_none()) {
            return Err(ActorError::InvalidRequest(
                "repair modes need a prior program and critic feedback".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorResponse {
    pub program_text: String,
    pub tests_text: String,
    pub query_text: String,
    pub raw: String,
}

/// Identifies one Actor call for replay and logging.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallKey {
    pub problem_id: String,
    pub iteration: usize,
}

impl fmt::Display for CallKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.problem_id, self.iteration)
    }
}

/// A chat-completion backend. Implementations must be shareable across
/// worker threads.
pub trait Actor: Send + Sync {
    fn complete(&self, key: &CallKey, messages: &[ChatMessage]) -> Result<String, ActorError>;

    /// Sampling and transport parameters, recorded alongside outcomes.
    fn parameters(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

fn strip_fences(section: &str) -> String {
    let lines: Vec<&str> = section.lines().collect();
    let mut start = 0;
    let mut end = lines.len();
    while start < end && lines[start].trim().is_empty() {
        start += 1;
    }
    while end > start && lines[end - 1].trim().is_empty() {
        end -= 1;
    }
    if start < end && lines[start].trim_start().starts_with("```") {
        start += 1;
        if end > start && lines[end - 1].trim() == "```" {
            end -= 1;
        }
    }
    lines[start..end].join("\n").trim().to_string()
}

/// Splits raw Actor output into its three fenced sections. Text before the
/// first header is ignored; each header must appear exactly once.
pub fn parse_response(raw: &str) -> Result<ActorResponse, ActorError> {
    let fail = |reason: String| ActorError::OutputParse { reason, raw: raw.to_string() };
    let headers = [PROGRAM_HEADER, TESTS_HEADER, QUERY_HEADER];
    let mut sections: [Option<Vec<&str>>; 3] = [None, None, None];
    let mut current: Option<usize> = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        if let Some(h) = headers.iter().position(|h| trimmed.eq_ignore_ascii_case(h)) {
            if sections[h].is_some() {
                return Err(fail(format!("section `{}` appears more than once", headers[h])));
            }
            sections[h] = Some(Vec::new());
            current = Some(h);
            continue;
        }
        if let Some(c) = current {
            sections[c].as_mut().expect("open section").push(line);
        }
    }
    let mut texts = Vec::with_capacity(3);
    for (i, section) in sections.into_iter().enumerate() {
        let body = section.ok_or_else(|| fail(format!("missing section `{}`", headers[i])))?;
        let text = strip_fences(&body.join("\n"));
        if text.is_empty() {
            return Err(fail(format!("section `{}` is empty", headers[i])));
        }
        texts.push(text);
    }
    let query_text = texts.pop().expect("three sections");
    let tests_text = texts.pop().expect("three sections");
    let program_text = texts.pop().expect("three sections");
    Ok(ActorResponse { program_text, tests_text, query_text, raw: raw.to_string() })
}

/// Renders the three sections in the form [`parse_response`] reads.
pub fn render_response(program: &str, tests: &str, query: &str) -> String {
    format!(
        "{PROGRAM_HEADER}\n{}\n{TESTS_HEADER}\n{}\n{QUERY_HEADER}\n{}\n",
        program.trim(),
        tests.trim(),
        query.trim()
    )
}

/// One Actor call with a single reprompt when the output is malformed.
/// Transport retries are the backend's concern.
pub fn invoke(
    actor: &dyn Actor,
    assets: &PromptAssets,
    req: &ActorRequest,
    key: &CallKey,
) -> Result<ActorResponse, ActorError> {
    let messages = build_prompt(req, assets)?;
    let raw = actor.complete(key, &messages)?;
    match parse_response(&raw) {
        Ok(resp) => Ok(resp),
        Err(ActorError::OutputParse { .. }) => {
            let retry = reprompt_messages(&messages, &raw, assets);
            let raw = actor.complete(key, &retry)?;
            parse_response(&raw)
        }
        Err(e) => Err(e),
    }
}

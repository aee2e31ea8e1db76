//! Clustering natural-language statements by logical structure.

use serde::{Deserialize, Serialize};

use super::{Actor, ActorError, CallKey, ChatMessage, PromptAssets, Role};

/// Exemplars kept per cluster; the prompt asks for at most this many.
pub const MAX_CLUSTER_EXEMPLARS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub name: String,
    pub description: String,
    pub exemplars: Vec<String>,
}

fn strip_bullet(line: &str) -> Option<&str> {
    let t = line.trim_start();
    if let Some(rest) = t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")) {
        return Some(rest.trim());
    }
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(r.trim());
        }
    }
    None
}

fn cluster_heading(line: &str) -> Option<String> {
    let t = line.trim().trim_start_matches('#').trim();
    let lower = t.to_ascii_lowercase();
    if !lower.starts_with("cluster") || line.trim_start().starts_with("- ") {
        return None;
    }
    let rest = t["cluster".len()..].trim_start();
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit()).trim_start();
    let name = rest.trim_start_matches([':', '-', '.']).trim().trim_matches('*').trim();
    Some(name.to_string())
}

/// Reads clusters written as `## Cluster: name`, an optional
/// `Description:` line and bulleted statements. Extra statements beyond
/// [`MAX_CLUSTER_EXEMPLARS`] are dropped.
pub fn parse_clusters(text: &str) -> Result<Vec<Cluster>, ActorError> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for line in text.lines() {
        if let Some(name) = cluster_heading(line) {
            let name = if name.is_empty() { format!("cluster_{}", clusters.len() + 1) } else { name };
            clusters.push(Cluster { name, description: String::new(), exemplars: Vec::new() });
            continue;
        }
        let Some(current) = clusters.last_mut() else { continue };
        let t = line.trim();
        if let Some(d) = t.strip_prefix("Description:").or_else(|| t.strip_prefix("description:")) {
            current.description = d.trim().to_string();
        } else if let Some(s) = strip_bullet(line) {
            if !s.is_empty() && current.exemplars.len() < MAX_CLUSTER_EXEMPLARS {
                current.exemplars.push(s.trim_matches('"').to_string());
            }
        }
    }
    if clusters.is_empty() && !text.trim().is_empty() {
        return Err(ActorError::OutputParse { reason: "no clusters found".into(), raw: text.to_string() });
    }
    Ok(clusters)
}

/// Asks the Actor to cluster `statements`. An empty input makes no call.
pub fn stratify(statements: &[String], actor: &dyn Actor, assets: &PromptAssets) -> Result<Vec<Cluster>, ActorError> {
    if statements.is_empty() {
        return Ok(Vec::new());
    }
    let listing: String = statements.iter().enumerate().map(|(i, s)| format!("{}. {}\n", i + 1, s.trim())).collect();
    let messages = vec![
        ChatMessage::new(Role::System, assets.stratify.trim_end()),
        ChatMessage::new(Role::User, format!("Statements:\n{listing}")),
    ];
    let key = CallKey { problem_id: "stratify".into(), iteration: 1 };
    let raw = actor.complete(&key, &messages)?;
    let clusters = parse_clusters(&raw)?;
    if clusters.is_empty() {
        return Err(ActorError::OutputParse { reason: "no clusters found".into(), raw });
    }
    Ok(clusters)
}

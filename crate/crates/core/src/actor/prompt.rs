//! Prompt assets and deterministic prompt assembly.

use std::fs;
use std::path::Path;

use super::{ActorError, ActorRequest, ChatMessage, Mode, Role, PROGRAM_HEADER, QUERY_HEADER, TESTS_HEADER};

pub const EXEMPLAR_COUNT: usize = 20;

const SYSTEM_FILE: &str = "system.md";
const GUIDELINES_FILE: &str = "test_guidelines.md";
const ERROR_FILE: &str = "error_correction.md";
const REPROMPT_FILE: &str = "reprompt.md";
const STRATIFY_FILE: &str = "stratify.md";
const EXEMPLAR_DIR: &str = "exemplars";

macro_rules! asset {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/prompts/", $path))
    };
}

const EMBEDDED_EXEMPLARS: [&str; EXEMPLAR_COUNT] = [
    asset!("exemplars/01.md"),
    asset!("exemplars/02.md"),
    asset!("exemplars/03.md"),
    asset!("exemplars/04.md"),
    asset!("exemplars/05.md"),
    asset!("exemplars/06.md"),
    asset!("exemplars/07.md"),
    asset!("exemplars/08.md"),
    asset!("exemplars/09.md"),
    asset!("exemplars/10.md"),
    asset!("exemplars/11.md"),
    asset!("exemplars/12.md"),
    asset!("exemplars/13.md"),
    asset!("exemplars/14.md"),
    asset!("exemplars/15.md"),
    asset!("exemplars/16.md"),
    asset!("exemplars/17.md"),
    asset!("exemplars/18.md"),
    asset!("exemplars/19.md"),
    asset!("exemplars/20.md"),
];

/// Prompt text blocks. Exemplars are ordered; the first eight form the
/// small few-shot profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub system: String,
    pub test_guidelines: String,
    pub error_correction: String,
    pub reprompt: String,
    pub stratify: String,
    pub exemplars: Vec<String>,
}

impl PromptAssets {
    /// The assets compiled into the binary.
    pub fn embedded() -> Self {
        PromptAssets {
            system: asset!("system.md").to_string(),
            test_guidelines: asset!("test_guidelines.md").to_string(),
            error_correction: asset!("error_correction.md").to_string(),
            reprompt: asset!("reprompt.md").to_string(),
            stratify: asset!("stratify.md").to_string(),
            exemplars: EMBEDDED_EXEMPLARS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Loads assets from a directory with the same layout as the shipped
    /// `assets/prompts`. Exemplars are read in file-name order.
    pub fn load(dir: &Path) -> Result<Self, ActorError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|_| ActorError::MissingAsset(path.display().to_string()))
        };
        let ex_dir = dir.join(EXEMPLAR_DIR);
        let mut names: Vec<_> = fs::read_dir(&ex_dir)
            .map_err(|_| ActorError::MissingAsset(ex_dir.display().to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "md"))
            .collect();
        names.sort();
        let exemplars = names
            .iter()
            .map(|p| fs::read_to_string(p).map_err(|_| ActorError::MissingAsset(p.display().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PromptAssets {
            system: read(SYSTEM_FILE)?,
            test_guidelines: read(GUIDELINES_FILE)?,
            error_correction: read(ERROR_FILE)?,
            reprompt: read(REPROMPT_FILE)?,
            stratify: read(STRATIFY_FILE)?,
            exemplars,
        })
    }
}

fn section(text: Option<&str>) -> &str {
    match text {
        Some(t) if !t.trim().is_empty() => t.trim(),
        _ => "(none)",
    }
}

/// Assembles the message sequence for a request: a system message with
/// instructions, exemplars, test guidelines and error-correction steps,
/// then a user message with the problem and, in repair modes, the prior
/// artifacts and the Critic's feedback.
pub fn build_prompt(req: &ActorRequest, assets: &PromptAssets) -> Result<Vec<ChatMessage>, ActorError> {
    req.validate()?;
    let wanted = req.prompt_profile.exemplar_count();
    if assets.exemplars.len() < wanted {
        return Err(ActorError::MissingAsset(format!(
            "{EXEMPLAR_DIR}: profile needs {wanted} exemplars, found {}",
            assets.exemplars.len()
        )));
    }

    let mut system = assets.system.trim_end().to_string();
    if wanted > 0 {
        system.push_str("\n\n## Examples\n");
        for ex in &assets.exemplars[..wanted] {
            system.push('\n');
            system.push_str(ex.trim_end());
            system.push('\n');
        }
    }
    system.push_str("\n\n");
    system.push_str(assets.test_guidelines.trim_end());
    system.push_str("\n\n");
    system.push_str(assets.error_correction.trim_end());
    system.push('\n');

    let mut user = format!("## Problem\n{}\n", req.problem_text.trim_end());
    if req.mode != Mode::Generate {
        user.push_str(&format!(
            "\n## Your previous output\n{PROGRAM_HEADER}\n{}\n{TESTS_HEADER}\n{}\n{QUERY_HEADER}\n{}\n",
            section(req.prior_program.as_deref()),
            section(req.prior_tests.as_deref()),
            section(req.prior_query.as_deref()),
        ));
        user.push_str(&format!("\n## Critic feedback\n{}\n", section(req.critic_feedback.as_deref())));
    }
    user.push('\n');
    user.push_str(match req.mode {
        Mode::Generate => "Write the program, the tests and the query.",
        Mode::FixCompile => {
            "The program does not compile. Fix the compilation errors and reply with all three sections."
        }
        Mode::FixTests => {
            "Some tests fail. Follow the correction procedure for test failures. You may also re-interpret \
             the conclusion and rewrite the query if it does not encode the conclusion faithfully. Reply \
             with all three sections."
        }
    });
    user.push('\n');

    Ok(vec![ChatMessage::new(Role::System, system), ChatMessage::new(Role::User, user)])
}

/// The follow-up conversation sent once after a malformed reply.
pub fn reprompt_messages(messages: &[ChatMessage], bad_reply: &str, assets: &PromptAssets) -> Vec<ChatMessage> {
    let mut out = messages.to_vec();
    out.push(ChatMessage::new(Role::Assistant, bad_reply));
    out.push(ChatMessage::new(Role::User, assets.reprompt.trim_end()));
    out
}

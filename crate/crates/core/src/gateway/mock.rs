//! Scripted transport for offline runs and tests.
//!
//! A script is a JSON object with an optional `queue` of replies consumed
//! in order, followed by `rules` tried in order against each request:
//!
//! ```json
//! {
//!   "queue": [{"fail": "transient"}, {"text": "OK"}],
//!   "rules": [
//!     {"contains": "analyzing an app named", "reply": {"text": "A paragraph."}},
//!     {"contains": "Features:", "reply": {"describe_each": "Lets the app use {name}."}},
//!     {"model": "mistral", "reply": "echo_prompt"}
//!   ]
//! }
//! ```
//!
//! `describe_each` answers batch prompts with one `name: text` line per
//! listed feature (minus any in `skip`), and single-feature prompts with
//! the text alone. A request no rule matches fails as unscripted.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::transport::{CompletionRequest, Transport, TransportFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    Transient,
    RateLimited,
    Auth,
    Fatal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyKeyword {
    EchoPrompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Keyword(ReplyKeyword),
    Text {
        text: String,
    },
    DescribeEach {
        describe_each: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        skip: Vec<String>,
    },
    Fail {
        fail: ScriptedFailure,
    },
}

impl Reply {
    pub fn text(s: impl Into<String>) -> Self {
        Reply::Text { text: s.into() }
    }

    pub fn fail(kind: ScriptedFailure) -> Self {
        Reply::Fail { fail: kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub reply: Reply,
}

impl Rule {
    fn matches(&self, req: &CompletionRequest) -> bool {
        self.contains.as_ref().is_none_or(|c| req.prompt.contains(c.as_str()))
            && self.model.as_ref().is_none_or(|m| *m == req.model)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub queue: Vec<Reply>,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("reading mock script: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing mock script: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Default)]
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<Reply>>,
    rules: Vec<Rule>,
    calls: Mutex<Vec<CompletionRequest>>,
}

/// Parse `N. [category] name` lines of a batch prompt.
pub fn listed_features(prompt: &str) -> Vec<(String, String)> {
    prompt
        .lines()
        .filter_map(|line| {
            let (num, rest) = line.trim().split_once(". [")?;
            if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let (cat, name) = rest.split_once("] ")?;
            Some((cat.to_owned(), name.trim().to_owned()))
        })
        .collect()
}

fn single_feature(prompt: &str) -> Option<(String, String)> {
    let (before, after) = prompt.split_once(" `")?;
    let name = after.split_once('`')?.0;
    let category = before.rsplit_once("the Android ")?.1;
    Some((category.to_owned(), name.to_owned()))
}

fn fill(template: &str, category: &str, name: &str) -> String {
    template.replace("{name}", name).replace("{category}", category)
}

impl ScriptedTransport {
    pub fn new(script: Script) -> Self {
        Self {
            queue: Mutex::new(script.queue.into()),
            rules: script.rules,
            calls: Mutex::default(),
        }
    }

    /// Always answers with `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(Script {
            queue: Vec::new(),
            rules: vec![Rule {
                contains: None,
                model: None,
                reply: Reply::text(text),
            }],
        })
    }

    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.calls.lock().expect("mock lock poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("mock lock poisoned").len()
    }

    fn answer(reply: &Reply, req: &CompletionRequest) -> Result<String, TransportFailure> {
        match reply {
            Reply::Keyword(ReplyKeyword::EchoPrompt) => Ok(req.prompt.clone()),
            Reply::Text { text } => Ok(text.clone()),
            Reply::DescribeEach { describe_each, skip } => {
                let listed = listed_features(&req.prompt);
                if listed.is_empty() {
                    return match single_feature(&req.prompt) {
                        Some((cat, name)) => Ok(fill(describe_each, &cat, &name)),
                        None => Err(TransportFailure::Unscripted("describe_each found no features".into())),
                    };
                }
                Ok(listed
                    .iter()
                    .filter(|(_, n)| !skip.iter().any(|s| s == n))
                    .map(|(c, n)| format!("{n}: {}", fill(describe_each, c, n)))
                    .collect::<Vec<_>>()
                    .join("\n"))
            }
            Reply::Fail { fail } => Err(match fail {
                ScriptedFailure::Transient => TransportFailure::Transient("scripted".into()),
                ScriptedFailure::RateLimited => TransportFailure::RateLimited { retry_after_ms: None },
                ScriptedFailure::Auth => TransportFailure::Auth("scripted".into()),
                ScriptedFailure::Fatal => TransportFailure::Fatal("scripted".into()),
            }),
        }
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportFailure> {
        self.calls.lock().expect("mock lock poisoned").push(request.clone());
        if let Some(reply) = self.queue.lock().expect("mock lock poisoned").pop_front() {
            return Self::answer(&reply, request);
        }
        match self.rules.iter().find(|r| r.matches(request)) {
            Some(rule) => Self::answer(&rule.reply, request),
            None => {
                let head: String = request.prompt.chars().take(80).collect();
                Err(TransportFailure::Unscripted(head))
            }
        }
    }
}

//! Commit selection when blameable lines map to several commits.

use std::sync::Mutex;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::{ChatMessage, ChatProvider, Decoding, Role, TokenUsage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeCandidate {
    pub commit_id: String,
    pub subject: String,
    /// `path:line` followed by the blamed line with three lines either side.
    pub snippets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub bug_id: String,
    pub bug_report: String,
    pub candidates: Vec<JudgeCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeDecision {
    /// Zero-based index into `JudgeRequest::candidates`.
    pub index: usize,
    pub usage: Option<TokenUsage>,
}

pub trait CommitJudge: Send + Sync {
    fn choose(&self, request: &JudgeRequest) -> Result<JudgeDecision, String>;
}

/// Deterministic stub: always the first candidate (candidates are sorted by
/// commit hash).
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstCandidateJudge;

impl CommitJudge for FirstCandidateJudge {
    fn choose(&self, request: &JudgeRequest) -> Result<JudgeDecision, String> {
        if request.candidates.is_empty() {
            return Err("no candidates".into());
        }
        Ok(JudgeDecision { index: 0, usage: None })
    }
}

/// Deterministic stub returning a fixed index, or failing when `None`.
#[derive(Debug, Clone, Copy)]
pub struct FixedJudge(pub Option<usize>);

impl CommitJudge for FixedJudge {
    fn choose(&self, _request: &JudgeRequest) -> Result<JudgeDecision, String> {
        self.0
            .map(|index| JudgeDecision { index, usage: None })
            .ok_or_else(|| "judge unavailable".to_string())
    }
}

pub fn render_judge_prompt(request: &JudgeRequest) -> String {
    let mut out = String::new();
    out.push_str(
        "Several commits last touched the buggy lines of this bug. Pick the single commit \
         most likely related to the bug's root cause.\n\n",
    );
    out.push_str("# Bug report\n");
    out.push_str(request.bug_report.trim());
    out.push_str("\n\n# Candidates\n");
    for (i, c) in request.candidates.iter().enumerate() {
        out.push_str(&format!("\n## [{}] {} {}\n", i + 1, c.commit_id, c.subject));
        for s in &c.snippets {
            out.push_str("```\n");
            out.push_str(s);
            out.push_str("\n```\n");
        }
    }
    out.push_str(&format!(
        "\nAnswer with exactly one candidate number between 1 and {} and nothing else.\n",
        request.candidates.len()
    ));
    out
}

static NUMBER: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b\d+\b").unwrap());

/// Parse a judge reply into a zero-based index; the reply must contain
/// exactly one number and it must name a candidate.
pub fn parse_judge_answer(reply: &str, candidates: usize) -> Result<usize, String> {
    let numbers: Vec<&str> = NUMBER.find_iter(reply).map(|m| m.as_str()).collect();
    match numbers.as_slice() {
        [one] => {
            let n: usize = one.parse().map_err(|_| format!("bad number `{one}`"))?;
            if (1..=candidates).contains(&n) {
                Ok(n - 1)
            } else {
                Err(format!("candidate {n} out of range 1..={candidates}"))
            }
        }
        [] => Err(format!("no candidate number in reply `{}`", reply.trim())),
        _ => Err(format!("ambiguous reply `{}`", reply.trim())),
    }
}

/// Judge backed by the same chat provider the agent uses.
pub struct LlmJudge {
    provider: Mutex<Box<dyn ChatProvider + Send>>,
}

impl LlmJudge {
    pub fn new(provider: Box<dyn ChatProvider + Send>) -> Self {
        Self { provider: Mutex::new(provider) }
    }
}

impl CommitJudge for LlmJudge {
    fn choose(&self, request: &JudgeRequest) -> Result<JudgeDecision, String> {
        let messages = vec![ChatMessage { role: Role::User, content: render_judge_prompt(request) }];
        let mut provider = self.provider.lock().map_err(|_| "judge provider poisoned".to_string())?;
        let completion = provider
            .complete(&messages, &Decoding::default())
            .map_err(|e| e.to_string())?;
        let index = parse_judge_answer(&completion.text, request.candidates.len())?;
        Ok(JudgeDecision { index, usage: Some(completion.usage) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_parsing() {
        assert_eq!(parse_judge_answer("2", 3), Ok(1));
        assert_eq!(parse_judge_answer(" [1]\n", 3), Ok(0));
        assert!(parse_judge_answer("4", 3).is_err());
        assert!(parse_judge_answer("1 or 2", 3).is_err());
        assert!(parse_judge_answer("none", 3).is_err());
    }

    #[test]
    fn prompt_lists_every_candidate() {
        let req = JudgeRequest {
            bug_id: "b".into(),
            bug_report: "crash".into(),
            candidates: vec![
                JudgeCandidate { commit_id: "aaa".into(), subject: "one".into(), snippets: vec!["f:1\nx".into()] },
                JudgeCandidate { commit_id: "bbb".into(), subject: "two".into(), snippets: vec![] },
            ],
        };
        let p = render_judge_prompt(&req);
        assert!(p.contains("[1] aaa one"));
        assert!(p.contains("[2] bbb two"));
        assert!(p.contains("between 1 and 2"));
    }

    #[test]
    fn stubs() {
        let req = JudgeRequest { bug_id: "b".into(), bug_report: String::new(), candidates: vec![] };
        assert!(FirstCandidateJudge.choose(&req).is_err());
        assert_eq!(FixedJudge(Some(1)).choose(&req).unwrap().index, 1);
        assert!(FixedJudge(None).choose(&req).is_err());
    }
}

use std::fmt::Write as _;

use rust_decimal::Decimal;

use super::*;
use crate::context::PromptBundle;
use crate::history::BugSpec;
use crate::sandbox::{ExecOutput, Sandbox, TestVerdict, TEST_WRAPPER};

pub const DEFAULT_SENTINEL: &str = "COMPLETE_REPAIR_SIGNAL";
/// Alternative completion token for prompts that ask for a final submission.
pub const ALT_SENTINEL: &str = "COMPLETE_TASK_AND_SUBMIT_FINAL_OUTPUT";

/// Per-stream observation cap with head/tail preservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationCap {
    pub head: usize,
    pub tail: usize,
}

impl Default for ObservationCap {
    fn default() -> Self {
        Self { head: 6_000, tail: 2_000 }
    }
}

impl ObservationCap {
    pub fn apply(&self, text: &str) -> String {
        let n = text.chars().count();
        if n <= self.head + self.tail {
            return text.to_string();
        }
        let head: String = text.chars().take(self.head).collect();
        let tail: String = text.chars().skip(n - self.tail).collect();
        format!("{head}\n[... {} characters omitted ...]\n{tail}", n - self.head - self.tail)
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub guards: GuardConfig,
    pub pricing: PricingTable,
    pub sentinel: String,
    pub decoding: Decoding,
    pub retry: RetryPolicy,
    pub observation_cap: ObservationCap,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            guards: GuardConfig::default(),
            pricing: PricingTable::default(),
            sentinel: DEFAULT_SENTINEL.into(),
            decoding: Decoding::default(),
            retry: RetryPolicy::default(),
            observation_cap: ObservationCap::default(),
        }
    }
}

/// Whether the action completes the run: it must echo the sentinel and the
/// most recent test observation must have passed.
pub fn detect_completion(sentinel: &str, command: &str, last_test_passed: bool) -> bool {
    command.contains(sentinel) && last_test_passed
}

fn render_observation(out: &ExecOutput, cap: &ObservationCap) -> String {
    let r = &out.result;
    let mut s = String::new();
    if r.timed_out {
        let _ = writeln!(s, "Command timed out and was killed (exit code {}).", r.exit_code);
    } else {
        let _ = writeln!(s, "Exit code: {}", r.exit_code);
    }
    for (name, text) in [("stdout", &r.stdout), ("stderr", &r.stderr)] {
        if !text.is_empty() {
            let _ = writeln!(s, "[{name}]\n{}", cap.apply(text).trim_end_matches('\n'));
        }
    }
    match &out.test {
        Some(TestVerdict::Parsed(o)) if o.all_passed => s.push_str("Test result: all tests passed.\n"),
        Some(TestVerdict::Parsed(o)) => {
            let _ = writeln!(s, "Test result: {} failing test(s): {}", o.failing_tests.len(), o.failing_tests.join(", "));
        }
        Some(TestVerdict::Unparseable { reason, .. }) => {
            let _ = writeln!(s, "Test result: not passed (output could not be classified: {reason}).");
        }
        None => {}
    }
    s.trim_end().to_string()
}

struct LoopState<'a> {
    record: RunRecord,
    agent_cost: Decimal,
    clock: &'a dyn Clock,
}

impl LoopState<'_> {
    fn push(&mut self, m: TranscriptMessage) {
        self.record.transcript.push(m);
    }

    fn messages(&self) -> Vec<ChatMessage> {
        self.record
            .transcript
            .iter()
            .map(|m| ChatMessage { role: m.role, content: m.content.clone() })
            .collect()
    }

    fn guard_state(&self) -> GuardState {
        GuardState {
            steps_taken: self.record.steps_taken,
            total_cost: self.agent_cost,
            wall_time: self.clock.elapsed(),
        }
    }
}

/// Drive one repair run to termination. The sandbox must already hold the
/// buggy snapshot; the record is returned, not written.
pub fn run(
    spec: &BugSpec,
    bundle: &PromptBundle,
    sandbox: &mut dyn Sandbox,
    provider: &mut dyn ChatProvider,
    config: &LoopConfig,
    clock: &dyn Clock,
) -> RunRecord {
    let model = provider.model_id().to_string();
    let mut st = LoopState {
        record: RunRecord {
            bug_id: spec.bug_id.clone(),
            config: bundle.config,
            model: model.clone(),
            transcript: vec![
                TranscriptMessage::plain(Role::System, bundle.system_prompt.clone(), 0),
                TranscriptMessage::plain(Role::User, bundle.user_prompt.clone(), 0),
            ],
            steps_taken: 0,
            total_cost: Decimal::ZERO,
            judge_cost: None,
            usage: TokenUsage::default(),
            wall_time_ms: 0,
            termination: Termination::ProviderError,
            termination_detail: None,
            tests_passed_at_end: false,
            final_patch: None,
        },
        agent_cost: Decimal::ZERO,
        clock,
    };

    let mut last_test_passed = false;
    let mut sandbox_failures = 0u32;
    let (termination, detail) = 'run: {
        if let Err(e) = config.pricing.get(&model) {
            break 'run (Termination::ProviderError, Some(e.to_string()));
        }
        loop {
            let step = st.record.steps_taken + 1;
            let mut retried = false;
            let action = loop {
                let completion = match query_provider(provider, &st.messages(), &config.decoding, &config.retry) {
                    Ok(c) => c,
                    Err(e) => break 'run (Termination::ProviderError, Some(e.to_string())),
                };
                let cost = accumulate_cost(&completion.usage, &model, &config.pricing).expect("pricing checked");
                st.agent_cost += cost;
                st.record.usage += completion.usage;
                let parsed = parse_action(&completion.text);
                st.push(TranscriptMessage {
                    role: Role::Assistant,
                    content: completion.text,
                    step_index: step,
                    token_usage: Some(completion.usage),
                    action: parsed.as_ref().ok().map(|a| a.command.clone()),
                    observation: None,
                });
                match parsed {
                    Ok(a) => break Some(a),
                    Err(e) => {
                        st.push(TranscriptMessage::plain(Role::Observation, format!("Format error: {e}"), step));
                        if retried {
                            break None;
                        }
                        retried = true;
                    }
                }
            };

            let mut completed = false;
            if let Some(action) = action {
                let remaining = config.guards.max_wall_time.saturating_sub(st.clock.elapsed());
                let timeout = sandbox.per_command_timeout().min(config.guards.per_command_timeout).min(remaining.max(std::time::Duration::from_millis(1)));
                match sandbox.exec(step, &action.command, timeout) {
                    Ok(out) => {
                        sandbox_failures = 0;
                        if let Some(v) = &out.test {
                            last_test_passed = v.passed();
                        }
                        let mut content = render_observation(&out, &config.observation_cap);
                        if action.command.contains(config.sentinel.as_str()) {
                            if detect_completion(&config.sentinel, &action.command, last_test_passed) {
                                completed = true;
                            } else {
                                let _ = write!(
                                    content,
                                    "\nTests have not been verified as passing. Run `{TEST_WRAPPER}` and signal completion only after all tests pass."
                                );
                            }
                        }
                        st.push(TranscriptMessage {
                            role: Role::Observation,
                            content,
                            step_index: step,
                            token_usage: None,
                            action: None,
                            observation: Some(ObservationMeta {
                                exit_code: out.result.exit_code,
                                timed_out: out.result.timed_out,
                                duration_ms: out.result.duration_ms,
                                test: out.test,
                            }),
                        });
                    }
                    Err(e) => {
                        sandbox_failures += 1;
                        st.push(TranscriptMessage::plain(Role::Observation, format!("Tool error: {e}"), step));
                        if sandbox_failures >= 2 {
                            st.record.steps_taken = step;
                            break 'run (Termination::SandboxError, Some(e.to_string()));
                        }
                    }
                }
            }
            st.record.steps_taken = step;
            if completed {
                break 'run (Termination::CompletedSignal, None);
            }
            if let Some(t) = check_guards(&st.guard_state(), &config.guards) {
                break 'run (t, None);
            }
        }
    };

    st.record.termination = termination;
    st.record.termination_detail = detail;
    st.record.total_cost = st.agent_cost;
    st.record.final_patch = sandbox.final_patch().ok();
    st.record.tests_passed_at_end = sandbox.is_alive()
        && sandbox
            .run_test(st.record.steps_taken + 1)
            .map(|(_, verdict)| verdict.passed())
            .unwrap_or(false);
    st.record.wall_time_ms = st.clock.elapsed().as_millis() as u64;
    st.record
}

//! The guarded observe-act-feedback repair loop.

mod action;
mod cost;
mod guard;
mod provider;
mod record;
mod run;

pub use action::{parse_action, Action, ActionError};
pub use cost::{accumulate_cost, ModelPricing, PricingError, PricingTable, MONEY_DP};
pub use guard::{check_guards, Clock, GuardConfig, GuardConfigError, GuardState, SystemClock, Termination, TickClock};
pub use provider::{
    query_provider, ChatMessage, ChatProvider, Completion, Decoding, OnExhausted, OpenAiCompatProvider, ProviderError,
    RetryPolicy, Role, ScriptFixture, ScriptedProvider, ScriptedReply, TokenUsage,
};
pub use record::{record_path, ObservationMeta, RecordError, RunRecord, TranscriptMessage, RECORD_SCHEMA_VERSION};
pub use run::{detect_completion, run, LoopConfig, ObservationCap, ALT_SENTINEL, DEFAULT_SENTINEL};

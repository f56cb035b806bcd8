//! History-aware automated program repair.
//!
//! The pipeline blames the localized buggy lines to find the commit that
//! last touched them ([`history`]), turns that commit into a compact
//! context payload and renders the agent prompts ([`context`]), drives a
//! guarded single-command bash agent inside an isolated sandbox ([`agent`],
//! [`sandbox`]), and aggregates run outcomes into success, cost and
//! significance reports ([`eval`]).

pub mod agent;
pub mod context;
pub mod diff;
pub mod eval;
pub mod git;
pub mod history;
pub mod manifest;
pub mod par;
pub mod sandbox;

#[doc(hidden)]
pub mod testkit;

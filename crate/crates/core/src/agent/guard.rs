use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    CompletedSignal,
    StepLimit,
    CostLimit,
    Timeout,
    ProviderError,
    /// Two consecutive sandbox failures.
    SandboxError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CompletedSignal => "CompletedSignal",
            Self::StepLimit => "StepLimit",
            Self::CostLimit => "CostLimit",
            Self::Timeout => "Timeout",
            Self::ProviderError => "ProviderError",
            Self::SandboxError => "SandboxError",
        }
    }

    pub fn is_guard(self) -> bool {
        matches!(self, Self::StepLimit | Self::CostLimit | Self::Timeout)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Duration::try_from_secs_f64(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Durations are written in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardConfig {
    pub max_steps: u32,
    pub max_cost: Decimal,
    #[serde(with = "secs")]
    pub max_wall_time: Duration,
    #[serde(with = "secs")]
    pub per_command_timeout: Duration,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            max_steps: 50,
            max_cost: Decimal::ONE,
            max_wall_time: Duration::from_secs(3600),
            per_command_timeout: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("guard `{0}` must be strictly positive")]
pub struct GuardConfigError(pub &'static str);

impl GuardConfig {
    pub fn validate(&self) -> Result<(), GuardConfigError> {
        if self.max_steps == 0 {
            return Err(GuardConfigError("max_steps"));
        }
        if self.max_cost <= Decimal::ZERO {
            return Err(GuardConfigError("max_cost"));
        }
        if self.max_wall_time.is_zero() {
            return Err(GuardConfigError("max_wall_time"));
        }
        if self.per_command_timeout.is_zero() {
            return Err(GuardConfigError("per_command_timeout"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardState {
    pub steps_taken: u32,
    pub total_cost: Decimal,
    pub wall_time: Duration,
}

/// `None` means continue. Checked in the order steps, cost, time.
pub fn check_guards(state: &GuardState, guards: &GuardConfig) -> Option<Termination> {
    if state.steps_taken >= guards.max_steps {
        Some(Termination::StepLimit)
    } else if state.total_cost >= guards.max_cost {
        Some(Termination::CostLimit)
    } else if state.wall_time >= guards.max_wall_time {
        Some(Termination::Timeout)
    } else {
        None
    }
}

/// Source of elapsed run time.
pub trait Clock: Send + Sync {
    fn elapsed(&self) -> Duration;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

/// Deterministic clock: every reading advances time by a fixed tick.
pub struct TickClock {
    tick_ms: u64,
    now_ms: AtomicU64,
}

impl TickClock {
    pub fn new(tick: Duration) -> Self {
        Self { tick_ms: tick.as_millis() as u64, now_ms: AtomicU64::new(0) }
    }
}

impl Clock for TickClock {
    fn elapsed(&self) -> Duration {
        Duration::from_millis(self.now_ms.fetch_add(self.tick_ms, Ordering::SeqCst) + self.tick_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(steps: u32, cost: &str, mins: u64) -> GuardState {
        GuardState { steps_taken: steps, total_cost: cost.parse().unwrap(), wall_time: Duration::from_secs(mins * 60) }
    }

    #[test]
    fn defaults_and_boundaries() {
        let g = GuardConfig::default();
        assert_eq!(check_guards(&state(50, "0", 0), &g), Some(Termination::StepLimit));
        assert_eq!(check_guards(&state(1, "1.00", 0), &g), Some(Termination::CostLimit));
        assert_eq!(check_guards(&state(1, "0", 60), &g), Some(Termination::Timeout));
        assert_eq!(check_guards(&state(49, "0.10", 5), &g), None);
    }

    #[test]
    fn order_is_steps_cost_time() {
        let g = GuardConfig::default();
        assert_eq!(check_guards(&state(50, "2", 90), &g), Some(Termination::StepLimit));
        assert_eq!(check_guards(&state(3, "2", 90), &g), Some(Termination::CostLimit));
    }

    #[test]
    fn validation() {
        assert!(GuardConfig::default().validate().is_ok());
        let g = GuardConfig { max_steps: 0, ..GuardConfig::default() };
        assert_eq!(g.validate(), Err(GuardConfigError("max_steps")));
        let g = GuardConfig { max_cost: Decimal::ZERO, ..GuardConfig::default() };
        assert_eq!(g.validate(), Err(GuardConfigError("max_cost")));
    }
}

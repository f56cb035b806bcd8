use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TokenUsage;

/// Fractional digits kept for money; each query's cost is rounded once.
pub const MONEY_DP: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPricing {
    /// Currency per one million input tokens.
    pub input_per_million: Decimal,
    pub output_per_million: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingTable {
    #[serde(flatten)]
    pub models: BTreeMap<String, ModelPricing>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("no pricing for model `{0}`")]
    PricingMissing(String),
    #[error("negative rate for model `{0}`")]
    NegativeRate(String),
}

impl PricingTable {
    pub fn with(mut self, model: &str, input_per_million: Decimal, output_per_million: Decimal) -> Self {
        self.models.insert(model.to_string(), ModelPricing { input_per_million, output_per_million });
        self
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        for (model, p) in &self.models {
            if p.input_per_million.is_sign_negative() || p.output_per_million.is_sign_negative() {
                return Err(PricingError::NegativeRate(model.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, model: &str) -> Result<&ModelPricing, PricingError> {
        self.models.get(model).ok_or_else(|| PricingError::PricingMissing(model.to_string()))
    }
}

pub fn accumulate_cost(usage: &TokenUsage, model: &str, pricing: &PricingTable) -> Result<Decimal, PricingError> {
    let p = pricing.get(model)?;
    let million = Decimal::from(1_000_000u32);
    let cost = Decimal::from(usage.input_tokens) * p.input_per_million / million
        + Decimal::from(usage.output_tokens) * p.output_per_million / million;
    Ok(cost.round_dp(MONEY_DP))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn table() -> PricingTable {
        PricingTable::default().with("m", dec("0.28"), dec("0.42"))
    }

    #[test]
    fn arithmetic_cases() {
        assert_eq!(accumulate_cost(&TokenUsage::new(1_000_000, 0), "m", &table()).unwrap(), dec("0.28"));
        assert_eq!(accumulate_cost(&TokenUsage::new(0, 0), "m", &table()).unwrap(), Decimal::ZERO);
        assert_eq!(accumulate_cost(&TokenUsage::new(500_000, 500_000), "m", &table()).unwrap(), dec("0.35"));
    }

    #[test]
    fn rounding_to_six_places() {
        // 1 token at 0.28/1M is 0.00000028, which rounds to 0.
        assert_eq!(accumulate_cost(&TokenUsage::new(1, 0), "m", &table()).unwrap(), Decimal::ZERO);
        assert_eq!(accumulate_cost(&TokenUsage::new(1200, 340), "m", &table()).unwrap(), dec("0.000479"));
    }

    #[test]
    fn missing_and_negative_pricing() {
        assert_eq!(
            accumulate_cost(&TokenUsage::new(1, 1), "other", &table()),
            Err(PricingError::PricingMissing("other".into()))
        );
        let bad = PricingTable::default().with("m", dec("-1"), dec("0"));
        assert!(bad.validate().is_err());
    }
}

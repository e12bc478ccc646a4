//! Ordered allocation of flexible energy so each MWh is monetized by one channel only.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    ReliabilityCongestion,
    ResAbsorption,
    MarketArbitrage,
    ResidualDr,
}

impl Channel {
    /// Accounting order.
    pub const ORDER: [Channel; 4] = [
        Channel::ReliabilityCongestion,
        Channel::ResAbsorption,
        Channel::MarketArbitrage,
        Channel::ResidualDr,
    ];
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("negative ledger quantity {0}")]
    Negative(Decimal),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlexLedger {
    pub budget: Decimal,
    pub demands: [Decimal; 4],
    pub allocations: [Decimal; 4],
    pub residual: Decimal,
}

impl FlexLedger {
    pub fn allocation(&self, channel: Channel) -> Decimal {
        self.allocations[channel as usize]
    }

    /// Share of a channel's demand that was funded; 1 when nothing was demanded.
    pub fn coverage(&self, channel: Channel) -> Decimal {
        let i = channel as usize;
        if self.demands[i].is_zero() {
            Decimal::ONE
        } else {
            self.allocations[i] / self.demands[i]
        }
    }
}

/// Greedy fill in channel order: each channel receives `min(demand, remaining)`.
pub fn allocate_flexibility(budget: Decimal, demands: [Decimal; 4]) -> Result<FlexLedger, LedgerError> {
    if let Some(bad) = std::iter::once(&budget)
        .chain(demands.iter())
        .find(|v| v.is_sign_negative() && !v.is_zero())
    {
        return Err(LedgerError::Negative(*bad));
    }
    let mut remaining = budget;
    let mut allocations = [Decimal::ZERO; 4];
    for (alloc, demand) in allocations.iter_mut().zip(demands) {
        *alloc = demand.min(remaining);
        remaining -= *alloc;
    }
    Ok(FlexLedger {
        budget,
        demands,
        allocations,
        residual: remaining,
    })
}

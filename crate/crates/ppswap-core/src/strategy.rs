//! Party behavior models and the economic analysis of cheating.
//!
//! A cheater's only move is interrupting the ping-pong and closing their
//! receiving channel, pocketing at most one granularity. Whether that is
//! profitable depends on the fees the cheater sinks into opening and
//! closing their own receiving channel.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::simchain::{ChainParams, PartyId};

/// What a party does during a swap session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Follows the protocol to completion.
    Honest,
    /// Refuses every own scheduled payment from global step `step` on,
    /// then defensively closes the receiving channel.
    AbortAt { step: u64 },
    /// Delays the own payment at global step `step` by `ticks`. Past the
    /// victim's stall timeout this is indistinguishable from an abort and
    /// the stalled party is treated as unresponsive afterwards.
    Stall { step: u64, ticks: u64 },
    /// Never countersigns a close as payee; funders recover via refund.
    NeverClose,
    /// Refuses to sign the counterparty's refund, so their channel never
    /// opens (no on-chain footprint).
    NeverSignRefund,
}

/// Decision for one scheduled payment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaymentAction {
    Proceed,
    StallFor(u64),
    Refuse,
}

impl Strategy {
    pub fn payment_action(&self, step: u64) -> PaymentAction {
        match self {
            Strategy::AbortAt { step: k } if step >= *k => PaymentAction::Refuse,
            Strategy::Stall { step: k, ticks } if step == *k => PaymentAction::StallFor(*ticks),
            _ => PaymentAction::Proceed,
        }
    }

    pub fn signs_refund(&self) -> bool {
        !matches!(self, Strategy::NeverSignRefund)
    }

    pub fn closes_as_payee(&self) -> bool {
        !matches!(self, Strategy::NeverClose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    CounterpartyStopped,
    PayeeRefusedRefundSignature,
    MaxTicksExceeded,
}

impl AbortReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            AbortReason::CounterpartyStopped => "counterparty_stopped",
            AbortReason::PayeeRefusedRefundSignature => "payee_refused_refund_signature",
            AbortReason::MaxTicksExceeded => "max_ticks_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionOutcomePhase {
    Completed,
    Aborted { at_step: u64, reason: AbortReason },
}

/// Per-channel settlement summary inside a [`SwapOutcome`].
#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub chain_id: String,
    pub funder: String,
    pub payee: String,
    pub capacity: u64,
    /// Base units per micro-unit on this channel.
    pub unit: u64,
    pub cumulative_paid: u64,
    pub update_seq: u64,
    pub phase: String,
    /// Base units the payee actually realized (claimable off-chain for a
    /// channel deliberately left open).
    pub realized_to_payee: u64,
    pub preexisting: bool,
}

/// Final settlement accounting for a swap session.
#[derive(Debug, Clone)]
pub struct SwapOutcome {
    pub phase: SessionOutcomePhase,
    /// Accepted updates made by party A / party B (client legs for hub runs).
    pub updates_a: u64,
    pub updates_b: u64,
    /// party -> chain_id -> confirmed balance delta vs genesis.
    pub balance_deltas: BTreeMap<PartyId, BTreeMap<String, i128>>,
    pub signatures: BTreeMap<PartyId, u64>,
    /// chain_id -> confirmed transactions during the measured session.
    pub onchain_txs: BTreeMap<String, u64>,
    pub confirmations_waited: BTreeMap<String, u64>,
    pub max_abs_exposure_units: i64,
    pub ticks_elapsed: u64,
    pub channels: Vec<ChannelReport>,
}

impl SwapOutcome {
    pub fn completed(&self) -> bool {
        matches!(self.phase, SessionOutcomePhase::Completed)
    }

    pub fn signatures_total(&self) -> u64 {
        self.signatures.values().sum()
    }

    /// Pre-fee gain in micro-units for `party`: units realized on channels
    /// where it is payee minus units it committed as funder. Channels left
    /// open count at their claimable value.
    pub fn net_units(&self, party: &PartyId) -> i64 {
        let mut units: i64 = 0;
        for ch in &self.channels {
            if ch.payee == party.0 {
                units += (ch.realized_to_payee / ch.unit) as i64;
            }
            if ch.funder == party.0 {
                let sent = if ch.phase == "refunded" {
                    0
                } else {
                    ch.cumulative_paid
                };
                units -= (sent / ch.unit) as i64;
            }
        }
        units
    }
}

/// Converts per-chain balance deltas into a single signed value in chain-A
/// base units at the agreed price, evaluated as exact rationals and floored.
///
/// `price` is chain-A coins per chain-B coin.
pub fn net_value(
    outcome: &SwapOutcome,
    price: Ratio<i128>,
    chain_a: &ChainParams,
    chain_b: &ChainParams,
) -> BTreeMap<PartyId, i128> {
    outcome
        .balance_deltas
        .iter()
        .map(|(party, deltas)| {
            let da = deltas.get(&chain_a.chain_id).copied().unwrap_or(0);
            let db = deltas.get(&chain_b.chain_id).copied().unwrap_or(0);
            (party.clone(), value_in_chain_a(da, db, price, chain_a, chain_b))
        })
        .collect()
}

/// delta_a + delta_b * price * base_a / base_b, floored to base units.
pub fn value_in_chain_a(
    delta_a: i128,
    delta_b: i128,
    price: Ratio<i128>,
    chain_a: &ChainParams,
    chain_b: &ChainParams,
) -> i128 {
    let cross = Ratio::from_integer(delta_b)
        * price
        * Ratio::new(
            chain_a.base_units_per_coin as i128,
            chain_b.base_units_per_coin as i128,
        );
    (Ratio::from_integer(delta_a) + cross)
        .floor()
        .to_integer()
}

/// Best-case net of a cheater versus never trading: one granularity of the
/// traded value minus the fees to open and close their receiving channel.
/// Negative means cheating is unprofitable.
pub fn cheat_profit(
    granularity_inverse: u64,
    total_value: u64,
    open_fee: u64,
    close_fee: u64,
) -> Ratio<i128> {
    cheat_savings(granularity_inverse, total_value)
        - Ratio::from_integer((open_fee + close_fee) as i128)
}

/// The one granularity the cheater pockets versus honest participation.
pub fn cheat_savings(granularity_inverse: u64, total_value: u64) -> Ratio<i128> {
    Ratio::new(total_value as i128, granularity_inverse as i128)
}

/// Convenience for callers that want an integer figure.
pub fn ratio_to_i128_floor(r: Ratio<i128>) -> i128 {
    r.floor().to_integer()
}

//! Trade quantization, the interleaved ping-pong schedule and the
//! two-channel swap session driver.
//!
//! The schedule over N micro-units per side is 1,2,2,...,2,1: party A
//! opens with a single unit, then the parties alternate two-unit payments,
//! and A finishes with a single unit. After any prefix the unit imbalance
//! is at most one, which is exactly the bound a cheater can pocket.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::channel::{open_channel, Channel, ChannelError, ChannelParams, ChannelPhase};
use crate::event::SessionCtx;
use crate::simchain::{ChainParams, Ledger, PartyId};
use crate::strategy::{
    AbortReason, ChannelReport, PaymentAction, SessionOutcomePhase, Strategy, SwapOutcome,
};

/// Which party a schedule step belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::A => "a",
            Side::B => "b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SwapError {
    #[error("invalid_granularity")]
    InvalidGranularity,
    #[error("unit_too_small on side {0:?}")]
    UnitTooSmall(Side),
    #[error("index_out_of_range")]
    IndexOutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Step {
    pub payer: Side,
    pub units: u64,
}

/// The interleaved micro-unit payment plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub steps: Vec<Step>,
    pub granularity_inverse: u64,
}

impl Schedule {
    /// Builds the 1,2,...,2,1 plan for an even N >= 2.
    pub fn build(granularity_inverse: u64) -> Result<Schedule, SwapError> {
        let n = granularity_inverse;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(SwapError::InvalidGranularity);
        }
        let mut steps = Vec::with_capacity(n as usize + 1);
        steps.push(Step {
            payer: Side::A,
            units: 1,
        });
        for i in 0..(n - 1) {
            let payer = if i % 2 == 0 { Side::B } else { Side::A };
            steps.push(Step { payer, units: 2 });
        }
        steps.push(Step {
            payer: Side::A,
            units: 1,
        });
        debug_assert_eq!(steps.len() as u64, n + 1);
        Ok(Schedule {
            steps,
            granularity_inverse: n,
        })
    }

    pub fn payments_by(&self, side: Side) -> u64 {
        self.steps.iter().filter(|s| s.payer == side).count() as u64
    }

    pub fn total_units(&self, side: Side) -> u64 {
        self.steps
            .iter()
            .filter(|s| s.payer == side)
            .map(|s| s.units)
            .sum()
    }
}

/// Signed unit imbalance (A's cumulative units minus B's) after the first
/// `step_index` steps. Bounded by one in absolute value by construction.
pub fn exposure(schedule: &Schedule, step_index: usize) -> Result<i64, SwapError> {
    if step_index > schedule.steps.len() {
        return Err(SwapError::IndexOutOfRange);
    }
    let mut diff: i64 = 0;
    for step in &schedule.steps[..step_index] {
        match step.payer {
            Side::A => diff += step.units as i64,
            Side::B => diff -= step.units as i64,
        }
    }
    Ok(diff)
}

/// Result of quantizing raw trade amounts into N micro-units per side.
/// The truncated remainders are excluded from the swap and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    pub unit_a: u64,
    pub unit_b: u64,
    pub amount_a: u64,
    pub amount_b: u64,
    pub remainder_a: u64,
    pub remainder_b: u64,
}

pub fn quantize_amounts(raw_a: u64, raw_b: u64, n: u64) -> Result<Quantized, SwapError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SwapError::InvalidGranularity);
    }
    let unit_a = raw_a / n;
    let unit_b = raw_b / n;
    if unit_a == 0 {
        return Err(SwapError::UnitTooSmall(Side::A));
    }
    if unit_b == 0 {
        return Err(SwapError::UnitTooSmall(Side::B));
    }
    Ok(Quantized {
        unit_a,
        unit_b,
        amount_a: unit_a * n,
        amount_b: unit_b * n,
        remainder_a: raw_a - unit_a * n,
        remainder_b: raw_b - unit_b * n,
    })
}

/// Quantized trade parameters. `price` is chain-A coins per chain-B coin.
#[derive(Debug, Clone)]
pub struct SwapTerms {
    pub party_a: PartyId,
    pub party_b: PartyId,
    pub amount_a: u64,
    pub amount_b: u64,
    pub unit_a: u64,
    pub unit_b: u64,
    pub price: Ratio<i128>,
    pub granularity_inverse: u64,
    pub refund_locktime_offset_a: u64,
    pub refund_locktime_offset_b: u64,
}

impl SwapTerms {
    pub fn schedule(&self) -> Schedule {
        Schedule::build(self.granularity_inverse).expect("terms carry a valid N")
    }

    pub fn unit(&self, side: Side) -> u64 {
        match side {
            Side::A => self.unit_a,
            Side::B => self.unit_b,
        }
    }

    pub fn party(&self, side: Side) -> &PartyId {
        match side {
            Side::A => &self.party_a,
            Side::B => &self.party_b,
        }
    }
}

/// Two ledgers plus the shared session context; genesis balances are
/// remembered so outcomes can report deltas.
#[derive(Debug, Clone)]
pub struct SwapWorld {
    pub ledger_a: Ledger,
    pub ledger_b: Ledger,
    pub ctx: SessionCtx,
    genesis: BTreeMap<PartyId, BTreeMap<String, u64>>,
    baseline_txs_a: u64,
    baseline_txs_b: u64,
}

impl SwapWorld {
    pub fn new(
        chain_a: ChainParams,
        chain_b: ChainParams,
        genesis: &BTreeMap<PartyId, BTreeMap<String, u64>>,
    ) -> Self {
        let balances_for = |chain: &str| -> Vec<(PartyId, u64)> {
            genesis
                .iter()
                .map(|(p, per_chain)| (p.clone(), per_chain.get(chain).copied().unwrap_or(0)))
                .collect()
        };
        let ledger_a = Ledger::genesis(chain_a.clone(), &balances_for(&chain_a.chain_id));
        let ledger_b = Ledger::genesis(chain_b.clone(), &balances_for(&chain_b.chain_id));
        SwapWorld {
            ledger_a,
            ledger_b,
            ctx: SessionCtx::new(),
            genesis: genesis.clone(),
            baseline_txs_a: 0,
            baseline_txs_b: 0,
        }
    }

    pub fn ledger_mut(&mut self, side: Side) -> &mut Ledger {
        match side {
            Side::A => &mut self.ledger_a,
            Side::B => &mut self.ledger_b,
        }
    }

    /// Split borrow of one ledger and the session context.
    pub fn ledger_and_ctx(&mut self, side: Side) -> (&mut Ledger, &mut SessionCtx) {
        match side {
            Side::A => (&mut self.ledger_a, &mut self.ctx),
            Side::B => (&mut self.ledger_b, &mut self.ctx),
        }
    }

    /// Excludes everything confirmed so far from the session's on-chain
    /// transaction counts (pre-existing channels).
    pub fn reset_onchain_baseline(&mut self) {
        self.baseline_txs_a = self.ledger_a.confirmed_tx_count();
        self.baseline_txs_b = self.ledger_b.confirmed_tx_count();
    }

    pub fn genesis_balance(&self, party: &PartyId, chain_id: &str) -> u64 {
        self.genesis
            .get(party)
            .and_then(|m| m.get(chain_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn balance_deltas(&self) -> BTreeMap<PartyId, BTreeMap<String, i128>> {
        let mut out = BTreeMap::new();
        for party in self.genesis.keys() {
            let mut per_chain = BTreeMap::new();
            for ledger in [&self.ledger_a, &self.ledger_b] {
                let chain = ledger.params.chain_id.clone();
                let now = ledger.balance(party) as i128;
                let was = self.genesis_balance(party, &chain) as i128;
                per_chain.insert(chain, now - was);
            }
            out.insert(party.clone(), per_chain);
        }
        out
    }

    pub fn session_tx_counts(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        out.insert(
            self.ledger_a.params.chain_id.clone(),
            self.ledger_a.confirmed_tx_count() - self.baseline_txs_a,
        );
        out.insert(
            self.ledger_b.params.chain_id.clone(),
            self.ledger_b.confirmed_tx_count() - self.baseline_txs_b,
        );
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SessionOpts {
    /// Ticks after which a silent counterparty is treated as gone.
    /// Default: one block interval of chain A.
    pub stall_timeout_ticks: u64,
    pub max_ticks: u64,
    /// Model channel A as a pre-existing (e.g. LN) channel: opened before
    /// the measured session and left open afterwards.
    pub channel_a_preexisting: bool,
}

impl SessionOpts {
    pub fn defaults_for(chain_a: &ChainParams) -> Self {
        SessionOpts {
            stall_timeout_ticks: chain_a.block_interval_ticks,
            max_ticks: 100_000_000,
            channel_a_preexisting: false,
        }
    }
}

pub(crate) struct SettleEntry {
    pub channel: Channel,
    pub side: Side,
    pub payee_will_close: bool,
    pub unit: u64,
}

/// Settles every remaining channel: the payee closes if there is anything
/// to claim and the payee is still responsive, otherwise the funder
/// recovers via the timelocked refund. Pre-existing channels stay open.
pub(crate) fn settle_channels(
    world: &mut SwapWorld,
    entries: &mut [SettleEntry],
) -> Vec<ChannelReport> {
    let mut reports = Vec::new();
    for entry in entries.iter_mut() {
        let ch = &mut entry.channel;
        if ch.phase == ChannelPhase::Open && !ch.preexisting {
            let (ledger, ctx) = world.ledger_and_ctx(entry.side);
            if ch.update_seq > 0 && entry.payee_will_close {
                match ch.close(ledger, ctx) {
                    Ok(()) | Err(ChannelError::TooLate) => {}
                    Err(e) => panic!("close failed during settlement: {e}"),
                }
            } else {
                match ch.refund(ledger, ctx) {
                    Ok(()) | Err(ChannelError::CloseWonRace) => {}
                    Err(e) => panic!("refund failed during settlement: {e}"),
                }
            }
        }
        let realized = match ch.phase {
            ChannelPhase::Closed | ChannelPhase::Open => ch.cumulative_paid,
            _ => 0,
        };
        reports.push(ChannelReport {
            chain_id: ch.params.chain_id.clone(),
            funder: ch.params.funder.0.clone(),
            payee: ch.params.payee.0.clone(),
            capacity: ch.params.capacity,
            unit: entry.unit,
            cumulative_paid: ch.cumulative_paid,
            update_seq: ch.update_seq,
            phase: ch.phase.as_str().to_string(),
            realized_to_payee: realized,
            preexisting: ch.preexisting,
        });
    }
    reports
}

pub(crate) fn assemble_outcome(
    world: &SwapWorld,
    phase: SessionOutcomePhase,
    updates_a: u64,
    updates_b: u64,
    max_abs_exposure: i64,
    reports: Vec<ChannelReport>,
) -> SwapOutcome {
    SwapOutcome {
        phase,
        updates_a,
        updates_b,
        balance_deltas: world.balance_deltas(),
        signatures: world.ctx.sig_counts.clone(),
        onchain_txs: world.session_tx_counts(),
        confirmations_waited: world.ctx.confirmations_waited.clone(),
        max_abs_exposure_units: max_abs_exposure,
        ticks_elapsed: world.ctx.clock,
        channels: reports,
    }
}

/// Runs a direct two-channel ping-pong swap to completion or abort.
/// Every path terminates with both ledgers settled.
pub fn run_swap(
    world: &mut SwapWorld,
    terms: &SwapTerms,
    strategy_a: &Strategy,
    strategy_b: &Strategy,
    opts: SessionOpts,
) -> SwapOutcome {
    let schedule = terms.schedule();
    world.ctx.emit(
        "swap",
        "session_phase",
        &[("phase", json!("opening"))],
    );

    // Channel A: party A pays party B on chain A.
    let channel_a = if opts.channel_a_preexisting {
        let ch = open_swap_channel(world, terms, Side::A, strategy_b.signs_refund());
        world.reset_onchain_baseline();
        ch.map(|mut c| {
            c.preexisting = true;
            c
        })
    } else {
        world.reset_onchain_baseline();
        open_swap_channel(world, terms, Side::A, strategy_b.signs_refund())
    };
    let channel_a = match channel_a {
        Ok(ch) => ch,
        Err(ChannelError::PayeeRefusedRefundSignature) => {
            let phase = SessionOutcomePhase::Aborted {
                at_step: 0,
                reason: AbortReason::PayeeRefusedRefundSignature,
            };
            return assemble_outcome(world, phase, 0, 0, 0, vec![]);
        }
        Err(e) => panic!("channel A open failed: {e}"),
    };

    let channel_b = open_swap_channel(world, terms, Side::B, strategy_a.signs_refund());
    let mut entries = vec![SettleEntry {
        channel: channel_a,
        side: Side::A,
        payee_will_close: strategy_b.closes_as_payee(),
        unit: terms.unit_a,
    }];
    let channel_b = match channel_b {
        Ok(ch) => ch,
        Err(ChannelError::PayeeRefusedRefundSignature) => {
            let reports = settle_channels(world, &mut entries);
            let phase = SessionOutcomePhase::Aborted {
                at_step: 0,
                reason: AbortReason::PayeeRefusedRefundSignature,
            };
            return assemble_outcome(world, phase, 0, 0, 0, reports);
        }
        Err(e) => panic!("channel B open failed: {e}"),
    };
    entries.push(SettleEntry {
        channel: channel_b,
        side: Side::B,
        payee_will_close: strategy_a.closes_as_payee(),
        unit: terms.unit_b,
    });

    world.ctx.emit(
        "swap",
        "session_phase",
        &[("phase", json!("ping_pong"))],
    );

    let mut updates = [0u64, 0u64];
    let mut cum_units = [0i64, 0i64];
    let mut max_abs_exposure = 0i64;
    let mut abort: Option<(u64, AbortReason)> = None;
    let mut unresponsive: Option<Side> = None;

    for (i, step) in schedule.steps.iter().enumerate() {
        let step_index = (i + 1) as u64;
        if world.ctx.clock > opts.max_ticks {
            abort = Some((step_index, AbortReason::MaxTicksExceeded));
            break;
        }
        let strat = match step.payer {
            Side::A => strategy_a,
            Side::B => strategy_b,
        };
        match strat.payment_action(step_index) {
            PaymentAction::Refuse => {
                abort = Some((step_index, AbortReason::CounterpartyStopped));
                break;
            }
            PaymentAction::StallFor(ticks) => {
                if ticks > opts.stall_timeout_ticks {
                    // The victim stops waiting; the stalled party is gone.
                    world.ctx.tick(opts.stall_timeout_ticks);
                    unresponsive = Some(step.payer);
                    abort = Some((step_index, AbortReason::CounterpartyStopped));
                    break;
                }
                world.ctx.tick(ticks);
            }
            PaymentAction::Proceed => {}
        }

        let delta = step.units * terms.unit(step.payer);
        let entry_idx = match step.payer {
            Side::A => 0,
            Side::B => 1,
        };
        let update = {
            let (entry, ctx) = (&mut entries[entry_idx], &mut world.ctx);
            entry
                .channel
                .propose_update(ctx, delta)
                .expect("schedule stays within capacity")
        };
        world.ctx.tick(1); // one ordered reliable message
        let entry = &mut entries[entry_idx];
        entry
            .channel
            .accept_update(&mut world.ctx, update)
            .expect("honest update validates");
        match step.payer {
            Side::A => {
                updates[0] += 1;
                cum_units[0] += step.units as i64;
            }
            Side::B => {
                updates[1] += 1;
                cum_units[1] += step.units as i64;
            }
        }
        let exposure_now = cum_units[0] - cum_units[1];
        max_abs_exposure = max_abs_exposure.max(exposure_now.abs());
        world.ctx.emit(
            "swap",
            "step",
            &[
                ("step", json!(step_index)),
                ("payer", json!(step.payer.as_str())),
                ("units", json!(step.units)),
                ("cumulative_units", json!(cum_units[entry_idx])),
                ("exposure", json!(exposure_now)),
            ],
        );
    }

    let phase = match abort {
        None => SessionOutcomePhase::Completed,
        Some((at_step, reason)) => {
            world.ctx.emit(
                "swap",
                "aborted",
                &[
                    ("at_step", json!(at_step)),
                    ("reason", json!(reason.as_str())),
                ],
            );
            SessionOutcomePhase::Aborted { at_step, reason }
        }
    };

    // A stalled-out party performs no further protocol actions.
    if let Some(gone) = unresponsive {
        let gone_party = terms.party(gone);
        for entry in &mut entries {
            if &entry.channel.params.payee == gone_party {
                entry.payee_will_close = false;
            }
        }
    }

    world.ctx.emit(
        "swap",
        "session_phase",
        &[("phase", json!("settling"))],
    );
    let reports = settle_channels(world, &mut entries);
    world.ctx.emit(
        "swap",
        "session_phase",
        &[("phase", json!("settled"))],
    );
    assemble_outcome(world, phase, updates[0], updates[1], max_abs_exposure, reports)
}

pub(crate) fn open_swap_channel(
    world: &mut SwapWorld,
    terms: &SwapTerms,
    side: Side,
    payee_signs_refund: bool,
) -> Result<Channel, ChannelError> {
    let (funder, payee, capacity, offset) = match side {
        Side::A => (
            terms.party_a.clone(),
            terms.party_b.clone(),
            terms.amount_a,
            terms.refund_locktime_offset_a,
        ),
        Side::B => (
            terms.party_b.clone(),
            terms.party_a.clone(),
            terms.amount_b,
            terms.refund_locktime_offset_b,
        ),
    };
    let (ledger, ctx) = world.ledger_and_ctx(side);
    let params = ChannelParams {
        funder,
        payee,
        capacity,
        refund_locktime: ledger.height() + offset,
        chain_id: ledger.params.chain_id.clone(),
    };
    open_channel(ledger, ctx, params, payee_signs_refund)
}

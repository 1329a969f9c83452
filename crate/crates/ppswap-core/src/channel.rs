//! Spillman unidirectional payment channel over a simulated ledger.
//!
//! Lifecycle: the funder builds a funding transaction paying into a 2-of-2
//! multisig, the payee signs the timelocked refund *before* the funding is
//! broadcast, then the funder broadcasts. Off-chain updates are 1-of-2
//! funder-signed transactions paying a strictly increasing cumulative
//! amount to the payee. The payee can close unilaterally at any time by
//! countersigning the latest update; the funder recovers everything via
//! the refund once the locktime matures.
//!
//! Fee policy: the broadcaster pays. The close fee is deducted from the
//! payee's output, the refund fee from the funder's output. Off-chain
//! updates carry no fee of their own; the eventual close fee is already
//! allocated inside each update's payee output.

use serde_json::json;
use thiserror::Error;

use crate::event::SessionCtx;
use crate::simchain::{
    Ledger, Lock, OutPoint, Output, PartyId, RejectReason, Signature, Transaction, TxInput,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelParams {
    pub funder: PartyId,
    pub payee: PartyId,
    /// Total locked amount, in base units of the channel's chain.
    pub capacity: u64,
    /// The refund transaction's locktime (the predetermined time t0).
    pub refund_locktime: u64,
    pub chain_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelPhase {
    Init,
    RefundSigned,
    Funded,
    Open,
    Closed,
    Refunded,
}

impl ChannelPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelPhase::Init => "init",
            ChannelPhase::RefundSigned => "refund_signed",
            ChannelPhase::Funded => "funded",
            ChannelPhase::Open => "open",
            ChannelPhase::Closed => "closed",
            ChannelPhase::Refunded => "refunded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UpdateInvalid {
    #[error("non_monotone")]
    NonMonotone,
    #[error("bad_signature")]
    BadSignature,
    #[error("wrong_value_split")]
    WrongValueSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("insufficient_funds")]
    InsufficientFunds,
    #[error("payee_refused_refund_signature")]
    PayeeRefusedRefundSignature,
    #[error("channel_not_open")]
    ChannelNotOpen,
    #[error("over_capacity")]
    OverCapacity,
    #[error("invalid_amount")]
    InvalidAmount,
    #[error("nothing_to_close")]
    NothingToClose,
    #[error("too_late")]
    TooLate,
    #[error("close_won_race")]
    CloseWonRace,
    #[error("invalid_update: {0}")]
    InvalidUpdate(UpdateInvalid),
    #[error("rejected: {0}")]
    Rejected(RejectReason),
    #[error("invalid_params: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub params: ChannelParams,
    pub phase: ChannelPhase,
    pub funding_tx: Transaction,
    pub funding_outpoint: OutPoint,
    /// Payee-signed, timelocked; retained by the funder, not broadcast.
    pub refund_tx: Transaction,
    pub cumulative_paid: u64,
    pub update_seq: u64,
    /// Latest funder-signed update, countersignable by the payee.
    pub latest_update: Option<Transaction>,
    /// Flat per-transaction fee of the channel's chain, fixed at open.
    pub tx_fee: u64,
    /// True for channels opened before the session under measurement
    /// (e.g. an existing LN channel reused for rebalancing).
    pub preexisting: bool,
}

/// Drives the ledger forward until `txid` has the required confirmations.
/// Emits confirmation events and advances the session clock by one block
/// interval per block.
fn wait_for_confirmations(
    ledger: &mut Ledger,
    ctx: &mut SessionCtx,
    txid: crate::simchain::TxId,
    max_blocks: u64,
) -> Result<(), ChannelError> {
    let required = ledger.params.required_confirmations;
    let mut waited = 0;
    while ledger.confirmations(txid) < required {
        if waited >= max_blocks {
            return Err(ChannelError::Rejected(RejectReason::MissingInput));
        }
        let confirmed = ledger.advance_block();
        ctx.tick(ledger.params.block_interval_ticks);
        for c in confirmed {
            ctx.emit(
                "simchain",
                "tx_confirmed",
                &[
                    ("chain", json!(ledger.params.chain_id)),
                    ("txid", json!(c.short())),
                    ("height", json!(ledger.height())),
                ],
            );
        }
        waited += 1;
    }
    ctx.note_confirmations(&ledger.params.chain_id.clone(), required);
    Ok(())
}

/// Opens a channel: builds the funding transaction, obtains the payee's
/// refund signature first, then broadcasts the funding and waits for the
/// required confirmations. `payee_signs_refund` is the payee's
/// strategy-driven consent; refusal aborts with no on-chain footprint.
pub fn open_channel(
    ledger: &mut Ledger,
    ctx: &mut SessionCtx,
    params: ChannelParams,
    payee_signs_refund: bool,
) -> Result<Channel, ChannelError> {
    if params.capacity == 0 {
        return Err(ChannelError::InvalidParams("capacity"));
    }
    if params.funder == params.payee {
        return Err(ChannelError::InvalidParams("funder == payee"));
    }
    if params.refund_locktime <= ledger.height() {
        return Err(ChannelError::InvalidParams("refund_locktime"));
    }
    let fee = ledger.params.tx_fee;
    if params.capacity <= fee {
        return Err(ChannelError::InvalidParams("capacity <= tx_fee"));
    }

    // Select funder outputs covering capacity + fee.
    let needed = params.capacity + fee;
    let mut selected = Vec::new();
    let mut total = 0u64;
    for (op, value) in ledger.spendable_outputs(&params.funder) {
        selected.push((op, value));
        total += value;
        if total >= needed {
            break;
        }
    }
    if total < needed {
        return Err(ChannelError::InsufficientFunds);
    }

    let mut outputs = vec![Output {
        value: params.capacity,
        lock: Lock::MultiSig2of2(params.funder.clone(), params.payee.clone()),
    }];
    let change = total - needed;
    if change > 0 {
        outputs.push(Output {
            value: change,
            lock: Lock::SingleKey(params.funder.clone()),
        });
    }
    let mut funding_tx = Transaction {
        inputs: selected
            .iter()
            .map(|(op, _)| TxInput {
                outpoint: *op,
                signatures: vec![],
            })
            .collect(),
        outputs,
        locktime: 0,
    };
    let funding_outpoint = OutPoint {
        txid: funding_tx.txid(),
        vout: 0,
    };

    // Refund: spends the funding outpoint back to the funder, timelocked.
    let mut refund_tx = Transaction {
        inputs: vec![TxInput {
            outpoint: funding_outpoint,
            signatures: vec![],
        }],
        outputs: vec![Output {
            value: params.capacity - fee,
            lock: Lock::SingleKey(params.funder.clone()),
        }],
        locktime: params.refund_locktime,
    };

    if !payee_signs_refund {
        ctx.emit(
            "channel",
            "open_aborted",
            &[
                ("chain", json!(params.chain_id)),
                ("funder", json!(params.funder.0)),
                ("payee", json!(params.payee.0)),
                ("reason", json!("payee_refused_refund_signature")),
            ],
        );
        return Err(ChannelError::PayeeRefusedRefundSignature);
    }

    // The refund signature event precedes the funding broadcast event.
    let payee_sig = Signature::over(&refund_tx, params.payee.clone());
    refund_tx.inputs[0].signatures.push(payee_sig);
    ctx.count_signature(&params.payee);
    ctx.emit(
        "channel",
        "refund_signed",
        &[
            ("chain", json!(params.chain_id)),
            ("payee", json!(params.payee.0)),
            ("locktime", json!(params.refund_locktime)),
        ],
    );

    for input in &mut funding_tx.inputs {
        input.signatures.push(Signature {
            signer: params.funder.clone(),
            commitment: funding_outpoint.txid,
        });
        ctx.count_signature(&params.funder);
    }
    let funding_txid = ledger
        .submit_tx(funding_tx.clone())
        .map_err(ChannelError::Rejected)?;
    ctx.emit(
        "simchain",
        "tx_submitted",
        &[
            ("chain", json!(params.chain_id)),
            ("txid", json!(funding_txid.short())),
            ("kind", json!("funding")),
        ],
    );
    wait_for_confirmations(ledger, ctx, funding_txid, params.refund_locktime + 1000)?;

    let channel = Channel {
        phase: ChannelPhase::Open,
        funding_tx,
        funding_outpoint,
        refund_tx,
        cumulative_paid: 0,
        update_seq: 0,
        latest_update: None,
        tx_fee: fee,
        preexisting: false,
        params,
    };
    ctx.emit(
        "channel",
        "opened",
        &[
            ("chain", json!(channel.params.chain_id)),
            ("funder", json!(channel.params.funder.0)),
            ("payee", json!(channel.params.payee.0)),
            ("capacity", json!(channel.params.capacity)),
            ("funding_txid", json!(channel.funding_outpoint.txid.short())),
        ],
    );
    Ok(channel)
}

impl Channel {
    /// Builds the funder-signed update raising the cumulative payment by
    /// `delta`. Does not commit; the counterparty validates and accepts.
    pub fn propose_update(
        &self,
        ctx: &mut SessionCtx,
        delta: u64,
    ) -> Result<Transaction, ChannelError> {
        if self.phase != ChannelPhase::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        if delta == 0 {
            return Err(ChannelError::InvalidAmount);
        }
        let new_cumulative = self
            .cumulative_paid
            .checked_add(delta)
            .ok_or(ChannelError::OverCapacity)?;
        if new_cumulative > self.params.capacity {
            return Err(ChannelError::OverCapacity);
        }
        if new_cumulative <= self.tx_fee {
            return Err(ChannelError::InvalidAmount);
        }
        let mut outputs = vec![Output {
            value: new_cumulative - self.tx_fee,
            lock: Lock::SingleKey(self.params.payee.clone()),
        }];
        let remainder = self.params.capacity - new_cumulative;
        if remainder > 0 {
            outputs.push(Output {
                value: remainder,
                lock: Lock::SingleKey(self.params.funder.clone()),
            });
        }
        let mut tx = Transaction {
            inputs: vec![TxInput {
                outpoint: self.funding_outpoint,
                signatures: vec![],
            }],
            outputs,
            locktime: 0,
        };
        let sig = Signature::over(&tx, self.params.funder.clone());
        tx.inputs[0].signatures.push(sig);
        ctx.count_signature(&self.params.funder);
        Ok(tx)
    }

    /// Payee-side check of a proposed update. Returns the implied new
    /// cumulative payment on success.
    pub fn validate_update(&self, update: &Transaction) -> Result<u64, UpdateInvalid> {
        if update.inputs.len() != 1 || update.inputs[0].outpoint != self.funding_outpoint {
            return Err(UpdateInvalid::BadSignature);
        }
        let funder_signed = update.inputs[0]
            .signatures
            .iter()
            .any(|s| s.signer == self.params.funder && s.verifies(update));
        if !funder_signed {
            return Err(UpdateInvalid::BadSignature);
        }
        let mut payee_value: Option<u64> = None;
        let mut funder_value = 0u64;
        for out in &update.outputs {
            match &out.lock {
                Lock::SingleKey(p) if *p == self.params.payee => {
                    if payee_value.replace(out.value).is_some() {
                        return Err(UpdateInvalid::WrongValueSplit);
                    }
                }
                Lock::SingleKey(p) if *p == self.params.funder => funder_value += out.value,
                _ => return Err(UpdateInvalid::WrongValueSplit),
            }
        }
        let payee_value = payee_value.ok_or(UpdateInvalid::WrongValueSplit)?;
        if payee_value + funder_value != self.params.capacity - self.tx_fee {
            return Err(UpdateInvalid::WrongValueSplit);
        }
        let new_cumulative = payee_value + self.tx_fee;
        if new_cumulative <= self.cumulative_paid {
            return Err(UpdateInvalid::NonMonotone);
        }
        Ok(new_cumulative)
    }

    /// Commits a validated update.
    pub fn accept_update(
        &mut self,
        ctx: &mut SessionCtx,
        update: Transaction,
    ) -> Result<(), ChannelError> {
        let new_cumulative = self
            .validate_update(&update)
            .map_err(ChannelError::InvalidUpdate)?;
        self.cumulative_paid = new_cumulative;
        self.update_seq += 1;
        self.latest_update = Some(update);
        ctx.emit(
            "channel",
            "update_accepted",
            &[
                ("chain", json!(self.params.chain_id)),
                ("seq", json!(self.update_seq)),
                ("cumulative_paid", json!(self.cumulative_paid)),
            ],
        );
        Ok(())
    }

    /// Convenience: propose + validate + accept in one step.
    pub fn pay(&mut self, ctx: &mut SessionCtx, delta: u64) -> Result<(), ChannelError> {
        let update = self.propose_update(ctx, delta)?;
        self.accept_update(ctx, update)
    }

    /// Payee countersigns the latest update and broadcasts it.
    pub fn close(&mut self, ledger: &mut Ledger, ctx: &mut SessionCtx) -> Result<(), ChannelError> {
        if self.phase != ChannelPhase::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        if self.update_seq == 0 {
            // Nothing to countersign that differs from the refund.
            return Err(ChannelError::NothingToClose);
        }
        let mut tx = self.latest_update.clone().expect("update_seq >= 1");
        let sig = Signature::over(&tx, self.params.payee.clone());
        tx.inputs[0].signatures.push(sig);
        ctx.count_signature(&self.params.payee);
        let txid = match ledger.submit_tx(tx) {
            Ok(id) => id,
            Err(RejectReason::DoubleSpend) => {
                if ledger.is_confirmed(self.refund_tx.txid()) {
                    self.phase = ChannelPhase::Refunded;
                }
                return Err(ChannelError::TooLate);
            }
            Err(other) => return Err(ChannelError::Rejected(other)),
        };
        ctx.emit(
            "simchain",
            "tx_submitted",
            &[
                ("chain", json!(self.params.chain_id)),
                ("txid", json!(txid.short())),
                ("kind", json!("close")),
            ],
        );
        wait_for_confirmations(ledger, ctx, txid, self.params.refund_locktime + 1000)?;
        self.phase = ChannelPhase::Closed;
        ctx.emit(
            "channel",
            "closed",
            &[
                ("chain", json!(self.params.chain_id)),
                ("payee", json!(self.params.payee.0)),
                ("cumulative_paid", json!(self.cumulative_paid)),
            ],
        );
        Ok(())
    }

    /// Funder countersigns and broadcasts the refund. The mempool holds it
    /// until the locktime matures; if the payee's close confirms first the
    /// refund dies and the channel is Closed instead.
    pub fn refund(&mut self, ledger: &mut Ledger, ctx: &mut SessionCtx) -> Result<(), ChannelError> {
        if self.phase != ChannelPhase::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        let mut tx = self.refund_tx.clone();
        let sig = Signature::over(&tx, self.params.funder.clone());
        tx.inputs[0].signatures.push(sig);
        ctx.count_signature(&self.params.funder);
        let txid = match ledger.submit_tx(tx) {
            Ok(id) => id,
            Err(RejectReason::DoubleSpend) => {
                self.phase = ChannelPhase::Closed;
                return Err(ChannelError::CloseWonRace);
            }
            Err(other) => return Err(ChannelError::Rejected(other)),
        };
        ctx.emit(
            "simchain",
            "tx_submitted",
            &[
                ("chain", json!(self.params.chain_id)),
                ("txid", json!(txid.short())),
                ("kind", json!("refund")),
            ],
        );
        let required = ledger.params.required_confirmations;
        let budget = self.params.refund_locktime.saturating_sub(ledger.height()) + required + 16;
        let mut waited = 0;
        while ledger.confirmations(txid) < required {
            if !ledger.in_mempool(txid) && !ledger.is_confirmed(txid) {
                // Evicted: a close spent the funding outpoint first.
                self.phase = ChannelPhase::Closed;
                return Err(ChannelError::CloseWonRace);
            }
            if waited >= budget {
                return Err(ChannelError::Rejected(RejectReason::MissingInput));
            }
            let confirmed = ledger.advance_block();
            ctx.tick(ledger.params.block_interval_ticks);
            for c in confirmed {
                ctx.emit(
                    "simchain",
                    "tx_confirmed",
                    &[
                        ("chain", json!(ledger.params.chain_id)),
                        ("txid", json!(c.short())),
                        ("height", json!(ledger.height())),
                    ],
                );
            }
            waited += 1;
        }
        ctx.note_confirmations(&ledger.params.chain_id.clone(), required);
        self.phase = ChannelPhase::Refunded;
        ctx.emit(
            "channel",
            "refunded",
            &[
                ("chain", json!(self.params.chain_id)),
                ("funder", json!(self.params.funder.0)),
            ],
        );
        Ok(())
    }

    /// What the payee can realize on-chain right now by closing.
    pub fn payee_claimable(&self) -> u64 {
        if self.update_seq == 0 {
            0
        } else {
            self.cumulative_paid - self.tx_fee
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simchain::{ChainParams, Ledger};

    const FEE: u64 = 100;

    fn chain() -> ChainParams {
        ChainParams {
            chain_id: "btc".into(),
            block_interval_ticks: 600,
            required_confirmations: 1,
            tx_fee: FEE,
            unit_name: "satoshi".into(),
            base_units_per_coin: 100_000_000,
        }
    }

    fn alice() -> PartyId {
        PartyId::new("alice")
    }
    fn bob() -> PartyId {
        PartyId::new("bob")
    }

    fn setup(funder_balance: u64) -> (Ledger, SessionCtx) {
        let ledger = Ledger::genesis(chain(), &[(alice(), funder_balance)]);
        (ledger, SessionCtx::new())
    }

    fn open(ledger: &mut Ledger, ctx: &mut SessionCtx, capacity: u64) -> Channel {
        open_channel(
            ledger,
            ctx,
            ChannelParams {
                funder: alice(),
                payee: bob(),
                capacity,
                refund_locktime: ledger.height() + 6,
                chain_id: "btc".into(),
            },
            true,
        )
        .unwrap()
    }

    #[test]
    fn open_one_onchain_tx() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let ch = open(&mut ledger, &mut ctx, 100_000_000);
        assert_eq!(ch.phase, ChannelPhase::Open);
        assert_eq!(ledger.confirmed_tx_count(), 1);
        assert_eq!(ledger.balance(&alice()), 0);
    }

    #[test]
    fn open_insufficient_funds_no_footprint() {
        let (mut ledger, mut ctx) = setup(100_000_000);
        let err = open_channel(
            &mut ledger,
            &mut ctx,
            ChannelParams {
                funder: alice(),
                payee: bob(),
                capacity: 100_000_000,
                refund_locktime: 6,
                chain_id: "btc".into(),
            },
            true,
        )
        .unwrap_err();
        assert_eq!(err, ChannelError::InsufficientFunds);
        assert_eq!(ledger.confirmed_tx_count(), 0);
    }

    #[test]
    fn payee_refuses_refund_no_footprint() {
        let (mut ledger, mut ctx) = setup(200_000_000);
        let before = ledger.balance(&alice());
        let err = open_channel(
            &mut ledger,
            &mut ctx,
            ChannelParams {
                funder: alice(),
                payee: bob(),
                capacity: 100_000_000,
                refund_locktime: 6,
                chain_id: "btc".into(),
            },
            false,
        )
        .unwrap_err();
        assert_eq!(err, ChannelError::PayeeRefusedRefundSignature);
        assert_eq!(ledger.balance(&alice()), before);
        assert_eq!(ledger.confirmed_tx_count(), 0);
    }

    #[test]
    fn first_pay_on_reference_channel() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        assert_eq!(ch.cumulative_paid, 100_000);
        assert_eq!(ch.update_seq, 1);
    }

    #[test]
    fn over_capacity_rejected() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        assert_eq!(
            ch.pay(&mut ctx, 100_000_001),
            Err(ChannelError::OverCapacity)
        );
    }

    #[test]
    fn full_schedule_of_501_pays() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        for _ in 0..499 {
            ch.pay(&mut ctx, 200_000).unwrap();
        }
        ch.pay(&mut ctx, 100_000).unwrap();
        assert_eq!(ch.cumulative_paid, 100_000_000);
        assert_eq!(ch.update_seq, 501);
    }

    #[test]
    fn validate_monotone_progression() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        let up = ch.propose_update(&mut ctx, 200_000).unwrap();
        assert_eq!(ch.validate_update(&up), Ok(300_000));
    }

    #[test]
    fn replayed_update_non_monotone() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        let first = ch.propose_update(&mut ctx, 100_000).unwrap();
        ch.accept_update(&mut ctx, first.clone()).unwrap();
        assert_eq!(ch.validate_update(&first), Err(UpdateInvalid::NonMonotone));
    }

    #[test]
    fn wrong_value_split_detected() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let ch = open(&mut ledger, &mut ctx, 100_000_000);
        let mut up = ch.propose_update(&mut ctx, 100_000).unwrap();
        // Inflate the funder remainder so outputs sum to capacity - fee + 1.
        up.outputs[1].value += 1;
        let sig = Signature::over(&up, alice());
        up.inputs[0].signatures = vec![sig];
        // Oracle: independent re-summation of outputs.
        let sum: u64 = up.outputs.iter().map(|o| o.value).sum();
        assert_eq!(sum, 100_000_000 - FEE + 1);
        assert_eq!(
            ch.validate_update(&up),
            Err(UpdateInvalid::WrongValueSplit)
        );
    }

    #[test]
    fn unsigned_update_rejected() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let ch = open(&mut ledger, &mut ctx, 100_000_000);
        let mut up = ch.propose_update(&mut ctx, 100_000).unwrap();
        up.inputs[0].signatures.clear();
        assert_eq!(ch.validate_update(&up), Err(UpdateInvalid::BadSignature));
    }

    #[test]
    fn close_splits_capacity() {
        // Oracle: capacity-split arithmetic. Payee gets cumulative - fee,
        // funder gets capacity - cumulative.
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        ch.close(&mut ledger, &mut ctx).unwrap();
        assert_eq!(ch.phase, ChannelPhase::Closed);
        assert_eq!(ledger.balance(&bob()), 100_000 - FEE);
        assert_eq!(ledger.balance(&alice()), 99_900_000);
    }

    #[test]
    fn close_after_full_schedule_pays_capacity_minus_fee() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        for _ in 0..499 {
            ch.pay(&mut ctx, 200_000).unwrap();
        }
        ch.pay(&mut ctx, 100_000).unwrap();
        ch.close(&mut ledger, &mut ctx).unwrap();
        assert_eq!(ledger.balance(&bob()), 100_000_000 - FEE);
        assert_eq!(ledger.balance(&alice()), 0);
    }

    #[test]
    fn refund_after_payee_inaction() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        ch.refund(&mut ledger, &mut ctx).unwrap();
        assert_eq!(ch.phase, ChannelPhase::Refunded);
        assert_eq!(ledger.balance(&alice()), 100_000_000 - FEE);
        assert_eq!(ledger.balance(&bob()), 0);
    }

    #[test]
    fn early_refund_confirms_exactly_at_locktime() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        let locktime = ch.params.refund_locktime;
        ch.refund(&mut ledger, &mut ctx).unwrap();
        let refund_txid = ledger
            .inclusion_height(ch.refund_tx.txid())
            .expect("refund confirmed");
        assert_eq!(refund_txid, locktime);
    }

    #[test]
    fn close_after_refund_is_too_late() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        let mut funder_side = ch.clone();
        funder_side.refund(&mut ledger, &mut ctx).unwrap();
        assert_eq!(ch.close(&mut ledger, &mut ctx), Err(ChannelError::TooLate));
        assert_eq!(ch.phase, ChannelPhase::Refunded);
    }

    #[test]
    fn refund_loses_race_to_pending_close() {
        // Both spenders pending at the locktime boundary, close submitted
        // first: close confirms, refund is dead.
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        ch.pay(&mut ctx, 100_000).unwrap();
        // Submit the close without waiting for confirmation.
        let mut close_tx = ch.latest_update.clone().unwrap();
        let sig = Signature::over(&close_tx, bob());
        close_tx.inputs[0].signatures.push(sig);
        ledger.submit_tx(close_tx).unwrap();
        assert_eq!(
            ch.refund(&mut ledger, &mut ctx),
            Err(ChannelError::CloseWonRace)
        );
        assert_eq!(ch.phase, ChannelPhase::Closed);
    }

    #[test]
    fn zero_update_channel_cannot_close() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        assert_eq!(
            ch.close(&mut ledger, &mut ctx),
            Err(ChannelError::NothingToClose)
        );
    }

    #[test]
    fn signature_count_is_updates_plus_three() {
        // 1 refund + u updates + 1 close countersignature + 1 funding spend.
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let mut ch = open(&mut ledger, &mut ctx, 100_000_000);
        let updates = 7u64;
        ch.pay(&mut ctx, 100_000).unwrap();
        for _ in 1..updates {
            ch.pay(&mut ctx, 200_000).unwrap();
        }
        ch.close(&mut ledger, &mut ctx).unwrap();
        assert_eq!(ctx.total_signatures(), updates + 3);
        // No on-chain transactions between open and close.
        assert_eq!(ledger.confirmed_tx_count(), 2);
    }

    #[test]
    fn payee_can_realize_claimable_at_every_step() {
        // Snapshot-close replay: at every step the payee can unilaterally
        // realize exactly cumulative_paid - fee on-chain.
        let (ledger, ctx) = setup(100_000_000 + FEE);
        let mut ledger0 = ledger;
        let mut ctx0 = ctx;
        let mut ch = open(&mut ledger0, &mut ctx0, 100_000_000);
        let deltas = [100_000u64, 200_000, 200_000, 200_000, 100_000];
        for d in deltas {
            ch.pay(&mut ctx0, d).unwrap();
            let mut snap_ledger = ledger0.clone();
            let mut snap_ctx = ctx0.clone();
            let mut snap_ch = ch.clone();
            snap_ch.close(&mut snap_ledger, &mut snap_ctx).unwrap();
            assert_eq!(snap_ledger.balance(&bob()), ch.cumulative_paid - FEE);
            assert_eq!(ch.payee_claimable(), ch.cumulative_paid - FEE);
        }
    }

    #[test]
    fn refund_signature_precedes_funding_broadcast() {
        let (mut ledger, mut ctx) = setup(100_000_000 + FEE);
        let _ch = open(&mut ledger, &mut ctx, 100_000_000);
        let kinds: Vec<&str> = ctx.events.iter().map(|e| e.kind.as_str()).collect();
        let refund_pos = kinds.iter().position(|k| *k == "refund_signed").unwrap();
        let funding_pos = kinds.iter().position(|k| *k == "tx_submitted").unwrap();
        assert!(refund_pos < funding_pos);
    }
}

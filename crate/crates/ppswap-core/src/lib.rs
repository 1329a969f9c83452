//! Deterministic simulator and protocol library for ping-pong swaps:
//! trustless peer-to-peer crosschain trades executed as interleaved
//! micropayments over two opposing unidirectional payment channels.
//!
//! The crate is organized bottom-up:
//!
//! - [`simchain`]: a simulated UTXO chain with 2-of-2 multisig outputs,
//!   transaction locktime, a FIFO mempool and confirmation counting.
//! - [`channel`]: the Spillman unidirectional channel state machine
//!   (funding, payee-signed refund, monotone off-chain updates, close,
//!   timelock refund).
//! - [`swap`]: trade quantization, the 1,2,2,...,2,1 ping-pong schedule
//!   and the two-channel session driver.
//! - [`strategy`]: party behavior models plus the cheating economics.
//! - [`hub`]: composed swaps through a non-custodial exchange hub.
//! - [`scenario`]: declarative scenario files, presets, the runner and
//!   the machine-readable report.
//! - [`sweep`]: exhaustive abort-point sweeps (data-parallel when the
//!   `parallel` feature is enabled, sequential otherwise).

pub mod channel;
pub mod event;
pub mod hub;
pub mod scenario;
pub mod simchain;
pub mod strategy;
pub mod swap;
pub mod sweep;

pub use event::{EventRecord, SessionCtx};
pub use simchain::{ChainParams, Ledger, Lock, OutPoint, Output, PartyId, RejectReason, Signature, Transaction, TxId};
pub use strategy::{AbortReason, SessionOutcomePhase, Strategy, SwapOutcome};
pub use swap::{Schedule, Side, SwapTerms, SwapWorld};

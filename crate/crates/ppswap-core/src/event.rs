//! Session event sink: tick clock, deterministic audit trail and
//! per-party signature accounting.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::simchain::PartyId;

/// One audit-trail record. Serialized as a single JSON line with stable
/// field order (`data` keys are sorted).
#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub tick: u64,
    pub module: &'static str,
    pub kind: String,
    pub data: BTreeMap<String, Value>,
}

/// Shared per-session context: the tick clock, the event log and the
/// signature / confirmation counters feeding the final report.
#[derive(Debug, Clone, Default)]
pub struct SessionCtx {
    pub clock: u64,
    pub events: Vec<EventRecord>,
    pub sig_counts: BTreeMap<PartyId, u64>,
    pub confirmations_waited: BTreeMap<String, u64>,
}

impl SessionCtx {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&mut self, n: u64) {
        self.clock = self.clock.saturating_add(n);
    }

    pub fn emit(&mut self, module: &'static str, kind: &str, fields: &[(&str, Value)]) {
        let data = fields
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        self.events.push(EventRecord {
            tick: self.clock,
            module,
            kind: kind.to_string(),
            data,
        });
    }

    pub fn count_signature(&mut self, signer: &PartyId) {
        *self.sig_counts.entry(signer.clone()).or_insert(0) += 1;
    }

    pub fn note_confirmations(&mut self, chain_id: &str, confs: u64) {
        *self
            .confirmations_waited
            .entry(chain_id.to_string())
            .or_insert(0) += confs;
    }

    pub fn total_signatures(&self) -> u64 {
        self.sig_counts.values().sum()
    }

    /// Line-delimited JSON log; byte-identical for identical runs.
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

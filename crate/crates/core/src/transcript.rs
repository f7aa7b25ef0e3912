//! Per-party protocol views.
//!
//! Every event a party observes or produces is appended to its log. Events are serialized as one
//! JSON object per line and fed into a running SHA-256 digest, so two runs can be compared without
//! keeping the logs. Retention of the events themselves is optional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Edge, LocalView, PartitionedGraph, PartyId, VertexId};
use crate::net::{Envelope, ExchangeKind, MsgType};

mod audit;

pub use audit::ViewAuditor;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadMode {
    /// Length and SHA-256 of each payload.
    Digest,
    /// Digest plus the payload bytes in hex.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadRecord {
    pub len: usize,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hex: Option<String>,
}

impl PayloadRecord {
    fn new(payload: &[u8], mode: PayloadMode) -> Self {
        PayloadRecord {
            len: payload.len(),
            sha256: hex::encode(Sha256::digest(payload)),
            hex: (mode == PayloadMode::Full).then(|| hex::encode(payload)),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonPurpose {
    Move,
    Termination,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    LocalGraph {
        view: LocalView,
    },
    InitialColors {
        colors: Vec<(VertexId, u32)>,
    },
    Turn {
        turn: u64,
        active: PartyId,
    },
    Sent {
        round: u64,
        to: PartyId,
        msg: MsgType,
        payload: PayloadRecord,
    },
    Received {
        round: u64,
        from: PartyId,
        msg: MsgType,
        payload: PayloadRecord,
    },
    /// Decrypted `x·y + r` on an edge where this party holds the key.
    ExchangeOutput {
        edge: Edge,
        exchange: ExchangeKind,
        value: i64,
    },
    /// Mask drawn by the responder of an exchange.
    MaskGenerated {
        edge: Edge,
        exchange: ExchangeKind,
        value: i64,
    },
    Share {
        value: i64,
    },
    LocalCheck {
        colorable: bool,
    },
    /// A border move is accepted iff the global conflict change is below `threshold`.
    ProposedMove {
        vertex: VertexId,
        from: u32,
        to: u32,
        delta_internal: i64,
        border: bool,
        threshold: i64,
    },
    CompanionMove {
        vertex: VertexId,
        from: u32,
        to: u32,
        delta_internal: i64,
    },
    CompanionSkip,
    MoveResult {
        vertex: VertexId,
        accepted: bool,
    },
    ComparisonBit {
        round_id: u64,
        purpose: ComparisonPurpose,
        bit: bool,
    },
    /// Evaluator only: a comparison was computed and released to `recipients`.
    Evaluated {
        round_id: u64,
        purpose: ComparisonPurpose,
        participants: Vec<PartyId>,
        recipients: Vec<PartyId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub party: PartyId,
    pub event: Event,
}

/// One entry of the global message log.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageRecord {
    pub round: u64,
    pub from: PartyId,
    pub to: PartyId,
    pub msg: MsgType,
    pub sha256: String,
}

#[derive(Clone, Debug)]
pub struct TranscriptConfig {
    pub keep_events: bool,
    pub payloads: PayloadMode,
}

impl Default for TranscriptConfig {
    fn default() -> Self {
        TranscriptConfig {
            keep_events: true,
            payloads: PayloadMode::Digest,
        }
    }
}

pub struct Transcript {
    config: TranscriptConfig,
    records: Vec<Record>,
    global: Vec<MessageRecord>,
    hasher: Sha256,
    seq: u64,
    auditor: Option<ViewAuditor>,
}

impl Transcript {
    pub fn new(config: TranscriptConfig) -> Self {
        Transcript {
            config,
            records: Vec::new(),
            global: Vec::new(),
            hasher: Sha256::new(),
            seq: 0,
            auditor: None,
        }
    }

    /// Checks every event against the view each party is entitled to, as it is recorded.
    pub fn with_auditor(mut self, g: &PartitionedGraph) -> Self {
        self.auditor = Some(ViewAuditor::new(g));
        self
    }

    pub fn record(&mut self, party: PartyId, event: Event) {
        if let Some(a) = &mut self.auditor {
            a.observe(party, &event);
        }
        let rec = Record {
            seq: self.seq,
            party,
            event,
        };
        self.seq += 1;
        let line = serde_json::to_string(&rec).expect("events serialize");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if self.config.keep_events {
            self.records.push(rec);
        }
    }

    pub(crate) fn sent(&mut self, env: &Envelope) {
        let payload = PayloadRecord::new(&env.payload, self.config.payloads);
        if self.config.keep_events {
            self.global.push(MessageRecord {
                round: env.round,
                from: env.from,
                to: env.to,
                msg: env.kind,
                sha256: payload.sha256.clone(),
            });
        }
        self.record(
            env.from,
            Event::Sent {
                round: env.round,
                to: env.to,
                msg: env.kind,
                payload,
            },
        );
    }

    pub(crate) fn received(&mut self, env: &Envelope) {
        if let Some(a) = &mut self.auditor {
            a.observe_message(env);
        }
        let payload = PayloadRecord::new(&env.payload, self.config.payloads);
        self.record(
            env.to,
            Event::Received {
                round: env.round,
                from: env.from,
                msg: env.kind,
                payload,
            },
        );
    }

    /// Hex SHA-256 over the JSON-lines export, maintained even when events are not kept.
    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    pub fn event_count(&self) -> u64 {
        self.seq
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn global_log(&self) -> &[MessageRecord] {
        &self.global
    }

    pub fn view(&self, p: PartyId) -> impl Iterator<Item = &Event> + '_ {
        self.records.iter().filter(move |r| r.party == p).map(|r| &r.event)
    }

    pub fn violations(&self) -> &[String] {
        self.auditor.as_ref().map_or(&[], |a| a.violations())
    }

    pub fn audited(&self) -> bool {
        self.auditor.is_some()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// The per-party logs only: what party `p` could hand to an analyst.
    pub fn view_jsonl(&self, p: PartyId) -> String {
        let mut out = String::new();
        for r in self.records.iter().filter(|r| r.party == p) {
            out.push_str(&serde_json::to_string(r).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// Checks that the sent and the received events of all parties both add up to the global log.
    pub fn check_union(&self) -> std::result::Result<(), String> {
        if !self.config.keep_events {
            return Err("events were not retained".into());
        }
        let mut global = self.global.clone();
        global.sort();
        let mut sent = Vec::new();
        let mut received = Vec::new();
        for r in &self.records {
            match &r.event {
                Event::Sent {
                    round,
                    to,
                    msg,
                    payload,
                } => sent.push(MessageRecord {
                    round: *round,
                    from: r.party,
                    to: *to,
                    msg: *msg,
                    sha256: payload.sha256.clone(),
                }),
                Event::Received {
                    round,
                    from,
                    msg,
                    payload,
                } => received.push(MessageRecord {
                    round: *round,
                    from: *from,
                    to: r.party,
                    msg: *msg,
                    sha256: payload.sha256.clone(),
                }),
                _ => {}
            }
        }
        sent.sort();
        received.sort();
        if sent != global {
            return Err(format!("{} sent events vs {} global messages", sent.len(), global.len()));
        }
        if received != global {
            return Err(format!(
                "{} received events vs {} global messages",
                received.len(),
                global.len()
            ));
        }
        Ok(())
    }
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Record>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}

/// Groups records by party, preserving order.
pub fn split_views(records: &[Record]) -> BTreeMap<PartyId, Vec<&Event>> {
    let mut out: BTreeMap<PartyId, Vec<&Event>> = BTreeMap::new();
    for r in records {
        out.entry(r.party).or_default().push(&r.event);
    }
    out
}

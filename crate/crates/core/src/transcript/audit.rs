use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;

use super::Event;
use crate::graph::{Edge, PartitionedGraph, PartyId, VertexId};
use crate::net::{CmpResult, Envelope, ExchangeKind, MsgType, ScalarRequest, ScalarResponse, EVALUATOR};

/// Online check that each party only ever sees what it is entitled to: its own vertices, colors
/// and internal edges, the external edges touching it, ciphertexts that are not plaintexts, its own
/// masks and decrypted outputs, and comparison bits addressed to it.
pub struct ViewAuditor {
    graph: PartitionedGraph,
    recipients: BTreeMap<u64, BTreeSet<PartyId>>,
    violations: Vec<String>,
    // ciphertexts requested in the current round and where they came from
    round_ciphertexts: (u64, BTreeMap<BigUint, CiphertextOrigin>),
}

type CiphertextOrigin = (PartyId, Option<VertexId>, ExchangeKind, usize);

// A ciphertext is a residue mod n² for n of at least 128 bits; anything this small is a plaintext.
const PLAINTEXT_BOUND_BITS: u64 = 64;

impl ViewAuditor {
    pub fn new(g: &PartitionedGraph) -> Self {
        ViewAuditor {
            graph: g.clone(),
            recipients: BTreeMap::new(),
            violations: Vec::new(),
            round_ciphertexts: (0, BTreeMap::new()),
        }
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    fn flag(&mut self, p: PartyId, what: String) {
        self.violations.push(format!("{p}: {what}"));
    }

    fn owns(&self, p: PartyId, v: VertexId) -> bool {
        v < self.graph.n_vertices() && self.graph.owner(v) == p
    }

    fn incident_external(&self, p: PartyId, e: Edge) -> bool {
        e.v < self.graph.n_vertices()
            && self.graph.has_edge(e.u, e.v)
            && !self.graph.is_internal(e)
            && (self.owns(p, e.u) || self.owns(p, e.v))
    }

    fn check_vertex(&mut self, p: PartyId, v: VertexId, ctx: &str) {
        if !self.owns(p, v) {
            self.flag(p, format!("{ctx} mentions foreign vertex {v}"));
        }
    }

    fn check_edge(&mut self, p: PartyId, e: Edge, ctx: &str) {
        if !self.incident_external(p, e) {
            self.flag(p, format!("{ctx} on edge {}-{} outside its view", e.u, e.v));
        }
    }

    pub fn observe(&mut self, p: PartyId, ev: &Event) {
        if p == EVALUATOR {
            if let Event::Evaluated {
                round_id,
                recipients,
                ..
            } = ev
            {
                self.recipients.insert(*round_id, recipients.iter().copied().collect());
            }
            return;
        }
        match ev {
            Event::LocalGraph { view } => {
                if *view != self.graph.local_view(p) {
                    self.flag(p, "local graph differs from its own partition".into());
                }
            }
            Event::InitialColors { colors } => {
                for &(v, _) in colors {
                    self.check_vertex(p, v, "initial colors");
                }
            }
            Event::ProposedMove { vertex, .. }
            | Event::CompanionMove { vertex, .. }
            | Event::MoveResult { vertex, .. } => self.check_vertex(p, *vertex, "move"),
            Event::ExchangeOutput { edge, .. } => self.check_edge(p, *edge, "exchange output"),
            Event::MaskGenerated { edge, .. } => self.check_edge(p, *edge, "mask"),
            Event::ComparisonBit { round_id, .. } => {
                if !self.recipients.get(round_id).is_some_and(|r| r.contains(&p)) {
                    self.flag(p, format!("comparison bit {round_id} not addressed to it"));
                }
            }
            Event::Evaluated { .. } => self.flag(p, "holds an evaluator record".into()),
            Event::Sent { msg, .. } if *msg == MsgType::CmpResult => {
                self.flag(p, "sent a comparison result".into())
            }
            _ => {}
        }
    }

    pub fn observe_message(&mut self, env: &Envelope) {
        let p = env.to;
        if p == EVALUATOR {
            if env.kind != MsgType::CmpShare {
                self.flag(p, format!("evaluator received {:?}", env.kind));
            }
            return;
        }
        match env.kind {
            MsgType::ScalarReq => match ScalarRequest::decode(&env.payload) {
                Ok(req) => {
                    self.check_edge(p, req.edge, "scalar request");
                    if self.round_ciphertexts.0 != env.round {
                        self.round_ciphertexts = (env.round, BTreeMap::new());
                    }
                    let endpoint = [req.edge.u, req.edge.v].into_iter().find(|&v| self.owns(env.from, v));
                    let mut seen = BTreeSet::new();
                    for (i, ct) in req.vectors.iter().flatten().enumerate() {
                        self.check_ciphertext(p, ct.value());
                        if !seen.insert(ct.value().clone()) {
                            self.flag(p, "repeated ciphertext in scalar request".into());
                        }
                        // the same endpoint may reuse its vectors within a round, nothing else may
                        let origin = (env.from, endpoint, req.exchange, i);
                        let prev = self.round_ciphertexts.1.entry(ct.value().clone()).or_insert(origin);
                        if *prev != origin {
                            self.flag(p, "ciphertext reused across endpoints".into());
                        }
                    }
                }
                Err(e) => self.flag(p, format!("undecodable scalar request: {e}")),
            },
            MsgType::ScalarResp => match ScalarResponse::decode(&env.payload) {
                Ok(resp) => {
                    self.check_edge(p, resp.edge, "scalar response");
                    self.check_ciphertext(p, resp.ciphertext.value());
                }
                Err(e) => self.flag(p, format!("undecodable scalar response: {e}")),
            },
            MsgType::CmpShare => self.flag(p, "received another party's comparison share".into()),
            MsgType::CmpResult => match CmpResult::decode(&env.payload) {
                Ok(r) => {
                    if env.from != EVALUATOR {
                        self.flag(p, "comparison result from a party".into());
                    }
                    if !self.recipients.get(&r.round_id).is_some_and(|s| s.contains(&p)) {
                        self.flag(p, format!("comparison result {} not addressed to it", r.round_id));
                    }
                }
                Err(e) => self.flag(p, format!("undecodable comparison result: {e}")),
            },
            MsgType::SyncInvite | MsgType::SyncDone | MsgType::PassToken => {
                if env.from == EVALUATOR {
                    self.flag(p, format!("{:?} from the evaluator", env.kind));
                }
            }
        }
    }

    fn check_ciphertext(&mut self, p: PartyId, v: &BigUint) {
        if v.bits() <= PLAINTEXT_BOUND_BITS {
            self.flag(p, format!("ciphertext value {v} looks like a plaintext"));
        }
    }
}

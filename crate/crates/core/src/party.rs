//! State a single party keeps between protocol steps.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::{ColorVector, Edge, LocalView, PartyId, VertexId};
use crate::net::{ExchangeKind, ScalarRequest};
use crate::paillier::{Ciphertext, Keypair};
use crate::tabu::TabuList;

pub struct Party {
    pub(crate) id: PartyId,
    pub(crate) view: LocalView,
    pub(crate) k: u32,
    pub(crate) colors: BTreeMap<VertexId, u32>,
    /// Proposed colors awaiting the comparison outcome.
    pub(crate) tentative: BTreeMap<VertexId, u32>,
    pub(crate) keys: Keypair,
    pub(crate) rng: ChaCha20Rng,
    /// Additive share of the global conflict count, in the ring of 64-bit words.
    pub(crate) share: i64,
    /// Share of the conflict change under the tentative colors.
    pub(crate) delta_share: i64,
    pub(crate) pending_s: BTreeMap<Edge, i64>,
    pub(crate) pending_r: BTreeMap<Edge, i64>,
    /// Outcome of the current move, when this party is entitled to it.
    pub(crate) accept_bit: Option<bool>,
    pub(crate) tabu: TabuList,
    internal_adj: BTreeMap<VertexId, Vec<VertexId>>,
    // encrypted vectors per vertex, valid for one exchange phase
    request_cache: Option<(u64, ExchangeKind, BTreeMap<VertexId, Vec<Vec<Ciphertext>>>)>,
}

impl Party {
    pub fn new(
        view: LocalView,
        k: u32,
        colors: BTreeMap<VertexId, u32>,
        keys: Keypair,
        rng: ChaCha20Rng,
        tabu_len: usize,
    ) -> Result<Self> {
        if colors.keys().ne(view.owned.iter()) {
            return Err(Error::param(format!("{}: colors must cover exactly its vertices", view.party)));
        }
        if let Some((v, c)) = colors.iter().find(|(_, &c)| c >= k) {
            return Err(Error::param(format!("vertex {v} has color {c} outside 0..{k}")));
        }
        let mut internal_adj: BTreeMap<VertexId, Vec<VertexId>> =
            view.owned.iter().map(|&v| (v, Vec::new())).collect();
        for e in &view.internal_edges {
            internal_adj.get_mut(&e.u).expect("owned").push(e.v);
            internal_adj.get_mut(&e.v).expect("owned").push(e.u);
        }
        Ok(Party {
            id: view.party,
            view,
            k,
            colors,
            tentative: BTreeMap::new(),
            keys,
            rng,
            share: 0,
            delta_share: 0,
            pending_s: BTreeMap::new(),
            pending_r: BTreeMap::new(),
            accept_bit: None,
            tabu: TabuList::new(tabu_len),
            internal_adj,
            request_cache: None,
        })
    }

    /// Random colors for the owned vertices, drawn from `rng`.
    pub fn random_colors(view: &LocalView, k: u32, rng: &mut impl Rng) -> BTreeMap<VertexId, u32> {
        view.owned.iter().map(|&v| (v, rng.gen_range(0..k))).collect()
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn view(&self) -> &LocalView {
        &self.view
    }

    pub fn colors(&self) -> &BTreeMap<VertexId, u32> {
        &self.colors
    }

    pub fn share(&self) -> i64 {
        self.share
    }

    pub fn tabu(&self) -> &TabuList {
        &self.tabu
    }

    pub(crate) fn color(&self, v: VertexId) -> u32 {
        self.colors[&v]
    }

    pub(crate) fn new_color(&self, v: VertexId) -> u32 {
        self.tentative.get(&v).copied().unwrap_or_else(|| self.color(v))
    }

    pub(crate) fn internal_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.internal_adj[&v]
    }

    pub fn internal_conflicts(&self) -> usize {
        self.view
            .internal_edges
            .iter()
            .filter(|e| self.color(e.u) == self.color(e.v))
            .count()
    }

    /// Change in internal conflicts if `v` alone is recolored to `c`.
    pub(crate) fn delta_internal(&self, v: VertexId, c: u32) -> i64 {
        let old = self.color(v);
        self.internal_neighbors(v)
            .iter()
            .map(|&w| {
                let cw = self.color(w);
                i64::from(cw == c) - i64::from(cw == old)
            })
            .sum()
    }

    /// The endpoint of an external edge this party owns.
    pub(crate) fn own_endpoint(&self, e: Edge) -> Result<VertexId> {
        match (self.view.owns(e.u), self.view.owns(e.v)) {
            (true, false) => Ok(e.u),
            (false, true) => Ok(e.v),
            _ => Err(Error::protocol(format!("{} has no single endpoint on {}-{}", self.id, e.u, e.v))),
        }
    }

    fn one_hot(&self, c: u32) -> Vec<i64> {
        let hot = ColorVector::new(self.k, c).expect("color in range");
        hot.one_hot().into_iter().map(i64::from).collect()
    }

    fn commit_factor(&self) -> i64 {
        i64::from(self.accept_bit.unwrap_or(true))
    }

    /// Plaintext vectors the initiator encrypts for an exchange on `e`.
    pub(crate) fn request_vectors(&self, e: Edge, kind: ExchangeKind) -> Result<Vec<Vec<i64>>> {
        let v = self.own_endpoint(e)?;
        Ok(match kind {
            ExchangeKind::Conflict => vec![self.one_hot(self.color(v))],
            ExchangeKind::Delta => {
                let old = self.one_hot(self.color(v)).into_iter().map(|x| -x).collect();
                vec![self.one_hot(self.new_color(v)), old]
            }
            ExchangeKind::Commit => {
                let s = *self
                    .pending_s
                    .get(&e)
                    .ok_or_else(|| Error::protocol(format!("{}: no pending output on edge", self.id)))?;
                let b = self.commit_factor();
                vec![vec![b * s], vec![-b]]
            }
        })
    }

    pub(crate) fn clear_request_cache(&mut self) {
        self.request_cache = None;
    }

    /// Encrypted request vectors for `e`. Conflict and delta vectors depend only on the endpoint,
    /// so they are encrypted once per endpoint within a phase and reused on each of its edges.
    pub(crate) fn encrypted_request(
        &mut self,
        round: u64,
        e: Edge,
        kind: ExchangeKind,
    ) -> Result<Vec<Vec<Ciphertext>>> {
        let v = self.own_endpoint(e)?;
        let cacheable = kind != ExchangeKind::Commit;
        if cacheable {
            if let Some((r, k, cache)) = &self.request_cache {
                if *r == round && *k == kind {
                    if let Some(c) = cache.get(&v) {
                        return Ok(c.clone());
                    }
                }
            }
        }
        let plain = self.request_vectors(e, kind)?;
        let enc = plain
            .iter()
            .map(|vec| {
                vec.iter()
                    .map(|&x| self.keys.encrypt_signed(x, &mut self.rng))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if cacheable {
            match &mut self.request_cache {
                Some((r, k, cache)) if *r == round && *k == kind => {
                    cache.insert(v, enc.clone());
                }
                slot => *slot = Some((round, kind, BTreeMap::from([(v, enc.clone())]))),
            }
        }
        Ok(enc)
    }

    /// Weights the responder applies to the request's ciphertexts.
    pub(crate) fn response_weights(&self, req: &ScalarRequest) -> Result<Vec<Vec<i64>>> {
        let e = req.edge;
        let v = self.own_endpoint(e)?;
        Ok(match req.exchange {
            ExchangeKind::Conflict => vec![self.one_hot(self.color(v))],
            ExchangeKind::Delta => vec![self.one_hot(self.new_color(v)), self.one_hot(self.color(v))],
            ExchangeKind::Commit => {
                let r = *self
                    .pending_r
                    .get(&e)
                    .ok_or_else(|| Error::protocol(format!("{}: no pending mask on edge", self.id)))?;
                let b = self.commit_factor();
                vec![vec![b], vec![b * r]]
            }
        })
    }
}

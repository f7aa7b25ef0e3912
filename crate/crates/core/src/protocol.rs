//! The m-party privacy-preserving tabu search.
//!
//! Parties take turns in a fixed ring. The active party first runs a local Tabucol check of its
//! own subgraph (once), then works on its internal conflicts: a move of an inner vertex only
//! changes its own share and is decided locally, a move of a border vertex is priced with secure
//! scalar products and decided by the comparison evaluator. A party whose subgraph is properly
//! colored explores a few border moves instead. Every turn ends with a comparison of the global
//! conflict count against 1, released to all parties, and the token passes on.
//!
//! With the defense enabled each border move is synchronous: a random second party recolors one
//! of its own vertices, or keeps it, and the comparison covers both changes. Neither the other
//! party's vertex nor its skip decision is revealed to the mover.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coloring, PartitionedGraph, PartyId, VertexId};
use crate::net::{
    decode_round, encode_round, Envelope, MsgType, Network, PassToken, Transport,
};
use crate::paillier::keygen;
use crate::party::Party;
use crate::secure_compare::{constant_shares, Evaluator};
use crate::secure_conflict::{
    commit_exchanges, delta_exchanges, full_tasks, secure_conflict_computation, ExchangeTask,
    DEFAULT_MASK_BITS,
};
use crate::tabu::{
    best_non_tabu, push_tabu, tabucol_adjacency, Move, Neighbor, SolveOutcome, SolveStatus,
    TabucolParams,
};
use crate::transcript::{ComparisonPurpose, Event, Transcript, TranscriptConfig};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictMode {
    /// Re-evaluate only edges a move can affect, plus every edge between the two moving parties.
    Incremental,
    /// Re-evaluate every external edge on every border move.
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: u32,
    /// Budget of move attempts over the whole run.
    pub max_iterations: u64,
    /// Budget of the local Tabucol check each party runs on its own subgraph.
    pub max_local_iter: u64,
    /// Move attempts a party makes on its internal conflicts per turn.
    pub max_turn_moves: u64,
    pub border_moves_per_turn: u64,
    pub rep: usize,
    /// Tabu tenure; `None` gives each party a tenure of a tenth of its vertices.
    pub tabu_len: Option<usize>,
    pub skip_probability: f64,
    /// After this many consecutive rejected border explorations, the next one is accepted when it
    /// does not increase the conflict count. `None` keeps strict descent.
    pub sideways_after: Option<u64>,
    pub mask_bits: u32,
    pub key_bits: u32,
    pub seed: u64,
    /// Synchronous moves.
    pub defense: bool,
    pub conflict_mode: ConflictMode,
    pub keep_events: bool,
    pub audit: bool,
    /// Harness only: record foreign neighbor colors at each border move.
    pub record_ground_truth: bool,
    /// Harness only: check the share sum against the plaintext count after every move.
    pub verify_shares: bool,
}

impl ProtocolConfig {
    pub fn new(k: u32, seed: u64) -> Self {
        ProtocolConfig {
            k,
            max_iterations: 100_000,
            max_local_iter: 10_000,
            max_turn_moves: 100,
            border_moves_per_turn: 1,
            rep: 50,
            tabu_len: None,
            skip_probability: 0.5,
            sideways_after: Some(2),
            mask_bits: DEFAULT_MASK_BITS,
            key_bits: 256,
            seed,
            defense: true,
            conflict_mode: ConflictMode::Incremental,
            keep_events: true,
            audit: true,
            record_ground_truth: false,
            verify_shares: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.rep == 0 {
            return Err(Error::param("k and rep must be positive"));
        }
        if !(0.0..=1.0).contains(&self.skip_probability) {
            return Err(Error::param(format!(
                "skip probability {} outside [0,1]",
                self.skip_probability
            )));
        }
        if self.mask_bits == 0 || self.mask_bits > 62 {
            return Err(Error::param("mask bits must be in 1..=62"));
        }
        Ok(())
    }
}

/// Counters reconciled against the cost model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub wall_time_s: f64,
    pub keygen_time_s: f64,
    pub iterations: u64,
    /// Party turns, each closed by one termination comparison.
    pub turns: u64,
    /// Border moves decided by the evaluator.
    pub sync_moves: u64,
    pub companion_moves: u64,
    pub companion_skips: u64,
    pub accepted_border_moves: u64,
    pub inner_moves: u64,
    pub accepted_inner_moves: u64,
    pub forced_moves: u64,
    pub n_e: u64,
    /// Scalar-product rounds: the initial computation, then a delta and a commit per border move.
    pub conflict_computations: u64,
    /// Sum over those rounds of the external edges each one evaluated.
    pub edges_touched: u64,
    pub scalar_messages: u64,
    pub comparisons: u64,
    pub messages_total: u64,
    pub bytes_total: u64,
}

impl RunMetrics {
    /// Average border moves per turn.
    pub fn ell(&self) -> f64 {
        if self.turns == 0 {
            0.0
        } else {
            self.sync_moves as f64 / self.turns as f64
        }
    }
}

/// Harness-only record of the foreign neighbors of a moved border vertex, before the move.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderSnapshot {
    pub round_id: u64,
    pub party: PartyId,
    pub vertex: VertexId,
    pub from: u32,
    pub to: u32,
    pub foreign_colors: Vec<(VertexId, u32)>,
    /// Vertex and new color of the companion move, if one was made.
    pub companion: Option<(VertexId, u32)>,
}

pub struct RunResult {
    pub outcome: SolveOutcome,
    pub metrics: RunMetrics,
    pub transcript: Transcript,
    pub snapshots: Vec<BorderSnapshot>,
}

pub struct Engine {
    graph: PartitionedGraph,
    config: ProtocolConfig,
    parties: Vec<Party>,
    net: Network,
    evaluator: Evaluator,
    round: u64,
    metrics: RunMetrics,
    snapshots: Vec<BorderSnapshot>,
    // harness-side plaintext state
    truth: Coloring,
    truth_mu: i64,
    trace: Vec<u64>,
    locally_checked: Vec<bool>,
    border_failures: Vec<u64>,
}

/// Runs the protocol on the in-memory bus.
pub fn run_ppts(g: &PartitionedGraph, config: &ProtocolConfig) -> Result<RunResult> {
    Engine::new(g, config.clone())?.run()
}

pub fn run_ppts_with(
    g: &PartitionedGraph,
    config: &ProtocolConfig,
    transport: Box<dyn Transport>,
) -> Result<RunResult> {
    Engine::with_transport(g, config.clone(), None, transport)?.run()
}

fn party_rng(seed: u64, p: PartyId) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(p.0) + 1);
    rng
}

impl Engine {
    pub fn new(g: &PartitionedGraph, config: ProtocolConfig) -> Result<Self> {
        Self::with_transport(g, config, None, Box::new(crate::net::InMemoryBus::new()))
    }

    /// Starts from a given coloring instead of random initial colors.
    pub fn with_coloring(g: &PartitionedGraph, config: ProtocolConfig, x: &Coloring) -> Result<Self> {
        Self::with_transport(g, config, Some(x), Box::new(crate::net::InMemoryBus::new()))
    }

    pub fn with_transport(
        g: &PartitionedGraph,
        config: ProtocolConfig,
        initial: Option<&Coloring>,
        transport: Box<dyn Transport>,
    ) -> Result<Self> {
        config.validate()?;
        if g.m_parties() < 2 {
            return Err(Error::param("the protocol needs at least two parties"));
        }
        if let Some(x) = initial {
            if x.k() != config.k || x.len() != g.n_vertices() {
                return Err(Error::param("initial coloring does not match graph and k"));
            }
        }
        let mut transcript = Transcript::new(TranscriptConfig {
            keep_events: config.keep_events,
            ..TranscriptConfig::default()
        });
        if config.audit {
            transcript = transcript.with_auditor(g);
        }
        let mut net = Network::new(transport, transcript);

        let started = Instant::now();
        let mut parties = Vec::with_capacity(g.m_parties());
        for a in 0..g.m_parties() {
            let id = PartyId(a as u32);
            let view = g.local_view(id);
            let mut rng = party_rng(config.seed, id);
            let colors = match initial {
                Some(x) => view.owned.iter().map(|&v| (v, x.color(v))).collect(),
                None => Party::random_colors(&view, config.k, &mut rng),
            };
            let keys = keygen(config.key_bits, &mut rng)?;
            let tabu_len = config.tabu_len.unwrap_or((view.owned.len() / 10).max(1));
            parties.push(Party::new(view, config.k, colors, keys, rng, tabu_len)?);
        }
        let keygen_time_s = started.elapsed().as_secs_f64();

        let mut truth = Coloring::new(config.k, vec![0; g.n_vertices()])?;
        for p in &parties {
            net.record(p.id, Event::LocalGraph { view: p.view.clone() });
            net.record(
                p.id,
                Event::InitialColors {
                    colors: p.colors.iter().map(|(&v, &c)| (v, c)).collect(),
                },
            );
            for (&v, &c) in &p.colors {
                truth.set(v, c);
            }
        }
        let truth_mu = crate::graph::total_conflicts(g, &truth)?.total as i64;
        let m = g.m_parties();
        Ok(Engine {
            graph: g.clone(),
            metrics: RunMetrics {
                keygen_time_s,
                n_e: g.external_edge_count() as u64,
                ..RunMetrics::default()
            },
            config,
            parties,
            net,
            evaluator: Evaluator::new(),
            round: 0,
            snapshots: Vec::new(),
            truth,
            truth_mu,
            trace: Vec::new(),
            locally_checked: vec![false; m],
            border_failures: vec![0; m],
        })
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn snapshots(&self) -> &[BorderSnapshot] {
        &self.snapshots
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn metrics(&self) -> RunMetrics {
        let mut m = self.metrics.clone();
        let c = self.net.counters();
        m.scalar_messages = c.scalar_messages();
        m.comparisons = self.evaluator.evaluations();
        m.messages_total = c.total();
        m.bytes_total = c.bytes;
        m
    }

    /// Plaintext conflict count. Harness only.
    pub fn true_conflicts(&self) -> i64 {
        self.truth_mu
    }

    /// Harness only: the parties' shares summed in the ring.
    pub fn share_sum(&self) -> i64 {
        self.parties.iter().fold(0i64, |a, p| a.wrapping_add(p.share))
    }

    fn check_shares(&self) -> Result<()> {
        if self.config.verify_shares && self.share_sum() != self.truth_mu {
            return Err(Error::protocol(format!(
                "share sum {} differs from conflict count {}",
                self.share_sum(),
                self.truth_mu
            )));
        }
        Ok(())
    }

    fn next_round(&mut self) -> u64 {
        self.round += 1;
        self.round
    }

    /// Secure conflict computation over every external edge.
    pub fn initialize_shares(&mut self) -> Result<()> {
        let round = self.next_round();
        secure_conflict_computation(&mut self.net, round, &mut self.parties, self.config.mask_bits)?;
        self.metrics.conflict_computations += 1;
        self.metrics.edges_touched += self.metrics.n_e;
        self.check_shares()
    }

    fn truth_apply(&mut self, v: VertexId, c: u32) {
        let old = self.truth.color(v);
        let d: i64 = self
            .graph
            .neighbors(v)
            .iter()
            .map(|&w| {
                let cw = self.truth.color(w);
                i64::from(cw == c) - i64::from(cw == old)
            })
            .sum();
        self.truth.set(v, c);
        self.truth_mu += d;
    }

    fn tick(&mut self) {
        self.metrics.iterations += 1;
        self.trace.push(self.truth_mu as u64);
    }

    fn budget_left(&self) -> bool {
        self.metrics.iterations < self.config.max_iterations
    }

    pub fn run(mut self) -> Result<RunResult> {
        let started = Instant::now();
        self.initialize_shares()?;
        let m = self.parties.len();
        let mut a = 0usize;
        let status = loop {
            let turn = self.metrics.turns;
            self.net.record(PartyId(a as u32), Event::Turn { turn, active: PartyId(a as u32) });
            if !self.locally_checked[a] {
                self.locally_checked[a] = true;
                if !self.local_check(a)? {
                    self.halt(a, turn)?;
                    break SolveStatus::NotColorable;
                }
            }
            self.party_turn(a)?;
            self.metrics.turns += 1;
            if self.termination_check()? {
                break SolveStatus::Colorable(self.truth.clone());
            }
            if !self.budget_left() {
                break SolveStatus::IterationLimit;
            }
            self.pass_token(a, (a + 1) % m, turn)?;
            a = (a + 1) % m;
        };
        if let SolveStatus::Colorable(x) = &status {
            if crate::graph::total_conflicts(&self.graph, x)?.total != 0 {
                return Err(Error::protocol("termination fired on an improper coloring"));
            }
        }
        if self.net.pending() != 0 {
            return Err(Error::protocol("undelivered messages at the end of the run"));
        }
        self.metrics.wall_time_s = started.elapsed().as_secs_f64();
        let metrics = self.metrics();
        let outcome = SolveOutcome {
            status,
            iterations: self.metrics.iterations,
            conflict_trace: self.trace,
        };
        Ok(RunResult {
            outcome,
            metrics,
            transcript: self.net.into_transcript(),
            snapshots: self.snapshots,
        })
    }

    /// Tabucol on the party's own subgraph; failure means the whole graph cannot be k-colored.
    fn local_check(&mut self, a: usize) -> Result<bool> {
        let p = &mut self.parties[a];
        let index: BTreeMap<VertexId, usize> =
            p.view.owned.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adj = vec![Vec::new(); index.len()];
        for e in &p.view.internal_edges {
            adj[index[&e.u]].push(index[&e.v]);
            adj[index[&e.v]].push(index[&e.u]);
        }
        let params = TabucolParams {
            max_iter: self.config.max_local_iter,
            tabu_len: p.tabu.capacity(),
            rep: self.config.rep,
            seed: p.rng.gen(),
        };
        let colorable = tabucol_adjacency(&adj, self.config.k, &params)?.is_colorable();
        self.net.record(p.id, Event::LocalCheck { colorable });
        Ok(colorable)
    }

    fn halt(&mut self, a: usize, turn: u64) -> Result<()> {
        let round = self.next_round();
        let from = PartyId(a as u32);
        let token = PassToken { turn, halt: true };
        for b in 0..self.parties.len() {
            if b != a {
                let to = PartyId(b as u32);
                self.net.send(Envelope::new(round, from, to, MsgType::PassToken, token.encode()))?;
                self.net.recv(to, from, MsgType::PassToken)?;
            }
        }
        Ok(())
    }

    fn pass_token(&mut self, a: usize, b: usize, turn: u64) -> Result<()> {
        let round = self.next_round();
        let (from, to) = (PartyId(a as u32), PartyId(b as u32));
        let token = PassToken { turn, halt: false };
        self.net.send(Envelope::new(round, from, to, MsgType::PassToken, token.encode()))?;
        let env = self.net.recv(to, from, MsgType::PassToken)?;
        PassToken::decode(&env.payload)?;
        Ok(())
    }

    fn termination_check(&mut self) -> Result<bool> {
        let round = self.next_round();
        let left: BTreeMap<PartyId, i64> = self.parties.iter().map(|p| (p.id, p.share)).collect();
        let right = constant_shares(left.keys().copied(), 1);
        let everyone: BTreeSet<PartyId> = left.keys().copied().collect();
        self.evaluator.compare(
            &mut self.net,
            round,
            ComparisonPurpose::Termination,
            &left,
            &right,
            &everyone,
        )
    }

    fn party_turn(&mut self, a: usize) -> Result<()> {
        let mut attempts = 0;
        let mut failures = 0;
        let mut inner_candidates: Vec<Neighbor> = Vec::new();
        while self.parties[a].internal_conflicts() > 0
            && attempts < self.config.max_turn_moves
            && self.budget_left()
        {
            attempts += 1;
            let mv = self.internal_candidate(a);
            let accepted = if self.parties[a].view.is_border(mv.vertex) {
                self.border_move(a, mv.vertex, mv.to_color, 0)?
            } else {
                let d = self.parties[a].delta_internal(mv.vertex, mv.to_color);
                let ok = self.inner_move(a, mv, d)?;
                if !ok {
                    inner_candidates.push(Neighbor {
                        mv,
                        conflicts: self.parties[a].internal_conflicts() as i64 + d,
                    });
                }
                ok
            };
            self.tick();
            if accepted {
                failures = 0;
                inner_candidates.clear();
            } else {
                failures += 1;
                if failures >= self.config.rep {
                    if let Some(mv) = best_non_tabu(&inner_candidates, &self.parties[a].tabu) {
                        self.force_inner(a, mv)?;
                    }
                    failures = 0;
                    inner_candidates.clear();
                }
            }
        }
        if self.parties[a].internal_conflicts() == 0 {
            for _ in 0..self.config.border_moves_per_turn {
                if !self.budget_left() {
                    break;
                }
                let Some((v, c)) = self.border_candidate(a) else { break };
                let threshold = match self.config.sideways_after {
                    Some(n) if self.border_failures[a] >= n => 1,
                    _ => 0,
                };
                let ok = self.border_move(a, v, c, threshold)?;
                self.tick();
                if ok {
                    self.border_failures[a] = 0;
                } else {
                    self.border_failures[a] += 1;
                }
            }
        }
        Ok(())
    }

    // Random endpoint of a random conflicting internal edge and a random other color.
    fn internal_candidate(&mut self, a: usize) -> Move {
        let p = &mut self.parties[a];
        let conflicting: Vec<_> = p
            .view
            .internal_edges
            .iter()
            .filter(|e| p.colors[&e.u] == p.colors[&e.v])
            .copied()
            .collect();
        let e = *conflicting.choose(&mut p.rng).expect("caller checked conflicts");
        let v = if p.rng.gen_bool(0.5) { e.u } else { e.v };
        let from = p.color(v);
        let mut to = p.rng.gen_range(0..p.k - 1);
        if to >= from {
            to += 1;
        }
        Move {
            vertex: v,
            from_color: from,
            to_color: to,
        }
    }

    // A border vertex and a color that keeps the local coloring proper.
    fn border_candidate(&mut self, a: usize) -> Option<(VertexId, u32)> {
        let p = &mut self.parties[a];
        let border = p.view.border_vertices();
        let v = *border.choose(&mut p.rng)?;
        let old = p.color(v);
        let used: BTreeSet<u32> = p.internal_neighbors(v).iter().map(|w| p.colors[w]).collect();
        let c = (0..p.k).filter(|c| *c != old && !used.contains(c)).choose(&mut p.rng)?;
        Some((v, c))
    }

    fn accept_local(&mut self, a: usize, mv: Move, d: i64) {
        let p = &mut self.parties[a];
        p.colors.insert(mv.vertex, mv.to_color);
        p.share = p.share.wrapping_add(d);
        push_tabu(&mut p.tabu, mv.vertex, mv.from_color);
        self.truth_apply(mv.vertex, mv.to_color);
    }

    /// An inner vertex only touches internal edges, so comparing the local share before and after
    /// decides the move; no messages are sent.
    pub fn inner_move(&mut self, a: usize, mv: Move, d: i64) -> Result<bool> {
        let id = self.parties[a].id;
        self.net.record(
            id,
            Event::ProposedMove {
                vertex: mv.vertex,
                from: mv.from_color,
                to: mv.to_color,
                delta_internal: d,
                border: false,
                threshold: 0,
            },
        );
        self.metrics.inner_moves += 1;
        let accepted = d < 0;
        if accepted {
            self.accept_local(a, mv, d);
            self.metrics.accepted_inner_moves += 1;
        }
        self.net.record(id, Event::MoveResult { vertex: mv.vertex, accepted });
        self.check_shares()?;
        Ok(accepted)
    }

    fn force_inner(&mut self, a: usize, mv: Move) -> Result<()> {
        let d = self.parties[a].delta_internal(mv.vertex, mv.to_color);
        self.accept_local(a, mv, d);
        self.metrics.forced_moves += 1;
        let id = self.parties[a].id;
        self.net.record(id, Event::MoveResult { vertex: mv.vertex, accepted: true });
        self.check_shares()
    }

    /// Recolors border vertex `v` of party `a` to `c` if the global conflict change, together with
    /// the companion's change when the defense is on, is below `threshold`.
    pub fn border_move(&mut self, a: usize, v: VertexId, c: u32, threshold: i64) -> Result<bool> {
        let round = self.next_round();
        let pa = self.parties[a].id;
        let old = self.parties[a].color(v);
        if old == c || c >= self.config.k || !self.parties[a].view.is_border(v) {
            return Err(Error::param(format!("invalid border move of {v} to {c}")));
        }
        let d_a = self.parties[a].delta_internal(v, c);
        self.net.record(
            pa,
            Event::ProposedMove {
                vertex: v,
                from: old,
                to: c,
                delta_internal: d_a,
                border: true,
                threshold,
            },
        );
        self.parties[a].tentative.insert(v, c);
        let mut internal = BTreeMap::from([(pa, d_a)]);

        // companion
        let mut companion: Option<(usize, Move)> = None;
        let mut companion_vertex = None;
        if self.config.defense {
            let m = self.parties.len();
            let b = {
                let rng = &mut self.parties[a].rng;
                let mut b = rng.gen_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                b
            };
            let pb = self.parties[b].id;
            self.net.send(Envelope::new(round, pa, pb, MsgType::SyncInvite, encode_round(round)))?;
            let env = self.net.recv(pb, pa, MsgType::SyncInvite)?;
            decode_round(&env.payload)?;

            let skip_p = self.config.skip_probability;
            let q = &mut self.parties[b];
            let w = *q.view.owned.choose(&mut q.rng).expect("parties own vertices");
            let from = q.color(w);
            let mut to = q.rng.gen_range(0..q.k - 1);
            if to >= from {
                to += 1;
            }
            let skip = q.k < 2 || q.rng.gen_bool(skip_p);
            companion_vertex = Some((b, w));
            if skip {
                self.net.record(pb, Event::CompanionSkip);
                self.metrics.companion_skips += 1;
            } else {
                let d_b = q.delta_internal(w, to);
                q.tentative.insert(w, to);
                internal.insert(pb, d_b);
                self.net.record(
                    pb,
                    Event::CompanionMove {
                        vertex: w,
                        from,
                        to,
                        delta_internal: d_b,
                    },
                );
                self.metrics.companion_moves += 1;
                companion = Some((
                    b,
                    Move {
                        vertex: w,
                        from_color: from,
                        to_color: to,
                    },
                ));
            }
        }

        let tasks = self.touched_tasks(a, v, companion_vertex);
        let round_id = self.evaluator.next_round_id();
        if self.config.record_ground_truth {
            let foreign_colors = self.parties[a]
                .view
                .external_edges_at(v)
                .map(|e| (e.foreign, self.truth.color(e.foreign)))
                .collect();
            self.snapshots.push(BorderSnapshot {
                round_id,
                party: pa,
                vertex: v,
                from: old,
                to: c,
                foreign_colors,
                companion: companion.map(|(_, mv)| (mv.vertex, mv.to_color)),
            });
        }

        let mask_bits = self.config.mask_bits;
        delta_exchanges(&mut self.net, round, &mut self.parties, &tasks, &internal, mask_bits)?;
        self.metrics.conflict_computations += 1;
        self.metrics.edges_touched += tasks.len() as u64;

        let right: BTreeMap<PartyId, i64> = self
            .parties
            .iter()
            .map(|p| (p.id, p.share.wrapping_add(if p.id == pa { threshold } else { 0 })))
            .collect();
        let left: BTreeMap<PartyId, i64> = self
            .parties
            .iter()
            .map(|p| (p.id, p.share.wrapping_add(p.delta_share)))
            .collect();
        let mut recipients = BTreeSet::from([pa]);
        if let Some((b, _)) = companion_vertex {
            recipients.insert(self.parties[b].id);
        }
        let bit = self.evaluator.compare(
            &mut self.net,
            round,
            ComparisonPurpose::Move,
            &left,
            &right,
            &recipients,
        )?;
        for p in &recipients {
            self.parties[p.index()].accept_bit = Some(bit);
        }

        commit_exchanges(&mut self.net, round, &mut self.parties, &tasks, &internal, bit, mask_bits)?;
        self.metrics.conflict_computations += 1;
        self.metrics.edges_touched += tasks.len() as u64;

        let mut moved = vec![(a, Move { vertex: v, from_color: old, to_color: c })];
        moved.extend(companion);
        for (idx, mv) in &moved {
            let p = &mut self.parties[*idx];
            p.tentative.clear();
            if bit {
                p.colors.insert(mv.vertex, mv.to_color);
                push_tabu(&mut p.tabu, mv.vertex, mv.from_color);
            }
            let id = p.id;
            self.net.record(id, Event::MoveResult { vertex: mv.vertex, accepted: bit });
        }
        if bit {
            for (_, mv) in &moved {
                self.truth_apply(mv.vertex, mv.to_color);
            }
            self.metrics.accepted_border_moves += 1;
        }
        for p in &recipients {
            self.parties[p.index()].accept_bit = None;
        }
        if let Some((b, _)) = companion_vertex {
            let pb = self.parties[b].id;
            self.net.send(Envelope::new(round, pb, pa, MsgType::SyncDone, encode_round(round)))?;
            self.net.recv(pa, pb, MsgType::SyncDone)?;
        }
        self.metrics.sync_moves += 1;
        self.check_shares()?;
        Ok(bit)
    }

    /// External edges whose conflict status can change, with the party that initiates each
    /// exchange. In incremental mode: edges at `v`, every edge between the two moving parties,
    /// and edges from the companion's vertex to third parties.
    fn touched_tasks(
        &self,
        a: usize,
        v: VertexId,
        companion: Option<(usize, VertexId)>,
    ) -> Vec<ExchangeTask> {
        if self.config.conflict_mode == ConflictMode::Full {
            return full_tasks(&self.parties);
        }
        let pa = &self.parties[a];
        let mut tasks: BTreeMap<crate::graph::Edge, ExchangeTask> = BTreeMap::new();
        let pb_id = companion.map(|(b, _)| self.parties[b].id);
        for e in &pa.view.external_edges {
            if e.own == v || Some(e.foreign_party) == pb_id {
                tasks.insert(
                    e.edge(),
                    ExchangeTask {
                        edge: e.edge(),
                        initiator: pa.id,
                        responder: e.foreign_party,
                    },
                );
            }
        }
        if let Some((b, w)) = companion {
            let pb = &self.parties[b];
            for e in pb.view.external_edges_at(w) {
                if e.foreign_party != pa.id {
                    tasks.entry(e.edge()).or_insert(ExchangeTask {
                        edge: e.edge(),
                        initiator: pb.id,
                        responder: e.foreign_party,
                    });
                }
            }
        }
        tasks.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        generate_partitioned_graph, is_proper_k_coloring, seven_job_conflicted_coloring,
        seven_job_graph, total_conflicts,
    };
    use crate::tabu::tabucol_solve;

    fn cfg(k: u32, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            verify_shares: true,
            key_bits: 128,
            ..ProtocolConfig::new(k, seed)
        }
    }

    fn colors_seen(events: &[&Event]) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for e in events {
            match e {
                Event::InitialColors { colors } => out.extend(colors.iter().map(|c| c.0)),
                Event::ProposedMove { vertex, .. }
                | Event::CompanionMove { vertex, .. }
                | Event::MoveResult { vertex, .. } => {
                    out.insert(*vertex);
                }
                _ => {}
            }
        }
        out
    }

    #[test]
    fn seven_job_instance_is_colored() {
        let g = seven_job_graph();
        for seed in 0..5 {
            let r = run_ppts(&g, &cfg(3, seed)).unwrap();
            let x = r.outcome.coloring().expect("colorable");
            assert!(is_proper_k_coloring(&g, x, 3).unwrap());
            assert!(r.transcript.violations().is_empty(), "{:?}", r.transcript.violations());
            r.transcript.check_union().unwrap();
            let views = crate::transcript::split_views(r.transcript.records());
            for a in 0..3u32 {
                let seen = colors_seen(&views[&PartyId(a)]);
                let own: BTreeSet<_> = g.vertices_of(PartyId(a)).into_iter().collect();
                assert!(seen.is_subset(&own));
            }
        }
    }

    #[test]
    fn single_party_is_rejected() {
        let g = generate_partitioned_graph(5, 0.5, 1, 0).unwrap();
        assert!(matches!(run_ppts(&g, &cfg(3, 0)), Err(Error::Parameter(_))));
    }

    #[test]
    fn shares_track_conflicts_on_random_runs() {
        for seed in 0..4 {
            let g = generate_partitioned_graph(18, 0.3, 3, seed).unwrap();
            let k = tabucol_solve(&g, 4, &TabucolParams::for_size(18, seed)).unwrap();
            let k = if k.is_colorable() { 4 } else { 5 };
            let mut c = cfg(k, seed);
            c.max_iterations = 400;
            let r = run_ppts(&g, &c).unwrap();
            assert!(r.transcript.violations().is_empty());
            let m = &r.metrics;
            assert_eq!(m.scalar_messages, 2 * m.edges_touched);
            assert_eq!(m.comparisons, m.sync_moves + m.turns);
            assert_eq!(r.outcome.conflict_trace.len() as u64, r.outcome.iterations);
        }
    }

    #[test]
    fn full_mode_agrees_with_plaintext() {
        let g = generate_partitioned_graph(15, 0.3, 3, 8).unwrap();
        let mut c = cfg(4, 3);
        c.conflict_mode = ConflictMode::Full;
        c.max_iterations = 200;
        let r = run_ppts(&g, &c).unwrap();
        assert!(r.transcript.violations().is_empty());
        assert_eq!(r.metrics.edges_touched, r.metrics.n_e * r.metrics.conflict_computations);
    }

    #[test]
    fn inner_moves_match_plaintext_decision() {
        let g = generate_partitioned_graph(24, 0.15, 2, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut checked = 0;
        for trial in 0..500u64 {
            let x = Coloring::random(24, 3, &mut rng);
            let v = rng.gen_range(0..24);
            if g.is_border(v) {
                continue;
            }
            let c = (x.color(v) + rng.gen_range(1..3)) % 3;
            let mut e = Engine::with_coloring(&g, ProtocolConfig { audit: false, ..cfg(3, trial) }, &x).unwrap();
            let a = g.owner(v).index();
            let d = e.parties[a].delta_internal(v, c);
            let before = total_conflicts(&g, &x).unwrap().total as i64;
            let mut y = x.clone();
            y.set(v, c);
            let after = total_conflicts(&g, &y).unwrap().total as i64;
            e.initialize_shares().unwrap();
            let sent = e.network().counters().total();
            let accepted = e.inner_move(a, Move::new(v, x.color(v), c).unwrap(), d).unwrap();
            assert_eq!(accepted, after < before);
            assert_eq!(e.network().counters().total(), sent);
            checked += 1;
        }
        assert!(checked >= 40, "{checked}");
    }

    #[test]
    fn border_moves_match_plaintext_decision() {
        let g = generate_partitioned_graph(16, 0.35, 3, 9).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for trial in 0..12u64 {
            let x = Coloring::random(16, 3, &mut rng);
            let border: Vec<_> = (0..16).filter(|&v| g.is_border(v)).collect();
            let v = *border.choose(&mut rng).unwrap();
            let c = (x.color(v) + 1) % 3;
            for defense in [false, true] {
                let mut conf = cfg(3, trial);
                conf.defense = defense;
                conf.record_ground_truth = true;
                conf.skip_probability = if trial % 2 == 0 { 1.0 } else { 0.0 };
                let mut e = Engine::with_coloring(&g, conf, &x).unwrap();
                e.initialize_shares().unwrap();
                let before = e.true_conflicts();
                let bit = e.border_move(g.owner(v).index(), v, c, 0).unwrap();
                let mut y = x.clone();
                y.set(v, c);
                if let Some(snap) = e.snapshots.last() {
                    if let Some((w, cw)) = snap.companion {
                        y.set(w, cw);
                    }
                }
                let after = total_conflicts(&g, &y).unwrap().total as i64;
                assert_eq!(bit, after < before, "trial {trial} defense {defense}");
                assert_eq!(e.true_conflicts(), if bit { after } else { before });
                assert!(e.network().transcript().violations().is_empty());
            }
        }
    }

    #[test]
    fn deterministic_transcripts() {
        let g = generate_partitioned_graph(15, 0.3, 3, 1).unwrap();
        let mut c = cfg(4, 12);
        c.max_iterations = 150;
        let a = run_ppts(&g, &c).unwrap();
        let b = run_ppts(&g, &c).unwrap();
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        assert_eq!(a.transcript.digest(), b.transcript.digest());
        c.seed = 13;
        assert_ne!(run_ppts(&g, &c).unwrap().transcript.digest(), a.transcript.digest());
    }

    #[test]
    fn socket_transport_gives_the_same_transcript() {
        let g = seven_job_graph();
        let c = cfg(3, 2);
        let mem = run_ppts(&g, &c).unwrap();
        let sock = run_ppts_with(&g, &c, Box::new(crate::net::SocketTransport::new())).unwrap();
        assert_eq!(mem.transcript.digest(), sock.transcript.digest());
    }

    #[test]
    fn uncolorable_subgraph_stops_the_run() {
        // party 0 owns a triangle
        let owner = [0, 0, 0, 1, 1].map(PartyId).to_vec();
        let g = PartitionedGraph::new(5, 2, owner, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        let mut c = cfg(2, 0);
        c.max_local_iter = 500;
        let r = run_ppts(&g, &c).unwrap();
        assert_eq!(r.outcome.status, SolveStatus::NotColorable);
        assert_eq!(r.metrics.turns, 0);
    }

    #[test]
    fn seven_job_shares_via_engine() {
        let g = seven_job_graph();
        let mut e = Engine::with_coloring(&g, cfg(3, 0), &seven_job_conflicted_coloring()).unwrap();
        e.initialize_shares().unwrap();
        assert_eq!(e.share_sum(), 3);
        assert_eq!(e.metrics().scalar_messages, 8);
    }
}

//! Secure scalar products over external edges and the resulting additive conflict shares.
//!
//! For an edge `(v_i, v_j)` the initiator sends `E(x_i)` under its own key and the responder
//! returns `E(x_i·x_j + r)` computed from the public key alone. The initiator adds the decryption
//! `s` to its share and the responder subtracts its mask `r`, so the shares of all parties sum to
//! the number of conflicting edges while no party learns whether any external edge conflicts.
//!
//! Shares are elements of the ring of 64-bit words: updates wrap, and only the sum of all shares
//! is meaningful.
//!
//! A move is priced with one `Delta` exchange per affected edge, giving shares of the change in
//! conflicts. Once the comparison outcome is known a `Commit` exchange folds `b·delta` into the
//! persistent shares, where `b` is the outcome for parties that learnt it and 1 for the others.
//! Every affected edge has a moving endpoint, so the product of the two factors is the outcome.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{ColorVector, Edge, PartyId};
use crate::net::{Envelope, ExchangeKind, MsgType, Network, ScalarRequest, ScalarResponse};
use crate::paillier::{Ciphertext, Keypair};
use crate::party::Party;
use crate::transcript::Event;

pub const DEFAULT_MASK_BITS: u32 = 62;

/// Uniform mask in `[0, 2^bits)`.
pub fn draw_mask(rng: &mut impl Rng, bits: u32) -> Result<i64> {
    if bits == 0 || bits > 62 {
        return Err(Error::param(format!("mask bits must be in 1..=62, got {bits}")));
    }
    Ok(rng.gen_range(0..(1i64 << bits)))
}

/// One scalar-product exchange to run: who holds the key, who masks.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExchangeTask {
    pub edge: Edge,
    pub initiator: PartyId,
    pub responder: PartyId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConflictShares {
    pub shares: BTreeMap<PartyId, i64>,
}

impl ConflictShares {
    /// Reconstructs the total. Test harnesses only.
    pub fn sum(&self) -> i64 {
        self.shares.values().fold(0i64, |acc, s| acc.wrapping_add(*s))
    }
}

/// Initiator: encrypts `vectors` component-wise and sends them with the public key.
pub fn send_request(
    net: &mut Network,
    round: u64,
    (from, keys): (PartyId, &Keypair),
    to: PartyId,
    edge: Edge,
    exchange: ExchangeKind,
    vectors: &[Vec<i64>],
    rng: &mut impl Rng,
) -> Result<()> {
    let vectors = vectors
        .iter()
        .map(|v| v.iter().map(|&x| keys.encrypt_signed(x, rng)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    send_ciphertexts(net, round, (from, keys), to, edge, exchange, vectors)
}

/// Initiator: sends already encrypted vectors.
pub fn send_ciphertexts(
    net: &mut Network,
    round: u64,
    (from, keys): (PartyId, &Keypair),
    to: PartyId,
    edge: Edge,
    exchange: ExchangeKind,
    vectors: Vec<Vec<Ciphertext>>,
) -> Result<()> {
    let req = ScalarRequest {
        edge,
        exchange,
        public_key: keys.public.clone(),
        vectors,
    };
    net.send(Envelope::new(round, from, to, MsgType::ScalarReq, req.encode()))
}

/// Responder: receives a request.
pub fn receive_request(net: &mut Network, me: PartyId, peer: PartyId) -> Result<ScalarRequest> {
    let env = net.recv(me, peer, MsgType::ScalarReq)?;
    ScalarRequest::decode(&env.payload)
}

/// Responder: computes `Σ w·c + E(mask)` under the sender's public key and replies.
#[allow(clippy::too_many_arguments)]
pub fn send_response(
    net: &mut Network,
    round: u64,
    me: PartyId,
    peer: PartyId,
    req: &ScalarRequest,
    weights: &[Vec<i64>],
    mask: i64,
    rng: &mut impl Rng,
) -> Result<()> {
    let pk = &req.public_key;
    if weights.len() != req.vectors.len()
        || weights.iter().zip(&req.vectors).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::protocol("scalar request has the wrong shape"));
    }
    let mut acc: Ciphertext = pk.encrypt_signed(mask, rng)?;
    for (ws, cs) in weights.iter().zip(&req.vectors) {
        for (&wt, c) in ws.iter().zip(cs) {
            if wt != 0 {
                acc = pk.add(&acc, &pk.scalar_mul_signed(c, wt)?);
            }
        }
    }
    net.record(
        me,
        Event::MaskGenerated {
            edge: req.edge,
            exchange: req.exchange,
            value: mask,
        },
    );
    let resp = ScalarResponse {
        edge: req.edge,
        exchange: req.exchange,
        ciphertext: acc,
    };
    net.send(Envelope::new(round, me, peer, MsgType::ScalarResp, resp.encode()))
}

/// Initiator: decrypts the reply to a signed value.
pub fn receive_response(
    net: &mut Network,
    (me, keys): (PartyId, &Keypair),
    peer: PartyId,
    edge: Edge,
    exchange: ExchangeKind,
) -> Result<i64> {
    let env = net.recv(me, peer, MsgType::ScalarResp)?;
    let resp = ScalarResponse::decode(&env.payload)?;
    if resp.edge != edge || resp.exchange != exchange {
        return Err(Error::protocol("scalar response for a different exchange"));
    }
    let value = keys.decrypt_i64(&resp.ciphertext)?;
    net.record(me, Event::ExchangeOutput { edge, exchange, value });
    Ok(value)
}

/// Two-party scalar product of one-hot vectors: P_a ends with `s`, P_b with `r`, and
/// `s − r = x_i·x_j`.
#[allow(clippy::too_many_arguments)]
pub fn secure_scalar_product(
    net: &mut Network,
    round: u64,
    (pa, pa_vector, pa_keys): (PartyId, ColorVector, &Keypair),
    (pb, pb_vector): (PartyId, ColorVector),
    edge: Edge,
    mask: i64,
    rng_a: &mut impl Rng,
    rng_b: &mut impl Rng,
) -> Result<(i64, i64)> {
    if pa_vector.k() != pb_vector.k() {
        return Err(Error::param("color vectors of different length"));
    }
    let x: Vec<i64> = pa_vector.one_hot().into_iter().map(i64::from).collect();
    let y: Vec<i64> = pb_vector.one_hot().into_iter().map(i64::from).collect();
    let kind = ExchangeKind::Conflict;
    send_request(net, round, (pa, pa_keys), pb, edge, kind, &[x], rng_a)?;
    let req = receive_request(net, pb, pa)?;
    send_response(net, round, pb, pa, &req, &[y], mask, rng_b)?;
    let s = receive_response(net, (pa, pa_keys), pb, edge, kind)?;
    Ok((s, mask))
}

fn pair_mut(parties: &mut [Party], a: PartyId, b: PartyId) -> Result<(&mut Party, &mut Party)> {
    let (ia, ib) = (a.index(), b.index());
    if ia == ib || ia >= parties.len() || ib >= parties.len() {
        return Err(Error::protocol(format!("bad exchange pair {a}, {b}")));
    }
    if ia < ib {
        let (lo, hi) = parties.split_at_mut(ib);
        Ok((&mut lo[ia], &mut hi[0]))
    } else {
        let (lo, hi) = parties.split_at_mut(ia);
        Ok((&mut hi[0], &mut lo[ib]))
    }
}

/// Runs one exchange between two parties and folds its outputs into their state.
pub fn run_exchange(
    net: &mut Network,
    round: u64,
    parties: &mut [Party],
    task: ExchangeTask,
    kind: ExchangeKind,
    mask_bits: u32,
) -> Result<()> {
    let (init, resp) = pair_mut(parties, task.initiator, task.responder)?;
    let vectors = init.encrypted_request(round, task.edge, kind)?;
    send_ciphertexts(net, round, (init.id, &init.keys), resp.id, task.edge, kind, vectors)?;
    let mask = draw_mask(&mut resp.rng, mask_bits)?;
    let req = receive_request(net, resp.id, init.id)?;
    if req.edge != task.edge || req.exchange != kind {
        return Err(Error::protocol("request does not match the scheduled exchange"));
    }
    let weights = resp.response_weights(&req)?;
    send_response(net, round, resp.id, init.id, &req, &weights, mask, &mut resp.rng)?;
    let out = receive_response(net, (init.id, &init.keys), resp.id, task.edge, kind)?;
    match kind {
        ExchangeKind::Conflict => {
            init.share = init.share.wrapping_add(out);
            resp.share = resp.share.wrapping_sub(mask);
        }
        ExchangeKind::Delta => {
            init.delta_share = init.delta_share.wrapping_add(out);
            init.pending_s.insert(task.edge, out);
            resp.delta_share = resp.delta_share.wrapping_sub(mask);
            resp.pending_r.insert(task.edge, mask);
        }
        ExchangeKind::Commit => {
            init.share = init.share.wrapping_add(out);
            init.pending_s.remove(&task.edge);
            resp.share = resp.share.wrapping_sub(mask);
            resp.pending_r.remove(&task.edge);
        }
    }
    Ok(())
}

/// All external edges, each initiated by the owner with the lower party id, in a fixed order.
pub fn full_tasks(parties: &[Party]) -> Vec<ExchangeTask> {
    let mut tasks: Vec<ExchangeTask> = parties
        .iter()
        .flat_map(|p| {
            p.view
                .external_edges
                .iter()
                .filter(move |e| p.id < e.foreign_party)
                .map(move |e| ExchangeTask {
                    edge: e.edge(),
                    initiator: p.id,
                    responder: e.foreign_party,
                })
        })
        .collect();
    tasks.sort();
    tasks
}

/// Establishes every party's share: own internal conflicts plus received outputs minus own masks.
pub fn secure_conflict_computation(
    net: &mut Network,
    round: u64,
    parties: &mut [Party],
    mask_bits: u32,
) -> Result<ConflictShares> {
    for p in parties.iter_mut() {
        p.share = p.internal_conflicts() as i64;
        p.clear_request_cache();
    }
    for task in full_tasks(parties) {
        run_exchange(net, round, parties, task, ExchangeKind::Conflict, mask_bits)?;
    }
    parties.iter_mut().for_each(Party::clear_request_cache);
    let mut out = ConflictShares::default();
    for p in parties.iter() {
        net.record(p.id, Event::Share { value: p.share });
        out.shares.insert(p.id, p.share);
    }
    Ok(out)
}

/// Prices the tentative colors: each party's `delta_share` becomes its share of the conflict
/// change. `internal` holds the movers' own internal changes.
pub fn delta_exchanges(
    net: &mut Network,
    round: u64,
    parties: &mut [Party],
    tasks: &[ExchangeTask],
    internal: &BTreeMap<PartyId, i64>,
    mask_bits: u32,
) -> Result<()> {
    for p in parties.iter_mut() {
        p.delta_share = internal.get(&p.id).copied().unwrap_or(0);
        p.clear_request_cache();
    }
    for &task in tasks {
        run_exchange(net, round, parties, task, ExchangeKind::Delta, mask_bits)?;
    }
    parties.iter_mut().for_each(Party::clear_request_cache);
    Ok(())
}

/// Folds the outcome-weighted change into the persistent shares.
pub fn commit_exchanges(
    net: &mut Network,
    round: u64,
    parties: &mut [Party],
    tasks: &[ExchangeTask],
    internal: &BTreeMap<PartyId, i64>,
    accepted: bool,
    mask_bits: u32,
) -> Result<()> {
    for &task in tasks {
        run_exchange(net, round, parties, task, ExchangeKind::Commit, mask_bits)?;
    }
    if accepted {
        for (&id, &d) in internal {
            let p = &mut parties[id.index()];
            p.share = p.share.wrapping_add(d);
        }
    }
    for p in parties.iter_mut() {
        p.delta_share = 0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        generate_partitioned_graph, seven_job_conflicted_coloring, seven_job_graph,
        total_conflicts, Coloring, PartitionedGraph,
    };
    use crate::paillier::keygen;
    use crate::transcript::{Transcript, TranscriptConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn keys() -> &'static Vec<Keypair> {
        static K: OnceLock<Vec<Keypair>> = OnceLock::new();
        K.get_or_init(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(77);
            (0..5).map(|_| keygen(256, &mut rng).unwrap()).collect()
        })
    }

    fn net_for(g: &PartitionedGraph) -> Network {
        Network::in_memory(Transcript::new(TranscriptConfig::default()).with_auditor(g))
    }

    pub(crate) fn parties_for(g: &PartitionedGraph, x: &Coloring, seed: u64) -> Vec<Party> {
        (0..g.m_parties())
            .map(|a| {
                let view = g.local_view(PartyId(a as u32));
                let colors = view.owned.iter().map(|&v| (v, x.color(v))).collect();
                let rng = ChaCha20Rng::seed_from_u64(seed * 100 + a as u64);
                Party::new(view, x.k(), colors, keys()[a % 5].clone(), rng, 3).unwrap()
            })
            .collect()
    }

    fn product(a: u32, b: u32, k: u32, mask: i64) -> (i64, i64) {
        let mut net = Network::in_memory(Transcript::new(TranscriptConfig::default()));
        let mut rng = ChaCha20Rng::seed_from_u64(u64::from(a * 31 + b));
        let mut rng_b = ChaCha20Rng::seed_from_u64(9);
        let xi = ColorVector::new(k, a).unwrap();
        let xj = ColorVector::new(k, b).unwrap();
        let out = secure_scalar_product(
            &mut net,
            0,
            (PartyId(0), xi, &keys()[0]),
            (PartyId(1), xj),
            Edge::new(0, 1),
            mask,
            &mut rng,
            &mut rng_b,
        )
        .unwrap();
        assert_eq!(net.counters().scalar_messages(), 2);
        assert_eq!(net.counters().total(), 2);
        out
    }

    #[test]
    fn matching_colors_give_one() {
        assert_eq!(product(1, 1, 3, 10), (11, 10));
    }

    #[test]
    fn distinct_colors_give_zero() {
        assert_eq!(product(0, 2, 3, 10), (10, 10));
    }

    #[test]
    fn all_pairs_at_k5() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for a in 0..5 {
            for b in 0..5 {
                let r = draw_mask(&mut rng, DEFAULT_MASK_BITS).unwrap();
                let (s, r) = product(a, b, 5, r);
                assert_eq!(s - r, i64::from(a == b), "{a} {b}");
            }
        }
    }

    #[test]
    fn mask_range_is_checked() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert!(draw_mask(&mut rng, 0).is_err());
        assert!(draw_mask(&mut rng, 63).is_err());
        assert!((0..100).all(|_| draw_mask(&mut rng, 4).unwrap() < 16));
    }

    #[test]
    fn seven_job_shares_sum_to_three() {
        let g = seven_job_graph();
        let x = seven_job_conflicted_coloring();
        let mut parties = parties_for(&g, &x, 1);
        let mut net = net_for(&g);
        let shares = secure_conflict_computation(&mut net, 0, &mut parties, 62).unwrap();
        assert_eq!(shares.sum(), 3);
        assert_eq!(net.counters().scalar_messages(), 2 * 4);
        assert!(net.transcript().violations().is_empty(), "{:?}", net.transcript().violations());
        // no share on its own reveals the count
        assert!(shares.shares.values().all(|&s| s.unsigned_abs() > 1 << 20));
    }

    #[test]
    fn no_external_edges_means_local_counts() {
        let owner = vec![PartyId(0), PartyId(0), PartyId(1), PartyId(1)];
        let g = PartitionedGraph::new(4, 2, owner, [(0, 1), (2, 3)]).unwrap();
        let x = Coloring::new(2, vec![0, 0, 1, 0]).unwrap();
        let mut parties = parties_for(&g, &x, 2);
        let mut net = net_for(&g);
        let shares = secure_conflict_computation(&mut net, 0, &mut parties, 62).unwrap();
        assert_eq!(shares.shares[&PartyId(0)], 1);
        assert_eq!(shares.shares[&PartyId(1)], 0);
        assert_eq!(net.counters().total(), 0);
    }

    #[test]
    fn random_graphs_match_oracle() {
        for seed in 0..50u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..=30);
            let g = generate_partitioned_graph(n, 0.3, 4, seed).unwrap();
            let x = Coloring::random(n, 3, &mut rng);
            let mut parties = parties_for(&g, &x, seed);
            let mut net = net_for(&g);
            let shares = secure_conflict_computation(&mut net, 0, &mut parties, 62).unwrap();
            let oracle = total_conflicts(&g, &x).unwrap().total as i64;
            assert_eq!(shares.sum(), oracle, "seed {seed}");
            assert_eq!(net.counters().scalar_messages(), 2 * g.external_edge_count() as u64);
            assert!(net.transcript().violations().is_empty());
        }
    }

    // Moves one vertex per party and prices the change with delta exchanges over `tasks`.
    fn price_moves(
        g: &PartitionedGraph,
        parties: &mut [Party],
        net: &mut Network,
        moves: &[(usize, u32)],
        tasks: &[ExchangeTask],
        accepted: bool,
    ) {
        let mut internal = BTreeMap::new();
        for &(v, c) in moves {
            let p = &mut parties[g.owner(v).index()];
            *internal.entry(p.id).or_insert(0) += p.delta_internal(v, c);
            p.tentative.insert(v, c);
            p.accept_bit = Some(accepted);
        }
        delta_exchanges(net, 1, parties, tasks, &internal, 62).unwrap();
        let d = parties.iter().fold(0i64, |a, p| a.wrapping_add(p.delta_share));
        let mut x = Coloring::new(3, (0..g.n_vertices()).map(|v| parties[g.owner(v).index()].color(v)).collect()).unwrap();
        let before = total_conflicts(g, &x).unwrap().total as i64;
        for &(v, c) in moves {
            x.set(v, c);
        }
        let after = total_conflicts(g, &x).unwrap().total as i64;
        assert_eq!(d, after - before);
        commit_exchanges(net, 2, parties, tasks, &internal, accepted, 62).unwrap();
        for p in parties.iter_mut() {
            if accepted {
                let t = std::mem::take(&mut p.tentative);
                p.colors.extend(t);
            } else {
                p.tentative.clear();
            }
            p.accept_bit = None;
        }
    }

    fn touched(parties: &[Party], moved: &[usize]) -> Vec<ExchangeTask> {
        full_tasks(parties)
            .into_iter()
            .filter(|t| moved.iter().any(|&v| t.edge.touches(v)))
            .collect()
    }

    #[test]
    fn incremental_updates_equal_full_recomputation() {
        for seed in 0..6u64 {
            let g = generate_partitioned_graph(20, 0.3, 3, seed).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed + 1000);
            let x = Coloring::random(20, 3, &mut rng);
            let mut inc = parties_for(&g, &x, seed);
            let mut full = parties_for(&g, &x, seed);
            let mut net_inc = net_for(&g);
            let mut net_full = net_for(&g);
            secure_conflict_computation(&mut net_inc, 0, &mut inc, 62).unwrap();
            secure_conflict_computation(&mut net_full, 0, &mut full, 62).unwrap();
            for step in 0..8 {
                let a = rng.gen_range(0..20);
                let mut b = rng.gen_range(0..20);
                while g.owner(b) == g.owner(a) {
                    b = rng.gen_range(0..20);
                }
                let moves = [(a, (inc[g.owner(a).index()].color(a) + 1) % 3), (b, rng.gen_range(0..3))];
                let moves: Vec<_> =
                    moves.into_iter().filter(|&(v, c)| inc[g.owner(v).index()].color(v) != c).collect();
                let accepted = step % 3 != 1;
                let tasks_inc = touched(&inc, &[a, b]);
                let tasks_full = full_tasks(&full);
                price_moves(&g, &mut inc, &mut net_inc, &moves, &tasks_inc, accepted);
                price_moves(&g, &mut full, &mut net_full, &moves, &tasks_full, accepted);
                let now = Coloring::new(3, (0..20).map(|v| inc[g.owner(v).index()].color(v)).collect())
                    .unwrap();
                let oracle = total_conflicts(&g, &now).unwrap().total as i64;
                let sum = |ps: &[Party]| ps.iter().fold(0i64, |a, p| a.wrapping_add(p.share));
                assert_eq!(sum(&inc), oracle);
                assert_eq!(sum(&full), oracle);
                assert!(inc.iter().all(|p| p.pending_r.is_empty() && p.pending_s.is_empty()));
            }
            assert!(net_inc.transcript().violations().is_empty());
            assert!(net_inc.counters().scalar_messages() < net_full.counters().scalar_messages());
        }
    }

    #[test]
    fn requests_never_carry_plaintext_vectors() {
        let g = seven_job_graph();
        let x = seven_job_conflicted_coloring();
        let mut parties = parties_for(&g, &x, 4);
        let mut net = Network::in_memory(Transcript::new(TranscriptConfig {
            keep_events: true,
            payloads: crate::transcript::PayloadMode::Full,
        }));
        secure_conflict_computation(&mut net, 0, &mut parties, 62).unwrap();
        for r in net.transcript().records() {
            if let Event::Sent { msg: MsgType::ScalarReq, payload, .. } = &r.event {
                let bytes = hex::decode(payload.hex.as_ref().unwrap()).unwrap();
                let req = ScalarRequest::decode(&bytes).unwrap();
                let cts: Vec<_> = req.vectors.iter().flatten().collect();
                assert_eq!(cts.len(), 3);
                for ct in &cts {
                    assert!(ct.value().bits() > 256);
                }
                assert!(cts[0] != cts[1] && cts[1] != cts[2] && cts[0] != cts[2]);
            }
        }
    }
}

//! What a semi-honest mover can infer about the colors of its foreign neighbors.
//!
//! When party `a` recolors border vertex `v_i` from `x_i` to `x_i'`, let `n` be the number of
//! external edges at `v_i` and `δ` the change in conflicts on them, `δ ∈ [−n, n]`. `δ_a` is the
//! change in `a`'s internal conflicts, which `a` knows. The comparison bit then tells `a` whether
//! `δ_a + δ` is below the move threshold.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coloring, PartitionedGraph, PartyId, VertexId};
use crate::net::MsgType;
use crate::protocol::BorderSnapshot;
use crate::transcript::{ComparisonPurpose, Event, Record};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessProbabilities {
    /// Probability that a foreign neighbor has the new color.
    pub p_new: f64,
    /// Probability that it has the old color.
    pub p_old: f64,
}

fn check_delta(n: u32, delta: i64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("a border vertex has at least one external edge"));
    }
    if delta.abs() > i64::from(n) {
        return Err(Error::param(format!("|δ| = {} exceeds n = {n}", delta.abs())));
    }
    Ok(())
}

// Numerators over 2n of (p_new, p_old).
fn numerators(n: i64, delta: i64) -> (i64, i64) {
    let d = delta.abs();
    let hi = d + (n + d).div_euclid(2);
    let lo = (n - d).div_euclid(2);
    if delta >= 0 {
        (hi, lo)
    } else {
        (lo, hi)
    }
}

/// Guess probabilities for a known `δ`, when every split of the edges into newly conflicting,
/// formerly conflicting and neither is equally likely.
pub fn lemma1_probs(n: u32, delta: i64) -> Result<GuessProbabilities> {
    check_delta(n, delta)?;
    let n = i64::from(n);
    let (new, old) = numerators(n, delta);
    Ok(GuessProbabilities {
        p_new: new as f64 / (2 * n) as f64,
        p_old: old as f64 / (2 * n) as f64,
    })
}

/// Samples the split, then one edge. Returns the frequencies of (new, old).
pub fn monte_carlo_lemma1(n: u32, delta: i64, trials: u64, seed: u64) -> Result<GuessProbabilities> {
    check_delta(n, delta)?;
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = i64::from(n);
    let d = delta.abs();
    let slack = (n - d) / 2;
    let (mut new, mut old) = (0u64, 0u64);
    for _ in 0..trials {
        let t = rng.gen_range(0..=slack);
        let (mut to_new, mut to_old) = (d + t, t);
        if delta < 0 {
            std::mem::swap(&mut to_new, &mut to_old);
        }
        let e = rng.gen_range(0..n);
        if e < to_new {
            new += 1;
        } else if e < to_new + to_old {
            old += 1;
        }
    }
    Ok(GuessProbabilities {
        p_new: new as f64 / trials as f64,
        p_old: old as f64 / trials as f64,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertainInference {
    /// Every foreign neighbor has the old color.
    AllEqualOld,
    /// Every foreign neighbor has the new color.
    AllEqualNew,
}

/// Range of `δ` consistent with `δ_a` and the bit `δ_a + δ < threshold`, or `None` if no value is.
pub fn feasible_delta(delta_a: i64, n: u32, bit: bool, threshold: i64) -> Option<(i64, i64)> {
    let n = i64::from(n);
    let (lo, hi) = if bit {
        (-n, (threshold - delta_a - 1).min(n))
    } else {
        ((threshold - delta_a).max(-n), n)
    };
    (lo <= hi).then_some((lo, hi))
}

fn certain_from_range(range: Option<(i64, i64)>, n: u32) -> Option<CertainInference> {
    let n = i64::from(n);
    match range {
        Some((lo, hi)) if lo == hi && lo == -n => Some(CertainInference::AllEqualOld),
        Some((lo, hi)) if lo == hi && lo == n => Some(CertainInference::AllEqualNew),
        _ => None,
    }
}

/// The two cases in which a plain comparison bit pins down every foreign neighbor.
pub fn lemma2_worst_case(delta_a: i64, n: u32, bit: bool) -> Option<CertainInference> {
    if n == 0 {
        return None;
    }
    let n_i = i64::from(n);
    if delta_a == n_i - 1 && bit {
        Some(CertainInference::AllEqualOld)
    } else if delta_a == -n_i && !bit {
        Some(CertainInference::AllEqualNew)
    } else {
        None
    }
}

/// Closed-form guess averaged uniformly over the feasible `δ`: the likelier color (old on ties)
/// and its probability.
fn averaged_guess(n: u32, lo: i64, hi: i64) -> (bool, f64) {
    let n = i64::from(n);
    let (new, old) = (lo..=hi)
        .map(|d| numerators(n, d))
        .fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
    let denom = (2 * n * (hi - lo + 1)) as f64;
    if new > old {
        (true, new as f64 / denom)
    } else {
        (false, old as f64 / denom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexGuess {
    pub round_id: u64,
    pub moved: VertexId,
    pub foreign: VertexId,
    pub guess: u32,
    pub confidence: f64,
    /// Certain given everything in the adversary's view.
    pub certain: bool,
    /// The plain-comparison detector fired, whether or not a companion may have moved.
    pub naive_certain: bool,
    /// Whether the detector's claim held, when it fired.
    pub naive_correct: Option<bool>,
    /// Against the harness ground truth, when available.
    pub correct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub party: PartyId,
    pub moves_observed: u64,
    pub defended_moves: u64,
    pub guesses: Vec<VertexGuess>,
}

impl AdversaryReport {
    pub fn certain_correct(&self) -> usize {
        self.guesses.iter().filter(|g| g.certain && g.correct == Some(true)).count()
    }

    pub fn naive_fired(&self) -> usize {
        self.guesses.iter().filter(|g| g.naive_certain).count()
    }

    pub fn naive_wrong(&self) -> usize {
        self.guesses.iter().filter(|g| g.naive_correct == Some(false)).count()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let judged: Vec<bool> = self.guesses.iter().filter_map(|g| g.correct).collect();
        (!judged.is_empty())
            .then(|| judged.iter().filter(|c| **c).count() as f64 / judged.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per guess.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("party,round_id,moved,foreign,guess,confidence,certain,naive_certain,naive_correct,correct\n");
        for g in &self.guesses {
            let opt = |b: Option<bool>| b.map_or(String::new(), |c| c.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{},{},{},{}\n",
                self.party.0, g.round_id, g.moved, g.foreign, g.guess, g.confidence, g.certain,
                g.naive_certain, opt(g.naive_correct), opt(g.correct)
            ));
        }
        out
    }
}

struct PendingMove {
    vertex: VertexId,
    from: u32,
    to: u32,
    delta_a: i64,
    threshold: i64,
    defended: bool,
}

/// Replays `party`'s own log. Snapshots, when given, only score the guesses.
pub fn empirical_adversary(
    records: &[Record],
    party: PartyId,
    snapshots: &[BorderSnapshot],
) -> Result<AdversaryReport> {
    let truth: BTreeMap<u64, &BorderSnapshot> = snapshots.iter().map(|s| (s.round_id, s)).collect();
    let mut foreign: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
    let mut report = AdversaryReport {
        party,
        moves_observed: 0,
        defended_moves: 0,
        guesses: Vec::new(),
    };
    let mut pending: Option<PendingMove> = None;
    for r in records.iter().filter(|r| r.party == party) {
        match &r.event {
            Event::LocalGraph { view } => {
                for e in &view.external_edges {
                    foreign.entry(e.own).or_default().insert(e.foreign);
                }
            }
            Event::ProposedMove {
                vertex,
                from,
                to,
                delta_internal,
                border: true,
                threshold,
            } => {
                pending = Some(PendingMove {
                    vertex: *vertex,
                    from: *from,
                    to: *to,
                    delta_a: *delta_internal,
                    threshold: *threshold,
                    defended: false,
                });
            }
            Event::Sent { msg: MsgType::SyncInvite, .. } => {
                if let Some(p) = &mut pending {
                    p.defended = true;
                }
            }
            Event::ComparisonBit {
                round_id,
                purpose: ComparisonPurpose::Move,
                bit,
            } => {
                let Some(p) = pending.take() else { continue };
                let neighbors = foreign.get(&p.vertex).ok_or_else(|| {
                    Error::parse(0, format!("move of {} without a matching local view", p.vertex))
                })?;
                let n = neighbors.len() as u32;
                report.moves_observed += 1;
                if p.defended {
                    report.defended_moves += 1;
                }
                let plain = feasible_delta(p.delta_a, n, *bit, p.threshold);
                let naive = certain_from_range(plain, n);
                // an unseen companion can shift the total by any amount
                let range = if p.defended { Some((-i64::from(n), i64::from(n))) } else { plain };
                let certain = certain_from_range(range, n);
                let (lo, hi) = range.unwrap_or((-i64::from(n), i64::from(n)));
                let (guess, confidence) = match certain {
                    Some(CertainInference::AllEqualOld) => (p.from, 1.0),
                    Some(CertainInference::AllEqualNew) => (p.to, 1.0),
                    None => match averaged_guess(n, lo, hi) {
                        (true, q) => (p.to, q),
                        (false, q) => (p.from, q),
                    },
                };
                let naive_guess = naive.map(|c| match c {
                    CertainInference::AllEqualOld => p.from,
                    CertainInference::AllEqualNew => p.to,
                });
                let snap = truth.get(round_id);
                for &w in neighbors {
                    let actual = snap.and_then(|s| {
                        s.foreign_colors.iter().find(|(u, _)| *u == w).map(|&(_, c)| c)
                    });
                    let correct = actual.map(|c| c == guess);
                    let naive_correct = naive_guess.and_then(|ng| actual.map(|c| c == ng));
                    report.guesses.push(VertexGuess {
                        round_id: *round_id,
                        moved: p.vertex,
                        foreign: w,
                        guess,
                        confidence,
                        certain: certain.is_some(),
                        naive_certain: naive.is_some(),
                        naive_correct,
                        correct,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(report)
}

/// Vertex ids of the boundary instance.
pub mod boundary {
    use crate::graph::VertexId;
    pub const A: VertexId = 0;
    pub const A2: VertexId = 1;
    pub const U: VertexId = 2;
    pub const P: VertexId = 3;
    pub const Q: VertexId = 4;
    pub const B1: VertexId = 5;
    pub const B2: VertexId = 6;
    pub const B3: VertexId = 7;
    pub const MOVER: usize = 1;
    pub const OLD: u32 = 0;
    pub const NEW: u32 = 1;
}

/// Party 1 owns `u` with inner neighbors `p`, `q`, and three foreign neighbors: `a` of party 0
/// and `b1`, `b2` of party 2. Parties 0 and 2 have a few internal edges of their own.
pub fn boundary_instance() -> PartitionedGraph {
    use boundary::*;
    let owner = [0, 0, 1, 1, 1, 2, 2, 2].map(PartyId).to_vec();
    PartitionedGraph::new(
        8,
        3,
        owner,
        [(U, A), (U, B1), (U, B2), (U, P), (U, Q), (A, A2), (B1, B3), (B2, B3)],
    )
    .expect("valid instance")
}

/// `u`, `a`, `b1`, `b2` share the old color and `p`, `q` hold the new one, so moving `u` to the
/// new color raises internal conflicts by `n − 1 = 2`.
pub fn boundary_worst_case(k: u32, a2: u32, b3: u32) -> Coloring {
    use boundary::*;
    let mut c = vec![OLD; 8];
    c[P] = NEW;
    c[Q] = NEW;
    c[A2] = a2;
    c[B3] = b3;
    Coloring::new(k, c).expect("colors below k")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryTrial {
    pub seed: u64,
    pub defense: bool,
    pub bit: bool,
    /// Ground truth: `a`, `b1` and `b2` all held the old color.
    pub all_old: bool,
    pub report: AdversaryReport,
    pub violations: usize,
}

/// Sets up the boundary instance, has party 1 move `u` to the new color once and replays its
/// view. With `worst_case` the foreign neighbors all hold the old color; otherwise they do with
/// probability one half and are uniform otherwise.
pub fn run_boundary_trial(seed: u64, defense: bool, worst_case: bool, key_bits: u32) -> Result<BoundaryTrial> {
    use boundary::*;
    let k = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = boundary_worst_case(k, rng.gen_range(0..k), rng.gen_range(0..k));
    if !worst_case && rng.gen_bool(0.5) {
        for v in [A, B1, B2] {
            x.set(v, rng.gen_range(0..k));
        }
    }
    let all_old = [A, B1, B2].iter().all(|&v| x.color(v) == OLD);
    let g = boundary_instance();
    let config = crate::protocol::ProtocolConfig {
        defense,
        key_bits,
        record_ground_truth: true,
        verify_shares: true,
        ..crate::protocol::ProtocolConfig::new(k, seed)
    };
    let mut engine = crate::protocol::Engine::with_coloring(&g, config, &x)?;
    engine.initialize_shares()?;
    let bit = engine.border_move(MOVER, U, NEW, 0)?;
    let transcript = engine.network().transcript();
    let report = empirical_adversary(transcript.records(), PartyId(MOVER as u32), engine.snapshots())?;
    Ok(BoundaryTrial {
        seed,
        defense,
        bit,
        all_old,
        violations: transcript.violations().len(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Exact p_new and p_old over all splits (to_new, to_old, neither) with to_new − to_old = δ.
    fn enumerate(n: i64, delta: i64) -> (f64, f64) {
        let (mut new, mut old, mut configs) = (0i64, 0i64, 0i64);
        for to_new in 0..=n {
            for to_old in 0..=n - to_new {
                if to_new - to_old == delta {
                    configs += 1;
                    new += to_new;
                    old += to_old;
                }
            }
        }
        let denom = (configs * n) as f64;
        (new as f64 / denom, old as f64 / denom)
    }

    #[test]
    fn worked_example_values() {
        let p = lemma1_probs(5, 3).unwrap();
        assert_eq!((p.p_new, p.p_old), (0.7, 0.1));
        let p = lemma1_probs(4, 0).unwrap();
        assert_eq!((p.p_new, p.p_old), (0.25, 0.25));
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for n in 1..=8u32 {
            for d in -(n as i64)..=n as i64 {
                let p = lemma1_probs(n, d).unwrap();
                let (new, old) = enumerate(n as i64, d);
                assert!((p.p_new - new).abs() < 1e-12, "n={n} δ={d}");
                assert!((p.p_old - old).abs() < 1e-12, "n={n} δ={d}");
            }
        }
    }

    #[test]
    fn boundaries_and_errors() {
        for n in 1..20 {
            let p = lemma1_probs(n, n as i64).unwrap();
            assert_eq!((p.p_new, p.p_old), (1.0, 0.0));
            let p = lemma1_probs(n, -(n as i64)).unwrap();
            assert_eq!((p.p_new, p.p_old), (0.0, 1.0));
        }
        assert!(lemma1_probs(3, 4).is_err());
        assert!(lemma1_probs(0, 0).is_err());
        assert!(monte_carlo_lemma1(3, -4, 10, 0).is_err());
    }

    #[test]
    fn monte_carlo_single_edge() {
        let p = monte_carlo_lemma1(1, 1, 1000, 3).unwrap();
        assert_eq!((p.p_new, p.p_old), (1.0, 0.0));
    }

    #[test]
    fn monte_carlo_within_three_standard_errors() {
        let trials = 20_000u64;
        for n in 1..=8u32 {
            for d in -(n as i64)..=n as i64 {
                let exact = lemma1_probs(n, d).unwrap();
                let mc = monte_carlo_lemma1(n, d, trials, 100 + n as u64).unwrap();
                for (e, m) in [(exact.p_new, mc.p_new), (exact.p_old, mc.p_old)] {
                    let se = (e * (1.0 - e) / trials as f64).sqrt();
                    assert!((e - m).abs() <= 3.0 * se + 1e-12, "n={n} δ={d}: {e} vs {m}");
                }
            }
        }
    }

    #[test]
    fn worst_cases() {
        assert_eq!(lemma2_worst_case(2, 3, true), Some(CertainInference::AllEqualOld));
        assert_eq!(lemma2_worst_case(-3, 3, false), Some(CertainInference::AllEqualNew));
        assert_eq!(lemma2_worst_case(0, 3, true), None);
        assert_eq!(lemma2_worst_case(3, 3, false), None);
    }

    #[test]
    fn feasible_range_agrees_with_worst_case_detector() {
        for n in 1..=6u32 {
            for da in -10..=10 {
                for bit in [false, true] {
                    let range = feasible_delta(da, n, bit, 0);
                    // brute force over δ
                    let ok: Vec<i64> =
                        (-(n as i64)..=n as i64).filter(|d| (da + d < 0) == bit).collect();
                    assert_eq!(range, ok.first().map(|lo| (*lo, *ok.last().unwrap())));
                    let certain = certain_from_range(range, n);
                    assert_eq!(certain, lemma2_worst_case(da, n, bit), "δa={da} n={n} bit={bit}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sign_symmetry(n in 1u32..50, d in 0i64..50) {
            prop_assume!(d <= n as i64);
            let a = lemma1_probs(n, d).unwrap();
            let b = lemma1_probs(n, -d).unwrap();
            prop_assert_eq!((a.p_new, a.p_old), (b.p_old, b.p_new));
            prop_assert!(a.p_new + a.p_old <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn no_border_moves_gives_empty_report() {
        let g = boundary_instance();
        let mut t = crate::transcript::Transcript::new(Default::default());
        t.record(PartyId(1), Event::LocalGraph { view: g.local_view(PartyId(1)) });
        let r = empirical_adversary(t.records(), PartyId(1), &[]).unwrap();
        assert!(r.guesses.is_empty());
        assert_eq!(r.moves_observed, 0);
        assert_eq!(r.accuracy(), None);
    }

    #[test]
    fn boundary_instance_shape() {
        use boundary::*;
        let g = boundary_instance();
        let view = g.local_view(PartyId(MOVER as u32));
        assert_eq!(view.external_edges_at(U).count(), 3);
        assert!(!g.is_border(P) && !g.is_border(Q));
        let x = boundary_worst_case(3, 2, 2);
        let d: i64 = [P, Q].iter().map(|&w| i64::from(x.color(w) == NEW) - i64::from(x.color(w) == OLD)).sum();
        assert_eq!(d, 2);
    }
}

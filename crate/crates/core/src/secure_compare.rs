//! Comparison of two shared sums through a sealed evaluator.
//!
//! Parties send their left and right shares to the evaluator, which releases only the bit
//! `Σ left < Σ right`, and only to the designated recipients. Any secure comparison protocol with
//! the same inputs and outputs can replace [`Evaluator`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PartyId;
use crate::net::{CmpResult, CmpShare, Envelope, MsgType, Network, Side, EVALUATOR};
use crate::transcript::{ComparisonPurpose, Event};

/// Largest magnitude a reconstructed sum may have.
pub const SUM_BOUND: i64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRequest {
    pub left_shares: BTreeMap<PartyId, i64>,
    pub right_shares: BTreeMap<PartyId, i64>,
    pub recipients: BTreeSet<PartyId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonBit {
    pub value: bool,
    pub visible_to: BTreeSet<PartyId>,
}

fn ring_sum(shares: &BTreeMap<PartyId, i64>) -> Result<i64> {
    let s = shares.values().fold(0i64, |a, v| a.wrapping_add(*v));
    if s <= -SUM_BOUND || s >= SUM_BOUND {
        return Err(Error::protocol("shared sum outside the comparison range"));
    }
    Ok(s)
}

/// The ideal functionality.
pub fn sec_compare(req: &ComparisonRequest) -> Result<ComparisonBit> {
    if req.left_shares.keys().ne(req.right_shares.keys()) {
        return Err(Error::param("left and right shares come from different parties"));
    }
    if let Some(p) = req.recipients.iter().find(|p| !req.left_shares.contains_key(p)) {
        return Err(Error::param(format!("recipient {p} did not contribute shares")));
    }
    Ok(ComparisonBit {
        value: ring_sum(&req.left_shares)? < ring_sum(&req.right_shares)?,
        visible_to: req.recipients.clone(),
    })
}

/// Compares a shared sum with a public constant, which the lowest party contributes as its right
/// share while the others contribute zero.
pub fn sec_compare_with_constant(
    shares: &BTreeMap<PartyId, i64>,
    constant: i64,
    recipients: BTreeSet<PartyId>,
) -> Result<ComparisonBit> {
    sec_compare(&ComparisonRequest {
        left_shares: shares.clone(),
        right_shares: constant_shares(shares.keys().copied(), constant),
        recipients,
    })
}

pub fn constant_shares(parties: impl Iterator<Item = PartyId>, constant: i64) -> BTreeMap<PartyId, i64> {
    parties
        .enumerate()
        .map(|(i, p)| (p, if i == 0 { constant } else { 0 }))
        .collect()
}

/// The evaluator endpoint: collects shares over the network and delivers the bit.
#[derive(Debug, Default)]
pub struct Evaluator {
    next_round_id: u64,
    evaluations: u64,
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Id the next comparison will carry.
    pub fn next_round_id(&self) -> u64 {
        self.next_round_id
    }

    /// Each party in `left` sends its two shares; recipients receive the bit.
    pub fn compare(
        &mut self,
        net: &mut Network,
        round: u64,
        purpose: ComparisonPurpose,
        left: &BTreeMap<PartyId, i64>,
        right: &BTreeMap<PartyId, i64>,
        recipients: &BTreeSet<PartyId>,
    ) -> Result<bool> {
        let round_id = self.next_round_id;
        self.next_round_id += 1;
        for (&p, &value) in left {
            let r = *right.get(&p).ok_or_else(|| Error::param(format!("{p} has no right share")))?;
            for (side, value) in [(Side::Left, value), (Side::Right, r)] {
                let share = CmpShare { round_id, side, value };
                net.send(Envelope::new(round, p, EVALUATOR, MsgType::CmpShare, share.encode()))?;
            }
        }
        let mut req = ComparisonRequest {
            left_shares: BTreeMap::new(),
            right_shares: BTreeMap::new(),
            recipients: recipients.clone(),
        };
        for &p in left.keys() {
            for _ in 0..2 {
                let env = net.recv(EVALUATOR, p, MsgType::CmpShare)?;
                let s = CmpShare::decode(&env.payload)?;
                if s.round_id != round_id {
                    return Err(Error::protocol(format!("stale comparison share from {p}")));
                }
                let slot = match s.side {
                    Side::Left => &mut req.left_shares,
                    Side::Right => &mut req.right_shares,
                };
                if slot.insert(p, s.value).is_some() {
                    return Err(Error::protocol(format!("{p} sent two shares for one side")));
                }
            }
        }
        let bit = sec_compare(&req)?;
        self.evaluations += 1;
        net.record(
            EVALUATOR,
            Event::Evaluated {
                round_id,
                purpose,
                participants: left.keys().copied().collect(),
                recipients: recipients.iter().copied().collect(),
            },
        );
        let result = CmpResult {
            round_id,
            bit: bit.value,
        };
        for &p in recipients {
            net.send(Envelope::new(round, EVALUATOR, p, MsgType::CmpResult, result.encode()))?;
        }
        for &p in recipients {
            let env = net.recv(p, EVALUATOR, MsgType::CmpResult)?;
            let r = CmpResult::decode(&env.payload)?;
            net.record(
                p,
                Event::ComparisonBit {
                    round_id: r.round_id,
                    purpose,
                    bit: r.bit,
                },
            );
        }
        Ok(bit.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{Transcript, TranscriptConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shares(v: &[i64]) -> BTreeMap<PartyId, i64> {
        v.iter().enumerate().map(|(i, &s)| (PartyId(i as u32), s)).collect()
    }

    fn all(m: u32) -> BTreeSet<PartyId> {
        (0..m).map(PartyId).collect()
    }

    fn req(l: &[i64], r: &[i64]) -> ComparisonRequest {
        ComparisonRequest {
            left_shares: shares(l),
            right_shares: shares(r),
            recipients: all(l.len() as u32),
        }
    }

    #[test]
    fn negative_sum_is_less() {
        assert!(sec_compare(&req(&[1, -2, 0], &[0, 0, 0])).unwrap().value);
    }

    #[test]
    fn equal_sides_are_not_less() {
        assert!(!sec_compare(&req(&[4, -1, 7], &[4, -1, 7])).unwrap().value);
    }

    #[test]
    fn random_vectors_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let l: Vec<i64> = (0..5).map(|_| rng.gen_range(-1000..1000)).collect();
            let r: Vec<i64> = (0..5).map(|_| rng.gen_range(-1000..1000)).collect();
            let expect = l.iter().sum::<i64>() < r.iter().sum::<i64>();
            assert_eq!(sec_compare(&req(&l, &r)).unwrap().value, expect);
        }
    }

    #[test]
    fn constant_comparison() {
        let zero = shares(&[5, -9, 4]);
        assert!(sec_compare_with_constant(&zero, 1, all(3)).unwrap().value);
        let one = shares(&[5, -9, 5]);
        assert!(!sec_compare_with_constant(&one, 1, all(3)).unwrap().value);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mu: i64 = rng.gen_range(0..6);
            let a: i64 = rng.gen();
            let b: i64 = rng.gen();
            let s = shares(&[a, b, mu.wrapping_sub(a).wrapping_sub(b)]);
            assert_eq!(sec_compare_with_constant(&s, 1, all(3)).unwrap().value, mu == 0);
        }
    }

    #[test]
    fn malformed_requests() {
        let mut r = req(&[1, 2], &[1, 2]);
        r.right_shares.remove(&PartyId(1));
        assert!(matches!(sec_compare(&r), Err(Error::Parameter(_))));
        let mut r = req(&[1, 2], &[1, 2]);
        r.recipients.insert(PartyId(7));
        assert!(sec_compare(&r).is_err());
        assert!(sec_compare(&req(&[i64::MAX / 2, i64::MAX / 2], &[0, 0])).is_err());
    }

    #[test]
    fn only_recipients_see_the_bit() {
        let mut net = Network::in_memory(Transcript::new(TranscriptConfig::default()));
        let mut ev = Evaluator::new();
        let rec: BTreeSet<PartyId> = [PartyId(0), PartyId(2)].into();
        let bit = ev
            .compare(&mut net, 3, ComparisonPurpose::Move, &shares(&[1, 1, -5]), &shares(&[0, 0, 0]), &rec)
            .unwrap();
        assert!(bit);
        assert_eq!(net.pending(), 0);
        assert_eq!(net.counters().count(MsgType::CmpShare), 6);
        assert_eq!(net.counters().count(MsgType::CmpResult), 2);
        let t = net.transcript();
        let bits = |p: u32| {
            t.view(PartyId(p)).filter(|e| matches!(e, Event::ComparisonBit { .. })).count()
        };
        assert_eq!((bits(0), bits(1), bits(2)), (1, 0, 1));
        // a party's view holds its own shares only
        for p in 0..3 {
            assert!(t.view(PartyId(p)).all(|e| !matches!(e, Event::Received { msg: MsgType::CmpShare, .. })));
        }
        t.check_union().unwrap();
    }

    proptest! {
        #[test]
        fn raising_left_only_flips_true_to_false(l in proptest::collection::vec(-100i64..100, 4),
                                                 r in proptest::collection::vec(-100i64..100, 4),
                                                 bump in 0i64..50) {
            let before = sec_compare(&req(&l, &r)).unwrap().value;
            let raised: Vec<i64> = l.iter().map(|x| x + bump).collect();
            let after = sec_compare(&req(&raised, &r)).unwrap().value;
            prop_assert!(before || !after);
        }
    }
}

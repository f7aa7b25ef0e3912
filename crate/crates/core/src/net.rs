//! Message transport between parties and the comparison evaluator.

use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};
use std::os::unix::net::UnixStream;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PartyId;
use crate::transcript::{Event, Transcript};

mod message;

pub use message::{
    decode_round, encode_round, CmpResult, CmpShare, Envelope, ExchangeKind, MsgType, PassToken,
    ScalarRequest, ScalarResponse, Side, EVALUATOR,
};

/// Moves encoded envelopes between endpoints. Delivery is FIFO per ordered pair.
pub trait Transport {
    fn send(&mut self, from: PartyId, to: PartyId, bytes: Vec<u8>) -> Result<()>;
    fn recv(&mut self, to: PartyId, from: PartyId) -> Result<Vec<u8>>;
    /// Messages sent but not yet received.
    fn pending(&self) -> usize;
}

/// Deterministic in-process queues.
#[derive(Default)]
pub struct InMemoryBus {
    queues: BTreeMap<(PartyId, PartyId), VecDeque<Vec<u8>>>,
}

impl InMemoryBus {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Transport for InMemoryBus {
    fn send(&mut self, from: PartyId, to: PartyId, bytes: Vec<u8>) -> Result<()> {
        self.queues.entry((from, to)).or_default().push_back(bytes);
        Ok(())
    }

    fn recv(&mut self, to: PartyId, from: PartyId) -> Result<Vec<u8>> {
        self.queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| Error::protocol(format!("{to} expected a message from {from}")))
    }

    fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}

/// Unix socket pairs, one per unordered pair of endpoints, carrying frames of
/// `len:u32 BE | envelope bytes`.
#[derive(Default)]
pub struct SocketTransport {
    links: BTreeMap<(PartyId, PartyId), (UnixStream, UnixStream)>,
    in_flight: BTreeMap<(PartyId, PartyId), usize>,
}

impl SocketTransport {
    pub fn new() -> Self {
        Self::default()
    }

    // Returns the stream end belonging to `me` on the link to `peer`.
    fn end(&mut self, me: PartyId, peer: PartyId) -> Result<&mut UnixStream> {
        let key = (me.min(peer), me.max(peer));
        if !self.links.contains_key(&key) {
            let pair = UnixStream::pair()?;
            self.links.insert(key, pair);
        }
        let (lo, hi) = self.links.get_mut(&key).expect("link just created");
        Ok(if me == key.0 { lo } else { hi })
    }
}

impl Transport for SocketTransport {
    fn send(&mut self, from: PartyId, to: PartyId, bytes: Vec<u8>) -> Result<()> {
        let len = u32::try_from(bytes.len()).map_err(|_| Error::protocol("frame too large"))?;
        let s = self.end(from, to)?;
        s.write_all(&len.to_be_bytes())?;
        s.write_all(&bytes)?;
        *self.in_flight.entry((from, to)).or_default() += 1;
        Ok(())
    }

    fn recv(&mut self, to: PartyId, from: PartyId) -> Result<Vec<u8>> {
        let waiting = self.in_flight.get(&(from, to)).copied().unwrap_or(0);
        if waiting == 0 {
            return Err(Error::protocol(format!("{to} expected a message from {from}")));
        }
        let s = self.end(to, from)?;
        let mut len = [0u8; 4];
        s.read_exact(&mut len)?;
        let mut buf = vec![0u8; u32::from_be_bytes(len) as usize];
        s.read_exact(&mut buf)?;
        self.in_flight.insert((from, to), waiting - 1);
        Ok(buf)
    }

    fn pending(&self) -> usize {
        self.in_flight.values().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub by_type: BTreeMap<MsgType, u64>,
    pub bytes: u64,
}

impl Counters {
    pub fn count(&self, t: MsgType) -> u64 {
        self.by_type.get(&t).copied().unwrap_or(0)
    }

    pub fn scalar_messages(&self) -> u64 {
        self.count(MsgType::ScalarReq) + self.count(MsgType::ScalarResp)
    }

    pub fn total(&self) -> u64 {
        self.by_type.values().sum()
    }
}

/// A transport plus the transcript every delivery is recorded in.
pub struct Network {
    transport: Box<dyn Transport>,
    transcript: Transcript,
    counters: Counters,
}

impl Network {
    pub fn new(transport: Box<dyn Transport>, transcript: Transcript) -> Self {
        Network {
            transport,
            transcript,
            counters: Counters::default(),
        }
    }

    pub fn in_memory(transcript: Transcript) -> Self {
        Self::new(Box::new(InMemoryBus::new()), transcript)
    }

    pub fn send(&mut self, env: Envelope) -> Result<()> {
        let bytes = env.encode();
        *self.counters.by_type.entry(env.kind).or_default() += 1;
        self.counters.bytes += bytes.len() as u64;
        self.transcript.sent(&env);
        self.transport.send(env.from, env.to, bytes)
    }

    /// Receives the next envelope on `from → to` and checks its header.
    pub fn recv(&mut self, to: PartyId, from: PartyId, kind: MsgType) -> Result<Envelope> {
        let bytes = self.transport.recv(to, from)?;
        let env = Envelope::decode(&bytes)?;
        if env.to != to || env.from != from || env.kind != kind {
            return Err(Error::protocol(format!(
                "{to} expected {kind:?} from {from}, got {:?} {}→{}",
                env.kind, env.from, env.to
            )));
        }
        self.transcript.received(&env);
        Ok(env)
    }

    pub fn record(&mut self, party: PartyId, event: Event) {
        self.transcript.record(party, event);
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn pending(&self) -> usize {
        self.transport.pending()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

//! Byte-level message encoding.
//!
//! All integers are big-endian. An envelope is
//!
//! ```text
//! round:u64 | from:u32 | to:u32 | type:u8 | len:u32 | payload[len]
//! ```
//!
//! where `from`/`to` are party ids and `0xFFFF_FFFF` designates the comparison evaluator. Payloads:
//!
//! ```text
//! SCALAR_REQ  (1)  u:u32 | v:u32 | exchange:u8 | pk_len:u16 | pk[pk_len]
//!                  | n_vectors:u8 | { n_ct:u16 | { ct_len:u16 | ct[ct_len] }* }*
//! SCALAR_RESP (2)  u:u32 | v:u32 | exchange:u8 | ct_len:u16 | ct[ct_len]
//! CMP_SHARE   (3)  round_id:u64 | side:u8 (0 = left, 1 = right) | value:i64
//! CMP_RESULT  (4)  round_id:u64 | bit:u8
//! SYNC_INVITE (5)  round_id:u64
//! SYNC_DONE   (6)  round_id:u64
//! PASS_TOKEN  (7)  turn:u64 | halt:u8 (0 = continue, 1 = stop: not k-colorable)
//! ```
//!
//! Edge endpoints are 0-based vertex ids with `u < v`; `pk` is the Paillier modulus `n` and
//! ciphertexts are residues mod `n²`, both minimal big-endian. `exchange` is 0 for a plain conflict
//! product, 1 for a move delta, 2 for a commit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, PartyId};
use crate::paillier::{Ciphertext, PublicKey};
use num_bigint::BigUint;

/// Pseudo party id of the comparison evaluator.
pub const EVALUATOR: PartyId = PartyId(u32::MAX);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MsgType {
    ScalarReq,
    ScalarResp,
    CmpShare,
    CmpResult,
    SyncInvite,
    SyncDone,
    PassToken,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::ScalarReq,
        MsgType::ScalarResp,
        MsgType::CmpShare,
        MsgType::CmpResult,
        MsgType::SyncInvite,
        MsgType::SyncDone,
        MsgType::PassToken,
    ];

    pub fn code(self) -> u8 {
        match self {
            MsgType::ScalarReq => 1,
            MsgType::ScalarResp => 2,
            MsgType::CmpShare => 3,
            MsgType::CmpResult => 4,
            MsgType::SyncInvite => 5,
            MsgType::SyncDone => 6,
            MsgType::PassToken => 7,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        MsgType::ALL
            .into_iter()
            .find(|t| t.code() == c)
            .ok_or_else(|| Error::parse(0, format!("unknown message type {c}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub round: u64,
    pub from: PartyId,
    pub to: PartyId,
    pub kind: MsgType,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(round: u64, from: PartyId, to: PartyId, kind: MsgType, payload: Vec<u8>) -> Self {
        Envelope {
            round,
            from,
            to,
            kind,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.round);
        w.u32(self.from.0);
        w.u32(self.to.0);
        w.u8(self.kind.code());
        w.u32(self.payload.len() as u32);
        w.bytes(&self.payload);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let round = r.u64()?;
        let from = PartyId(r.u32()?);
        let to = PartyId(r.u32()?);
        let kind = MsgType::from_code(r.u8()?)?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?.to_vec();
        r.finish()?;
        Ok(Envelope {
            round,
            from,
            to,
            kind,
            payload,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Conflict,
    Delta,
    Commit,
}

impl ExchangeKind {
    fn code(self) -> u8 {
        match self {
            ExchangeKind::Conflict => 0,
            ExchangeKind::Delta => 1,
            ExchangeKind::Commit => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(ExchangeKind::Conflict),
            1 => Ok(ExchangeKind::Delta),
            2 => Ok(ExchangeKind::Commit),
            _ => Err(Error::parse(0, format!("unknown exchange kind {c}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarRequest {
    pub edge: Edge,
    pub exchange: ExchangeKind,
    pub public_key: PublicKey,
    pub vectors: Vec<Vec<Ciphertext>>,
}

impl ScalarRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.edge(self.edge);
        w.u8(self.exchange.code());
        w.short_bytes(&self.public_key.to_bytes_be());
        w.u8(self.vectors.len() as u8);
        for vec in &self.vectors {
            w.u16(vec.len() as u16);
            for ct in vec {
                w.short_bytes(&ct.to_bytes_be());
            }
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let edge = r.edge()?;
        let exchange = ExchangeKind::from_code(r.u8()?)?;
        let public_key = PublicKey::from_modulus(BigUint::from_bytes_be(r.short_bytes()?))?;
        let n_vectors = r.u8()?;
        let mut vectors = Vec::with_capacity(n_vectors as usize);
        for _ in 0..n_vectors {
            let n_ct = r.u16()?;
            let mut v = Vec::with_capacity(n_ct as usize);
            for _ in 0..n_ct {
                v.push(Ciphertext::from_bytes_be(r.short_bytes()?));
            }
            vectors.push(v);
        }
        r.finish()?;
        Ok(ScalarRequest {
            edge,
            exchange,
            public_key,
            vectors,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarResponse {
    pub edge: Edge,
    pub exchange: ExchangeKind,
    pub ciphertext: Ciphertext,
}

impl ScalarResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.edge(self.edge);
        w.u8(self.exchange.code());
        w.short_bytes(&self.ciphertext.to_bytes_be());
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let edge = r.edge()?;
        let exchange = ExchangeKind::from_code(r.u8()?)?;
        let ciphertext = Ciphertext::from_bytes_be(r.short_bytes()?);
        r.finish()?;
        Ok(ScalarResponse {
            edge,
            exchange,
            ciphertext,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CmpShare {
    pub round_id: u64,
    pub side: Side,
    pub value: i64,
}

impl CmpShare {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.round_id);
        w.u8(match self.side {
            Side::Left => 0,
            Side::Right => 1,
        });
        w.u64(self.value as u64);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let round_id = r.u64()?;
        let side = match r.u8()? {
            0 => Side::Left,
            1 => Side::Right,
            s => return Err(Error::parse(0, format!("bad comparison side {s}"))),
        };
        let value = r.u64()? as i64;
        r.finish()?;
        Ok(CmpShare {
            round_id,
            side,
            value,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CmpResult {
    pub round_id: u64,
    pub bit: bool,
}

impl CmpResult {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.round_id);
        w.u8(u8::from(self.bit));
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let round_id = r.u64()?;
        let bit = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::parse(0, format!("bad comparison bit {b}"))),
        };
        r.finish()?;
        Ok(CmpResult { round_id, bit })
    }
}

/// Payload of SYNC_INVITE and SYNC_DONE.
pub fn encode_round(round_id: u64) -> Vec<u8> {
    round_id.to_be_bytes().to_vec()
}

pub fn decode_round(bytes: &[u8]) -> Result<u64> {
    let mut r = Reader::new(bytes);
    let v = r.u64()?;
    r.finish()?;
    Ok(v)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PassToken {
    pub turn: u64,
    pub halt: bool,
}

impl PassToken {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.turn);
        w.u8(u8::from(self.halt));
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let turn = r.u64()?;
        let halt = r.u8()? != 0;
        r.finish()?;
        Ok(PassToken { turn, halt })
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn short_bytes(&mut self, b: &[u8]) {
        self.u16(b.len() as u16);
        self.bytes(b);
    }
    fn edge(&mut self, e: Edge) {
        self.u32(e.u as u32);
        self.u32(e.v as u32);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::parse(0, "truncated message"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn short_bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u16()? as usize;
        self.take(n)
    }
    fn edge(&mut self) -> Result<Edge> {
        let u = self.u32()? as usize;
        let v = self.u32()? as usize;
        if u >= v {
            return Err(Error::parse(0, format!("edge ({u},{v}) not normalized")));
        }
        Ok(Edge { u, v })
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::parse(0, "trailing bytes in message"));
        }
        Ok(())
    }
}

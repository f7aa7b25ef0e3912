//! Line-oriented text format for partitioned graphs.
//!
//! ```text
//! c free-form comment
//! p dgc <n_vertices> <m_parties> <n_edges>
//! o <vertex> <party>
//! e <u> <v>
//! ```
//!
//! Vertices are 1-based in the file and 0-based in memory; parties are 0-based in both. The
//! `p` line must come before any `o` or `e` line. `o` lines are optional: when none are present the
//! vertices are assigned to parties in contiguous blocks; when some are present every vertex must
//! have exactly one. The edge count in the header must match the number of `e` lines. Blank lines
//! are ignored and fields are separated by ASCII whitespace.

use std::fmt::Write as _;

use super::{PartitionedGraph, PartyId};
use crate::error::{Error, Result};

pub fn write_graph(g: &PartitionedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p dgc {} {} {}", g.n_vertices(), g.m_parties(), g.edges().len());
    for v in 0..g.n_vertices() {
        let _ = writeln!(out, "o {} {}", v + 1, g.owner(v).0);
    }
    for e in g.edges() {
        let _ = writeln!(out, "e {} {}", e.u + 1, e.v + 1);
    }
    out
}

pub fn read_graph(text: &str) -> Result<PartitionedGraph> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut owners: Vec<Option<PartyId>> = Vec::new();
    let mut saw_owner = false;
    let mut edges = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut fields = raw.split_ascii_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match tag {
            "c" => {}
            "p" => {
                if header.is_some() {
                    return Err(Error::parse(line, "duplicate p line"));
                }
                if rest.len() != 4 || rest[0] != "dgc" {
                    return Err(Error::parse(line, "expected `p dgc <n> <m> <edges>`"));
                }
                let n = number(rest[1], line)?;
                let m = number(rest[2], line)?;
                let ne = number(rest[3], line)?;
                owners = vec![None; n];
                header = Some((n, m, ne));
            }
            "o" => {
                let (n, m, _) = header.ok_or_else(|| Error::parse(line, "o line before p line"))?;
                let [v, p] = pair(&rest, line)?;
                if v == 0 || v > n {
                    return Err(Error::parse(line, format!("vertex {v} out of range 1..={n}")));
                }
                if p >= m {
                    return Err(Error::parse(line, format!("party {p} out of range 0..{m}")));
                }
                if owners[v - 1].replace(PartyId(p as u32)).is_some() {
                    return Err(Error::parse(line, format!("vertex {v} owned twice")));
                }
                saw_owner = true;
            }
            "e" => {
                let (n, _, _) = header.ok_or_else(|| Error::parse(line, "e line before p line"))?;
                let [u, v] = pair(&rest, line)?;
                if u == 0 || u > n || v == 0 || v > n {
                    return Err(Error::parse(line, format!("edge ({u},{v}) out of range 1..={n}")));
                }
                edges.push((u - 1, v - 1));
            }
            other => return Err(Error::parse(line, format!("unknown line tag `{other}`"))),
        }
    }

    let (n, m, ne) = header.ok_or_else(|| Error::parse(0, "missing p line"))?;
    if edges.len() != ne {
        return Err(Error::parse(0, format!("header declares {ne} edges, found {}", edges.len())));
    }
    let owner = if saw_owner {
        owners
            .iter()
            .enumerate()
            .map(|(v, p)| p.ok_or_else(|| Error::parse(0, format!("vertex {} has no owner", v + 1))))
            .collect::<Result<Vec<_>>>()?
    } else {
        if m == 0 || m > n {
            return Err(Error::parse(0, format!("cannot block-partition {n} vertices among {m}")));
        }
        PartitionedGraph::block_owners(n, m)
    };
    PartitionedGraph::new(n, m, owner, edges).map_err(|e| Error::parse(0, e.to_string()))
}

fn number(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::parse(line, format!("`{s}` is not a nonnegative integer")))
}

fn pair(rest: &[&str], line: usize) -> Result<[usize; 2]> {
    if rest.len() != 2 {
        return Err(Error::parse(line, "expected two fields"));
    }
    Ok([number(rest[0], line)?, number(rest[1], line)?])
}

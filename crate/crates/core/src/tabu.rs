//! Tabucol and the move/tabu machinery shared with the distributed search.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coloring, PartitionedGraph, VertexId};

/// Bounded FIFO of recently abandoned `(vertex, color)` pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TabuList {
    entries: VecDeque<(VertexId, u32)>,
    capacity: usize,
}

impl TabuList {
    pub fn new(capacity: usize) -> Self {
        TabuList {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, v: VertexId, c: u32) -> bool {
        self.entries.contains(&(v, c))
    }

    pub fn push(&mut self, v: VertexId, c: u32) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((v, c));
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub vertex: VertexId,
    pub from_color: u32,
    pub to_color: u32,
}

impl Move {
    pub fn new(vertex: VertexId, from_color: u32, to_color: u32) -> Result<Self> {
        if from_color == to_color {
            return Err(Error::param(format!("move of vertex {vertex} keeps color {from_color}")));
        }
        Ok(Move {
            vertex,
            from_color,
            to_color,
        })
    }
}

/// A move is tabu when it would return a vertex to a color it recently left.
pub fn check_tabu(list: &TabuList, mv: &Move) -> bool {
    list.contains(mv.vertex, mv.to_color)
}

pub fn push_tabu(list: &mut TabuList, vertex: VertexId, old_color: u32) {
    list.push(vertex, old_color);
}

/// A candidate move together with the conflict count it would lead to.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub mv: Move,
    pub conflicts: i64,
}

fn better(a: &Neighbor, b: &Neighbor) -> bool {
    (a.conflicts, a.mv.vertex, a.mv.to_color) < (b.conflicts, b.mv.vertex, b.mv.to_color)
}

/// Lowest-conflict non-tabu neighbor, ties to the lowest `(vertex, color)`. If every neighbor is
/// tabu the best tabu one is returned instead.
pub fn best_non_tabu(neighbors: &[Neighbor], list: &TabuList) -> Option<Move> {
    let mut best: Option<&Neighbor> = None;
    let mut best_any: Option<&Neighbor> = None;
    for n in neighbors {
        if best_any.is_none_or(|b| better(n, b)) {
            best_any = Some(n);
        }
        if !check_tabu(list, &n.mv) && best.is_none_or(|b| better(n, b)) {
            best = Some(n);
        }
    }
    best.or(best_any).map(|n| n.mv)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Colorable(Coloring),
    NotColorable,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: u64,
    /// Conflict count after each iteration.
    pub conflict_trace: Vec<u64>,
}

impl SolveOutcome {
    pub fn coloring(&self) -> Option<&Coloring> {
        match &self.status {
            SolveStatus::Colorable(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_colorable(&self) -> bool {
        matches!(self.status, SolveStatus::Colorable(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabucolParams {
    pub max_iter: u64,
    pub tabu_len: usize,
    pub rep: usize,
    pub seed: u64,
}

impl TabucolParams {
    /// 10^5 iterations, tenure N/10, 50 neighbors per iteration.
    pub fn for_size(n: usize, seed: u64) -> Self {
        TabucolParams {
            max_iter: 100_000,
            tabu_len: (n / 10).max(1),
            rep: 50,
            seed,
        }
    }
}

pub fn tabucol_solve(g: &PartitionedGraph, k: u32, params: &TabucolParams) -> Result<SolveOutcome> {
    let adj: Vec<Vec<VertexId>> = (0..g.n_vertices()).map(|v| g.neighbors(v).to_vec()).collect();
    tabucol_adjacency(&adj, k, params)
}

/// Tabucol on a graph given by symmetric adjacency lists over `0..adj.len()`.
pub fn tabucol_adjacency(
    adj: &[Vec<VertexId>],
    k: u32,
    params: &TabucolParams,
) -> Result<SolveOutcome> {
    if k == 0 || params.rep == 0 {
        return Err(Error::param("k and rep must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = adj.len();
    let colors: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut state = SearchState::new(adj, k, colors);
    let mut tabu = TabuList::new(params.tabu_len);
    let mut trace = Vec::new();

    loop {
        if state.conflicts() == 0 {
            let coloring = Coloring::new(k, state.colors)?;
            return Ok(SolveOutcome {
                status: SolveStatus::Colorable(coloring),
                iterations: trace.len() as u64,
                conflict_trace: trace,
            });
        }
        if k == 1 {
            return Ok(SolveOutcome {
                status: SolveStatus::NotColorable,
                iterations: trace.len() as u64,
                conflict_trace: trace,
            });
        }
        if trace.len() as u64 >= params.max_iter {
            return Ok(SolveOutcome {
                status: SolveStatus::IterationLimit,
                iterations: trace.len() as u64,
                conflict_trace: trace,
            });
        }
        let mv = state.choose_move(&tabu, params.rep, &mut rng);
        state.apply(mv);
        push_tabu(&mut tabu, mv.vertex, mv.from_color);
        trace.push(state.conflicts() as u64);
    }
}

/// Incremental conflict bookkeeping: `gamma[v][c]` neighbors of `v` colored `c`, and the set of
/// conflicting edges with O(1) insertion and removal.
pub(crate) struct SearchState<'a> {
    adj: &'a [Vec<VertexId>],
    k: u32,
    colors: Vec<u32>,
    gamma: Vec<Vec<u32>>,
    conflicting: Vec<(VertexId, VertexId)>,
    position: std::collections::HashMap<(VertexId, VertexId), usize>,
}

impl<'a> SearchState<'a> {
    pub(crate) fn new(adj: &'a [Vec<VertexId>], k: u32, colors: Vec<u32>) -> Self {
        let mut gamma = vec![vec![0u32; k as usize]; adj.len()];
        let mut s = SearchState {
            adj,
            k,
            colors,
            gamma: Vec::new(),
            conflicting: Vec::new(),
            position: Default::default(),
        };
        for (v, ns) in adj.iter().enumerate() {
            for &w in ns {
                gamma[v][s.colors[w] as usize] += 1;
                if v < w && s.colors[v] == s.colors[w] {
                    s.insert_conflict(v, w);
                }
            }
        }
        s.gamma = gamma;
        s
    }

    pub(crate) fn conflicts(&self) -> usize {
        self.conflicting.len()
    }

    #[cfg(test)]
    fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub(crate) fn delta(&self, v: VertexId, c: u32) -> i64 {
        let g = &self.gamma[v];
        i64::from(g[c as usize]) - i64::from(g[self.colors[v] as usize])
    }

    fn insert_conflict(&mut self, a: VertexId, b: VertexId) {
        let key = (a.min(b), a.max(b));
        self.position.insert(key, self.conflicting.len());
        self.conflicting.push(key);
    }

    fn remove_conflict(&mut self, a: VertexId, b: VertexId) {
        let key = (a.min(b), a.max(b));
        if let Some(i) = self.position.remove(&key) {
            self.conflicting.swap_remove(i);
            if let Some(moved) = self.conflicting.get(i) {
                self.position.insert(*moved, i);
            }
        }
    }

    /// A random endpoint of a random conflicting edge and a random other color.
    pub(crate) fn random_candidate<R: Rng>(&self, rng: &mut R) -> Move {
        let &(a, b) = self.conflicting.choose(rng).expect("conflicts present");
        let v = if rng.gen_bool(0.5) { a } else { b };
        let from = self.colors[v];
        let mut to = rng.gen_range(0..self.k - 1);
        if to >= from {
            to += 1;
        }
        Move {
            vertex: v,
            from_color: from,
            to_color: to,
        }
    }

    pub(crate) fn choose_move<R: Rng>(&self, tabu: &TabuList, rep: usize, rng: &mut R) -> Move {
        let mu = self.conflicts() as i64;
        let mut seen = Vec::with_capacity(rep);
        for _ in 0..rep {
            let mv = self.random_candidate(rng);
            let d = self.delta(mv.vertex, mv.to_color);
            if d < 0 {
                return mv;
            }
            seen.push(Neighbor {
                mv,
                conflicts: mu + d,
            });
        }
        best_non_tabu(&seen, tabu).expect("rep > 0")
    }

    pub(crate) fn apply(&mut self, mv: Move) {
        let v = mv.vertex;
        let (old, new) = (mv.from_color, mv.to_color);
        debug_assert_eq!(self.colors[v], old);
        let adj = self.adj;
        for &w in &adj[v] {
            self.gamma[w][old as usize] -= 1;
            self.gamma[w][new as usize] += 1;
            if self.colors[w] == old {
                self.remove_conflict(v, w);
            } else if self.colors[w] == new {
                self.insert_conflict(v, w);
            }
        }
        self.colors[v] = new;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{is_proper_k_coloring, total_conflicts, PartyId};

    fn triangle() -> PartitionedGraph {
        PartitionedGraph::new(3, 1, vec![PartyId(0); 3], [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    // Every coloring of `g` with colors below `k`, by counting in base k.
    fn some_proper_coloring(g: &PartitionedGraph, k: u32) -> bool {
        let n = g.n_vertices() as u32;
        (0..k.pow(n)).any(|code| {
            let colors: Vec<u32> = (0..n).map(|i| code / k.pow(i) % k).collect();
            total_conflicts(g, &Coloring::new(k, colors).unwrap()).unwrap().total == 0
        })
    }

    #[test]
    fn tabu_list_is_fifo() {
        let mut t = TabuList::new(3);
        push_tabu(&mut t, 1, 0);
        assert!(check_tabu(&t, &Move::new(1, 2, 0).unwrap()));
        assert!(!check_tabu(&t, &Move::new(1, 0, 2).unwrap()));
        for v in 2..5 {
            push_tabu(&mut t, v, 0);
        }
        assert_eq!(t.len(), 3);
        assert!(!t.contains(1, 0));
        assert!(t.contains(2, 0) && t.contains(4, 0));
    }

    #[test]
    fn move_must_change_color() {
        assert!(Move::new(0, 1, 1).is_err());
    }

    #[test]
    fn ties_go_to_lowest_vertex_then_color() {
        let t = TabuList::new(4);
        let n = |v, c, mu| Neighbor { mv: Move::new(v, 9, c).unwrap(), conflicts: mu };
        let ns = [n(3, 0, 2), n(1, 2, 2), n(1, 1, 2), n(0, 0, 3)];
        assert_eq!(best_non_tabu(&ns, &t), Some(Move::new(1, 9, 1).unwrap()));
    }

    #[test]
    fn tabu_neighbors_are_skipped_unless_all_tabu() {
        let mut t = TabuList::new(4);
        t.push(1, 1);
        let n = |v, c, mu| Neighbor { mv: Move::new(v, 9, c).unwrap(), conflicts: mu };
        let ns = [n(1, 1, 0), n(2, 0, 5)];
        assert_eq!(best_non_tabu(&ns, &t).unwrap().vertex, 2);
        t.push(2, 0);
        assert_eq!(best_non_tabu(&ns, &t).unwrap().vertex, 1);
        assert_eq!(best_non_tabu(&[], &t), None);
    }

    #[test]
    fn triangle_three_colorable_for_every_seed() {
        let g = triangle();
        assert!(some_proper_coloring(&g, 3));
        for seed in 0..50 {
            let out = tabucol_solve(&g, 3, &TabucolParams::for_size(3, seed)).unwrap();
            let c = out.coloring().expect("colorable");
            assert!(is_proper_k_coloring(&g, c, 3).unwrap());
            assert_eq!(out.conflict_trace.len() as u64, out.iterations);
        }
    }

    #[test]
    fn triangle_not_two_colorable() {
        let g = triangle();
        assert!(!some_proper_coloring(&g, 2));
        let params = TabucolParams { max_iter: 10_000, ..TabucolParams::for_size(3, 7) };
        let out = tabucol_solve(&g, 2, &params).unwrap();
        assert_eq!(out.status, SolveStatus::IterationLimit);
        assert_eq!(out.iterations, 10_000);
        assert!(out.conflict_trace.iter().all(|&m| m >= 1));
    }

    #[test]
    fn edgeless_graph_needs_no_steps() {
        let g = PartitionedGraph::new(4, 1, vec![PartyId(0); 4], []).unwrap();
        let out = tabucol_solve(&g, 1, &TabucolParams::for_size(4, 0)).unwrap();
        assert!(out.is_colorable());
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn one_color_with_edges_is_not_colorable() {
        let out = tabucol_solve(&triangle(), 1, &TabucolParams::for_size(3, 0)).unwrap();
        assert_eq!(out.status, SolveStatus::NotColorable);
    }

    #[test]
    fn incremental_bookkeeping_matches_recount() {
        let g = crate::graph::generate_partitioned_graph(40, 0.3, 1, 5).unwrap();
        let adj: Vec<Vec<usize>> = (0..40).map(|v| g.neighbors(v).to_vec()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let colors: Vec<u32> = (0..40).map(|_| rng.gen_range(0..4)).collect();
        let mut s = SearchState::new(&adj, 4, colors);
        for _ in 0..300 {
            if s.conflicts() == 0 {
                break;
            }
            let mv = s.random_candidate(&mut rng);
            let before = s.conflicts() as i64;
            let d = s.delta(mv.vertex, mv.to_color);
            s.apply(mv);
            let x = Coloring::new(4, s.colors().to_vec()).unwrap();
            let recount = total_conflicts(&g, &x).unwrap().total;
            assert_eq!(s.conflicts(), recount);
            assert_eq!(before + d, recount as i64);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = crate::graph::generate_partitioned_graph(30, 0.2, 1, 2).unwrap();
        let p = TabucolParams::for_size(30, 11);
        assert_eq!(tabucol_solve(&g, 4, &p).unwrap(), tabucol_solve(&g, 4, &p).unwrap());
    }
}

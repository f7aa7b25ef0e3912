//! Vertex-partitioned graphs, one-hot colorings and the plaintext conflict oracle.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod format;

pub type VertexId = usize;

/// Identifier of a participating party, 0-based.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Undirected edge, stored with `u < v`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
}

impl Edge {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    pub fn other(&self, w: VertexId) -> VertexId {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, w: VertexId) -> bool {
        self.u == w || self.v == w
    }
}

/// An external edge as seen from one of its two owners.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExternalEdge {
    pub own: VertexId,
    pub foreign: VertexId,
    pub foreign_party: PartyId,
}

impl ExternalEdge {
    pub fn edge(&self) -> Edge {
        Edge::new(self.own, self.foreign)
    }
}

/// What a single party legitimately knows about the graph: its vertices, its internal edges and the
/// external edges incident to its vertices (foreign endpoint ids and owners, never their colors).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalView {
    pub party: PartyId,
    pub owned: Vec<VertexId>,
    pub internal_edges: Vec<Edge>,
    pub external_edges: Vec<ExternalEdge>,
}

impl LocalView {
    pub fn owns(&self, v: VertexId) -> bool {
        self.owned.binary_search(&v).is_ok()
    }

    pub fn is_border(&self, v: VertexId) -> bool {
        self.external_edges.iter().any(|e| e.own == v)
    }

    pub fn border_vertices(&self) -> Vec<VertexId> {
        let set: BTreeSet<VertexId> = self.external_edges.iter().map(|e| e.own).collect();
        set.into_iter().collect()
    }

    pub fn external_edges_at(&self, v: VertexId) -> impl Iterator<Item = &ExternalEdge> + '_ {
        self.external_edges.iter().filter(move |e| e.own == v)
    }

    pub fn internal_neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.internal_edges
            .iter()
            .filter(move |e| e.touches(v))
            .map(move |e| e.other(v))
    }
}

/// A graph whose vertices are partitioned among `m` parties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedGraph {
    n_vertices: usize,
    m_parties: usize,
    owner: Vec<PartyId>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<VertexId>>,
}

impl PartitionedGraph {
    /// Builds a graph, validating owners and edges. Duplicate edges are rejected.
    pub fn new(
        n_vertices: usize,
        m_parties: usize,
        owner: Vec<PartyId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self> {
        if m_parties == 0 {
            return Err(Error::param("at least one party is required"));
        }
        if owner.len() != n_vertices {
            return Err(Error::param(format!(
                "owner map covers {} vertices, graph has {}",
                owner.len(),
                n_vertices
            )));
        }
        if let Some(p) = owner.iter().find(|p| p.index() >= m_parties) {
            return Err(Error::param(format!("owner {p} out of range for {m_parties} parties")));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::param(format!("self-loop on vertex {a}")));
            }
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::param(format!("edge ({a},{b}) out of range")));
            }
            if !set.insert(Edge::new(a, b)) {
                return Err(Error::param(format!("duplicate edge ({a},{b})")));
            }
        }
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_vertices];
        for e in &edges {
            adjacency[e.u].push(e.v);
            adjacency[e.v].push(e.u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(PartitionedGraph {
            n_vertices,
            m_parties,
            owner,
            edges,
            adjacency,
        })
    }

    /// Contiguous block assignment: the first `n % m` parties receive `ceil(n/m)` vertices, the rest
    /// `floor(n/m)`.
    pub fn block_owners(n: usize, m: usize) -> Vec<PartyId> {
        let base = n / m;
        let extra = n % m;
        let mut owner = Vec::with_capacity(n);
        for p in 0..m {
            let size = base + usize::from(p < extra);
            owner.extend(std::iter::repeat(PartyId(p as u32)).take(size));
        }
        owner
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn m_parties(&self) -> usize {
        self.m_parties
    }

    pub fn owner(&self, v: VertexId) -> PartyId {
        self.owner[v]
    }

    pub fn owners(&self) -> &[PartyId] {
        &self.owner
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        a < self.n_vertices && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn is_internal(&self, e: Edge) -> bool {
        self.owner[e.u] == self.owner[e.v]
    }

    pub fn is_border(&self, v: VertexId) -> bool {
        self.adjacency[v].iter().any(|&w| self.owner[w] != self.owner[v])
    }

    pub fn external_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied().filter(|e| !self.is_internal(*e))
    }

    pub fn external_edge_count(&self) -> usize {
        self.external_edges().count()
    }

    pub fn vertices_of(&self, p: PartyId) -> Vec<VertexId> {
        (0..self.n_vertices).filter(|&v| self.owner[v] == p).collect()
    }

    pub fn local_view(&self, p: PartyId) -> LocalView {
        let owned = self.vertices_of(p);
        let mut internal_edges = Vec::new();
        let mut external_edges = Vec::new();
        for e in &self.edges {
            let (ou, ov) = (self.owner[e.u], self.owner[e.v]);
            if ou == p && ov == p {
                internal_edges.push(*e);
            } else if ou == p {
                external_edges.push(ExternalEdge {
                    own: e.u,
                    foreign: e.v,
                    foreign_party: ov,
                });
            } else if ov == p {
                external_edges.push(ExternalEdge {
                    own: e.v,
                    foreign: e.u,
                    foreign_party: ou,
                });
            }
        }
        external_edges.sort();
        LocalView {
            party: p,
            owned,
            internal_edges,
            external_edges,
        }
    }
}

/// Random graph where each unordered pair is an edge with probability `density`; vertices are
/// assigned to parties in contiguous blocks.
pub fn generate_partitioned_graph(
    n: usize,
    density: f64,
    m: usize,
    seed: u64,
) -> Result<PartitionedGraph> {
    if !(0.0..=1.0).contains(&density) || density.is_nan() {
        return Err(Error::param(format!("density {density} outside [0,1]")));
    }
    if m == 0 || m > n {
        return Err(Error::param(format!("need n >= m >= 1, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    PartitionedGraph::new(n, m, PartitionedGraph::block_owners(n, m), edges)
}

/// A vertex color from the one-hot domain: a `k`-dimensional boolean vector with a single 1.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorVector {
    k: u32,
    hot: u32,
}

impl ColorVector {
    pub fn new(k: u32, hot: u32) -> Result<Self> {
        if hot >= k {
            return Err(Error::param(format!("hot index {hot} out of range for k={k}")));
        }
        Ok(ColorVector { k, hot })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn hot_index(&self) -> u32 {
        self.hot
    }

    /// Materializes the boolean vector.
    pub fn one_hot(&self) -> Vec<u8> {
        (0..self.k).map(|i| u8::from(i == self.hot)).collect()
    }
}

/// Scalar product of two one-hot vectors: 1 iff they select the same color.
pub fn conflict(xi: ColorVector, xj: ColorVector) -> Result<u8> {
    if xi.k != xj.k {
        return Err(Error::param(format!(
            "color vectors of different dimension ({} vs {})",
            xi.k, xj.k
        )));
    }
    Ok(u8::from(xi.hot == xj.hot))
}

/// A full assignment of colors to vertices, all drawn from the same `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    k: u32,
    colors: Vec<u32>,
}

impl Coloring {
    pub fn new(k: u32, colors: Vec<u32>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if let Some(c) = colors.iter().find(|&&c| c >= k) {
            return Err(Error::param(format!("color {c} out of range for k={k}")));
        }
        Ok(Coloring { k, colors })
    }

    pub fn random(n: usize, k: u32, rng: &mut impl Rng) -> Self {
        Coloring {
            k,
            colors: (0..n).map(|_| rng.gen_range(0..k)).collect(),
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn color(&self, v: VertexId) -> u32 {
        self.colors[v]
    }

    pub fn vector(&self, v: VertexId) -> ColorVector {
        ColorVector {
            k: self.k,
            hot: self.colors[v],
        }
    }

    pub fn set(&mut self, v: VertexId, c: u32) {
        assert!(c < self.k, "color {c} out of range for k={}", self.k);
        self.colors[v] = c;
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub total: usize,
    pub per_edge: Vec<(Edge, u8)>,
}

/// Plaintext count of conflicting edges. Every secure computation is checked against this.
pub fn total_conflicts(g: &PartitionedGraph, x: &Coloring) -> Result<ConflictReport> {
    if x.len() != g.n_vertices() {
        return Err(Error::param(format!(
            "coloring covers {} vertices, graph has {}",
            x.len(),
            g.n_vertices()
        )));
    }
    let per_edge: Vec<(Edge, u8)> = g
        .edges()
        .iter()
        .map(|e| (*e, u8::from(x.color(e.u) == x.color(e.v))))
        .collect();
    let total = per_edge.iter().map(|(_, c)| *c as usize).sum();
    Ok(ConflictReport { total, per_edge })
}

pub fn is_proper_k_coloring(g: &PartitionedGraph, x: &Coloring, k: u32) -> Result<bool> {
    Ok(x.k() == k && total_conflicts(g, x)?.total == 0)
}

/// Number of conflicting internal edges owned by `p`.
pub fn internal_conflicts(g: &PartitionedGraph, x: &Coloring, p: PartyId) -> usize {
    g.edges()
        .iter()
        .filter(|e| g.owner(e.u) == p && g.owner(e.v) == p && x.color(e.u) == x.color(e.v))
        .count()
}

/// The seven-job scheduling instance: parties own {1,2,3}, {4,5}, {6,7} (1-based labels) and
/// share the external edges 2-4, 3-6, 4-7 and 5-6. Vertex 1 is inner, vertex 5 sits on a single
/// external edge.
pub fn seven_job_graph() -> PartitionedGraph {
    let owner = [0, 0, 0, 1, 1, 2, 2].map(PartyId).to_vec();
    let labels = [
        (1, 2),
        (1, 3),
        (2, 3),
        (4, 5),
        (6, 7),
        (2, 4),
        (3, 6),
        (4, 7),
        (5, 6),
    ];
    PartitionedGraph::new(7, 3, owner, labels.map(|(a, b)| (a - 1, b - 1)))
        .expect("static instance is valid")
}

/// A coloring of [`seven_job_graph`] with three conflicts: internal 2-3 plus external 2-4 and 5-6.
pub fn seven_job_conflicted_coloring() -> Coloring {
    Coloring::new(3, vec![0, 1, 1, 1, 2, 2, 0]).expect("static coloring is valid")
}

/// A proper 3-coloring of [`seven_job_graph`].
pub fn seven_job_proper_coloring() -> Coloring {
    Coloring::new(3, vec![0, 1, 2, 0, 1, 0, 1]).expect("static coloring is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hot(k: u32, i: u32) -> ColorVector {
        ColorVector::new(k, i).unwrap()
    }

    #[test]
    fn complete_graph_block_owners() {
        let g = generate_partitioned_graph(7, 1.0, 3, 99).unwrap();
        assert_eq!(g.edges().len(), 21);
        let owners: Vec<u32> = g.owners().iter().map(|p| p.0).collect();
        assert_eq!(owners, vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn edgeless_graph_is_all_inner() {
        let g = generate_partitioned_graph(10, 0.0, 2, 5).unwrap();
        assert!(g.edges().is_empty());
        assert!((0..10).all(|v| !g.is_border(v)));
    }

    #[test]
    fn edge_count_concentrates_around_binomial_mean() {
        // C(100,2) * 0.1 = 495, sigma = sqrt(4950 * 0.1 * 0.9)
        let sigma = (4950.0f64 * 0.1 * 0.9).sqrt();
        for seed in 0..5 {
            let g = generate_partitioned_graph(100, 0.1, 10, seed).unwrap();
            let direct = (0..100)
                .flat_map(|a| ((a + 1)..100).map(move |b| (a, b)))
                .filter(|&(a, b)| g.has_edge(a, b))
                .count();
            assert_eq!(direct, g.edges().len());
            assert!((direct as f64 - 495.0).abs() <= 3.0 * sigma, "seed {seed}: {direct}");
        }
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(matches!(generate_partitioned_graph(5, 1.5, 2, 0), Err(Error::Parameter(_))));
        assert!(matches!(generate_partitioned_graph(3, 0.5, 4, 0), Err(Error::Parameter(_))));
        assert!(matches!(generate_partitioned_graph(3, 0.5, 0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn conflict_of_one_hot_vectors() {
        assert_eq!(conflict(hot(3, 0), hot(3, 0)).unwrap(), 1);
        assert_eq!(conflict(hot(3, 0), hot(3, 1)).unwrap(), 0);
        assert!(conflict(hot(3, 0), hot(4, 0)).is_err());
    }

    #[test]
    fn conflict_exhaustive_k4_is_the_diagonal() {
        let mut ones = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                // scalar product of the materialized vectors
                let dot: u32 = hot(4, a)
                    .one_hot()
                    .iter()
                    .zip(hot(4, b).one_hot())
                    .map(|(x, y)| u32::from(*x) * u32::from(y))
                    .sum();
                let c = conflict(hot(4, a), hot(4, b)).unwrap();
                assert_eq!(u32::from(c), dot);
                if c == 1 {
                    ones.push((a, b));
                }
            }
        }
        assert_eq!(ones, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn seven_job_classification() {
        let g = seven_job_graph();
        assert!(!g.is_border(0));
        assert!(g.is_border(1));
        let ext: Vec<Edge> = g.external_edges().collect();
        assert_eq!(
            ext,
            vec![Edge::new(1, 3), Edge::new(2, 5), Edge::new(3, 6), Edge::new(4, 5)]
        );
        assert_eq!(g.local_view(PartyId(1)).external_edges_at(4).count(), 1);
    }

    #[test]
    fn seven_job_conflicts() {
        let g = seven_job_graph();
        assert_eq!(total_conflicts(&g, &seven_job_conflicted_coloring()).unwrap().total, 3);
        assert!(is_proper_k_coloring(&g, &seven_job_proper_coloring(), 3).unwrap());
    }

    #[test]
    fn distinct_colors_have_no_conflicts() {
        let g = generate_partitioned_graph(9, 0.7, 3, 1).unwrap();
        let x = Coloring::new(9, (0..9).collect()).unwrap();
        assert_eq!(total_conflicts(&g, &x).unwrap().total, 0);
    }

    #[test]
    fn monochrome_is_improper() {
        let g = generate_partitioned_graph(6, 0.5, 2, 3).unwrap();
        assert!(!g.edges().is_empty());
        let x = Coloring::new(3, vec![1; 6]).unwrap();
        assert!(!is_proper_k_coloring(&g, &x, 3).unwrap());
    }

    #[test]
    fn triangle_has_no_proper_two_coloring() {
        let g = PartitionedGraph::new(3, 1, vec![PartyId(0); 3], [(0, 1), (1, 2), (0, 2)]).unwrap();
        for bits in 0..8u32 {
            let x = Coloring::new(2, (0..3).map(|i| (bits >> i) & 1).collect()).unwrap();
            assert!(!is_proper_k_coloring(&g, &x, 2).unwrap());
        }
    }

    #[test]
    fn partial_coloring_is_rejected() {
        let g = seven_job_graph();
        let x = Coloring::new(3, vec![0; 5]).unwrap();
        assert!(matches!(total_conflicts(&g, &x), Err(Error::Parameter(_))));
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        let own = vec![PartyId(0); 3];
        assert!(PartitionedGraph::new(3, 1, own.clone(), [(0, 0)]).is_err());
        assert!(PartitionedGraph::new(3, 1, own.clone(), [(0, 3)]).is_err());
        assert!(PartitionedGraph::new(3, 1, own.clone(), [(0, 1), (1, 0)]).is_err());
        assert!(PartitionedGraph::new(3, 1, vec![PartyId(1); 3], [(0, 1)]).is_err());
    }

    // second implementation: count by walking adjacency lists, each edge seen twice
    fn recount(g: &PartitionedGraph, x: &Coloring) -> usize {
        let twice: usize = (0..g.n_vertices())
            .map(|v| g.neighbors(v).iter().filter(|&&w| x.color(w) == x.color(v)).count())
            .sum();
        twice / 2
    }

    proptest! {
        #[test]
        fn totals_match_independent_recount(seed in 0u64..10_000, n in 2usize..12) {
            let g = generate_partitioned_graph(n, 0.5, 2.min(n), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let x = Coloring::random(n, 2, &mut rng);
            let report = total_conflicts(&g, &x).unwrap();
            prop_assert_eq!(report.total, recount(&g, &x));
            prop_assert_eq!(report.total, report.per_edge.iter().map(|(_, c)| *c as usize).sum::<usize>());
            prop_assert_eq!(report.total == 0, is_proper_k_coloring(&g, &x, 2).unwrap());
        }

        #[test]
        fn internal_plus_external_is_total(seed in 0u64..10_000, m in 1usize..5) {
            let g = generate_partitioned_graph(15, 0.4, m, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Coloring::random(15, 3, &mut rng);
            let internal: usize = (0..m).map(|p| internal_conflicts(&g, &x, PartyId(p as u32))).sum();
            let external = g.external_edges().filter(|e| x.color(e.u) == x.color(e.v)).count();
            prop_assert_eq!(internal + external, total_conflicts(&g, &x).unwrap().total);
        }

        #[test]
        fn conflict_is_symmetric(k in 1u32..8, a in 0u32..8, b in 0u32..8) {
            prop_assume!(a < k && b < k);
            prop_assert_eq!(conflict(hot(k, a), hot(k, b)).unwrap(), conflict(hot(k, b), hot(k, a)).unwrap());
        }

        #[test]
        fn generation_is_deterministic(seed in 0u64..1000) {
            let a = generate_partitioned_graph(20, 0.3, 4, seed).unwrap();
            let b = generate_partitioned_graph(20, 0.3, 4, seed).unwrap();
            prop_assert_eq!(format::write_graph(&a), format::write_graph(&b));
        }
    }
}

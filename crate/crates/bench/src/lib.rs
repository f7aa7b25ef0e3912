//! Experiment driver: chromatic-number search, parameter sweeps and cost-model checks.

use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ppts::graph::{generate_partitioned_graph, Coloring, PartitionedGraph};
use ppts::protocol::{Engine, ProtocolConfig, RunMetrics, RunResult};
use ppts::tabu::{tabucol_solve, SolveOutcome, SolveStatus, TabucolParams};
use ppts::{Error, Result};

pub mod spec;

pub use spec::{ExperimentSpec, KChoice};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Tabucol,
    Ppts,
}

pub fn status_name(s: &SolveStatus) -> &'static str {
    match s {
        SolveStatus::Colorable(_) => "colorable",
        SolveStatus::NotColorable => "not_colorable",
        SolveStatus::IterationLimit => "iteration_limit",
    }
}

/// Colors in largest-degree-first greedy order; the number of colors used bounds the search.
pub fn greedy_upper_bound(g: &PartitionedGraph) -> u32 {
    let mut order: Vec<usize> = (0..g.n_vertices()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.neighbors(v).len()), v));
    let mut color = vec![u32::MAX; g.n_vertices()];
    let mut used = 0;
    for v in order {
        let taken: Vec<u32> = g.neighbors(v).iter().map(|&w| color[w]).collect();
        let c = (0..).find(|c| !taken.contains(c)).expect("a free color exists");
        color[v] = c;
        used = used.max(c + 1);
    }
    used.max(1)
}

/// One solver run at a fixed `k`.
pub struct SolveRun {
    pub outcome: SolveOutcome,
    pub wall_time_s: f64,
    /// `None` for Tabucol.
    pub ppts: Option<RunResult>,
}

pub fn solve(
    g: &PartitionedGraph,
    solver: Solver,
    k: u32,
    config: &ProtocolConfig,
    initial: Option<&Coloring>,
) -> Result<SolveRun> {
    let started = Instant::now();
    match solver {
        Solver::Tabucol => {
            let mut params = TabucolParams::for_size(g.n_vertices(), config.seed);
            params.max_iter = config.max_iterations;
            params.rep = config.rep;
            let outcome = tabucol_solve(g, k, &params)?;
            Ok(SolveRun {
                outcome,
                wall_time_s: started.elapsed().as_secs_f64(),
                ppts: None,
            })
        }
        Solver::Ppts => {
            let config = ProtocolConfig { k, ..config.clone() };
            let engine = match initial {
                Some(x) => Engine::with_coloring(g, config, x)?,
                None => Engine::new(g, config)?,
            };
            let r = engine.run()?;
            Ok(SolveRun {
                outcome: r.outcome.clone(),
                wall_time_s: r.metrics.wall_time_s,
                ppts: Some(r),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: u32,
    pub status: String,
    pub iterations: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChromaticOutcome {
    pub solver: Solver,
    /// Smallest `k` with a colorable outcome, if any.
    pub min_k: Option<u32>,
    pub per_k: Vec<KRecord>,
}

/// Drops colors `k` and above: each such vertex gets a random color below `k`.
pub fn warm_start(prev: &Coloring, k: u32, seed: u64) -> Result<Coloring> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = prev
        .colors()
        .iter()
        .map(|&c| if c < k { c } else { rng.gen_range(0..k) })
        .collect();
    Coloring::new(k, colors)
}

/// Scans `k` downwards from the top of `k_range` and stops at the first failure. PPTS runs after
/// the first start from the previous proper coloring with the top color folded in; `config`
/// carries the iteration budget per `k`.
pub fn chromatic_search(
    g: &PartitionedGraph,
    solver: Solver,
    k_range: RangeInclusive<u32>,
    config: &ProtocolConfig,
) -> Result<ChromaticOutcome> {
    if k_range.is_empty() || *k_range.start() == 0 {
        return Err(Error::Parameter(format!("bad k range {k_range:?}")));
    }
    let mut out = ChromaticOutcome {
        solver,
        min_k: None,
        per_k: Vec::new(),
    };
    let mut prev: Option<Coloring> = None;
    for k in k_range.rev() {
        let initial = match (&prev, solver) {
            (Some(x), Solver::Ppts) => Some(warm_start(x, k, config.seed ^ u64::from(k))?),
            _ => None,
        };
        let run = solve(g, solver, k, config, initial.as_ref())?;
        out.per_k.push(KRecord {
            k,
            status: status_name(&run.outcome.status).to_string(),
            iterations: run.outcome.iterations,
            wall_time_s: run.wall_time_s,
        });
        match run.outcome.status {
            SolveStatus::Colorable(x) => {
                out.min_k = Some(k);
                prev = Some(x);
            }
            _ => break,
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCheck {
    pub expected_scalar_messages: u64,
    pub scalar_messages: u64,
    pub expected_comparisons: u64,
    pub comparisons: u64,
    /// `2c·(n_e·ℓ + 1)` with the logged `c` and `ℓ`: what full re-evaluation per move would cost.
    pub full_evaluation_messages: f64,
    pub ok: bool,
}

/// Scalar messages must equal twice the edges touched over all conflict computations, and
/// comparisons the border moves plus the turns.
pub fn verify_cost_model(m: &RunMetrics) -> CostCheck {
    let expected_scalar_messages = 2 * m.edges_touched;
    let expected_comparisons = m.sync_moves + m.turns;
    let zero_moves_ok = m.sync_moves > 0 || m.scalar_messages == 2 * m.n_e;
    CostCheck {
        expected_scalar_messages,
        scalar_messages: m.scalar_messages,
        expected_comparisons,
        comparisons: m.comparisons,
        full_evaluation_messages: 2.0 * m.turns as f64 * (m.n_e as f64 * m.ell() + 1.0),
        ok: expected_scalar_messages == m.scalar_messages
            && expected_comparisons == m.comparisons
            && zero_moves_ok,
    }
}

/// One CSV row: a solver on a generated graph at a given `k` (or its chromatic search).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub density: f64,
    pub m: usize,
    pub key_bits: u32,
    pub seed: u64,
    pub solver: Solver,
    pub k: u32,
    pub status: String,
    /// Chromatic search only.
    pub min_k: Option<u32>,
    pub iterations: u64,
    pub wall_time_s: f64,
    pub keygen_time_s: f64,
    pub n_e: u64,
    pub turns: u64,
    pub sync_moves: u64,
    pub ell: f64,
    pub scalar_messages: u64,
    pub comparisons: u64,
    pub bytes: u64,
    pub cost_model_ok: Option<bool>,
}

impl SweepRow {
    fn new(cell: &Cell, solver: Solver, k: u32) -> Self {
        SweepRow {
            n: cell.n,
            density: cell.density,
            m: cell.m,
            key_bits: cell.key_bits,
            seed: cell.seed,
            solver,
            k,
            status: String::new(),
            min_k: None,
            iterations: 0,
            wall_time_s: 0.0,
            keygen_time_s: 0.0,
            n_e: 0,
            turns: 0,
            sync_moves: 0,
            ell: 0.0,
            scalar_messages: 0,
            comparisons: 0,
            bytes: 0,
            cost_model_ok: None,
        }
    }

    fn fill(&mut self, run: &SolveRun) {
        self.status = status_name(&run.outcome.status).to_string();
        self.iterations = run.outcome.iterations;
        self.wall_time_s = run.wall_time_s;
        if let Some(r) = &run.ppts {
            let m = &r.metrics;
            self.keygen_time_s = m.keygen_time_s;
            self.n_e = m.n_e;
            self.turns = m.turns;
            self.sync_moves = m.sync_moves;
            self.ell = m.ell();
            self.scalar_messages = m.scalar_messages;
            self.comparisons = m.comparisons;
            self.bytes = m.bytes_total;
            self.cost_model_ok = Some(verify_cost_model(m).ok);
        }
    }
}

#[derive(Clone, Debug)]
struct Cell {
    n: usize,
    density: f64,
    m: usize,
    key_bits: u32,
    seed: u64,
}

fn run_cell(spec: &ExperimentSpec, cell: &Cell) -> Result<Vec<SweepRow>> {
    let g = generate_partitioned_graph(cell.n, cell.density, cell.m, cell.seed)?;
    let mut config = ProtocolConfig::new(1, cell.seed);
    config.key_bits = cell.key_bits;
    config.max_iterations = spec.max_iterations;
    config.sideways_after = spec.sideways_after;
    config.keep_events = false;
    config.audit = false;
    let mut rows = Vec::new();
    for &solver in &spec.solvers {
        match &spec.k {
            KChoice::Fixed(ks) => {
                for &k in ks {
                    let mut row = SweepRow::new(cell, solver, k);
                    row.fill(&solve(&g, solver, k, &config, None)?);
                    rows.push(row);
                }
            }
            KChoice::Search => {
                let top = greedy_upper_bound(&g);
                let started = Instant::now();
                let c = chromatic_search(&g, solver, 1..=top, &config)?;
                let mut row = SweepRow::new(cell, solver, top);
                row.status = "search".into();
                row.min_k = c.min_k;
                row.iterations = c.per_k.iter().map(|r| r.iterations).sum();
                row.wall_time_s = started.elapsed().as_secs_f64();
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Runs every cell of the grid on `workers` threads. Rows come back in grid order.
pub fn run_sweep(spec: &ExperimentSpec, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &n in &spec.vertices {
        for &density in &spec.densities {
            for &m in &spec.parties {
                for &key_bits in &spec.key_bits {
                    for s in 0..spec.seeds {
                        cells.push(Cell {
                            n,
                            density,
                            m,
                            key_bits,
                            seed: spec.base_seed + s,
                        });
                    }
                }
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<Vec<SweepRow>>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let r = run_cell(spec, cell);
                results.lock().expect("no poisoned lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned lock");
    results.sort_by_key(|(i, _)| *i);
    let mut rows = Vec::new();
    for (_, r) in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn rows_to_jsonl(rows: &[SweepRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

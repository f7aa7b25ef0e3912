use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ppts::attack::{empirical_adversary, run_boundary_trial};
use ppts::graph::format::{read_graph, write_graph};
use ppts::graph::{generate_partitioned_graph, PartitionedGraph, PartyId};
use ppts::protocol::{BorderSnapshot, ProtocolConfig, RunMetrics};
use ppts::transcript::parse_jsonl;
use ppts_bench::{
    chromatic_search, greedy_upper_bound, rows_to_csv, rows_to_jsonl, run_sweep, solve, status_name,
    verify_cost_model, ExperimentSpec, Solver,
};

#[derive(Parser)]
#[command(name = "ppts", version, about = "Distributed graph coloring with private tabu search")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunOpts {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    key_bits: u32,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: u64,
    #[arg(long, value_enum, default_value = "on")]
    defense: Switch,
    /// Rejected border explorations before a sideways move is allowed; 0 keeps strict descent.
    #[arg(long)]
    sideways_after: Option<u64>,
}

impl RunOpts {
    fn config(&self, k: u32) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(k, self.seed);
        c.key_bits = self.key_bits;
        c.max_iterations = self.max_iterations;
        c.defense = matches!(self.defense, Switch::On);
        if let Some(s) = self.sideways_after {
            c.sideways_after = (s > 0).then_some(s);
        }
        c
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Random partitioned graph in `p dgc` format.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        density: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// One k-coloring attempt.
    Solve {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "ppts")]
        solver: Solver,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        run: RunOpts,
        /// Full event log as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Foreign colors at each border move, for scoring `attack`.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Smallest k found by a descending scan.
    Chromatic {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "ppts")]
        solver: Solver,
        /// Defaults to the greedy bound.
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long, default_value_t = 1)]
        k_min: u32,
        #[command(flatten)]
        run: RunOpts,
    },
    Sweep {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Inference attack on one party's transcript, or on the boundary instance.
    Attack {
        #[arg(long, required_unless_present = "boundary")]
        transcript: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        party: u32,
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Seeds of the boundary instance to attack instead of a transcript.
        #[arg(long)]
        boundary: Option<u64>,
        #[arg(long, value_enum, default_value = "on")]
        defense: Switch,
        #[arg(long, default_value_t = 128)]
        key_bits: u32,
        #[arg(long)]
        csv: bool,
    },
    /// Reconciles message counters in a metrics file written by `solve`.
    VerifyCost { metrics: PathBuf },
}

fn load_graph(path: &Path) -> Result<PartitionedGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_graph(&text)?)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen { n, density, m, seed, out } => {
            let g = generate_partitioned_graph(n, density, m, seed)?;
            emit(out.as_deref(), &write_graph(&g))?;
        }
        Cmd::Solve { graph, solver, k, run, transcript, snapshots, metrics } => {
            let g = load_graph(&graph)?;
            let mut config = run.config(k);
            config.keep_events = transcript.is_some();
            config.record_ground_truth = snapshots.is_some();
            let r = solve(&g, solver, k, &config, None)?;
            println!(
                "{} k={} iterations={} time={:.3}s",
                status_name(&r.outcome.status),
                k,
                r.outcome.iterations,
                r.wall_time_s
            );
            if let Some(c) = r.outcome.coloring() {
                println!("{}", serde_json::to_string(c.colors())?);
            }
            if let Some(p) = &r.ppts {
                if let Some(path) = &transcript {
                    fs::write(path, p.transcript.to_jsonl())?;
                }
                if let Some(path) = &snapshots {
                    fs::write(path, serde_json::to_string(&p.snapshots)?)?;
                }
                if let Some(path) = &metrics {
                    fs::write(path, serde_json::to_string_pretty(&p.metrics)?)?;
                }
                println!("digest {}", p.transcript.digest());
            } else if transcript.is_some() || snapshots.is_some() || metrics.is_some() {
                bail!("--transcript, --snapshots and --metrics need --solver ppts");
            }
        }
        Cmd::Chromatic { graph, solver, k_max, k_min, run } => {
            let g = load_graph(&graph)?;
            let top = k_max.unwrap_or_else(|| greedy_upper_bound(&g));
            let mut config = run.config(top);
            config.keep_events = false;
            let c = chromatic_search(&g, solver, k_min..=top, &config)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Cmd::Sweep { config, preset, workers, csv, jsonl } => {
            let spec = match (config, preset) {
                (Some(path), _) => ExperimentSpec::parse(&fs::read_to_string(&path)?)?,
                (None, Some(name)) => ExperimentSpec::preset(&name)?,
                (None, None) => ExperimentSpec::desk(),
            };
            let rows = run_sweep(&spec, workers)?;
            if let Some(path) = &jsonl {
                fs::write(path, rows_to_jsonl(&rows))?;
            }
            emit(csv.as_deref(), &rows_to_csv(&rows)?)?;
        }
        Cmd::Attack { transcript, party, snapshots, boundary, defense, key_bits, csv } => {
            let reports = match (boundary, transcript) {
                (Some(seeds), _) => (0..seeds)
                    .map(|s| {
                        run_boundary_trial(s, matches!(defense, Switch::On), false, key_bits)
                            .map(|t| t.report)
                    })
                    .collect::<ppts::Result<Vec<_>>>()?,
                (None, Some(path)) => {
                    let records = parse_jsonl(&fs::read_to_string(&path)?)?;
                    let truth: Vec<BorderSnapshot> = match &snapshots {
                        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                        None => Vec::new(),
                    };
                    vec![empirical_adversary(&records, PartyId(party), &truth)?]
                }
                (None, None) => bail!("need --transcript or --boundary"),
            };
            for r in &reports {
                println!("{}", if csv { r.to_csv() } else { r.to_json() });
            }
            let certain: usize = reports.iter().map(|r| r.certain_correct()).sum();
            eprintln!("moves={} certain_correct={certain}", reports.iter().map(|r| r.moves_observed).sum::<u64>());
        }
        Cmd::VerifyCost { metrics } => {
            let m: RunMetrics = serde_json::from_str(&fs::read_to_string(&metrics)?)?;
            let check = verify_cost_model(&m);
            println!("{}", serde_json::to_string_pretty(&check)?);
            if !check.ok {
                bail!("message counters do not reconcile");
            }
        }
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use conflab_core::examples::{claims, ExampleId};
use conflab_core::geodesics::{build_mesh, halton_points, Solver, DEFAULT_SIMPSON_NODES};
use conflab_core::geometry::{Background, MetricSpec};
use conflab_core::par::{self, Execution};
use conflab_core::runner::{self, ExperimentConfig, RunOptions};
use conflab_core::Error;

/// Exit status for malformed invocations and invalid configs.
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "conflab", version, about = "Convergence experiments for conformal metrics on tori and spheres")]
struct Cli {
    /// Output root; a run writes into this directory.
    #[arg(long, global = true, env = "CONFLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replaces the sampling seed from the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Run the per-j work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment config and write the report.
    Run { config: PathBuf },
    /// List the example factories.
    ListExamples,
    /// Print the claims attached to an example.
    ShowClaims { id: String },
    /// Time edge weights and multi-source solves in both execution modes.
    MeshBench {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: u8,
        #[arg(long, default_value_t = 8)]
        sources: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config { .. } | Error::InvalidParameter { .. } | Error::Budget { .. })
            );
            ExitCode::from(if usage { EXIT_USAGE } else { 1 })
        }
    }
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(config)?;
            let out = cli.out.as_ref().map(|root| {
                if cfg.output.is_some() {
                    root.clone()
                } else {
                    root.join(cfg.example_id.as_str())
                }
            });
            let opts = RunOptions {
                out,
                threads: cli.threads,
                seed_override: cli.seed_override,
                exec: exec(&cli),
                ..Default::default()
            };
            let outcome = runner::run(&cfg, &opts)?;
            for v in &outcome.report.verdicts {
                println!("{}: {}", v.claim, v.line());
            }
            for note in &outcome.report.notes {
                println!("note: {note}");
            }
            println!("wrote {}", outcome.out_dir.display());
            Ok(outcome.exit_code() as u8)
        }
        Command::ListExamples => {
            for id in ExampleId::ALL {
                let bg = if id.on_sphere() { "sphere" } else { "torus" };
                println!("{:<20} {:<4} {:<7} {}", id.as_str(), id.number(), bg, id.title());
            }
            Ok(0)
        }
        Command::ShowClaims { id } => {
            let id: ExampleId = id.parse().with_context(|| format!("unknown example `{id}`"))?;
            for c in claims(id).claims {
                let p = c.p_range.map(|[lo, hi]| format!(" p in ({lo}, {hi}]")).unwrap_or_default();
                println!("{:<22} {:<20} {}{}", c.id, c.quantity, c.label, p);
                println!("    {}", c.anchor);
            }
            Ok(0)
        }
        Command::MeshBench { n, k, sources } => {
            par::with_threads(cli.threads, || mesh_bench(*n, *k, *sources))?;
            Ok(0)
        }
    }
}

fn mesh_bench(n: usize, k: u8, sources: usize) -> Result<()> {
    let bg = Background::standard_torus(2);
    let mesh = build_mesh(&bg, n, k)?;
    let spec = MetricSpec::background_metric(bg);
    let points = halton_points(&bg, sources);
    println!("torus n={n} k={k} nodes={} sources={sources}", mesh.node_count());
    for mode in [Execution::Sequential, Execution::Parallel] {
        let t = Instant::now();
        let solver = Solver::with_execution(&spec, &mesh, DEFAULT_SIMPSON_NODES, mode)?;
        let weights = t.elapsed();
        let t = Instant::now();
        let fields = solver.solve_many(&points, mode)?;
        let solve = t.elapsed();
        let max = fields.iter().map(|f| f.max()).fold(0.0, f64::max);
        println!(
            "{:<10} weights {:>9.2} ms  solves {:>9.2} ms  max {:.6}",
            format!("{mode:?}").to_lowercase(),
            weights.as_secs_f64() * 1e3,
            solve.as_secs_f64() * 1e3,
            max
        );
    }
    Ok(())
}

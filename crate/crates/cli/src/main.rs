use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use omni_traj_cli::bench::bench_scaling;
use omni_traj_cli::config::RunConfig;
use omni_traj_cli::fixture::{make_fixture, FixtureKind, FixtureParams};
use omni_traj_cli::run::{run, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "omni-traj", version, about = "Whole-body trajectory generation in convex corridors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file and write the outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corridor: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a corridor and config fixture.
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value = "fixture")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        boxes: usize,
        /// m
        #[arg(long, default_value_t = 4.0)]
        length: f64,
        #[arg(long, default_value_t = 2)]
        pieces_per_polyhedron: usize,
    },
    /// Time the optimizer on straight corridors of increasing piece count.
    Bench {
        /// Solver, penalty and vehicle settings; defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated piece counts; may be empty.
        #[arg(long, default_value = "4,8,16,32,64")]
        pieces: String,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            corridor,
            out,
            seed,
            threads,
        } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(1, e),
            };
            let opts = RunOptions { corridor, seed, threads };
            match run(&cfg, &opts, &out) {
                Ok(o) => {
                    let s = &o.summary;
                    println!(
                        "converged in {} iterations: objective {:.6e}, total time {:.4} s, t_opt {:.4} s",
                        s.iterations, s.objective, s.total_time, s.t_opt_s
                    );
                    ExitCode::SUCCESS
                }
                Err(e @ RunError::NotConverged { .. }) => fail(3, format!("{e}; outputs written to {}", out.display())),
                Err(e) => fail(e.exit_code() as u8, e),
            }
        }
        Command::Fixture {
            kind,
            out,
            seed,
            boxes,
            length,
            pieces_per_polyhedron,
        } => {
            let params = FixtureParams {
                boxes,
                length,
                pieces_per_polyhedron,
            };
            match make_fixture(kind, &params, seed).and_then(|f| f.write(&out)) {
                Ok(()) => {
                    println!("fixture written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Command::Bench {
            config,
            pieces,
            repeats,
            threads,
            out,
        } => {
            let cfg = match config.map(|p| RunConfig::load(&p)).transpose() {
                Ok(c) => c.unwrap_or_default(),
                Err(e) => return fail(1, e),
            };
            let counts: Result<Vec<usize>, _> = pieces
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect();
            let counts = match counts {
                Ok(c) => c,
                Err(e) => return fail(1, format!("bad piece list {pieces:?}: {e}")),
            };
            let bench = || bench_scaling(&cfg, &counts, repeats);
            let table = match threads {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(bench),
                    Err(e) => return fail(1, e),
                },
                None => bench(),
            };
            let table = match table {
                Ok(t) => t,
                Err(e) => return fail(1, e),
            };
            print!("{}", table.to_text());
            if let Some(dir) = out {
                let path = dir.join("bench.json");
                let written = std::fs::create_dir_all(&dir).and_then(|_| {
                    std::fs::write(&path, serde_json::to_string_pretty(&table).expect("table serializes") + "\n")
                });
                if let Err(e) = written {
                    return fail(1, format!("cannot write {}: {e}", path.display()));
                }
            }
            ExitCode::SUCCESS
        }
    }
}

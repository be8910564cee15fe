use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recon_bench::config::ExperimentSpec;
use recon_bench::error::BenchResult;
use recon_bench::experiments as ex;
use recon_bench::output::write_table;

#[derive(Parser)]
#[command(name = "recon-bench", about = "Reconciliation experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment TOML; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    latency_ms: Option<f64>,
    #[arg(long, global = true)]
    bandwidth_bps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Efficiency and messages at matched QBER estimates.
    Simulate,
    /// Efficiency over the (true QBER, estimate) grid.
    SweepQberMismatch,
    /// Optimal verification cluster size.
    SweepCluster,
    /// Estimator error against block size and parallelism.
    EstimateBlocksize,
    /// Build and cache the configured code sets.
    GenCode,
    /// Cascade throughput against channel latency.
    BenchLatency,
    /// Drifting channel with per-frame verification.
    Continuous,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SweepQberMismatch => "sweep-qber-mismatch",
            Command::SweepCluster => "sweep-cluster",
            Command::EstimateBlocksize => "estimate-blocksize",
            Command::GenCode => "gen-code",
            Command::BenchLatency => "bench-latency",
            Command::Continuous => "continuous",
        }
    }
}

fn load(g: &Global) -> BenchResult<ExperimentSpec> {
    let mut spec = match &g.config {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    if let Some(l) = g.latency_ms {
        spec.latency_ms = l;
    }
    if g.bandwidth_bps.is_some() {
        spec.bandwidth_bps = g.bandwidth_bps;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: &Cli) -> BenchResult<Vec<PathBuf>> {
    let spec = load(&cli.global)?;
    let out = &cli.global.out;
    let cmd = cli.command.name();
    let blind_sets = |spec: &ExperimentSpec| -> BenchResult<Vec<_>> {
        if spec.protocols.contains(&recon_core::Protocol::Blind) {
            ex::code_sets(spec)
        } else {
            Ok(Vec::new())
        }
    };
    let mut written = Vec::new();
    match cli.command {
        Command::Simulate => {
            let sets = blind_sets(&spec)?;
            let (frames, summary) = ex::simulate(&spec)?;
            written.push(write_table(out, "simulate_frames", cmd, &frames, &spec, &sets)?);
            written.push(write_table(out, "simulate_summary", cmd, &summary, &spec, &sets)?);
        }
        Command::SweepQberMismatch => {
            let sets = blind_sets(&spec)?;
            let (frames, summary) = ex::sweep_qber_mismatch(&spec)?;
            written.push(write_table(out, "mismatch_frames", cmd, &frames, &spec, &sets)?);
            written.push(write_table(out, "mismatch_summary", cmd, &summary, &spec, &sets)?);
        }
        Command::SweepCluster => {
            let rows = ex::sweep_cluster(&spec)?;
            written.push(write_table(out, "cluster", cmd, &rows, &spec, &[])?);
        }
        Command::EstimateBlocksize => {
            let rows = ex::estimate_blocksize(&spec)?;
            written.push(write_table(out, "estimator", cmd, &rows, &spec, &[])?);
        }
        Command::GenCode => {
            let sets = ex::gen_code(&spec)?;
            let rows: Vec<_> = sets
                .iter()
                .zip(&spec.codes)
                .flat_map(|(s, src)| {
                    s.codes().iter().map(move |c| CodeRow {
                        dir: src.dir.display().to_string(),
                        n: c.matrix.n(),
                        m: c.matrix.m(),
                        d: c.modulated.len(),
                        rate: c.rate(),
                        design_qber: c.design_qber,
                    })
                })
                .collect();
            written.push(write_table(out, "codes", cmd, &rows, &spec, &sets)?);
        }
        Command::BenchLatency => {
            let rows = ex::bench_latency(&spec)?;
            written.push(write_table(out, "latency", cmd, &rows, &spec, &[])?);
        }
        Command::Continuous => {
            let sets = if spec.continuous.protocol == recon_core::Protocol::Blind {
                ex::code_sets(&spec)?
            } else {
                Vec::new()
            };
            let (frames, full) = ex::continuous(&spec)?;
            written.push(write_table(out, "continuous_frames", cmd, &frames, &spec, &sets)?);
            written.push(write_table(out, "continuous_full", cmd, &full, &spec, &sets)?);
        }
    }
    Ok(written)
}

#[derive(serde::Serialize)]
struct CodeRow {
    dir: String,
    n: usize,
    m: usize,
    d: usize,
    rate: f64,
    design_qber: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("recon-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

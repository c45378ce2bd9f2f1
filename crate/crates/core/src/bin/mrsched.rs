use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use mrsched::experiment::{bench_solver, run_experiment, ExperimentConfig};
use mrsched::moo::GaParams;
use mrsched::trace::{
    generate_workload, read_trace_file, synthesize_bb_workload, synthesize_ssd_workload,
    write_trace, GeneratorParams, TraceFormat,
};
use mrsched::Error;

#[derive(Parser)]
#[command(name = "mrsched", version, about = "Multi-resource batch scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bb,
    Ssd,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (policy, seed) pair from an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rewrite a trace with synthetic burst buffer or SSD requests.
    Synthesize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Target share of jobs requesting burst buffer (bb), or share of
        /// low SSD requests (ssd).
        #[arg(long)]
        fraction: f64,
        /// Donor requests must exceed this (bb mode).
        #[arg(long, default_value_t = 5 * 1024)]
        threshold_gb: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic base trace.
    Generate {
        #[arg(long, default_value_t = 1000)]
        jobs: usize,
        #[arg(long, default_value_t = 1000)]
        nodes: u32,
        #[arg(long, default_value_t = 1.0)]
        load: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the genetic solver (and the exhaustive one on small windows).
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
        window: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
        generations: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        population: usize,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN: u8 = 2;

fn write_workload(wl: &mrsched::trace::Workload, out: &PathBuf) -> anyhow::Result<()> {
    let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_trace(wl, TraceFormat::from_path(out), BufWriter::new(f))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), (u8, anyhow::Error)> {
    let config_err = |e: Error| (EXIT_CONFIG, anyhow::Error::from(e));
    match cli.cmd {
        Command::Simulate { config, out, jobs } => {
            let mut exp = ExperimentConfig::load(&config).map_err(config_err)?;
            if let Some(o) = out {
                exp.output_dir = o;
            }
            let summary = run_experiment(&exp, jobs).map_err(|e| (EXIT_RUN, e.into()))?;
            for r in &summary.runs {
                match &r.result {
                    Ok(m) => println!(
                        "{:<24} node {:.4} bb {:.4} wait {:.0} s slowdown {:.2}",
                        r.dir.file_name().unwrap_or_default().to_string_lossy(),
                        m.node_usage,
                        m.bb_usage,
                        m.avg_wait,
                        m.avg_slowdown
                    ),
                    Err(e) => println!("{:<24} FAILED: {e}", r.dir.display()),
                }
            }
            if summary.failed() > 0 {
                return Err((EXIT_RUN, anyhow::anyhow!("{} run(s) failed", summary.failed())));
            }
        }
        Command::Synthesize {
            input,
            mode,
            fraction,
            threshold_gb,
            seed,
            out,
        } => {
            let base = read_trace_file(&input).map_err(config_err)?;
            let wl = match mode {
                Mode::Bb => synthesize_bb_workload(&base, fraction, threshold_gb, seed),
                Mode::Ssd => synthesize_ssd_workload(&base, fraction, seed),
            }
            .map_err(config_err)?;
            write_workload(&wl, &out).map_err(|e| (EXIT_RUN, e))?;
        }
        Command::Generate {
            jobs,
            nodes,
            load,
            seed,
            out,
        } => {
            let params = GeneratorParams {
                jobs,
                total_nodes: nodes,
                offered_load: load,
                ..Default::default()
            };
            let wl = generate_workload(&params, seed).map_err(config_err)?;
            write_workload(&wl, &out).map_err(|e| (EXIT_RUN, e))?;
        }
        Command::Bench {
            window,
            generations,
            population,
            instances,
            seed,
        } => {
            let params: Vec<GaParams> = generations
                .iter()
                .map(|&g| GaParams::new(g, population, seed))
                .collect();
            for p in &params {
                p.validate().map_err(config_err)?;
            }
            println!("window,generations,population,instances,ga_mean_s,brute_mean_s");
            for r in bench_solver(&window, &params, instances, seed) {
                println!(
                    "{},{},{},{},{:.6},{}",
                    r.window,
                    r.generations,
                    r.population,
                    r.instances,
                    r.ga_mean_s,
                    r.brute_mean_s.map(|t| format!("{t:.6}")).unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

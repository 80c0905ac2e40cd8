use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use sinr_sched::exec::{init_thread_pool, Execution};
use sinr_sched::harness::{
    run_scenario, sweep_alpha, sweep_frame_size, write_alpha_sweep_csv, write_frame_sweep_csv, ScenarioConfig,
};
use sinr_sched::queueing::{run_stability_experiment, write_queue_csv};
use sinr_sched::region::{enumerate_s1, enumerate_sm, hull_boundary_sample, pareto_boundary, sample_pc_region};
use sinr_sched::Error;

#[derive(Parser)]
#[command(name = "sinr-sched", version, about = "Distributed power-packing schedulers under the SINR model")]
struct Cli {
    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the update budget per run.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated runs of the configured algorithm.
    Run,
    /// Convergence versus exploration rate (`alpha2 = alpha1`).
    SweepAlpha,
    /// Both randomized schedulers across frame sizes.
    SweepFrame,
    /// Enumerated rate regions and boundaries.
    Region,
    /// Queue stability with known or estimated arrival rates.
    Stability,
}

/// Errors in the config itself exit with 2, everything else with 1.
enum Failure {
    Config(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

/// The error's own message already leads with its kind.
fn config_error(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("missing --config <path>".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_json(&text).map_err(config_error)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(budget) = cli.budget {
        cfg.params.budget = budget;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn execution(parallel: Option<usize>) -> Execution {
    match parallel {
        Some(0 | 1) => Execution::Sequential,
        Some(n) => {
            init_thread_pool(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(create(dir, name)?, value)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let exec = execution(cli.parallel);
    let out = cli.out.as_path();
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::Run)?;

    match cli.command {
        Command::Run => {
            let report = run_scenario(&cfg, exec).map_err(config_error)?;
            report.write_runs_csv(create(out, "runs.csv")?).context("writing runs.csv")?;
            write_json(out, "report.json", &report)?;
            if let Some(trace) = &report.trace {
                trace.write_csv(create(out, "trace.csv")?).context("writing trace.csv")?;
            }
            let a = &report.aggregate;
            println!(
                "{} runs, {} converged, fraction unconverged {:.4}, mean updates {}",
                a.runs,
                a.converged,
                a.fraction_unconverged,
                a.mean_updates_converged.map_or("-".into(), |m| format!("{m:.1}"))
            );
        }
        Command::SweepAlpha => {
            let reports = sweep_alpha(&cfg, &cfg.alphas, exec).map_err(config_error)?;
            write_alpha_sweep_csv(&reports, create(out, "alpha_sweep.csv")?).context("writing alpha_sweep.csv")?;
            write_json(out, "alpha_sweep.json", &reports)?;
            for r in &reports {
                println!(
                    "alpha {:<6} unconverged {:.4} mean updates (censored) {:.1}",
                    r.alpha1, r.aggregate.fraction_unconverged, r.aggregate.mean_updates_censored
                );
            }
        }
        Command::SweepFrame => {
            let rows = sweep_frame_size(&cfg, &cfg.frame_sizes, exec).map_err(config_error)?;
            write_frame_sweep_csv(&rows, create(out, "frame_sweep.csv")?).context("writing frame_sweep.csv")?;
            write_json(out, "frame_sweep.json", &rows)?;
            for r in &rows {
                println!(
                    "M {:<3} unconverged ipbpp {:.4} itipbpp {:.4}",
                    r.m, r.ipbpp.aggregate.fraction_unconverged, r.itipbpp.aggregate.fraction_unconverged
                );
            }
        }
        Command::Region => {
            let net = cfg.net.build().map_err(config_error)?;
            let s1 = enumerate_s1(&net).map_err(config_error)?;
            s1.write_csv(create(out, "s1.csv")?).context("writing s1.csv")?;
            for &m in &cfg.region.frame_sizes {
                let sm = enumerate_sm(&net, m).map_err(config_error)?;
                sm.write_csv(create(out, &format!("sm_{m}.csv"))?).context("writing frame region")?;
                pareto_boundary(&sm)
                    .write_csv(create(out, &format!("pareto_{m}.csv"))?)
                    .context("writing Pareto boundary")?;
            }
            if net.n_links == 2 {
                sample_pc_region(&net, cfg.region.pc_grid)
                    .map_err(config_error)?
                    .write_csv(create(out, "pc.csv")?)
                    .context("writing pc.csv")?;
                hull_boundary_sample(&s1, 50)
                    .map_err(config_error)?
                    .write_csv(create(out, "hull_boundary.csv")?)
                    .context("writing hull_boundary.csv")?;
            }
            println!("region files written to {}", out.display());
        }
        Command::Stability => {
            let net = cfg.net.build().map_err(config_error)?;
            let st = cfg
                .stability
                .clone()
                .ok_or_else(|| Failure::Config("config has no \"stability\" section".into()))?;
            let seeds: Vec<u64> = (0..cfg.stability_seeds as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
            let report = run_stability_experiment(&net, &st, &seeds, exec).map_err(config_error)?;
            write_json(out, "stability.json", &report)?;
            if st.record_queues {
                write_queue_csv(&report, create(out, "queues.csv")?).context("writing queues.csv")?;
            }
            let drained = report.runs.iter().filter(|r| r.drain_after_absorption.is_some()).count();
            println!("{drained}/{} seeds drained after absorption", report.runs.len());
        }
    }
    Ok(())
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(msg) => format!("config error: {msg}"),
            Failure::Run(e) => format!("error: {e:#}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rex_core::analysis::write_aggregate;
use rex_core::harness::{
    aggregate_dir, compare, list_presets, resolve_config, run, write_compare_report, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "rex", version, about = "Lifelong RL experiments under non-stationarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML config file.
    Run {
        /// Preset name (see `rex presets`) or path to a config file.
        config: String,
        /// Run this single seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run seeds 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        /// Output directory (default: the config's `out_dir`, else runs/<name>).
        #[arg(long, env = "REX_OUT_DIR")]
        out: Option<PathBuf>,
        /// Seeds run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare two directories of run logs after the first shift.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        shift_step: u64,
        /// Also write aggregate curves and the test result here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-bin reward quartiles across the seeds in a directory.
    Aggregate {
        dir: PathBuf,
        /// Output file (default: DIR/aggregate.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets.
    Presets,
    /// Print the resolved config of a preset or file.
    Show { config: String },
}

fn output_dir(config: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| config.out_dir.clone()).unwrap_or_else(|| {
        let name = if config.name.is_empty() { "experiment" } else { &config.name };
        Path::new("runs").join(name)
    })
}

fn run_seeds(config: &ExperimentConfig, seeds: &[u64], dir: &Path, jobs: usize) -> Result<()> {
    let queue = Mutex::new(seeds.iter().copied());
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            s.spawn(|| loop {
                let Some(seed) = queue.lock().unwrap().next() else { break };
                match run(config, seed, dir) {
                    Ok(summary) => println!(
                        "seed {seed}: {} steps, {} policy updates, {} gradient updates, green {} red {}",
                        summary.steps_completed,
                        summary.policy_updates,
                        summary.gradient_updates,
                        summary.green_collected,
                        summary.red_collected
                    ),
                    Err(e) => {
                        eprintln!("seed {seed}: {e}");
                        failures.lock().unwrap().push(seed);
                    }
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        bail!("seeds {failures:?} failed; partial logs kept in {}", dir.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            seeds,
            out,
            jobs,
        } => {
            let cfg = resolve_config(&config)?;
            let seed_list: Vec<u64> = match (seed, seeds) {
                (Some(s), _) => vec![s],
                (None, Some(n)) => (0..n).collect(),
                (None, None) => cfg.seeds.clone(),
            };
            let dir = output_dir(&cfg, out);
            println!("{} -> {} (config hash {})", cfg.name, dir.display(), cfg.hash());
            run_seeds(&cfg, &seed_list, &dir, jobs)?;
        }
        Command::Compare { a, b, shift_step, out } => {
            let report = compare(&a, &b, shift_step)?;
            let p = &report.protocol;
            let relation = match report.direction() {
                1 => "A > B",
                -1 => "A < B",
                _ => "A = B",
            };
            println!(
                "post-shift mean A = {:.6} (n = {}), B = {:.6} (n = {}); {relation}; rank-sum p = {:.4e}{}",
                p.mean_a(),
                p.sample_a.len(),
                p.mean_b(),
                p.sample_b.len(),
                p.test.p_value,
                if p.test.exact { " (exact)" } else { "" }
            );
            if let Some(out) = out {
                write_compare_report(&report, &out)?;
                println!("report written to {}", out.display());
            }
        }
        Command::Aggregate { dir, out } => {
            let rows = aggregate_dir(&dir)?;
            let path = out.unwrap_or_else(|| dir.join("aggregate.csv"));
            let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_aggregate(&rows, file)?;
            println!("{} bins written to {}", rows.len(), path.display());
        }
        Command::Presets => {
            let all = list_presets();
            let width = all.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in all {
                println!("{:width$}  {}", p.name, p.description);
            }
        }
        Command::Show { config } => {
            let cfg = resolve_config(&config)?;
            print!("{}", toml::to_string(&cfg)?);
        }
    }
    Ok(())
}

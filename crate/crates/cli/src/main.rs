use std::path::{Path, PathBuf};
use std::process::ExitCode;

use activesim::harness::runner::{mean, modal_curriculum};
use activesim::harness::{
    emit_plot_data, enumerate_curricula, monte_carlo, verify_active, write_enumeration, write_outputs,
    ExperimentConfig, VerifyOptions,
};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "activesim", version, about = "Curriculum selection experiments for tabular Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per selector (overrides the config).
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo runs of every configured selector.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Convergence steps of every full-length curriculum.
    Enumerate {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Numerical checks of the active-regression identities.
    VerifyActive {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Perturb A by this amount before the trace identity check.
        #[arg(long)]
        fault: Option<f64>,
    },
    /// Figure data files from a results directory.
    PlotData { results_dir: PathBuf },
}

fn load(config: &Path, flags: &RunFlags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(r) = flags.runs {
        cfg.runs = r;
    }
    if let Some(o) = &flags.out {
        cfg.output = std::env::current_dir()?.join(o);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_mean(v: &[f64]) -> String {
    if v.is_empty() {
        "NA".into()
    } else {
        format!("{:.1}", mean(v))
    }
}

fn run(config: PathBuf, flags: RunFlags) -> Result<bool> {
    let cfg = load(&config, &flags)?;
    let report = monte_carlo(&cfg, flags.jobs)?;
    let dir = cfg.output_dir();
    write_outputs(&cfg, &report, &dir)?;
    println!("{:<16} {:>6} {:>18} {:>14} {:>14}  modal curriculum", "selector", "runs", "time_to_threshold", "total_steps", "total_reward");
    for kind in &cfg.selectors {
        let name = kind.to_string();
        let s: Vec<_> = report.summaries(&name).collect();
        let ttt: Vec<f64> = s.iter().filter_map(|x| x.time_to_threshold).map(|t| t as f64).collect();
        let steps: Vec<f64> = s.iter().map(|x| x.total_steps() as f64).collect();
        let reward: Vec<f64> = s.iter().map(|x| x.total_reward).collect();
        let modal = modal_curriculum(s.iter().copied())
            .map(|c| c.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("-"))
            .unwrap_or_default();
        println!(
            "{:<16} {:>6} {:>18} {:>14} {:>14}  {}",
            name,
            s.len(),
            fmt_mean(&ttt),
            fmt_mean(&steps),
            fmt_mean(&reward),
            modal
        );
    }
    for f in &report.failures {
        eprintln!("run {} of {} failed: {}", f.run_id, f.selector, f.message);
    }
    println!("results in {}", dir.display());
    Ok(report.failures.is_empty())
}

fn enumerate(config: PathBuf, flags: RunFlags) -> Result<bool> {
    let cfg = load(&config, &flags)?;
    let e = enumerate_curricula(&cfg, flags.jobs)?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("enumeration.csv");
    write_enumeration(&e, &path)?;
    for f in &e.failures {
        eprintln!("run {} of {} failed: {}", f.run_id, f.selector, f.message);
    }
    println!("wrote {} rows to {}", e.rows.len(), path.display());
    Ok(e.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, flags } => run(config, flags),
        Command::Enumerate { config, flags } => enumerate(config, flags),
        Command::VerifyActive { seed, fault } => {
            let report = verify_active(&VerifyOptions { seed, fault });
            print!("{report}");
            Ok(report.passed())
        }
        Command::PlotData { results_dir } => emit_plot_data(&results_dir).map_err(Into::into).map(|m| {
            for p in &m.written {
                println!("wrote {}", p.display());
            }
            for (name, why) in &m.omitted {
                println!("omitted {name}: {why}");
            }
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

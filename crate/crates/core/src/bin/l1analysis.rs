use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use l1analysis::bench::commands::{cmd_gen, cmd_solve, cmd_sweep, cmd_validate, load_config};
use l1analysis::bench::{ExperimentConfig, Suite};
use l1analysis::risk::RiskSelection;

#[derive(Parser)]
#[command(name = "l1analysis", version, about = "l1-analysis regularization with GSURE risk estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file, or a preset name (super-resolution, compressed-sensing)
    #[arg(long, default_value = "super-resolution")]
    config: String,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate x0 and y = Φx0 + w
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the generated problem at one λ and certify it
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
    },
    /// Sweep the λ grid and write sweep.csv
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo probes per grid point (0 for exact traces)
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        risk: Option<RiskSelection>,
    },
    /// Run a property suite
    Validate {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config(common: &Common) -> l1analysis::Result<ExperimentConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> l1analysis::Result<ExitCode> {
    match cli.command {
        Command::Gen { common } => {
            let cfg = config(&common)?;
            let exp = cmd_gen(&cfg, &common.out)?;
            println!("sigma {} psnr {:.4} dB h0 {}", exp.sigma, exp.psnr, exp.h0);
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { common, lambda } => {
            let cfg = config(&common)?;
            let (_, report) = cmd_solve(&cfg, &common.out, lambda)?;
            print!("{}", report.render());
            Ok(if report.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Sweep { common, probes, risk } => {
            let mut cfg = config(&common)?;
            if let Some(k) = probes {
                cfg.probes = k;
            }
            if let Some(r) = risk {
                cfg.risks = r;
            }
            let summary = cmd_sweep(&cfg, &common.out)?;
            println!("wrote {} ({} rows, lambda_max {})", summary.csv_path.display(), summary.grid.len(), summary.lambda_max);
            for (kind, lambda) in &summary.selected {
                println!("argmin gsure_{kind} lambda {lambda}");
            }
            let failed = summary.result.rows.iter().filter(|r| r.error.is_some()).count();
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Validate { suite, seed, out } => {
            let checks = cmd_validate(suite, seed, out.as_deref())?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use learnpath_cli::commands::{self, CompareOptions, EvalOptions, GenLogsOptions, TrainAktOptions, TrainOptions};
use learnpath_cli::config::{ExperimentConfig, VariantName};
use learnpath_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "learnpath", version, about = "Adaptive exercise-path recommender experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    A2c,
    Ppo,
    Eppo,
}

impl From<VariantArg> for VariantName {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::A2c => VariantName::A2c,
            VariantArg::Ppo => VariantName::Ppo,
            VariantArg::Eppo => VariantName::Eppo,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with this one seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (or file, for gen-logs).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent for every configured seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the last checkpoint of each seed.
        #[arg(long)]
        resume: bool,
    },
    /// Train (or finish) several configurations and compare them.
    Compare {
        /// Two or more configurations.
        #[arg(long = "config", value_name = "PATH", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Final-window length in episodes.
        #[arg(long, value_name = "N")]
        window: Option<usize>,
    },
    /// Roll out a trained policy on fresh students.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        students: Option<usize>,
    },
    /// Write synthetic interaction logs from analytic students.
    GenLogs {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N")]
        students: Option<usize>,
        #[arg(long, value_name = "N")]
        steps: Option<usize>,
    },
    /// Validate an interaction-log file against the catalog.
    IngestCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        logs: PathBuf,
    },
    /// Fit akt-lite on an interaction-log file.
    TrainAkt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        logs: PathBuf,
    },
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seeds = vec![seed];
    }
    if let Some(v) = common.variant {
        cfg.agent.variant = v.into();
    }
    if let Some(out) = &common.out {
        cfg.run.out_dir = absolute(out)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| CliError::io(p, e))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { common, resume } => {
            let cfg = load(&common)?;
            let runs = commands::train(&cfg, TrainOptions { resume, quiet: false })?;
            for r in runs {
                let last = r.history.last().map_or("no episodes".to_string(), |e| format!("last final APR {:.4}", e.final_apr));
                println!("{} seed {}: {} episodes, {last} -> {}", cfg.variant(), r.seed, r.history.len(), r.dir.display());
            }
        }
        Command::Compare { configs, out, window } => {
            let cfgs = configs.iter().map(|p| ExperimentConfig::load(p)).collect::<CliResult<Vec<_>>>()?;
            let opts = CompareOptions {
                out: out.as_deref().map(absolute).transpose()?,
                window,
                quiet: false,
            };
            for r in commands::compare(&cfgs, &opts)? {
                let (a, l, c) = (r.final_apr(), r.path_length(), r.cumulative_reward());
                println!(
                    "{}: final APR {:.4}±{:.4}  length {:.1}±{:.1}  reward {:.1}±{:.1}  DIV {}",
                    r.label,
                    a.0,
                    a.1,
                    l.0,
                    l.1,
                    c.0,
                    c.1,
                    r.div().map_or("NA".into(), |d| format!("{:.4}±{:.4}", d.0, d.1))
                );
            }
        }
        Command::Eval {
            common,
            checkpoint,
            students,
        } => {
            let cfg = load(&common)?;
            let opts = EvalOptions {
                checkpoint: checkpoint.as_deref().map(absolute).transpose()?,
                students,
                seed: common.seed,
                out: None,
            };
            let report = commands::eval(&cfg, &opts)?;
            let n = report.rollouts.len().max(1) as f64;
            println!(
                "{} students, mean final APR {:.4}, mean length {:.1}, DIV {} -> {}",
                report.rollouts.len(),
                report.rollouts.iter().map(|r| r.final_apr).sum::<f64>() / n,
                report.rollouts.iter().map(|r| r.transitions.len() as f64).sum::<f64>() / n,
                report.div.map_or("NA".into(), |d| format!("{d:.4}")),
                report.out_dir.display()
            );
        }
        Command::GenLogs { common, students, steps } => {
            let out = common.out.as_deref().map(absolute).transpose()?;
            let cfg = load(&Common { out: None, ..common })?;
            let opts = GenLogsOptions {
                students,
                steps,
                seed: cfg.run.seeds.first().copied(),
                out,
            };
            let (path, logs) = commands::gen_logs(&cfg, &opts)?;
            println!("{} students -> {}", logs.len(), path.display());
        }
        Command::IngestCheck { common, logs } => {
            let cfg = load(&common)?;
            let parsed = commands::ingest_logs(&cfg, &logs)?;
            let rows: usize = parsed.iter().map(|s| s.log.len()).sum();
            println!("ok: {} students, {rows} interactions", parsed.len());
        }
        Command::TrainAkt { common, logs } => {
            let cfg = load(&common)?;
            let parsed = commands::ingest_logs(&cfg, &logs)?;
            let run = commands::train_akt(&cfg, &parsed, &TrainAktOptions { seed: common.seed, out: None })?;
            let first = run.curve.first().copied().unwrap_or(f64::NAN);
            let last = run.curve.last().copied().unwrap_or(f64::NAN);
            print!("loss {first:.4} -> {last:.4}");
            if let Some(a) = run.accuracy {
                print!(", held-out accuracy {:.4} vs majority {:.4}", a.accuracy, a.baseline);
            }
            println!(" -> {}", run.checkpoint.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::new("usage", first);
            eprintln!("{err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

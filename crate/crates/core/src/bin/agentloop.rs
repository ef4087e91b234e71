use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agentloop::cli::{self, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agentloop", version, about = "Multi-turn agentic generation: episodes, training, corpus building")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode per query.
    Run {
        #[command(flatten)]
        common: Common,
        /// Query JSONL; overrides agent.queries.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Train the toy policy in the simulator.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Build the cold-start corpus.
    BuildSft {
        #[command(flatten)]
        common: Common,
        /// Pool JSONL; a simulated pool is used when absent.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Report diagnostic rates for a trajectory or corpus file.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Re-run the corpus screens on a finished corpus.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        reports: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(&common.config, |k| std::env::var(k).ok())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { common, queries } => {
            let (mut cfg, out) = load(&common)?;
            if queries.is_some() {
                cfg.agent.queries = queries;
            }
            let s = cli::cmd_run(&cfg, &out)?;
            println!("episodes {}  terminated {}  tool errors {}", s.episodes, s.terminated, s.tool_errors);
            println!("mean rounds {:.3}", s.mean_rounds);
            for (r, p) in s.pass_rate_by_round.iter().enumerate() {
                println!("pass rate by round {}: {:.4}", r + 1, p);
            }
        }
        Command::Train { common } => {
            let (cfg, out) = load(&common)?;
            let metrics = cli::cmd_train(&cfg, &out, &mut |m| {
                if m.iteration % 10 == 0 {
                    eprintln!(
                        "iteration {:4}  reward {:.4}  rounds {:.3}",
                        m.iteration, m.mean_reward, m.mean_rounds
                    );
                }
            })?;
            println!("{} iterations written to {}", metrics.len(), out.join(cli::METRICS_FILE).display());
        }
        Command::BuildSft { common, pool } => {
            let (cfg, out) = load(&common)?;
            let report = cli::cmd_build_sft(&cfg, pool.as_deref(), &out)?;
            for s in &report.stages {
                println!("{:16} in {:6} kept {:6}  {:?}", s.stage, s.input, s.retained, s.rejections);
            }
            println!("corpus {} of {} accepted", report.corpus, report.accepted);
            if !report.violations.is_empty() {
                return Err(CliError::Validation(report.violations.len()));
            }
        }
        Command::Diagnose { common, input } => {
            let (_, out) = load(&common)?;
            print!("{}", cli::cmd_diagnose(&input, &out)?.table());
        }
        Command::Validate { common, input, reports } => {
            let (cfg, _) = load(&common)?;
            let violations = cli::cmd_validate(&cfg, &input, reports.as_deref())?;
            for v in &violations {
                println!("{} {} {}", v.id, v.rule, v.detail);
            }
            if !violations.is_empty() {
                return Err(CliError::Validation(violations.len()));
            }
            println!("ok: {}", Path::new(&input).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("agentloop: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `embodinav` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::json;

use embodinav_core::sim::Mode;
use embodinav_core::tasks::{SplitName, TaskType};
use embodinav_service::agents::AgentKind;
use embodinav_service::commands::{self, parse_mode, GenEpisodes, RunArgs};

#[derive(Parser)]
#[command(name = "embodinav", version, about = "Procedural indoor scenes, navigation episodes, simulation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    SplitName::ALL
        .into_iter()
        .find(|x| x.as_str() == s)
        .ok_or_else(|| format!("unknown split `{s}`"))
}

fn parse_tasks(s: &str) -> Result<Vec<TaskType>, String> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes with seeds `seed`, `seed+1`, ...
    GenScenes {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Generator parameters as JSON.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Build a dataset of episodes from a directory of scenes.
    GenEpisodes {
        #[arg(long)]
        scenes: PathBuf,
        /// Comma-separated task types.
        #[arg(long, value_parser = parse_tasks)]
        tasks: Option<Vec<TaskType>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Dataset configuration as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Refine instructions through REFINEMENT_ENDPOINT.
        #[arg(long)]
        refine: bool,
    },
    /// Run a built-in agent over a dataset and write a metrics report.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "oracle_follower")]
        agent: AgentKind,
        #[arg(long, default_value = "strict", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_parser = parse_split)]
        split: Option<SplitName>,
        #[arg(long, value_parser = parse_tasks)]
        tasks: Option<Vec<TaskType>>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for per-episode CSV and metadata files.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Score logged trajectories offline.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve the wire protocol on a socket or the standard streams.
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
        listen: Option<String>,
        #[arg(long)]
        stdio: bool,
        #[arg(long, default_value = "strict", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Serve one episode to a human client and record the outcome.
    HumanSession {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        episode: String,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "strict", value_parser = parse_mode)]
        mode: Mode,
    },
    /// Apply human review decisions to a dataset manifest.
    ImportReviews {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
    },
}

fn print(v: serde_json::Value) {
    println!("{v}");
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenScenes { count, seed, out, params } => {
            let files = commands::gen_scenes(count, seed, &out, params.as_deref())?;
            print(json!({ "scenes": files.len(), "out": out }));
        }
        Command::GenEpisodes { scenes, tasks, seed, out, config, refine } => {
            let n = commands::gen_episodes(&GenEpisodes {
                scenes: &scenes,
                tasks,
                seed,
                out: &out,
                config: config.as_deref(),
                refine,
            })?;
            print(json!({ "episodes": n, "out": out }));
        }
        Command::Run { dataset, agent, mode, report, split, tasks, limit, seed, trajectories, max_steps } => {
            let rep = commands::run(&RunArgs {
                dataset: &dataset,
                agent,
                mode,
                report: &report,
                split,
                tasks,
                limit,
                seed,
                trajectories: trajectories.as_deref(),
                max_steps,
            })?;
            print(json!({ "report": report, "aggregates": rep.aggregates }));
        }
        Command::Eval { dataset, trajectories, report } => {
            let rep = commands::eval_dir(&dataset, &trajectories)?;
            commands::write_report(&report, &rep)?;
            print(json!({ "report": report, "aggregates": rep.aggregates }));
        }
        Command::Serve { dataset, listen, stdio, mode, max_steps } => {
            let data = commands::service_data(&dataset, mode, max_steps)?;
            commands::serve(data, if stdio { None } else { listen.as_deref() })?;
        }
        Command::HumanSession { dataset, episode, listen, out, mode } => {
            let data = commands::service_data(&dataset, mode, None)?;
            let rec = commands::human_session(data, &episode, &listen, &out)?;
            print(json!({
                "episode_id": rec.episode.episode_id,
                "done_reason": rec.reply.done_reason,
                "metrics": rec.reply.result.metrics,
                "out": out,
            }));
        }
        Command::ImportReviews { dataset, reviews } => {
            let n = commands::import_reviews(&dataset, &reviews)?;
            print(json!({ "applied": n }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": e.to_string().trim() } }));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": "runtime", "message": format!("{e:#}") } }));
            ExitCode::FAILURE
        }
    }
}

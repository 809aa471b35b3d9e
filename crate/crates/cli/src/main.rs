use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resolvent_lab_cli::{bundled, runner, tasks, Failure, Scenario};

#[derive(Parser)]
#[command(name = "resolvent-lab", version, about = "Run resolvent and spectral-bound scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        /// Threads for independent sweep points (default: sequential).
        #[arg(long, value_name = "N", default_value_t = 1)]
        parallel_sweeps: usize,
        /// Output directory, overriding the scenario's own.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios.
    ListScenarios,
    /// Print the parameter schema of a task.
    Describe { task: String },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, parallel_sweeps, out } => {
            let opts = match runner::RunOptions::from_env(parallel_sweeps, out) {
                Ok(o) => o,
                Err(f) => {
                    eprintln!("{f}");
                    return code(f.exit_code());
                }
            };
            let report = runner::run(&scenario, &opts);
            for t in &report.tasks {
                let extra = if t.failed_checks.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", t.failed_checks.join(", "))
                };
                println!("task {:02} {:<16} {:<12} {:>8.3} s{extra}", t.index, t.task, t.status, t.seconds);
            }
            if let Some(dir) = &report.out_dir {
                println!("artifacts: {}", dir.display());
            }
            if let Some(f) = &report.failure {
                eprintln!("{f}");
            }
            code(report.exit_code)
        }
        Command::ListScenarios => {
            for (name, text) in bundled::SCENARIOS {
                let desc = Scenario::parse(text).map(|s| s.description).unwrap_or_default();
                println!("{name:<26} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Describe { task } => match tasks::describe(&task) {
            Some(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                let f =
                    Failure::Config(format!("unknown task '{task}'; known tasks: {}", tasks::TASK_NAMES.join(", ")));
                eprintln!("{f}");
                code(f.exit_code())
            }
        },
    }
}

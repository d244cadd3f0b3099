use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use szego_cli::experiments::{run_path, RunError, RunOptions, KINDS};
use szego_cli::output::Summary;
use szego_cli::registry::NAMED;
use szego_cli::verify::{report_lines, verify};

#[derive(Parser)]
#[command(name = "szego", version, about = "Numerical lab for the cubic Szegő equation")]
struct Cli {
    /// Progress messages on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment kinds and shipped named configurations.
    ListExperiments,
    /// Run the full acceptance suite.
    Verify {
        #[arg(long, default_value = "verify-out")]
        out: PathBuf,
    },
}

fn finish(result: Result<Summary, RunError>, lines: impl Fn(&Summary) -> Vec<String>) -> ExitCode {
    match result {
        Ok(summary) => {
            for line in lines(&summary) {
                println!("{line}");
            }
            if summary.pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { verbose: cli.verbose };
    match cli.command {
        Command::Run { config, out } => {
            let out = out.unwrap_or_else(|| {
                let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                PathBuf::from("out").join(stem)
            });
            let dir = out.clone();
            finish(run_path(&config, &out, opts), move |s| {
                let mut lines = vec![];
                for c in &s.checks {
                    let value = c.value.map_or("missing".to_string(), |v| format!("{v:.6e}"));
                    let tag = if c.pass { "ok  " } else { "FAIL" };
                    lines.push(format!("{tag} {} = {value} ({:?} {:e})", c.metric, c.relation, c.threshold));
                }
                if let Some(e) = &s.error {
                    lines.push(format!("error during computation: {e}"));
                }
                lines.push(format!("{} {} -> {}", if s.pass { "PASS" } else { "FAIL" }, s.name, dir.display()));
                lines
            })
        }
        Command::ListExperiments => {
            println!("kinds:");
            for (kind, about) in KINDS {
                println!("  {kind:<16} {about}");
            }
            println!("named configurations:");
            for (name, _) in NAMED {
                println!("  {name}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify { out } => finish(verify(&out, opts), report_lines),
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmcf_core::config::{parse_config, ScenarioConfig};
use cmcf_core::experiment::{barrier_csv, run_experiment, separation_report, verify_barriers, verify_manifest};
use cmcf_core::group::{verify_structure, Preset};
use cmcf_core::par;

#[derive(Parser)]
#[command(name = "cmcf", version, about = "Horizontal mean curvature flow in Carnot groups")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifact directory.
    Run { config: PathBuf },
    /// Check the structure identities of a preset group.
    CheckGroup { preset: String },
    /// Evaluate the barrier inequality of a scenario's [barrier] section.
    VerifyBarriers { config: PathBuf },
    /// Containment and separation of the zero sets of two scenarios.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify an artifact directory against its manifest and summarize it.
    Report { dir: PathBuf },
}

enum Failure {
    /// Usage or configuration problem (exit 2).
    Usage(String),
    /// An asserted invariant failed (exit 1).
    Violation(Vec<String>),
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let out = run_experiment(&cfg).map_err(usage)?;
            for line in &out.summary {
                println!("{line}");
            }
            println!("artifacts in {}", out.dir.display());
            if out.violations.is_empty() {
                Ok(())
            } else {
                Err(Failure::Violation(out.violations))
            }
        }
        Command::CheckGroup { preset } => {
            let p: Preset = preset.parse().map_err(usage)?;
            let report = verify_structure(&p.spec());
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Violation(report.violations))
            }
        }
        Command::VerifyBarriers { config } => {
            let cfg = load(&config)?;
            let r = verify_barriers(&cfg).map_err(usage)?;
            print!("{}", barrier_csv(&r));
            if r.passed() {
                Ok(())
            } else {
                Err(Failure::Violation(vec![format!(
                    "residual {:?} above slack {:?} at {:?}, t={:?}",
                    r.max_residual, r.slack, r.worst_point, r.worst_time
                )]))
            }
        }
        Command::Compare {
            config_a,
            config_b,
            out,
        } => {
            let (a, b) = (load(&config_a)?, load(&config_b)?);
            let r = separation_report(&a, &b).map_err(usage)?;
            let csv = r.to_csv();
            print!("{csv}");
            if let Some(path) = out {
                fs::write(&path, &csv).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            match r.containment_lost() {
                Some(t) => Err(Failure::Violation(vec![format!("containment lost at t={t:?}")])),
                None => Ok(()),
            }
        }
        Command::Report { dir } => {
            let bad = verify_manifest(&dir).map_err(usage)?;
            let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap_or_default();
            println!("{} files listed", manifest.lines().count());
            if let Ok(m) = fs::read_to_string(dir.join("metrics.csv")) {
                if let Some(last) = m.lines().last() {
                    println!("final metrics: {last}");
                }
            }
            for name in ["radius.csv", "cauchy_report.csv", "comparison.csv", "barrier.csv"] {
                if let Ok(t) = fs::read_to_string(dir.join(name)) {
                    println!("== {name}");
                    print!("{t}");
                }
            }
            if bad.is_empty() {
                println!("manifest ok");
                Ok(())
            } else {
                Err(Failure::Violation(bad))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match par::with_threads(par::threads_from_env(), || run(cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(v)) => {
            for line in v {
                eprintln!("violation: {line}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

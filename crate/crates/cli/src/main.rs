//! Command-line driver: scenario runs, regime classification, theorem
//! verification and transcript audits.
//!
//! Exit status is 0 on success, 1 when an audit or verification fails and 2
//! when the input is rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trustmarket::harness::{
    audit_transcript, classify_scenario, export_report, run_scenario, verify_theorems, GridSpec,
    HarnessError, ReportFormat, RunMode, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "trustmarket", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write rounds.csv, report.json and transcript.jsonl.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "both")]
        mode: RunMode,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify the equilibrium regime of every seller.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every closed-form sweep and the classifier/simulator agreement.
    VerifyTheorems {
        /// JSON grid specification; defaults apply to missing sections.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Re-audit an exported protocol transcript.
    Audit {
        #[arg(long)]
        transcript: PathBuf,
    },
}

enum Failure {
    Input(String),
    Run(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config { .. }
            | HarnessError::Io { .. }
            | HarnessError::Report(_)
            | HarnessError::Transcript(_) => Failure::Input(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

fn run(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Simulate {
            config,
            mode,
            out,
            seed,
        } => {
            let mut scenario = ScenarioConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let bundle = run_scenario(&scenario, mode)?;
            fs::create_dir_all(&out)
                .map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
            export_report(&bundle, ReportFormat::Csv, &out.join("rounds.csv"))?;
            export_report(&bundle, ReportFormat::Json, &out.join("report.json"))?;
            if let Some(t) = &bundle.transcript {
                let path = out.join("transcript.jsonl");
                fs::write(&path, t)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            }
            let failed: Vec<u64> = bundle
                .report
                .audits
                .iter()
                .filter(|a| !a.report.pass)
                .map(|a| a.t)
                .collect();
            eprintln!(
                "{} rounds, mode {mode:?}, audit {}",
                bundle.report.rounds,
                match bundle.report.audit_pass {
                    None => "not run".to_string(),
                    Some(true) => "pass".to_string(),
                    Some(false) => format!("FAILED in rounds {failed:?}"),
                }
            );
            Ok(bundle.passed())
        }
        Command::Classify { config } => {
            let scenario = ScenarioConfig::from_json(&read(&config)?)?;
            let report = classify_scenario(&scenario)?;
            print_json(&report);
            Ok(report.verified != Some(false))
        }
        Command::VerifyTheorems { grid } => {
            let spec = match grid {
                Some(path) => GridSpec::from_json(&read(&path)?)?,
                None => GridSpec::default(),
            };
            let report = verify_theorems(&spec);
            print_json(&report);
            Ok(report.pass)
        }
        Command::Audit { transcript } => {
            let audit = audit_transcript(&read(&transcript)?)?;
            print_json(&audit);
            Ok(audit.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Run(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risopt::flops::write_reports;
use risopt::harness::{run_complexity, run_scenario, write_results, Preset, Scenario, SimConfig};

#[derive(Parser)]
#[command(name = "risopt", version, about = "RIS-assisted MIMO-OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and write mean SE per sweep point and arm.
    Simulate {
        /// se_vs_snr, plos_vs_se, distance_vs_se or complexity_table
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Measure optimizer iterations, FLOPs and runtime against RIS size.
    Complexity {
        /// Comma-separated RIS element counts.
        #[arg(long, value_delimiter = ',')]
        n_ris: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "paper")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, extra: Vec<(String, String)>) -> risopt::Result<SimConfig> {
        let preset: Preset = self.preset.parse()?;
        let mut overrides = extra;
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        if let Some(trials) = self.trials {
            overrides.push(("trials".into(), trials.to_string()));
        }
        if let Some(snr) = &self.snr_db {
            overrides.push(("snr_db".into(), snr.clone()));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| risopt::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        SimConfig::load(preset, self.config.as_deref(), &overrides)
    }

    fn output(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(File::create(path)?),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> risopt::Result<()> {
    match cli.command {
        Command::Simulate { scenario, common } => {
            let scenario: Scenario = scenario.parse()?;
            let cfg = common.load(Vec::new())?;
            if scenario == Scenario::ComplexityTable {
                write_reports(common.output()?, &run_complexity(&cfg)?)
            } else {
                write_results(common.output()?, &run_scenario(&cfg, scenario)?)
            }
        }
        Command::Complexity { n_ris, common } => {
            let extra = n_ris
                .map(|n| {
                    let list: Vec<String> = n.iter().map(usize::to_string).collect();
                    vec![("complexity_n_ris".to_string(), list.join(","))]
                })
                .unwrap_or_default();
            let cfg = common.load(extra)?;
            write_reports(common.output()?, &run_complexity(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ risopt::Error::UnknownScenario(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

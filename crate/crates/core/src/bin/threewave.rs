use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use threewave::harness::{self, exit_code, RunConfig};
use threewave::stepper::JacobianMode;
use threewave::Error;

#[derive(Parser)]
#[command(name = "threewave", version, about = "3-wave kinetic equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write series, snapshots and run.json.
    Run(ConfigArgs),
    /// Grid self-convergence study, written to convergence.csv.
    Convergence(ConfigArgs),
    /// Fit the late-time decay slope of a series file and detect phases.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long = "t-lo", requires = "t_hi")]
        t_lo: Option<f64>,
        #[arg(long = "t-hi", requires = "t_lo")]
        t_hi: Option<f64>,
        /// Directory for fit.json; defaults to the series directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long)]
    dk: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Reuse one Jacobian factorization per step.
    #[arg(long)]
    frozen_jacobian: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(self) -> threewave::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.scenario {
            cfg.scenario = v;
        }
        if let Some(v) = self.table {
            cfg.table = Some(v);
        }
        if let Some(v) = self.length {
            cfg.length = v;
        }
        if let Some(v) = self.dk {
            cfg.dk = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.atol {
            cfg.atol = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        if self.frozen_jacobian {
            cfg.jacobian = JacobianMode::FrozenPerStep;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let outcome = harness::run(&args.load()?)?;
            let report = &outcome.report;
            println!("{}", serde_json::to_string_pretty(report)?);
            if let Some(err) = outcome.error() {
                eprintln!("{}", serde_json::to_string(err)?);
                std::process::exit(err.exit_code);
            }
        }
        Command::Convergence(args) => {
            let cfg = args.load()?;
            println!(
                "{}",
                harness::convergence_csv(&harness::cmd_convergence(&cfg)?).trim_end()
            );
        }
        Command::Fit {
            series,
            t_lo,
            t_hi,
            out,
        } => {
            let window = t_lo.zip(t_hi);
            let report = harness::cmd_fit(&series, window, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = harness::ErrorRecord::new(&err, None);
            eprintln!("error: {err}");
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}

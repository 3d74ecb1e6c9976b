//! `frailty`: fit, forecast, back-test and simulate stochastic frailty mortality models.

mod config;
mod error;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_pairs, Settings};
use error::CliError;
use run::{cmd_backtest, cmd_fit, cmd_forecast, cmd_simulate, sha256_hex, Run};

#[derive(Parser)]
#[command(name = "frailty", version, about = "Stochastic frailty mortality models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default runs/<timestamp>-<config hash>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for the parallel parts (0 = all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a frailty model to HMD-layout deaths and exposures.
    Fit(Common),
    /// Forecast from a fit run directory.
    Forecast {
        /// Directory written by `frailty fit`.
        #[arg(long, value_name = "DIR")]
        fit: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Choose the frailty variance by out-of-sample forecast fit.
    Backtest(Common),
    /// Simulate deaths from a frailty model and write them in HMD layout.
    Simulate(Common),
}

fn settings(common: &Common, base: Option<&Path>) -> Result<Settings, CliError> {
    let mut s = match base {
        Some(fit_dir) => Settings::from_file(&fit_dir.join("config.txt"))?,
        None => Settings::defaults(PathBuf::from(".")),
    };
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        if base.is_none() {
            s = Settings::from_file(path)?;
        } else {
            for (k, v) in parse_pairs(&text, &path.display().to_string())? {
                s.set(&k, &v)?;
            }
        }
    }
    for pair in &common.set {
        s.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        s.set("seed", &seed.to_string())?;
    }
    if let Some(n) = common.threads {
        s.set("threads", &n.to_string())?;
    }
    Ok(s)
}

fn default_out(command: &str, s: &Settings) -> PathBuf {
    let hash = sha256_hex(format!("{command}\n{}", s.echo()).as_bytes());
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    PathBuf::from("runs").join(format!("{stamp}-{}", &hash[..8]))
}

fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let (name, common, fit_dir) = match &cli.command {
        Command::Fit(c) => ("fit", c, None),
        Command::Forecast { fit, common } => ("forecast", common, Some(fit.as_path())),
        Command::Backtest(c) => ("backtest", c, None),
        Command::Simulate(c) => ("simulate", c, None),
    };
    let s = settings(common, fit_dir)?;
    let threads = s.usize("threads")?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let out = common.out.clone().unwrap_or_else(|| default_out(name, &s));
    let mut run = Run::new(name, s, out);
    match &cli.command {
        Command::Fit(_) => cmd_fit(&mut run)?,
        Command::Forecast { fit, .. } => cmd_forecast(&mut run, fit)?,
        Command::Backtest(_) => cmd_backtest(&mut run)?,
        Command::Simulate(_) => cmd_simulate(&mut run)?,
    }
    run.finish()
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("frailty: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

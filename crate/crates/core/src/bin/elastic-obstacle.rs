use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastic_obstacle::cli::{
    cmd_check, cmd_elastica, cmd_run, cmd_stationary, cmd_thresholds, error_json, exit_code,
    full_arch_length, HorizonSpec, Overrides, RunConfig,
};
use elastic_obstacle::Error;

#[derive(Parser)]
#[command(
    name = "elastic-obstacle",
    version,
    about = "Elastic flow of graphs above an obstacle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow from a JSON configuration and write its artifacts.
    #[command(allow_negative_numbers = true)]
    Run {
        config: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Horizon: a number or "auto".
        #[arg(long = "T")]
        horizon: Option<HorizonSpec>,
        #[arg(long)]
        obstacle_height: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print c0, h* and the clamped threshold as JSON.
    Thresholds,
    /// Write the symmetric stationary profile as CSV (x,u).
    Stationary {
        #[arg(long)]
        height: f64,
        #[arg(long, default_value_t = 128)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the rectangular elastica as CSV (s,k,theta,x,y).
    Elastica {
        /// Arc length; defaults to the full arch 2K(1/sqrt 2).
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the invariants of a run directory (or its flow.json).
    Check { bundle: PathBuf },
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run {
            config,
            lambda,
            m,
            n,
            horizon,
            obstacle_height,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&Overrides {
                lambda,
                m,
                n,
                horizon,
                obstacle_height,
                output_dir: out,
            })?;
            let report = cmd_run(&cfg)?;
            let summary = serde_json::json!({
                "status": report.result.status,
                "output_dir": cfg.output_dir,
                "summary": report.result.summary,
            });
            println!("{summary}");
            Ok(report.exit_code)
        }
        Command::Thresholds => {
            println!("{}", serde_json::to_string_pretty(&cmd_thresholds())?);
            Ok(0)
        }
        Command::Stationary { height, m, out } => {
            let mut w = sink(out.as_deref())?;
            cmd_stationary(height, m, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Elastica {
            s_max,
            samples,
            out,
        } => {
            let mut w = sink(out.as_deref())?;
            cmd_elastica(s_max.unwrap_or_else(full_arch_length), samples, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Check { bundle } => {
            let (verdict, code) = cmd_check(&bundle)?;
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

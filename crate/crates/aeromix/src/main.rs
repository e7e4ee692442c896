use std::path::PathBuf;
use std::process::ExitCode;

use aeromix::{run, AppError, Command, ErrorClass, PipelineConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aeromix",
    version,
    about = "Multi-sensor AOD fusion for PM2.5 estimation"
)]
struct Cli {
    /// Pipeline configuration (`key=value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated scenario ids, e.g. `1,3,8`.
    #[arg(long, global = true)]
    scenarios: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all logical CPUs). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Extra `key=value` config override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build per-product and fused training matrices.
    Preprocess,
    /// Model PM2.5 from quality-weighted fused AOD.
    FuseData,
    /// Train and evaluate decision-level fusion scenarios.
    FuseDecision,
    /// Build a PM2.5 map from quasi-stations and ground stations.
    Map {
        /// Map date (YYYY-MM-DD); defaults to `map.date`.
        #[arg(long)]
        date: Option<String>,
    },
    /// Generate a synthetic scene.
    Synth,
    /// Compare GBT, random forest and linear models.
    Eval,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AEROMIX_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", AppError::config(first));
            return ExitCode::from(ErrorClass::Config.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let mut overrides = Vec::new();
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| AppError::config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(list) = &cli.scenarios {
        overrides.push(("scenarios".into(), list.clone()));
    }
    let command = match cli.command {
        Cmd::Preprocess => Command::Preprocess,
        Cmd::FuseData => Command::FuseData,
        Cmd::FuseDecision => Command::FuseDecision,
        Cmd::Map { date } => {
            if let Some(d) = date {
                overrides.push(("map.date".into(), d));
            }
            Command::Map
        }
        Cmd::Synth => Command::Synth,
        Cmd::Eval => Command::Eval,
    };
    let cfg = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    run(command, &cfg, &cli.out, cli.threads)?;
    println!(
        "{} finished; outputs in {}",
        command.name(),
        cli.out.display()
    );
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irs_multicast::harness::{
    run_experiment, summarize, write_outputs, Algorithm, ExperimentConfig, SweepParam,
};

/// Monte-Carlo experiments for IRS-aided multigroup multicast precoding.
#[derive(Parser, Debug)]
#[command(name = "irs-mm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output` in the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a one-parameter sweep, starting from defaults or a config file.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated algorithm labels, e.g. irs_alg1,irs_alg2.
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn execute(cfg: &ExperimentConfig) -> irs_multicast::Result<serde_json::Value> {
    let res = run_experiment(cfg)?;
    if res.rows.is_empty() {
        let first = res.failures.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(irs_multicast::Error::Config(format!(
            "every run failed ({} failures); first: {first}",
            res.failures.len()
        )));
    }
    write_outputs(&res, &cfg.output)?;
    Ok(serde_json::json!({
        "status": "ok",
        "output": cfg.output,
        "rows": res.rows.len(),
        "failures": res.failures.len(),
        "summary": summarize(&res.rows),
    }))
}

fn dispatch(cli: Cli) -> irs_multicast::Result<serde_json::Value> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            execute(&cfg)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            Ok(serde_json::json!({
                "status": "ok",
                "sweep_points": cfg.sweep_points()?.len(),
                "trials": cfg.trials,
            }))
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
            trials,
            algorithms,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            cfg.sweep.param = SweepParam::parse(&param)?;
            cfg.sweep.values = values;
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if !algorithms.is_empty() {
                cfg.algorithms = algorithms
                    .iter()
                    .map(|a| Algorithm::parse(a))
                    .collect::<irs_multicast::Result<_>>()?;
            }
            execute(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            let kind = match &err {
                irs_multicast::Error::Config(_) => "config",
                irs_multicast::Error::Parse(_) => "parse",
                irs_multicast::Error::Io { .. } | irs_multicast::Error::Csv { .. } => "io",
                _ => "runtime",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "status": "error", "kind": kind, "message": err.to_string() })
            );
            ExitCode::from(2)
        }
    }
}

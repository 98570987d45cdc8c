use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftlab_cli::catalog::{find, CATALOG};
use driftlab_cli::config::{ExperimentConfig, Value};
use driftlab_cli::{record, CliError, OUT_DIR_ENV, RESULT_SCHEMA};

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Experiments on Brownian motion with variable drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its JSON result record.
    Run(RunArgs),
    /// List experiments with their parameter schemas.
    List {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a config (with overrides) and print the resolved version.
    Validate(ConfigArgs),
    /// Print a config for an experiment with all parameters at their defaults.
    Example { experiment: String },
    /// Print the JSON schema of result records.
    Schema,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file.
    config: Option<PathBuf>,
    /// Experiment name, when no config file is given or to replace its experiment.
    #[arg(short, long)]
    experiment: Option<String>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file; defaults to the config's `output`, then to
    /// `$DRIFTLAB_OUT_DIR/<experiment>-seed<seed>.json`, then to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write per-replica CSV tables beside the JSON record.
    #[arg(long)]
    csv: bool,
}

fn build_config(a: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut c = match (&a.config, &a.experiment) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::new(name),
        (None, None) => return Err(CliError::Validation("give a config file or --experiment".into())),
    };
    if let (Some(_), Some(name)) = (&a.config, &a.experiment) {
        c.experiment = name.clone();
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set {kv}: expected NAME=VALUE")))?;
        c.parameters.insert(k.trim().to_string(), Value::parse_cli(v));
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(r) = a.replicas {
        c.replicas = r;
    }
    Ok(c)
}

fn output_path(args: &RunArgs, c: &ExperimentConfig) -> Option<PathBuf> {
    args.output.clone().or_else(|| c.output.clone()).or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{}-seed{}.json", c.experiment, c.seed)))
    })
}

fn list(json: bool) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        return writeln!(out, "{}", serde_json::to_string_pretty(&*CATALOG).expect("catalog serializes"));
    }
    for e in CATALOG.iter() {
        writeln!(out, "{}  [{}]", e.name, e.metric)?;
        writeln!(out, "    {}", e.claim)?;
        for p in &e.params {
            writeln!(out, "    {:<16} {:<40} {}", p.name, serde_json::to_string(&p.kind).unwrap(), p.help)?;
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List { json } => {
            // a closed pipe (`driftlab list | head`) is not an error
            if let Err(e) = list(json) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
        Command::Schema => print!("{RESULT_SCHEMA}"),
        Command::Example { experiment } => {
            let e = find(&experiment).ok_or_else(|| CliError::Validation(format!("unknown experiment {experiment:?}")))?;
            print!("{}", e.example_config().to_toml());
        }
        Command::Validate(a) => {
            let (resolved, _) = build_config(&a)?.resolve()?;
            print!("{}", resolved.to_toml());
        }
        Command::Run(a) => {
            let config = build_config(&a.config)?;
            let path = output_path(&a, &config);
            if a.csv && path.is_none() {
                return Err(CliError::Validation("--csv needs an output file or DRIFTLAB_OUT_DIR".into()));
            }
            let out = record::run(&config)?;
            match path {
                Some(p) => {
                    record::write(&out, &p, a.csv)?;
                    eprintln!("wrote {}", p.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&out.record).expect("records serialize")),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

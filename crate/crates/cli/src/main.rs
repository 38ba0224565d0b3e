//! Command-line front end. Every subcommand reads the same experiment
//! config (`key = value` lines) with `--set key=value` overrides on top.
//! Relative output directories are resolved under `$ALIGN_RUDDER_OUT`
//! when it is set.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use align_rudder::harness::ExperimentConfig;
use align_rudder::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "align-rudder", version, about = "Reward redistribution from aligned demonstrations")]
struct Cli {
    /// Experiment config file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set slip=0.05`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; replaces `output_dir` from the config.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct Cell {
    /// Number of demonstrations.
    #[arg(short = 'n', long, default_value_t = 10)]
    demos: usize,
    /// Seed index within the experiment.
    #[arg(long, default_value_t = 0)]
    seed: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate demonstrations as trajectory CSVs.
    Demos {
        #[command(flatten)]
        cell: Cell,
    },
    /// Cluster states into events and map demonstrations to event sequences.
    Cluster {
        /// Trajectory CSVs, or directories holding them.
        #[arg(required = true)]
        demos: Vec<PathBuf>,
        /// Seed of the random clustering rollouts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the scoring matrix and align event sequences.
    Align {
        /// Event sequences in FASTA form.
        sequences: PathBuf,
    },
    /// Turn an alignment into a position-specific scoring matrix.
    Pssm {
        #[arg(long)]
        msa: PathBuf,
        #[arg(long)]
        scoring: PathBuf,
    },
    /// Fit the redistribution on demonstrations and redistribute sequences.
    Redistribute {
        #[arg(long)]
        pssm: PathBuf,
        /// Demonstration event sequences the model is fitted on.
        #[arg(long)]
        demos: PathBuf,
        /// Sequences to redistribute; defaults to the demonstrations.
        #[arg(long)]
        sequences: Option<PathBuf>,
    },
    /// Train one method on one (demo count, seed) cell.
    Train {
        #[arg(short, long, default_value = "align-rudder")]
        method: String,
        #[command(flatten)]
        cell: Cell,
    },
    /// Run the full method × demo count × seed grid and export CSVs.
    Experiment {
        /// Skip writing per-cell MSA, scoring and PSSM files.
        #[arg(long)]
        no_artifacts: bool,
    },
    /// Mann-Whitney U test between two samples.
    Stats {
        /// Numbers separated by whitespace or commas.
        a: PathBuf,
        b: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_toml_str(&commands::read(path)?)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let out = commands::output_root(&config);
    let written = match cli.command {
        Command::Demos { cell } => commands::demos(&config, &out, cell.demos, cell.seed)?,
        Command::Cluster { demos, seed } => commands::cluster(&config, &out, &demos, seed)?,
        Command::Align { sequences } => commands::align(&config, &out, &sequences)?,
        Command::Pssm { msa, scoring } => commands::pssm(&config, &out, &msa, &scoring)?,
        Command::Redistribute { pssm, demos, sequences } => {
            commands::redistribute(&out, &pssm, &demos, sequences.as_deref())?
        }
        Command::Train { method, cell } => commands::train(&config, &out, &method, cell.demos, cell.seed)?,
        Command::Experiment { no_artifacts } => commands::experiment(&config, &out, !no_artifacts)?,
        Command::Stats { a, b } => {
            commands::stats(&a, &b)?;
            Vec::new()
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn report(e: &Error) -> ExitCode {
    let category = e.category();
    let body = serde_json::json!({
        "error": category.as_str(),
        "exit_code": category.exit_code(),
        "message": e.to_string(),
    });
    eprintln!("{body}");
    ExitCode::from(category.exit_code() as u8)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

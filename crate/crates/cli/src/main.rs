use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mehk_cli::generate::{cmd_generate, GenerateOptions};
use mehk_cli::report::cmd_report;
use mehk_cli::select::cmd_select;
use mehk_cli::train::{cmd_train, file_targets, selected_targets};
use mehk_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mehk", version, about = "Morpho-evolution with homeokinetic evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve designs with AME, one archive per replicate.
    Generate(Common),
    /// Filter, build the fitness/sparsity front and pick three designs per replicate.
    Select(Common),
    /// Train the picked designs on the downstream tasks with NCMA-ES.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train these design files instead of the selected picks.
        #[arg(long = "design")]
        designs: Vec<PathBuf>,
    },
    /// Aggregate tables over whatever phases have run.
    Report(Common),
    /// Print a preset configuration (`full` or `desk`).
    Config {
        #[arg(default_value = "full")]
        preset: String,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults to `<out>/config.toml`, then the full preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Deterministic batched evaluation.
    #[arg(long)]
    sync: bool,
    /// Continue from existing outputs and checkpoints.
    #[arg(long)]
    resume: bool,
}

impl Common {
    fn config(&self) -> CliResult<ExperimentConfig> {
        let saved = self.out.join("config.toml");
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None if saved.exists() => ExperimentConfig::load(&saved)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.sync_mode |= self.sync;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn announce(out: &Path, what: &str) {
    eprintln!("{what} written under {}", out.display());
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            let rows = cmd_generate(&cfg, &c.out, &GenerateOptions { resume: c.resume, ..Default::default() })?;
            for r in &rows {
                println!("replicate {} best fitness {:.4} ({} evaluations)", r.replicate, r.best_fitness, r.evaluations);
            }
            announce(&c.out, "archives and ledgers");
        }
        Command::Select(c) => {
            let cfg = c.config()?;
            for s in cmd_select(&cfg, &c.out)? {
                println!("replicate {}: {} filtered, front of {}", s.replicate, s.filtered, s.front_size);
            }
            announce(&c.out, "selections");
        }
        Command::Train { common: c, designs } => {
            let cfg = c.config()?;
            let targets = if designs.is_empty() { selected_targets(&cfg, &c.out)? } else { file_targets(&c.out, &designs)? };
            let cells = cmd_train(&cfg, &c.out, &targets)?;
            println!("{} training cells", cells.len());
            announce(&c.out, "learning curves");
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            let s = cmd_report(&cfg, &c.out)?;
            for g in &s.gaps {
                println!("gap: {g}");
            }
            announce(&c.out, "report tables");
        }
        Command::Config { preset } => {
            let cfg = match preset.as_str() {
                "full" => ExperimentConfig::full(),
                "desk" => ExperimentConfig::desk(),
                other => return Err(CliError::Config(format!("unknown preset `{other}` (expected full or desk)"))),
            };
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

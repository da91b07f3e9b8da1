use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use genre_core::checkpoint::Checkpoint;
use genre_core::commands::{self, SplitName};
use genre_core::config::{Overrides, RunConfig};
use genre_core::dataset::{SignalLayout, SyntheticSpec, NUM_GENRES};
use genre_core::models::Modality;
use genre_core::{Error, Result};

/// Video-game genre classification from cover art and descriptions.
#[derive(Parser, Debug)]
#[command(name = "genre", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Values given here override the
/// config file, which overrides the built-in defaults.
#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_modality)]
    modality: Option<Modality>,
    #[arg(long, global = true)]
    image_size: Option<usize>,
    #[arg(long, global = true)]
    max_len: Option<usize>,
    #[arg(long, global = true)]
    min_count: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Train only the fusion head.
    #[arg(long, global = true)]
    freeze_encoders: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resolve genres, split 70/10/20 and build the vocabulary.
    Prepare {
        /// JSON Lines manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Extra genre aliases (raw<TAB>canonical).
        #[arg(long)]
        alias_table: Option<PathBuf>,
        #[arg(long)]
        stratify: bool,
    },
    /// Train a classifier on a prepared dataset.
    Train {
        #[arg(long)]
        prepared: PathBuf,
    },
    /// Evaluate a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        prepared: PathBuf,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: SplitName,
    },
    /// Print the most probable genres for one game.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Description text.
        #[arg(long)]
        text: Option<String>,
        /// Cover image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
    /// Write a synthetic corpus with controllable signal strength.
    Synth {
        #[arg(long, default_value_t = 1500)]
        n: usize,
        #[arg(long, default_value_t = NUM_GENRES)]
        num_genres: usize,
        #[arg(long, default_value_t = 1.0)]
        p_text: f64,
        #[arg(long, default_value_t = 1.0)]
        p_img: f64,
        #[arg(long, default_value = "distinct", value_parser = parse_layout)]
        layout: SignalLayout,
        #[arg(long, default_value_t = 32)]
        min_side: usize,
        #[arg(long, default_value_t = 64)]
        max_side: usize,
    },
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<SplitName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_layout(s: &str) -> std::result::Result<SignalLayout, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let overrides = Overrides {
            seed: self.seed,
            modality: self.modality,
            image_size: self.image_size,
            max_len: self.max_len,
            min_count: self.min_count,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            freeze_encoders: self.freeze_encoders.then_some(true),
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Usage("this command needs --out <DIR>".into()))
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Prepare {
            manifest,
            alias_table,
            stratify,
        } => {
            let mut config = common.resolve()?;
            if alias_table.is_some() {
                config.alias_table = alias_table;
            }
            config.stratify |= stratify;
            let out = common.out()?;
            let report = commands::prepare(&manifest, out, &config)?;
            println!(
                "prepared {} records: train {}, validation {}, test {}; vocabulary {} ids -> {}",
                report.records,
                report.split_sizes["train"],
                report.split_sizes["validation"],
                report.split_sizes["test"],
                report.vocabulary_size,
                out.display()
            );
        }
        Command::Train { prepared } => {
            let config = common.resolve()?;
            let out = common.out()?;
            let (_, report) = commands::train(&prepared, out, &config)?;
            for e in &report.history {
                let val = match (e.val_loss, e.val_accuracy) {
                    (Some(l), Some(a)) => format!("  val loss {l:.4}  val top-1 {}", pct(a)),
                    _ => String::new(),
                };
                println!(
                    "epoch {:>3}  loss {:.4}  top-1 {}{val}",
                    e.epoch,
                    e.train_loss,
                    pct(e.train_accuracy)
                );
            }
            println!("kept epoch {} -> {}", report.best_epoch, out.display());
        }
        Command::Evaluate {
            checkpoint,
            prepared,
            split,
        } => {
            let out = common.out()?;
            let report = commands::evaluate(&checkpoint, &prepared, split, out)?;
            print!("{}", report.to_table());
        }
        Command::Predict {
            checkpoint,
            text,
            image,
            top_k,
        } => {
            if text.is_none() && image.is_none() {
                return Err(Error::Usage("give --text, --image or both".into()));
            }
            let checkpoint = Checkpoint::load(&checkpoint)?;
            for (genre, p) in
                commands::predict(&checkpoint, text.as_deref(), image.as_deref(), top_k)?
            {
                println!("{genre}\t{p:.6}");
            }
        }
        Command::Synth {
            n,
            num_genres,
            p_text,
            p_img,
            layout,
            min_side,
            max_side,
        } => {
            let config = common.resolve()?;
            let spec = SyntheticSpec {
                n,
                num_genres,
                p_text,
                p_img,
                seed: config.seed,
                layout,
                min_side,
                max_side,
            };
            let manifest = commands::synth(&spec, common.out()?)?;
            println!("wrote {n} records to {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

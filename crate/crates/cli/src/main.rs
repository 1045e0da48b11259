//! `fakescope`: skill-routed synthetic-image detection from the command
//! line.
//!
//! Exit codes: 0 on success, 1 on operational errors, 2 when detection ends
//! without a usable answer digit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(
    name = "fakescope",
    version,
    about = "Skill-routed synthetic-image detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Judge one image: route to a skill, gather evidence, and decide.
    Detect {
        /// Image file to analyze.
        image: PathBuf,
        /// Route to this skill instead of running the routing stage.
        #[arg(long)]
        skill: Option<String>,
        /// TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the outcome document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a manifest and emit per-skill metric tables.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Perturbation spec `kind:param` (jpeg:85, blur:1.0, resize:0.5);
        /// repeatable, one table per spec.
        #[arg(long = "perturb")]
        perturb: Vec<String>,
        /// Comma-separated skill subset overriding the config registry.
        #[arg(long)]
        skills: Option<String>,
        /// Report format: machine or markdown.
        #[arg(long, default_value = "machine")]
        format: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent detections (overrides the config).
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Probe candidates skill-by-skill and keep single-skill images.
    Annotate {
        /// Candidate file: one JSON object per line (id, path, label).
        #[arg(long)]
        candidates: PathBuf,
        /// Output manifest path; rejects go to the same path with a
        /// `.rejects` extension.
        #[arg(long)]
        out: PathBuf,
        /// Yes/no probes per (image, skill); all must agree.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the toy group-normalized policy and emit its learning curve.
    TrainToy {
        /// Training config (TOML): contexts, steps, group_size,
        /// learning_rate, seed, weights, generator.
        #[arg(long)]
        config: PathBuf,
        /// Learning-curve CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded per-skill subsample of a manifest's train split.
    Fewshot {
        #[arg(long)]
        manifest: PathBuf,
        /// Records per skill and label.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Call one tool service live and persist the response as a fixture.
    Record {
        /// Tool kind: ocr, lighting, shadow, or region.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Detect {
            image,
            skill,
            config,
            out,
        } => {
            let config = Config::load(config.as_deref())?;
            commands::cmd_detect(&config, &image, skill.as_deref(), out.as_deref())
        }
        Command::Evaluate {
            manifest,
            perturb,
            skills,
            format,
            config,
            out,
            parallelism,
        } => {
            let config = Config::load(config.as_deref())?;
            commands::cmd_evaluate(
                &config,
                &manifest,
                &perturb,
                skills.as_deref(),
                &format,
                out.as_deref(),
                parallelism,
            )
        }
        Command::Annotate {
            candidates,
            out,
            repeats,
            config,
        } => {
            let config = Config::load(config.as_deref())?;
            commands::cmd_annotate(&config, &candidates, &out, repeats)
        }
        Command::TrainToy { config, out } => commands::cmd_train_toy(&config, out.as_deref()),
        Command::Fewshot {
            manifest,
            n,
            seed,
            out,
        } => commands::cmd_fewshot(&manifest, n, seed, &out),
        Command::Record {
            kind,
            image,
            config,
        } => {
            let config = Config::load(config.as_deref())?;
            commands::cmd_record(&config, &kind, &image)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

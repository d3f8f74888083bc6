//! `cvbench`: dataset conversion, benchmark runs, analysis grids and report
//! generation.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on configuration or
//! usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{ConvertArgs, Experiment, Failure, Fixture};
use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "cvbench",
    version,
    about = "Pedestrian trajectory prediction benchmark (ETH/UCY)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert annotation files to the canonical `frame id x y` layout and
    /// register them in `<output-dir>/manifest.toml`.
    Convert {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        /// Input preset: canonical, tsv, csv or eth-obsmat.
        #[arg(long, default_value = "canonical")]
        format: String,
        /// Column order overriding the preset, e.g. `frame,id,y,x`.
        #[arg(long)]
        columns: Option<String>,
        /// Scene name for all inputs; defaults to each file's stem.
        #[arg(long)]
        scene: Option<String>,
        #[arg(long)]
        frame_step: Option<i64>,
    },
    /// Run the leave-one-scene-out benchmark for the configured models.
    Evaluate(RunArgs),
    /// Run one analysis experiment.
    Analyze {
        experiment: Experiment,
        #[command(flatten)]
        run: RunArgs,
        /// Use a hand-built network instead of training (attribution only).
        #[arg(long)]
        fixture: Option<Fixture>,
    },
    /// Merge result CSVs into one Markdown report.
    Report {
        /// Result files, or directories searched for `results.csv`.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write `report.md` here.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replaces the configured seeds; repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the configured models by kind name; repeatable.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Restricts the folds to these test scenes; repeatable.
    #[arg(long = "test-scene")]
    test_scenes: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let overrides = Overrides {
            manifest: self.manifest.clone(),
            output_dir: self.output_dir.clone(),
            seeds: self.seeds.clone(),
            workers: self.workers,
            models: self.models.clone(),
            test_scenes: self.test_scenes.clone(),
        };
        Ok(RunConfig::resolve(self.config.as_deref(), &overrides)?)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convert {
            inputs,
            output_dir,
            format,
            columns,
            scene,
            frame_step,
        } => {
            let n = commands::convert(&ConvertArgs {
                inputs,
                output_dir: output_dir.clone(),
                format,
                columns,
                scene,
                frame_step,
            })?;
            eprintln!("converted {n} records into {}", output_dir.display());
        }
        Command::Evaluate(args) => {
            let cfg = args.resolve()?;
            print!("{}", commands::evaluate(&cfg)?);
            eprintln!("wrote {}", cfg.output_dir().join("evaluate").display());
        }
        Command::Analyze {
            experiment,
            run,
            fixture,
        } => {
            let cfg = run.resolve()?;
            let dir = commands::analyze(experiment, &cfg, fixture)?;
            eprintln!("wrote {}", dir.display());
        }
        Command::Report { paths, output_dir } => {
            let markdown = commands::report(&paths)?;
            if let Some(dir) = output_dir {
                std::fs::create_dir_all(&dir)
                    .and_then(|()| std::fs::write(dir.join("report.md"), &markdown))
                    .map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
            }
            print!("{markdown}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

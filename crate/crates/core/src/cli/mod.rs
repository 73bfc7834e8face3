//! Command-line interface. `run` returns the process exit code: 0 on
//! success, 1 on a runtime failure, 2 on a usage or configuration error.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::dictionary::{train_dictionary, Dictionary, DictionaryError, DictionaryParams};
use crate::ensemble::{train_ensemble, Ensemble, EnsembleError};
use crate::evaluation::{
    load_dataset, prepare_dataset, random_scan, run_baseline_experiment, run_experiment, save_dataset, segment_descriptions,
    stimuli_csv, synthetic_benchmark, EvaluationError, LabeledDataset,
};
use crate::geometry::pcd::{load_pcd, save_pcd};
use crate::geometry::synth::ShapeKind;
use crate::geometry::{GeometryError, Point3};
use crate::pipeline::{prepare_instance, PipelineError};
use crate::segmentation::InstanceGraph;

pub use config::{Config, ConfigError, CONFIG_KEYS};

#[derive(Debug, Parser)]
#[command(name = "shape-motif", version, about = "Shape categorization of 2.5D point clouds with motif hierarchies")]
struct Cli {
    /// TOML file with configuration keys (see below).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one synthetic scan, or the whole labeled corpus when no kind is given.
    Synth {
        #[arg(long)]
        kind: Option<ShapeKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// A .pcd file for a single scan, a directory for the corpus.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the hierarchical visual-word dictionary on a labeled directory.
    TrainDict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an ensemble on a labeled directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Use this dictionary instead of training one.
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
    /// Classify one cloud; prints a JSON result.
    Classify {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Export per-label stimuli of every instance in a labeled directory.
    Stimuli {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated train/test evaluation of the ensemble against the FPFH baseline.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Stimuli CSV of the first repeat's test instances.
        #[arg(long)]
        stimuli_out: Option<PathBuf>,
    },
    /// Repeated train/test evaluation of the FPFH nearest-neighbor baseline alone.
    BaselineFpfh {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate the synthetic corpus instead of reading a directory.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn help_keys() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (--config file or --set key=value):\n");
    for (key, default, meaning) in CONFIG_KEYS {
        let _ = writeln!(out, "  {key:<width$}  [{default}]  {meaning}");
    }
    out
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command().after_help(help_keys());
    let cli = match command
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.set;
    match &cli.command {
        Command::Synth { seed: Some(s), .. } => overrides.push(format!("seed={s}")),
        Command::Evaluate { run, .. } | Command::BaselineFpfh { run } => {
            if let Some(r) = run.ratio {
                overrides.push(format!("ratio={r:?}"));
            }
            if let Some(r) = run.repeats {
                overrides.push(format!("repeats={r}"));
            }
            if let Some(s) = run.seed {
                overrides.push(format!("seed={s}"));
            }
        }
        _ => {}
    }
    let config = Config::load(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::Synth { kind, out, .. } => synth(&config, kind, &out),
        Command::TrainDict { data, out } => {
            let dataset = load_dataset(&data, config.normal_k)?;
            let prepared = prepare_dataset(&dataset, &config.pipeline())?;
            let dictionary = fit_dictionary(&config, prepared.iter().map(|p| &p.graph))?;
            dictionary.save(&out)?;
            eprintln!("dictionary words per level: {:?}", dictionary.word_counts());
            Ok(())
        }
        Command::Train { data, out, dictionary } => {
            let dataset = load_dataset(&data, config.normal_k)?;
            let prepared = prepare_dataset(&dataset, &config.pipeline())?;
            let dictionary = match dictionary {
                Some(path) => Dictionary::load(path)?,
                None => fit_dictionary(&config, prepared.iter().map(|p| &p.graph))?,
            };
            let instances: Vec<(&InstanceGraph, &str)> = prepared
                .iter()
                .map(|p| (&p.graph, dataset.labels[p.label].as_str()))
                .collect();
            let ensemble = train_ensemble(&instances, dataset.labels.clone(), dictionary, config.ensemble())?;
            ensemble.save(&out)?;
            Ok(())
        }
        Command::Classify { ensemble, input } => {
            let ensemble = Ensemble::load(ensemble)?;
            let cloud = load_pcd(&input)?.into_oriented(config.normal_k, &Point3::origin())?;
            let graph = prepare_instance(&cloud, &config.pipeline())?;
            let responses = ensemble.responses(&graph)?;
            let result = ensemble.classify_responses(&responses);
            let output = ClassifyOutput {
                label: result.label.map(|y| ensemble.labels[y].clone()),
                rejected: result.is_rejected(),
                confidence: result.confidence,
                labels: ensemble.labels.clone(),
                scores: result.scores,
                stimuli: ensemble.stimuli_responses(&responses),
            };
            println!("{}", serde_json::to_string_pretty(&output)?);
            Ok(())
        }
        Command::Stimuli { ensemble, data, out } => {
            let ensemble = Ensemble::load(ensemble)?;
            let dataset = load_dataset(&data, config.normal_k)?;
            let prepared = prepare_dataset(&dataset, &config.pipeline())?;
            let stimuli = prepared
                .iter()
                .map(|p| ensemble.stimuli(&p.graph))
                .collect::<Result<Vec<_>, _>>()?;
            let csv = stimuli_csv(
                &ensemble.labels,
                prepared
                    .iter()
                    .zip(&stimuli)
                    .map(|(p, s)| (p.id.as_str(), dataset.labels[p.label].as_str(), s.as_slice())),
            );
            write(&out, csv)
        }
        Command::Evaluate { run, stimuli_out } => {
            let start = Instant::now();
            let dataset = source(&config, &run)?;
            let report = run_experiment(&dataset, &config.experiment(true))?;
            write(&run.out, serde_json::to_string_pretty(&report)?)?;
            if let Some(path) = stimuli_out {
                let instances = &report.repeats[0].evaluation.instances;
                let csv = stimuli_csv(
                    &report.labels,
                    instances
                        .iter()
                        .map(|i| (i.id.as_str(), i.true_label.as_str(), i.stimuli.as_slice())),
                );
                write(&path, csv)?;
            }
            let s = &report.summary;
            eprintln!(
                "ensemble error {:.4}, hierarchies {:?}, baseline {:?}, {:.2} s",
                s.ensemble_error,
                s.hierarchy_errors,
                s.baseline_error,
                start.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Command::BaselineFpfh { run } => {
            let start = Instant::now();
            let dataset = source(&config, &run)?;
            let report = run_baseline_experiment(&dataset, &config.experiment(true))?;
            write(&run.out, serde_json::to_string_pretty(&report)?)?;
            eprintln!("baseline error {:.4}, {:.2} s", report.error, start.elapsed().as_secs_f64());
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassifyOutput {
    label: Option<String>,
    rejected: bool,
    confidence: f64,
    labels: Vec<String>,
    scores: Vec<f64>,
    stimuli: Vec<f64>,
}

fn synth(config: &Config, kind: Option<ShapeKind>, out: &Path) -> Result<(), CliError> {
    match kind {
        Some(kind) => {
            let cloud = random_scan(kind, config.sample_spacing_m, config.noise_sigma(), config.seed)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|source| CliError::Write {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            save_pcd(&cloud, out)?;
        }
        None => save_dataset(&synthetic_benchmark(config.benchmark())?, out)?,
    }
    Ok(())
}

fn source(config: &Config, run: &RunArgs) -> Result<LabeledDataset, CliError> {
    Ok(match &run.data {
        Some(dir) => load_dataset(dir, config.normal_k)?,
        None => synthetic_benchmark(config.benchmark())?,
    })
}

fn fit_dictionary<'a>(config: &Config, graphs: impl Iterator<Item = &'a InstanceGraph>) -> Result<Dictionary, CliError> {
    let descriptions: Vec<&[f64]> = graphs.flat_map(segment_descriptions).collect();
    Ok(train_dictionary(
        &descriptions,
        DictionaryParams {
            n_levels: config.n_levels,
            kmeans_restarts: config.kmeans_restarts,
            seed: config.seed,
        },
    )?)
}

fn write(path: &Path, contents: String) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Write {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

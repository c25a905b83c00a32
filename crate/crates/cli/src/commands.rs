use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ahfe_core::data::{generate_blobs, split, BlobSpec, LabeledDataset};
use ahfe_core::grad::finite_difference_check;
use ahfe_core::loss::LossId;
use ahfe_core::metrics::{confusion, report};
use ahfe_core::model::ModelSpec;
use ahfe_core::train::{predict_all, train, TrainedModel};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LossSettings, ResolvedLoss};
use crate::csv_io::{load_csv, save_csv};
use crate::error::{CliError, Result};
use crate::model_io::save_model;
use crate::report::{comparison_table, metrics_table, write_curves, AggregateDoc, CellDoc, ComparisonDoc, MetricsDoc};

pub const MIN_COMPARE_LOSSES: usize = 2;
pub const MIN_COMPARE_SEEDS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "ahfe", version, about = "Adaptive hybrid focal-entropy loss experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Gaussian blob dataset as CSV.
    Generate(GenerateArgs),
    /// Train one model and write its model file, curves and metrics.
    Train(TrainArgs),
    /// Train every (loss, seed) pair of an experiment and aggregate.
    Compare(CompareArgs),
    /// Check analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Comma-separated class proportions summing to 1. Defaults to the
    /// skewed five-class profile, or uniform for other class counts.
    #[arg(long, value_delimiter = ',')]
    pub proportions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000)]
    pub total: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "blobs.csv")]
    pub out: PathBuf,
}

/// Flags shared by `train` and `compare` that override the config file.
#[derive(Debug, Args)]
pub struct ExperimentOverrides {
    /// Experiment config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV; replaces the generated blobs.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub no_stratify: bool,
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ExperimentOverrides,
    /// Loss to train with. Defaults to the first loss of the config file,
    /// or `ahfe` without one.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub weight_mode: Option<String>,
    #[arg(long)]
    pub p_floor: Option<f64>,
    /// Run seed: drives the split, initialization and shuffling. Defaults
    /// to the first seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: ExperimentOverrides,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "ahfe")]
    pub loss: String,
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let proportions = match &args.proportions {
        Some(p) => p.clone(),
        None if args.classes == ahfe_core::data::DEFAULT_PROPORTIONS.len() => {
            ahfe_core::data::DEFAULT_PROPORTIONS.to_vec()
        }
        None => vec![1.0 / args.classes.max(1) as f64; args.classes],
    };
    let spec = BlobSpec {
        num_classes: args.classes,
        dim: args.dim,
        proportions,
        total: args.total,
        spread: args.spread,
        separation: args.separation,
        seed: args.seed,
    };
    let data = generate_blobs(&spec)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_csv(&args.out, &data)?;
    let counts: Vec<String> = data.class_counts().iter().map(usize::to_string).collect();
    println!("wrote {} rows to {}", data.len(), args.out.display());
    println!("class_counts: {}", counts.join(","));
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &ExperimentOverrides) {
    if let Some(p) = &o.data {
        cfg.dataset.path = Some(p.clone());
    }
    if let Some(p) = &o.out {
        cfg.output_dir = p.clone();
    }
    if let Some(v) = &o.model {
        cfg.model.kind = v.clone();
    }
    if let Some(v) = o.hidden_dim {
        cfg.model.hidden_dim = v;
    }
    if let Some(v) = &o.activation {
        cfg.model.activation = v.clone();
    }
    if let Some(v) = o.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = o.momentum {
        cfg.train.momentum = v;
    }
    if let Some(v) = o.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = o.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = o.val_fraction {
        cfg.val_fraction = v;
    }
    if o.no_stratify {
        cfg.stratified = false;
    }
    if o.no_shuffle {
        cfg.train.shuffle = false;
    }
}

fn load_config(o: &ExperimentOverrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, o);
    Ok(cfg)
}

/// The full dataset for an experiment: the CSV if one is named, otherwise
/// the configured blobs.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    match &cfg.dataset.path {
        Some(path) => {
            let (data, warnings) = load_csv(path)?;
            warn(&warnings);
            Ok(data)
        }
        None => Ok(generate_blobs(&cfg.dataset.blob_spec())?),
    }
}

/// One trained (loss, seed) cell with its validation metrics.
pub struct CellRun {
    pub trained: TrainedModel,
    pub metrics: MetricsDoc,
}

/// Splits with the run seed, trains, and scores the validation split.
/// `train` and `compare` both go through here, so a comparison cell is
/// identical to the standalone run with the same loss and seed.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &LabeledDataset,
    spec: &ModelSpec,
    loss: &ResolvedLoss,
    seed: u64,
) -> Result<CellRun> {
    let (train_split, val_split) = split(data, cfg.val_fraction, seed, cfg.stratified)?;
    let trained = train(&train_split, &val_split, spec, &cfg.train_config(loss, seed))?;
    let predicted = predict_all(&trained.model, &val_split);
    let cm = confusion(val_split.labels(), &predicted, data.num_classes())?;
    let metrics = MetricsDoc::new(&report(&cm)?, &cm);
    Ok(CellRun { trained, metrics })
}

fn write_curves_file(path: &Path, trained: &TrainedModel) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_curves(BufWriter::new(file), &trained.curves).map_err(|e| CliError::io(path, e))
}

fn metrics_json(doc: &MetricsDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    let mut settings = match (&args.loss, &args.common.config) {
        (Some(name), _) => LossSettings {
            loss: name.clone(),
            ..LossSettings::default()
        },
        (None, Some(_)) => cfg.losses.first().cloned().unwrap_or_default(),
        (None, None) => LossSettings::of(LossId::Ahfe),
    };
    if let Some(v) = args.gamma {
        settings.gamma = v;
    }
    if let Some(v) = args.lambda {
        settings.lambda = v;
    }
    if let Some(v) = args.epsilon {
        settings.epsilon = v;
    }
    if let Some(v) = &args.weight_mode {
        settings.weight_mode = v.clone();
    }
    if let Some(v) = args.p_floor {
        settings.p_floor = v;
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    cfg.losses = vec![settings];
    let loss = cfg.validate()?.remove(0);
    let seed = cfg.seeds[0];

    let data = load_dataset(&cfg)?;
    let spec = cfg.model.resolve(data.dim(), data.num_classes())?;
    let cell = run_cell(&cfg, &data, &spec, &loss, seed)?;
    warn(&cell.trained.warnings);

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    save_model(&dir.join("model.toml"), &cell.trained)?;
    write_curves_file(&dir.join("curves.csv"), &cell.trained)?;
    write_text(&dir.join("metrics.json"), &metrics_json(&cell.metrics))?;
    let table = metrics_table(spec.kind.as_str(), &loss.name, &cell.metrics);
    write_text(&dir.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn cell_file(prefix: &str, loss: &str, seed: u64, ext: &str) -> String {
    format!("{prefix}_{loss}_seed{seed}.{ext}")
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    let losses = cfg.validate()?;
    if losses.len() < MIN_COMPARE_LOSSES || cfg.seeds.len() < MIN_COMPARE_SEEDS {
        return Err(CliError::Config(format!(
            "compare needs at least {MIN_COMPARE_LOSSES} losses and {MIN_COMPARE_SEEDS} seeds, got {} and {}",
            losses.len(),
            cfg.seeds.len()
        )));
    }
    let data = load_dataset(&cfg)?;
    let spec = cfg.model.resolve(data.dim(), data.num_classes())?;
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;

    let jobs: Vec<(&ResolvedLoss, u64)> = losses
        .iter()
        .flat_map(|l| cfg.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let cells: Vec<CellDoc> = jobs
        .par_iter()
        .map(|&(loss, seed)| {
            let outcome = run_cell(&cfg, &data, &spec, loss, seed).and_then(|cell| {
                let curves = cell_file("curves", &loss.name, seed, "csv");
                write_curves_file(&dir.join(&curves), &cell.trained)?;
                write_text(
                    &dir.join(cell_file("metrics", &loss.name, seed, "json")),
                    &metrics_json(&cell.metrics),
                )?;
                Ok((curves, cell.metrics))
            });
            match outcome {
                Ok((curves, metrics)) => CellDoc {
                    loss: loss.name.clone(),
                    seed,
                    status: "ok".into(),
                    error: None,
                    curves_file: Some(curves),
                    metrics: Some(metrics),
                },
                Err(e) => CellDoc {
                    loss: loss.name.clone(),
                    seed,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    curves_file: None,
                    metrics: None,
                },
            }
        })
        .collect();

    let aggregates = losses
        .iter()
        .map(|l| {
            let mine: Vec<&CellDoc> = cells.iter().filter(|c| c.loss == l.name).collect();
            AggregateDoc::from_cells(&l.name, &mine)
        })
        .collect();
    let doc = ComparisonDoc {
        model: spec.kind.as_str().into(),
        averaging: crate::report::AVERAGING.into(),
        split: format!(
            "{}validation fraction {}",
            if cfg.stratified { "stratified, " } else { "" },
            cfg.val_fraction
        ),
        seeds: cfg.seeds.clone(),
        aggregates,
        cells,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("comparison serializes");
    json.push('\n');
    write_text(&dir.join("comparison.json"), &json)?;
    let table = comparison_table(&doc);
    write_text(&dir.join("comparison.txt"), &table)?;
    print!("{table}");

    let failed = doc.cells.iter().filter(|c| c.status != "ok").count();
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: doc.cells.len(),
        });
    }
    Ok(())
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let loss: LossId = args.loss.parse()?;
    let report = finite_difference_check(loss, args.cases, args.seed)?;
    let text = report.to_string();
    print!("{text}");
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::GradCheck(report.max_rel_error))
    }
}

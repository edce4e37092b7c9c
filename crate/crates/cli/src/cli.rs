//! Command-line definitions and subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use molcap_core::harness::{
    ablate, build_vocabulary, evaluate, synthetic_corpus, tertile_boundaries, train, word_count, CaptionModel,
    CaptionRecord, Task, BUCKET_BOUNDARIES,
};
use molcap_core::metrics::score_corpus;
use molcap_core::numerics::ParamStore;
use molcap_core::text::Vocabulary;

use crate::checkpoint::{Checkpoint, Precision};
use crate::config::{load_settings, Settings, KEYS};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{CliError, Result};
use crate::report;
use crate::vocab_file::{load_vocab, save_vocab};

#[derive(Debug, Parser)]
#[command(name = "molcap", version, about = "Graph + SMILES molecule captioning: train, evaluate, generate, ablate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a TSV dataset and write a checkpoint.
    Train(TrainArgs),
    /// Generate captions for a TSV dataset and score them.
    Eval(EvalArgs),
    /// Caption one SMILES string.
    Generate(GenerateArgs),
    /// Train and evaluate the five input/fusion combinations.
    Ablate(AblateArgs),
    /// Score aligned prediction and reference files.
    Metrics(MetricsArgs),
    /// Write a template-generated TSV dataset.
    Synth(SynthArgs),
}

/// Settings layered as defaults, then `--config`, then individual flags.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from `desk` (default) or `full` scale defaults.
    #[arg(long, value_parser = ["desk", "full"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub dropout: Option<String>,
    #[arg(long)]
    pub encoder_layers: Option<String>,
    #[arg(long)]
    pub decoder_layers: Option<String>,
    #[arg(long)]
    pub heads: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// SMILES token budget.
    #[arg(long)]
    pub smiles_len: Option<String>,
    /// Target token budget, end-of-sequence included.
    #[arg(long)]
    pub target_len: Option<String>,
    #[arg(long)]
    pub prompt_len: Option<String>,
    /// Graph node budget.
    #[arg(long)]
    pub max_nodes: Option<String>,
    #[arg(long)]
    pub d_model: Option<String>,
    #[arg(long)]
    pub graph_hidden: Option<String>,
    #[arg(long)]
    pub ff_hidden: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<String>,
    #[arg(long)]
    pub cta_heads: Option<String>,
    #[arg(long)]
    pub cta_post_self_attention: Option<String>,
    /// `greedy` or `beam:<width>`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub max_generate: Option<String>,
    /// `caption` or `iupac`.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub use_graph: Option<String>,
    #[arg(long)]
    pub use_smiles: Option<String>,
    #[arg(long)]
    pub use_cross_token_attention: Option<String>,
}

impl SettingsArgs {
    fn flags(&self) -> [Option<&String>; 25] {
        [
            self.epochs.as_ref(),
            self.learning_rate.as_ref(),
            self.weight_decay.as_ref(),
            self.batch_size.as_ref(),
            self.dropout.as_ref(),
            self.encoder_layers.as_ref(),
            self.decoder_layers.as_ref(),
            self.heads.as_ref(),
            self.seed.as_ref(),
            self.smiles_len.as_ref(),
            self.target_len.as_ref(),
            self.prompt_len.as_ref(),
            self.max_nodes.as_ref(),
            self.d_model.as_ref(),
            self.graph_hidden.as_ref(),
            self.ff_hidden.as_ref(),
            self.vocab_size.as_ref(),
            self.cta_heads.as_ref(),
            self.cta_post_self_attention.as_ref(),
            self.strategy.as_ref(),
            self.max_generate.as_ref(),
            self.task.as_ref(),
            self.use_graph.as_ref(),
            self.use_smiles.as_ref(),
            self.use_cross_token_attention.as_ref(),
        ]
    }

    pub fn resolve(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if self.preset.as_deref() == Some("full") {
            s.run = molcap_core::harness::RunConfig::full_scale();
        }
        if let Some(path) = &self.config {
            s = load_settings(path, s)?;
        }
        for (key, value) in KEYS.iter().zip(self.flags()) {
            if let Some(v) = value {
                s.set(key, v).map_err(|m| CliError::Usage(format!("--{}: {m}", key.replace('_', "-"))))?;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training TSV (`cid  smiles  description`).
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoint, vocabulary and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse an existing vocabulary file instead of training one.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Store parameters as 32-bit floats.
    #[arg(long)]
    pub f32: bool,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for predictions and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Also score short/medium/long reference-length buckets (34/48 words).
    #[arg(long)]
    pub buckets: bool,
    /// Bucket at the data's own length tertiles instead of 34/48.
    #[arg(long, requires = "buckets")]
    pub tertiles: bool,
    /// `greedy` or `beam:<width>`; defaults to the checkpoint's setting.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub smiles: String,
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training TSV; omit with `--synthetic`.
    #[arg(long, required_unless_present = "synthetic")]
    pub train: Option<PathBuf>,
    /// Evaluation TSV; defaults to the training data.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Use this many template-generated records for training and evaluation.
    #[arg(long, conflicts_with = "train")]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// One prediction per line.
    #[arg(long)]
    pub predictions: PathBuf,
    /// One reference per line, aligned with the predictions.
    #[arg(long)]
    pub references: PathBuf,
    /// Also write the key/value report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "caption")]
    pub task: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn load_records(path: &Path, task: Task) -> Result<Vec<CaptionRecord>> {
    let data = load_dataset(path, task)?;
    log::info!("{}: {} records, {} skipped", path.display(), data.records.len(), data.skipped);
    if data.records.is_empty() {
        return Err(CliError::Usage(format!("{}: no usable records", path.display())));
    }
    Ok(data.records)
}

fn restore(checkpoint: &Path, vocab: &Path) -> Result<(Vocabulary, ParamStore, CaptionModel)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let vocab = load_vocab(vocab)?;
    let (store, model) = ckpt.restore(&vocab)?;
    Ok((vocab, store, model))
}

fn with_strategy(model: &mut CaptionModel, strategy: Option<&str>) -> Result<()> {
    if let Some(s) = strategy {
        model.config.strategy = crate::config::parse_strategy(s).map_err(CliError::Usage)?;
        model.config.validate()?;
    }
    Ok(())
}

/// Runs one subcommand and returns the text for stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(a) => run_train(&a),
        Command::Eval(a) => run_eval(&a),
        Command::Generate(a) => run_generate(&a),
        Command::Ablate(a) => run_ablate(&a),
        Command::Metrics(a) => run_metrics(&a),
        Command::Synth(a) => run_synth(&a),
    }
}

pub fn run_train(a: &TrainArgs) -> Result<String> {
    let settings = a.settings.resolve()?;
    let records = load_records(&a.data, settings.run.task)?;
    let vocab = match &a.vocab {
        Some(p) => load_vocab(p)?,
        None => build_vocabulary(&records, settings.run.vocab_size)?,
    };
    let mut store = ParamStore::new();
    let model = CaptionModel::new(&mut store, &vocab, settings.run, settings.ablation)?;
    let prepared = model.prepare_all(&vocab, &records)?;
    let report = train(&model, &mut store, &prepared)?;
    create_dir(&a.out)?;
    let precision = if a.f32 { Precision::F32 } else { Precision::F64 };
    Checkpoint::capture(&model, &store, &vocab, precision).save(&a.out.join("checkpoint.bin"))?;
    save_vocab(&a.out.join("vocab.txt"), &vocab)?;
    write(&a.out.join("settings.conf"), &settings.to_kv())?;
    let table = report::train_table(&report);
    write(&a.out.join("train_report.txt"), &table)?;
    write(&a.out.join("train_report.kv"), &report::train_kv(&report))?;
    Ok(format!("{table}checkpoint written to {}\n", a.out.join("checkpoint.bin").display()))
}

pub fn run_eval(a: &EvalArgs) -> Result<String> {
    let (vocab, store, mut model) = restore(&a.checkpoint, &a.vocab)?;
    with_strategy(&mut model, a.strategy.as_deref())?;
    let records = load_records(&a.data, model.config.task)?;
    let prepared = model.prepare_all(&vocab, &records)?;
    let bounds = match (a.buckets, a.tertiles) {
        (false, _) => None,
        (true, false) => Some(BUCKET_BOUNDARIES),
        (true, true) => {
            let lengths: Vec<usize> = records.iter().map(|r| word_count(&r.description)).collect();
            Some(tertile_boundaries(&lengths).ok_or_else(|| CliError::Usage("tertiles need records".into()))?)
        }
    };
    let report = evaluate(&model, &store, &vocab, &prepared, bounds)?;
    create_dir(&a.out)?;
    let mut preds = String::new();
    for p in &report.predictions {
        preds.push_str(&p.replace(['\n', '\r'], " "));
        preds.push('\n');
    }
    write(&a.out.join("predictions.txt"), &preds)?;
    let table = report::eval_table(&report);
    write(&a.out.join("eval_report.txt"), &table)?;
    write(&a.out.join("eval_report.kv"), &report::eval_kv(&report))?;
    Ok(table)
}

pub fn run_generate(a: &GenerateArgs) -> Result<String> {
    let (vocab, store, mut model) = restore(&a.checkpoint, &a.vocab)?;
    with_strategy(&mut model, a.strategy.as_deref())?;
    let record =
        CaptionRecord { id: "input".into(), smiles: a.smiles.clone(), description: String::new(), task: model.config.task };
    let prepared = model.prepare(&vocab, &record)?;
    let text = model.generate(&store, &vocab, &prepared, model.config.strategy, model.config.max_generate)?;
    Ok(format!("{text}\n"))
}

pub fn run_ablate(a: &AblateArgs) -> Result<String> {
    let settings = a.settings.resolve()?;
    let task = settings.run.task;
    let (train_set, eval_set) = match (a.synthetic, &a.train) {
        (Some(n), _) => {
            let recs = synthetic_corpus(n, settings.run.seed, task)?;
            (recs.clone(), recs)
        }
        (None, Some(p)) => {
            let train_set = load_records(p, task)?;
            let eval_set = match &a.eval {
                Some(e) => load_records(e, task)?,
                None => train_set.clone(),
            };
            (train_set, eval_set)
        }
        (None, None) => return Err(CliError::Usage("ablate needs --train or --synthetic".into())),
    };
    let vocab = build_vocabulary(&train_set, settings.run.vocab_size)?;
    let rows = ablate(&settings.run, &vocab, &train_set, &eval_set)?;
    create_dir(&a.out)?;
    let table = report::ablation_table(&rows);
    write(&a.out.join("ablation.txt"), &table)?;
    write(&a.out.join("ablation.kv"), &report::ablation_kv(&rows))?;
    Ok(table)
}

pub fn run_metrics(a: &MetricsArgs) -> Result<String> {
    let preds = read_lines(&a.predictions)?;
    let refs = read_lines(&a.references)?;
    if preds.len() != refs.len() {
        return Err(CliError::Usage(format!(
            "{} predictions but {} references",
            preds.len(),
            refs.len()
        )));
    }
    let scores = score_corpus(&preds, &refs)?;
    let kv = report::metrics_kv("", &scores);
    if let Some(out) = &a.out {
        write(out, &kv)?;
    }
    Ok(kv)
}

pub fn run_synth(a: &SynthArgs) -> Result<String> {
    let task = Task::parse(&a.task)?;
    let records = synthetic_corpus(a.count, a.seed, task)?;
    write_dataset(&a.out, &records)?;
    Ok(format!("wrote {} records to {}\n", records.len(), a.out.display()))
}

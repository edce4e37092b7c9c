use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buckets::{split_by_length, word_count};
use super::model::{CaptionModel, PreparedRecord};
use super::{AblationConfig, CaptionRecord, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{score_corpus, MetricScores};
use crate::numerics::{AdamW, AdamWConfig, Dropout, ParamStore, Tape};
use crate::text::Vocabulary;

/// Full-scale ChEBI-20 scores reported for the five ablation rows (same
/// order as [`AblationConfig::TABLE`]), in percent. Shown for context only.
pub const ABLATION_FOOTER: [[f64; 6]; 5] = [
    [56.6, 48.3, 57.6, 61.7, 46.3, 55.6],
    [56.0, 48.2, 56.9, 62.0, 46.6, 56.1],
    [62.2, 54.8, 62.8, 66.5, 52.0, 60.5],
    [63.3, 56.1, 63.8, 67.5, 53.3, 61.5],
    [63.8, 56.6, 64.1, 67.7, 53.7, 61.7],
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub step_losses: Vec<f64>,
}

/// Minibatch AdamW over prepared records with a seeded shuffle per epoch.
pub struct Trainer<'m> {
    model: &'m CaptionModel,
    optimizer: AdamW,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl<'m> Trainer<'m> {
    pub fn new(model: &'m CaptionModel, store: &ParamStore, records: usize) -> Result<Self> {
        if records == 0 {
            return Err(Error::Config("training needs at least one record".into()));
        }
        let c = &model.config;
        let optimizer =
            AdamW::new(AdamWConfig { lr: c.learning_rate, weight_decay: c.weight_decay, ..Default::default() }, store);
        Ok(Self {
            model,
            optimizer,
            rng: ChaCha8Rng::seed_from_u64(c.seed.wrapping_add(0x5eed)),
            order: (0..records).collect(),
            cursor: records,
            epoch: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.optimizer.steps()
    }

    /// Epochs started so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Whether the next step starts a new epoch.
    pub fn at_epoch_boundary(&self) -> bool {
        self.cursor >= self.order.len()
    }

    /// Trains on the next batch and returns its mean loss.
    pub fn step(&mut self, store: &mut ParamStore, records: &[PreparedRecord]) -> Result<f64> {
        if records.len() != self.order.len() {
            return Err(Error::Config(format!("trainer built for {} records, got {}", self.order.len(), records.len())));
        }
        if self.at_epoch_boundary() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let batch_index = self.cursor / self.model.config.batch_size;
        let end = (self.cursor + self.model.config.batch_size).min(self.order.len());
        let batch: Vec<usize> = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        let epoch = self.epoch;
        let diverged = |detail: String| {
            let ids: Vec<&str> = batch.iter().map(|&i| records[i].id.as_str()).collect();
            Error::Divergence(format!("epoch {} batch {} (records {}): {}", epoch, batch_index, ids.join(", "), detail))
        };
        let loss = self.batch_loss(store, records, &batch).map_err(|e| match e {
            Error::NonFinite(what) => diverged(format!("non-finite value in {what}")),
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(diverged(format!("loss {loss}")));
        }
        self.optimizer.step(store)?;
        Ok(loss)
    }

    fn batch_loss(&mut self, store: &mut ParamStore, records: &[PreparedRecord], batch: &[usize]) -> Result<f64> {
        let model = self.model;
        let mut tape = Tape::new();
        let mut dropout = Dropout { rate: model.config.dropout, rng: Some(&mut self.rng) };
        let prompt = model.encode_prompt(&mut tape, store, &mut dropout)?;
        let mut total = None;
        for &i in batch {
            let l = model.loss(&mut tape, store, &prompt, &records[i], &mut dropout)?;
            total = Some(match total {
                None => l,
                Some(t) => tape.add(t, l)?,
            });
        }
        let total = total.expect("batches are non-empty");
        let loss = tape.scale(total, 1.0 / batch.len() as f64)?;
        tape.backward(loss)?;
        store.zero_grad();
        tape.accumulate_into(store);
        tape.value(loss).item()
    }
}

/// Runs `config.epochs` epochs over `records`.
pub fn train(model: &CaptionModel, store: &mut ParamStore, records: &[PreparedRecord]) -> Result<TrainReport> {
    let mut trainer = Trainer::new(model, store, records.len())?;
    let mut report = TrainReport::default();
    let batches = records.len().div_ceil(model.config.batch_size);
    for _ in 0..model.config.epochs {
        let mut sum = 0.0;
        for _ in 0..batches {
            let l = trainer.step(store, records)?;
            report.step_losses.push(l);
            sum += l;
        }
        let mean = sum / batches as f64;
        log::info!("epoch {} loss {:.6}", trainer.epoch(), mean);
        report.epoch_losses.push(mean);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketScores {
    pub name: &'static str,
    pub count: usize,
    /// `None` for an empty bucket.
    pub scores: Option<MetricScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub predictions: Vec<String>,
    pub overall: MetricScores,
    pub buckets: Vec<BucketScores>,
}

/// Generates a caption per record and scores the corpus, optionally per
/// reference-length bucket.
pub fn evaluate(
    model: &CaptionModel,
    store: &ParamStore,
    vocab: &Vocabulary,
    records: &[PreparedRecord],
    buckets: Option<(usize, usize)>,
) -> Result<EvalReport> {
    let strategy = model.config.strategy;
    let predictions = records
        .iter()
        .map(|r| model.generate(store, vocab, r, strategy, model.config.max_generate))
        .collect::<Result<Vec<_>>>()?;
    let references: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
    let overall = score_corpus(&predictions.iter().map(String::as_str).collect::<Vec<_>>(), &references)?;
    let mut bucket_scores = Vec::new();
    if let Some(bounds) = buckets {
        let lengths: Vec<usize> = references.iter().map(|r| word_count(r)).collect();
        for (name, idx) in split_by_length(&lengths, bounds).named() {
            let scores = if idx.is_empty() {
                None
            } else {
                let p: Vec<&str> = idx.iter().map(|&i| predictions[i].as_str()).collect();
                let r: Vec<&str> = idx.iter().map(|&i| references[i]).collect();
                Some(score_corpus(&p, &r)?)
            };
            bucket_scores.push(BucketScores { name, count: idx.len(), scores });
        }
    }
    Ok(EvalReport { predictions, overall, buckets: bucket_scores })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub ablation: AblationConfig,
    pub scores: MetricScores,
    /// [`super::CallCounters::snapshot`] after training and evaluation.
    pub counters: [usize; 4],
    pub final_loss: f64,
}

/// Trains and evaluates the five ablation configurations with identical
/// seed and budgets.
pub fn ablate(
    config: &RunConfig,
    vocab: &Vocabulary,
    train_set: &[CaptionRecord],
    eval_set: &[CaptionRecord],
) -> Result<Vec<AblationRow>> {
    AblationConfig::TABLE
        .iter()
        .map(|&ablation| {
            let mut store = ParamStore::new();
            let model = CaptionModel::new(&mut store, vocab, *config, ablation)?;
            let train_records = model.prepare_all(vocab, train_set)?;
            let report = train(&model, &mut store, &train_records)?;
            let eval_records = model.prepare_all(vocab, eval_set)?;
            let eval = evaluate(&model, &store, vocab, &eval_records, None)?;
            Ok(AblationRow {
                ablation,
                scores: eval.overall,
                counters: model.counters.snapshot(),
                final_loss: report.step_losses.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

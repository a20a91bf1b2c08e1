//! The train/evaluate/select loop, the extrinsic MAP evaluation of any
//! responder, and the baselines.
//!
//! Training periodically snapshots the model, scores each snapshot on the
//! development set (MAP through the ranking pipeline, BLEU against Good
//! answers) and tracks the running training loss. Model selection then picks
//! the checkpoint that best fits one of three criteria: highest dev MAP,
//! highest dev BLEU, or lowest train loss.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bpe::{apply_bpe, restore_words, BpeModel};
use crate::corpus::{Dataset, Label, Thread};
use crate::error::{Error, Result};
use crate::metrics::{
    mean_average_precision_at, multi_reference_bleu, BleuConfig, RelevanceList,
};
use crate::pairselect::SentencePair;
use crate::ranking::{rank_thread, MetricSpec, RankContext, RankedThread};
use crate::seq2seq::{
    backward, forward_loss, greedy_decode, prepare_batch, save_checkpoint, sgd_step, Checkpoint,
    Hyperparams, Seq2SeqModel, Vocab,
};
use crate::textrep::tokenize;

/// Anything that answers a question with an utterance. Responders are pure:
/// the same question always yields the same answer.
pub trait Responder {
    fn respond(&self, question: &str) -> String;
}

/// The question-as-utterance baseline.
pub struct EchoResponder;

impl Responder for EchoResponder {
    fn respond(&self, question: &str) -> String {
        question.to_string()
    }
}

/// A responder view over model parts: tokenize, apply BPE, encode, greedy
/// decode, restore words, join with single spaces.
pub struct ModelResponder<'a> {
    hyperparams: &'a Hyperparams,
    vocab: &'a Vocab,
    model: &'a Seq2SeqModel,
    bpe: &'a BpeModel,
    max_len: usize,
}

impl<'a> ModelResponder<'a> {
    pub fn new(
        hyperparams: &'a Hyperparams,
        vocab: &'a Vocab,
        model: &'a Seq2SeqModel,
        bpe: &'a BpeModel,
    ) -> ModelResponder<'a> {
        ModelResponder {
            hyperparams,
            vocab,
            model,
            bpe,
            max_len: hyperparams.max_target_len(),
        }
    }
}

impl Responder for ModelResponder<'_> {
    fn respond(&self, question: &str) -> String {
        let symbols = apply_bpe(&tokenize(question), self.bpe);
        let src = self.vocab.encode(&symbols);
        let ids = greedy_decode(self.model, &src, self.max_len, self.hyperparams);
        restore_words(&self.vocab.decode(&ids)).join(" ")
    }
}

/// An owning responder around a loaded checkpoint; the chat REPL uses this.
pub struct CheckpointResponder {
    pub checkpoint: Checkpoint,
    pub bpe: BpeModel,
}

impl Responder for CheckpointResponder {
    fn respond(&self, question: &str) -> String {
        ModelResponder::new(
            &self.checkpoint.hyperparams,
            &self.checkpoint.vocab,
            &self.checkpoint.model,
            &self.bpe,
        )
        .respond(question)
    }
}

fn ensure_labeled(dataset: &Dataset) -> Result<()> {
    for thread in &dataset.threads {
        if thread.comments.iter().any(|c| c.label == Label::Unlabeled) {
            return Err(Error::invalid(format!(
                "thread {:?} has unlabeled comments; extrinsic evaluation needs gold labels",
                thread.id
            )));
        }
    }
    Ok(())
}

/// Relevance flags of a ranked thread, in rank order (true ⇔ Good).
pub fn relevance_list(thread: &Thread, ranked: &RankedThread) -> RelevanceList {
    ranked
        .ranking
        .iter()
        .map(|c| thread.comments[c.original_index].label == Label::Good)
        .collect()
}

/// Per-thread detail from an extrinsic evaluation run.
#[derive(Debug, Clone)]
pub struct ThreadEvaluation {
    pub thread_id: String,
    pub utterance: String,
    pub average_precision: Option<f64>,
}

/// MAP of a responder over a labeled dataset: generate an utterance per
/// question, rank the comments against it, score the ranking.
pub fn extrinsic_map(
    responder: &dyn Responder,
    dataset: &Dataset,
    metric: &MetricSpec,
    ctx: &RankContext,
    depth: Option<usize>,
) -> Result<f64> {
    extrinsic_map_detailed(responder, dataset, metric, ctx, depth).map(|(map, _)| map)
}

/// Same as [`extrinsic_map`] but also returns the per-thread breakdown.
pub fn extrinsic_map_detailed(
    responder: &dyn Responder,
    dataset: &Dataset,
    metric: &MetricSpec,
    ctx: &RankContext,
    depth: Option<usize>,
) -> Result<(f64, Vec<ThreadEvaluation>)> {
    ensure_labeled(dataset)?;
    let mut rels = Vec::with_capacity(dataset.threads.len());
    let mut details = Vec::with_capacity(dataset.threads.len());
    for thread in &dataset.threads {
        let utterance = responder.respond(&thread.question_text());
        let ranked = rank_thread(metric, thread, &utterance, ctx)?;
        let rel = relevance_list(thread, &ranked);
        details.push(ThreadEvaluation {
            thread_id: thread.id.clone(),
            utterance,
            average_precision: crate::metrics::average_precision_at(&rel, depth),
        });
        rels.push(rel);
    }
    let map = mean_average_precision_at(&rels, depth)?;
    Ok((map, details))
}

/// The two reference points a trained responder has to beat.
#[derive(Debug, Clone, Copy)]
pub enum BaselineMode {
    /// Rank the comments against the question text itself.
    QuestionAsUtterance,
    /// Rank the comments in a seeded uniform random order.
    RandomOrder { seed: u64 },
}

/// MAP of a baseline over a labeled dataset.
pub fn baseline_map(
    dataset: &Dataset,
    metric: &MetricSpec,
    ctx: &RankContext,
    mode: BaselineMode,
    depth: Option<usize>,
) -> Result<f64> {
    match mode {
        BaselineMode::QuestionAsUtterance => {
            extrinsic_map(&EchoResponder, dataset, metric, ctx, depth)
        }
        BaselineMode::RandomOrder { seed } => {
            ensure_labeled(dataset)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rels = shuffled_relevances(dataset, &mut rng);
            mean_average_precision_at(&rels, depth)
        }
    }
}

fn shuffled_relevances(dataset: &Dataset, rng: &mut ChaCha8Rng) -> Vec<RelevanceList> {
    dataset
        .threads
        .iter()
        .map(|thread| {
            let mut order: Vec<usize> = (0..thread.comments.len()).collect();
            order.shuffle(rng);
            order
                .into_iter()
                .map(|i| thread.comments[i].label == Label::Good)
                .collect()
        })
        .collect()
}

/// Monte-Carlo estimate of the random-order MAP.
#[derive(Debug, Clone, Copy)]
pub struct RandomBaseline {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Estimates the expected MAP of a uniformly random ordering by seeded
/// simulation: `samples` independent shuffle passes over the dataset.
pub fn random_order_map_estimate(
    dataset: &Dataset,
    samples: usize,
    seed: u64,
    depth: Option<usize>,
) -> Result<RandomBaseline> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    ensure_labeled(dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let rels = shuffled_relevances(dataset, &mut rng);
        let map = mean_average_precision_at(&rels, depth)?;
        sum += map;
        sum_sq += map * map;
    }
    let n = samples as f64;
    let mean = sum / n;
    let variance = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RandomBaseline {
        mean,
        std_err: (variance / n).sqrt(),
        samples,
    })
}

/// Metrics of one evaluated checkpoint. `checkpoint` is the snapshot's file
/// name, relative to the records file's own directory, so different output
/// directories still produce byte-identical records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub iteration: u64,
    /// Running mean of the training loss since the previous evaluation.
    pub train_loss: f64,
    pub dev_bleu: f64,
    pub dev_map: f64,
    pub checkpoint: String,
}

/// Which record wins model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    MaxDevMap,
    MaxDevBleu,
    MinTrainLoss,
}

impl std::str::FromStr for SelectionCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelectionCriterion> {
        match s.to_lowercase().as_str() {
            "map" => Ok(SelectionCriterion::MaxDevMap),
            "bleu" => Ok(SelectionCriterion::MaxDevBleu),
            "loss" => Ok(SelectionCriterion::MinTrainLoss),
            _ => Err(Error::invalid(format!(
                "unknown selection criterion {s:?} (expected map|bleu|loss)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SelectionCriterion::MaxDevMap => "map",
            SelectionCriterion::MaxDevBleu => "bleu",
            SelectionCriterion::MinTrainLoss => "loss",
        };
        f.write_str(s)
    }
}

/// Picks the best record under a criterion; ties go to the earliest
/// iteration. Errors on an empty list.
pub fn select_best(
    records: &[CheckpointRecord],
    criterion: SelectionCriterion,
) -> Result<&CheckpointRecord> {
    if records.is_empty() {
        return Err(Error::invalid("no checkpoint records to select from"));
    }
    let better = |candidate: &CheckpointRecord, best: &CheckpointRecord| -> bool {
        match criterion {
            SelectionCriterion::MaxDevMap => candidate.dev_map > best.dev_map,
            SelectionCriterion::MaxDevBleu => candidate.dev_bleu > best.dev_bleu,
            SelectionCriterion::MinTrainLoss => candidate.train_loss < best.train_loss,
        }
    };
    let mut best = &records[0];
    for record in &records[1..] {
        if better(record, best) {
            best = record;
        }
    }
    Ok(best)
}

/// Writes records as JSONL, one per line.
pub fn save_records(records: &[CheckpointRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a records JSONL file.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<CheckpointRecord>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CheckpointRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(&display, idx + 1, format!("bad record: {e}")))?;
        records.push(record);
    }
    Ok(records)
}

/// How a checkpoint is judged during training.
pub struct EvalSetup<'a> {
    pub dev: &'a Dataset,
    pub metric: MetricSpec,
    pub ctx: RankContext<'a>,
    pub bleu: BleuConfig,
}

/// Scores one (hyperparams, vocab, model) triple on the dev set: extrinsic
/// MAP of the greedy-decode responder and multi-reference BLEU of the same
/// responses.
pub fn evaluate_model(
    hyperparams: &Hyperparams,
    vocab: &Vocab,
    model: &Seq2SeqModel,
    bpe: &BpeModel,
    setup: &EvalSetup,
) -> Result<(f64, f64)> {
    ensure_labeled(setup.dev)?;
    let responder = ModelResponder::new(hyperparams, vocab, model, bpe);
    let mut rels = Vec::with_capacity(setup.dev.threads.len());
    let mut outputs = Vec::with_capacity(setup.dev.threads.len());
    for thread in &setup.dev.threads {
        let utterance = responder.respond(&thread.question_text());
        let ranked = rank_thread(&setup.metric, thread, &utterance, &setup.ctx)?;
        rels.push(relevance_list(thread, &ranked));
        outputs.push(tokenize(&utterance));
    }
    let dev_map = mean_average_precision_at(&rels, None)?;
    let dev_bleu = multi_reference_bleu(&outputs, setup.dev, &setup.bleu)?;
    Ok((dev_map, dev_bleu))
}

/// Evaluates a saved checkpoint exactly the way the training loop does.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    bpe: &BpeModel,
    setup: &EvalSetup,
) -> Result<(f64, f64)> {
    evaluate_model(&ckpt.hyperparams, &ckpt.vocab, &ckpt.model, bpe, setup)
}

/// Training-loop settings beyond the model hyperparameters.
pub struct TrainConfig {
    pub hyperparams: Hyperparams,
    pub max_iterations: u64,
    pub criterion: SelectionCriterion,
}

/// What a training run produced.
pub struct TrainOutcome {
    pub best: CheckpointRecord,
    pub records: Vec<CheckpointRecord>,
    /// Set when training stopped early on a non-finite loss.
    pub halted: Option<String>,
}

/// A (source ids, target ids) training pair.
pub type IdPair = (Vec<usize>, Vec<usize>);

/// Turns sentence pairs into id pairs and the vocabulary that encodes them.
///
/// The vocabulary keeps the most frequent BPE symbols up to the configured
/// cap; the effective vocabulary size (reserved ids included) is returned
/// via `vocab.len()` and the model is sized to it.
pub fn encode_pairs(
    pairs: &[SentencePair],
    bpe: &BpeModel,
    vocab_cap: usize,
) -> Result<(Vocab, Vec<IdPair>)> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    let segmented: Vec<(Vec<String>, Vec<String>)> = pairs
        .iter()
        .map(|p| {
            (
                apply_bpe(&tokenize(&p.question_sentence), bpe),
                apply_bpe(&tokenize(&p.answer_sentence), bpe),
            )
        })
        .collect();
    let vocab = Vocab::build(
        segmented
            .iter()
            .flat_map(|(src, tgt)| src.iter().chain(tgt.iter())),
        vocab_cap,
    )?;
    let encoded = segmented
        .iter()
        .map(|(src, tgt)| (vocab.encode(src), vocab.encode(tgt)))
        .collect();
    Ok((vocab, encoded))
}

fn batch_slice(encoded: &[IdPair], iteration: u64, minibatch: usize) -> Vec<IdPair> {
    let chunks = encoded.len().div_ceil(minibatch);
    let chunk = ((iteration - 1) as usize) % chunks;
    let start = chunk * minibatch;
    let end = (start + minibatch).min(encoded.len());
    let mut slice: Vec<(Vec<usize>, Vec<usize>)> = encoded[start..end].to_vec();
    while slice.len() < minibatch {
        slice.push(slice.last().expect("slice is non-empty").clone());
    }
    slice
}

/// Runs minibatch SGD with periodic checkpoint evaluation and returns the
/// record chosen by the configured criterion.
///
/// Every `eval_every` iterations (and at the final iteration if it is not a
/// multiple) the model is snapshotted to `out_dir/ckpt_<iteration>.bin`, and
/// a [`CheckpointRecord`] is appended; `out_dir/records.jsonl` holds them
/// all. Minibatches walk the pairs in a fixed order, so a fixed seed makes
/// the whole run reproducible. A non-finite loss aborts training; the best
/// checkpoint so far is still reported.
pub fn train_with_selection(
    pairs: &[SentencePair],
    bpe: &BpeModel,
    setup: &EvalSetup,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.hyperparams.validate()?;
    if cfg.max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be at least 1"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let (vocab, encoded) = encode_pairs(pairs, bpe, cfg.hyperparams.vocab_size)?;
    let hyperparams = Hyperparams {
        vocab_size: vocab.len(),
        ..cfg.hyperparams.clone()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let mut model = Seq2SeqModel::init(&hyperparams, &mut rng);

    let mut records: Vec<CheckpointRecord> = Vec::new();
    let mut halted = None;
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;

    for iteration in 1..=cfg.max_iterations {
        let slice = batch_slice(&encoded, iteration, hyperparams.minibatch);
        let batch = prepare_batch(&slice, &hyperparams)?;
        let step = forward_loss(&model, &batch).map(|(loss, cache)| {
            let grads = backward(&model, &cache);
            sgd_step(&mut model, &grads, &hyperparams);
            loss
        });
        match step {
            Ok(loss) => {
                loss_sum += loss;
                loss_count += 1;
            }
            Err(Error::NonFiniteLoss) => {
                halted = Some(format!(
                    "training halted: non-finite loss at iteration {iteration}"
                ));
                break;
            }
            Err(other) => return Err(other),
        }

        let scheduled = iteration % hyperparams.eval_every == 0;
        let last = iteration == cfg.max_iterations;
        if scheduled || last {
            let ckpt = Checkpoint {
                iteration,
                hyperparams: hyperparams.clone(),
                vocab: vocab.clone(),
                model: model.clone(),
                rng: rng.clone(),
            };
            let file_name = format!("ckpt_{iteration}.bin");
            save_checkpoint(&ckpt, out_dir.join(&file_name))?;
            let (dev_map, dev_bleu) = evaluate_model(&hyperparams, &vocab, &model, bpe, setup)?;
            records.push(CheckpointRecord {
                iteration,
                train_loss: loss_sum / loss_count.max(1) as f64,
                dev_bleu,
                dev_map,
                checkpoint: file_name,
            });
            loss_sum = 0.0;
            loss_count = 0;
        }
    }

    save_records(&records, out_dir.join("records.jsonl"))?;
    let best = select_best(&records, cfg.criterion)?.clone();
    Ok(TrainOutcome {
        best,
        records,
        halted,
    })
}

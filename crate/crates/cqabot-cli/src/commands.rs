use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use cqabot::bpe;
use cqabot::corpus::{self, Dataset, Label, SplitTag};
use cqabot::harness::{
    self, BaselineMode, CheckpointResponder, EchoResponder, EvalSetup, Responder,
    SelectionCriterion, TrainConfig,
};
use cqabot::metrics::BleuConfig;
use cqabot::pairselect::{self, PairOptions};
use cqabot::ranking::{rank_thread, Bm25Stats, MetricSpec, RankContext};
use cqabot::seq2seq::{load_checkpoint, Hyperparams};
use cqabot::textrep::{self, tokenize, EmbeddingTable, IdfTable, Stopwords};

fn parse_split(s: &str) -> Result<SplitTag, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_metric(s: &str) -> Result<MetricSpec, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_criterion(s: &str) -> Result<SelectionCriterion, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// A comma-separated `src:tgt` bucket list as one CLI value.
#[derive(Clone, Debug)]
pub struct BucketList(pub Vec<(usize, usize)>);

fn parse_buckets(s: &str) -> Result<BucketList, String> {
    s.split(',')
        .map(|pair| {
            let (src, tgt) = pair
                .split_once(':')
                .ok_or_else(|| format!("bucket {pair:?} must be `src:tgt`"))?;
            let src = src.trim().parse().map_err(|_| format!("bad bucket source length {src:?}"))?;
            let tgt = tgt.trim().parse().map_err(|_| format!("bad bucket target length {tgt:?}"))?;
            Ok((src, tgt))
        })
        .collect::<Result<Vec<(usize, usize)>, String>>()
        .map(BucketList)
}

fn parse_labels(s: &str) -> Result<HashSet<Label>, String> {
    s.split(',')
        .map(|raw| {
            let raw = raw.trim();
            if raw.eq_ignore_ascii_case("unlabeled") {
                Ok(Label::Unlabeled)
            } else {
                Label::parse(Some(raw)).map_err(|e| format!("{e}"))
            }
        })
        .collect()
}

fn load_stopwords(path: Option<&PathBuf>) -> Result<Stopwords> {
    match path {
        Some(p) => Ok(Stopwords::from_path(p)?),
        None => Ok(Stopwords::bundled()),
    }
}

/// Builds the IDF table from `--idf-data` files, or from `fallback` when
/// none are given.
fn load_idf(paths: &[PathBuf], fallback: &Dataset) -> Result<IdfTable> {
    if paths.is_empty() {
        return Ok(IdfTable::from_datasets(&[fallback])?);
    }
    let datasets: Vec<Dataset> = paths
        .iter()
        .map(|p| corpus::load_dataset(p, SplitTag::Raw))
        .collect::<cqabot::Result<_>>()?;
    let refs: Vec<&Dataset> = datasets.iter().collect();
    Ok(IdfTable::from_datasets(&refs)?)
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

#[derive(Args)]
pub struct MakePairsArgs {
    /// Thread JSONL file to convert
    #[arg(long)]
    pub data: PathBuf,
    /// Split tag of the input data
    #[arg(long, default_value = "raw", value_parser = parse_split)]
    pub split: SplitTag,
    /// Word-embedding text file for sentence similarity
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Datasets whose thread ids must be excluded (dev/test hygiene)
    #[arg(long = "exclude")]
    pub exclude: Vec<PathBuf>,
    /// Thread JSONL files the IDF statistics are computed from
    /// (default: the --data file)
    #[arg(long = "idf-data")]
    pub idf_data: Vec<PathBuf>,
    /// Stopword list override, one word per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Drop pairs whose similarity is below this floor (off by default)
    #[arg(long = "min-similarity")]
    pub min_similarity: Option<f64>,
    /// Keep only comments with these labels, comma-separated
    /// (good, potentiallyuseful, bad, unlabeled)
    #[arg(long, value_parser = parse_labels)]
    pub labels: Option<HashSet<Label>>,
    /// Output pairs TSV
    #[arg(long)]
    pub out: PathBuf,
}

pub fn make_pairs(args: &MakePairsArgs) -> Result<()> {
    let data = corpus::load_dataset(&args.data, args.split)?;
    let held_out: Vec<Dataset> = args
        .exclude
        .iter()
        .map(|p| corpus::load_dataset(p, SplitTag::Raw))
        .collect::<cqabot::Result<_>>()?;
    let held_refs: Vec<&Dataset> = held_out.iter().collect();
    let data = corpus::exclude_overlap(&data, &held_refs);

    let idf = load_idf(&args.idf_data, &data)?;
    let table = textrep::load_embeddings(&args.embeddings)?;
    let stopwords = load_stopwords(args.stopwords.as_ref())?;
    let options = PairOptions {
        min_similarity: args.min_similarity,
        label_filter: args.labels.clone(),
    };
    let pairs = pairselect::build_training_pairs(&data, &table, &idf, &stopwords, &options)?;
    pairselect::save_pairs(&pairs, &args.out)?;
    eprintln!(
        "wrote {} pairs from {} threads to {}",
        pairs.len(),
        data.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct LearnBpeArgs {
    /// Pairs TSV produced by make-pairs
    #[arg(long)]
    pub pairs: PathBuf,
    /// Number of merges to learn
    #[arg(long = "num-merges", default_value_t = 1000)]
    pub num_merges: usize,
    /// Output merges file
    #[arg(long)]
    pub out: PathBuf,
}

pub fn learn_bpe_cmd(args: &LearnBpeArgs) -> Result<()> {
    let pairs = pairselect::load_pairs(&args.pairs)?;
    let tokens: Vec<String> = pairs
        .iter()
        .flat_map(|p| {
            tokenize(&p.question_sentence)
                .into_iter()
                .chain(tokenize(&p.answer_sentence))
        })
        .collect();
    let model = bpe::learn_bpe(tokens, args.num_merges);
    bpe::save_merges(&model, &args.out)?;
    eprintln!("learned {} merges into {}", model.num_merges(), args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct ApplyBpeArgs {
    /// Merges file from learn-bpe
    #[arg(long)]
    pub merges: PathBuf,
    /// Input text file, one line per text (default: stdin)
    #[arg(long)]
    pub input: Option<PathBuf>,
}

pub fn apply_bpe_cmd(args: &ApplyBpeArgs) -> Result<()> {
    let model = bpe::load_merges(&args.merges)?;
    let content = match &args.input {
        Some(path) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => io::read_to_string(io::stdin())?,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in content.lines() {
        let symbols = bpe::apply_bpe(&tokenize(line), &model);
        writeln!(out, "{}", symbols.join(" "))?;
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Pairs TSV produced by make-pairs
    #[arg(long)]
    pub pairs: PathBuf,
    /// Merges file from learn-bpe
    #[arg(long)]
    pub merges: PathBuf,
    /// Labeled dev JSONL for checkpoint evaluation
    #[arg(long)]
    pub dev: PathBuf,
    /// Directory receiving checkpoints and records.jsonl
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Total minibatch iterations
    #[arg(long)]
    pub iterations: u64,
    /// Evaluate and checkpoint every this many iterations
    #[arg(long = "eval-every", default_value_t = 500)]
    pub eval_every: u64,
    /// Model-selection criterion: map, bleu, or loss
    #[arg(long, default_value = "map", value_parser = parse_criterion)]
    pub criterion: SelectionCriterion,
    /// Ranking metric for the dev MAP evaluation
    #[arg(long, default_value = "tfidf+qc-sim", value_parser = parse_metric)]
    pub metric: MetricSpec,
    /// Word-embedding file (needed by cos and avg metrics)
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Thread JSONL files for IDF statistics (default: the dev file)
    #[arg(long = "idf-data")]
    pub idf_data: Vec<PathBuf>,
    /// Stopword list override
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Vocabulary cap, reserved ids included
    #[arg(long = "vocab-size", default_value_t = 200)]
    pub vocab_size: usize,
    #[arg(long = "embed-dim", default_value_t = 16)]
    pub embed_dim: usize,
    #[arg(long = "hidden-dim", default_value_t = 16)]
    pub hidden_dim: usize,
    #[arg(long = "num-layers", default_value_t = 2)]
    pub num_layers: usize,
    #[arg(long = "batch-size", default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long = "learning-rate", default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long = "clip-norm", default_value_t = 5.0)]
    pub clip_norm: f64,
    /// Padded (source:target) bucket shapes
    #[arg(long, default_value = "5:10,10:15,20:25,40:45", value_parser = parse_buckets)]
    pub buckets: BucketList,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let pairs = pairselect::load_pairs(&args.pairs)?;
    let model = bpe::load_merges(&args.merges)?;
    let dev = corpus::load_dataset(&args.dev, SplitTag::Dev)?;
    let idf = load_idf(&args.idf_data, &dev)?;
    let stopwords = load_stopwords(args.stopwords.as_ref())?;
    let embeddings = args
        .embeddings
        .as_ref()
        .map(textrep::load_embeddings)
        .transpose()?;
    let bm25 = Bm25Stats::from_dataset_comments(&dev)?;
    let setup = EvalSetup {
        dev: &dev,
        metric: args.metric,
        ctx: RankContext {
            embeddings: embeddings.as_ref(),
            idf: Some(&idf),
            stopwords: &stopwords,
            bm25: Some(&bm25),
            bleu: BleuConfig::default(),
        },
        bleu: BleuConfig::default(),
    };
    let cfg = TrainConfig {
        hyperparams: Hyperparams {
            vocab_size: args.vocab_size,
            embed_dim: args.embed_dim,
            hidden_dim: args.hidden_dim,
            num_layers: args.num_layers,
            minibatch: args.batch_size,
            learning_rate: args.learning_rate,
            buckets: args.buckets.0.clone(),
            eval_every: args.eval_every,
            clip_norm: args.clip_norm,
            seed: args.seed,
        },
        max_iterations: args.iterations,
        criterion: args.criterion,
    };
    let outcome = harness::train_with_selection(&pairs, &model, &setup, &cfg, &args.out_dir)?;
    for record in &outcome.records {
        println!(
            "iteration {}\ttrain_loss {:.4}\tdev_bleu {:.4}\tdev_map {:.4}",
            record.iteration, record.train_loss, record.dev_bleu, record.dev_map
        );
    }
    if let Some(message) = &outcome.halted {
        eprintln!("{message}");
    }
    println!(
        "selected ({}): iteration {}\t{}",
        args.criterion, outcome.best.iteration, outcome.best.checkpoint
    );
    Ok(())
}

#[derive(Args)]
pub struct SelectArgs {
    /// records.jsonl from a training run
    #[arg(long)]
    pub records: PathBuf,
    /// map, bleu, or loss
    #[arg(long, default_value = "map", value_parser = parse_criterion)]
    pub criterion: SelectionCriterion,
}

pub fn select(args: &SelectArgs) -> Result<()> {
    let records = harness::load_records(&args.records)?;
    let best = harness::select_best(&records, args.criterion)?;
    println!("iteration\t{}", best.iteration);
    println!("train_loss\t{:.4}", best.train_loss);
    println!("dev_bleu\t{:.4}", best.dev_bleu);
    println!("dev_map\t{:.4}", best.dev_map);
    println!("checkpoint\t{}", best.checkpoint);
    Ok(())
}

/// How eval/rank commands obtain an utterance per question.
#[derive(Args)]
pub struct ResponderArgs {
    /// Use the question text itself as the utterance
    #[arg(long)]
    pub echo: bool,
    /// Checkpoint file of a trained model
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Merges file matching the checkpoint
    #[arg(long)]
    pub merges: Option<PathBuf>,
}

impl ResponderArgs {
    fn build(&self) -> Result<Box<dyn Responder>> {
        match (self.echo, &self.checkpoint) {
            (true, None) => Ok(Box::new(EchoResponder)),
            (false, Some(path)) => {
                let merges = self
                    .merges
                    .as_ref()
                    .ok_or_else(|| anyhow!("--checkpoint needs --merges"))?;
                Ok(Box::new(CheckpointResponder {
                    checkpoint: load_checkpoint(path)?,
                    bpe: bpe::load_merges(merges)?,
                }))
            }
            (true, Some(_)) => bail!("--echo and --checkpoint are mutually exclusive"),
            (false, None) => bail!("pick a responder: --echo or --checkpoint <file>"),
        }
    }
}

/// Context files shared by rank/eval commands.
#[derive(Args)]
pub struct ContextArgs {
    /// Word-embedding file (needed by cos and avg metrics)
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Thread JSONL files for IDF statistics (default: the --data file)
    #[arg(long = "idf-data")]
    pub idf_data: Vec<PathBuf>,
    /// Stopword list override
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

struct LoadedContext {
    embeddings: Option<EmbeddingTable>,
    idf: IdfTable,
    stopwords: Stopwords,
    bm25: Bm25Stats,
}

impl LoadedContext {
    fn load(args: &ContextArgs, data: &Dataset) -> Result<LoadedContext> {
        Ok(LoadedContext {
            embeddings: args.embeddings.as_ref().map(textrep::load_embeddings).transpose()?,
            idf: load_idf(&args.idf_data, data)?,
            stopwords: load_stopwords(args.stopwords.as_ref())?,
            bm25: Bm25Stats::from_dataset_comments(data)?,
        })
    }

    fn rank_context(&self) -> RankContext<'_> {
        RankContext {
            embeddings: self.embeddings.as_ref(),
            idf: Some(&self.idf),
            stopwords: &self.stopwords,
            bm25: Some(&self.bm25),
            bleu: BleuConfig::default(),
        }
    }
}

#[derive(Args)]
pub struct RankArgs {
    /// Thread JSONL file to rank
    #[arg(long)]
    pub data: PathBuf,
    /// Split tag of the input data
    #[arg(long, default_value = "raw", value_parser = parse_split)]
    pub split: SplitTag,
    /// Ranking metric
    #[arg(long, default_value = "tfidf+qc-sim", value_parser = parse_metric)]
    pub metric: MetricSpec,
    #[command(flatten)]
    pub responder: ResponderArgs,
    #[command(flatten)]
    pub context: ContextArgs,
    /// Output TSV (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let data = corpus::load_dataset(&args.data, args.split)?;
    let responder = args.responder.build()?;
    let loaded = LoadedContext::load(&args.context, &data)?;
    let ctx = loaded.rank_context();
    let mut out = String::new();
    for thread in &data.threads {
        let utterance = responder.respond(&thread.question_text());
        let ranked = rank_thread(&args.metric, thread, &utterance, &ctx)?;
        out.push_str(&ranked.to_tsv());
    }
    write_or_print(args.out.as_ref(), &out)
}

#[derive(Args)]
pub struct EvalMapArgs {
    /// Labeled thread JSONL file
    #[arg(long)]
    pub data: PathBuf,
    /// Split tag of the input data (labels are required)
    #[arg(long, default_value = "dev", value_parser = parse_split)]
    pub split: SplitTag,
    /// Ranking metric
    #[arg(long, default_value = "tfidf+qc-sim", value_parser = parse_metric)]
    pub metric: MetricSpec,
    #[command(flatten)]
    pub responder: ResponderArgs,
    /// Score a seeded random ordering instead of a responder
    #[arg(long)]
    pub random: bool,
    /// Seed for --random
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Only score the top K ranks (default: unlimited)
    #[arg(long)]
    pub depth: Option<usize>,
    #[command(flatten)]
    pub context: ContextArgs,
    /// Also print one AP line per thread
    #[arg(long)]
    pub verbose: bool,
}

pub fn eval_map(args: &EvalMapArgs) -> Result<()> {
    let data = corpus::load_dataset(&args.data, args.split)?;
    let loaded = LoadedContext::load(&args.context, &data)?;
    let ctx = loaded.rank_context();
    let map = if args.random {
        if args.responder.echo || args.responder.checkpoint.is_some() {
            bail!("--random is mutually exclusive with --echo/--checkpoint");
        }
        harness::baseline_map(
            &data,
            &args.metric,
            &ctx,
            BaselineMode::RandomOrder { seed: args.seed },
            args.depth,
        )?
    } else {
        let responder = args.responder.build()?;
        let (map, details) = harness::extrinsic_map_detailed(
            responder.as_ref(),
            &data,
            &args.metric,
            &ctx,
            args.depth,
        )?;
        if args.verbose {
            for detail in &details {
                match detail.average_precision {
                    Some(ap) => println!(
                        "{}\t{:.4}\t{}",
                        detail.thread_id, ap, detail.utterance
                    ),
                    None => println!(
                        "{}\tskipped (no relevant comments)\t{}",
                        detail.thread_id, detail.utterance
                    ),
                }
            }
        }
        map
    };
    println!("MAP\t{map:.4}");
    Ok(())
}

#[derive(Args)]
pub struct EvalBleuArgs {
    /// Labeled thread JSONL file
    #[arg(long)]
    pub data: PathBuf,
    /// Split tag of the input data (labels are required)
    #[arg(long, default_value = "dev", value_parser = parse_split)]
    pub split: SplitTag,
    #[command(flatten)]
    pub responder: ResponderArgs,
    /// Highest n-gram order
    #[arg(long = "max-n", default_value_t = 4)]
    pub max_n: usize,
    /// Also print one BLEU line per thread
    #[arg(long)]
    pub verbose: bool,
}

pub fn eval_bleu(args: &EvalBleuArgs) -> Result<()> {
    let data = corpus::load_dataset(&args.data, args.split)?;
    let responder = args.responder.build()?;
    let cfg = BleuConfig { max_n: args.max_n };
    let mut outputs = Vec::with_capacity(data.threads.len());
    for thread in &data.threads {
        let utterance = responder.respond(&thread.question_text());
        if args.verbose {
            let references: Vec<Vec<String>> = thread
                .comments
                .iter()
                .filter(|c| c.label == Label::Good)
                .map(|c| tokenize(&c.text))
                .collect();
            if references.is_empty() {
                println!("{}\tskipped (no Good comments)\t{utterance}", thread.id);
            } else {
                let score = cqabot::metrics::sentence_bleu_plus1(
                    &tokenize(&utterance),
                    &references,
                    &cfg,
                )?;
                println!("{}\t{score:.4}\t{utterance}", thread.id);
            }
        }
        outputs.push(tokenize(&utterance));
    }
    let bleu = cqabot::metrics::multi_reference_bleu(&outputs, &data, &cfg)?;
    println!("BLEU\t{bleu:.4}");
    Ok(())
}

#[derive(Args)]
pub struct ChatArgs {
    /// Checkpoint file of a trained model
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Merges file matching the checkpoint
    #[arg(long)]
    pub merges: PathBuf,
}

/// Reads one question per line and prints one generated answer per line.
/// `.quit` or end of input exits. A prompt is shown only on a terminal, so
/// piped sessions stay machine-readable.
pub fn chat(args: &ChatArgs) -> Result<()> {
    let responder = CheckpointResponder {
        checkpoint: load_checkpoint(&args.checkpoint)?,
        bpe: bpe::load_merges(&args.merges)?,
    };
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            print!("> ");
            io::stdout().flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line?;
        if line.trim() == ".quit" {
            break;
        }
        println!("{}", responder.respond(&line));
    }
    Ok(())
}

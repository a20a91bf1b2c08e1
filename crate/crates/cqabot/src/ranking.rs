//! The family of similarity functions that rank a thread's comments against
//! a generated utterance, and the ranking itself.
//!
//! Four base functions are available: cosine over averaged embeddings,
//! sentence-level BLEU+1, BM25, and TF×IDF cosine. Each has a `+qc-sim`
//! variant that adds the TF×IDF cosine between the original question and
//! the comment — a term that does not depend on the utterance at all. `Avg`
//! averages all eight after per-thread min–max normalization, without which
//! BM25's unbounded scale would drown out the rest.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{Dataset, Thread};
use crate::error::{Error, Result};
use crate::metrics::{sentence_bleu_plus1, BleuConfig};
use crate::textrep::{
    sentence_embedding, tfidf_vector, tokenize, EmbeddingTable, IdfTable, Stopwords,
};

/// BM25 parameters; the classic defaults.
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Corpus statistics behind BM25: document count, per-token document
/// frequency, and average document length.
///
/// The constructors refuse empty corpora, so scoring never divides by zero.
#[derive(Debug, Clone)]
pub struct Bm25Stats {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25Stats {
    /// Builds statistics from tokenized documents.
    pub fn from_documents<I>(documents: I) -> Result<Bm25Stats>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut doc_count = 0usize;
        let mut total_len = 0usize;
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for tokens in documents {
            doc_count += 1;
            total_len += tokens.len();
            let distinct: std::collections::HashSet<String> = tokens.into_iter().collect();
            for token in distinct {
                *doc_freq.entry(token).or_insert(0) += 1;
            }
        }
        if doc_count == 0 {
            return Err(Error::invalid("BM25 statistics need at least one document"));
        }
        let avgdl = total_len as f64 / doc_count as f64;
        if avgdl <= 0.0 {
            return Err(Error::invalid("BM25 average document length must be positive"));
        }
        Ok(Bm25Stats {
            doc_count,
            doc_freq,
            avgdl,
        })
    }

    /// Statistics over every comment text of a dataset — the documents
    /// being ranked.
    pub fn from_dataset_comments(dataset: &Dataset) -> Result<Bm25Stats> {
        Bm25Stats::from_documents(
            dataset
                .threads
                .iter()
                .flat_map(|t| t.comments.iter().map(|c| tokenize(&c.text))),
        )
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    fn idf(&self, token: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq(token) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// Okapi BM25 with `k1 = 1.2`, `b = 0.75`, and the non-negative
/// `ln(1 + (N − df + ½)/(df + ½))` idf.
///
/// Distinct query tokens contribute once each; tokens absent from the
/// document contribute zero, so an empty query scores 0.
pub fn bm25(query_tokens: &[String], doc_tokens: &[String], stats: &Bm25Stats) -> f64 {
    let mut doc_counts: HashMap<&str, usize> = HashMap::new();
    for token in doc_tokens {
        *doc_counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let doc_len = doc_tokens.len() as f64;
    let length_norm = 1.0 - BM25_B + BM25_B * doc_len / stats.avgdl;

    let mut seen = std::collections::HashSet::new();
    let mut score = 0.0;
    // First-occurrence order keeps the accumulation deterministic.
    for token in query_tokens {
        if !seen.insert(token.as_str()) {
            continue;
        }
        let freq = doc_counts.get(token.as_str()).copied().unwrap_or(0) as f64;
        if freq == 0.0 {
            continue;
        }
        score += stats.idf(token) * freq * (BM25_K1 + 1.0) / (freq + BM25_K1 * length_norm);
    }
    score
}

/// The base similarity function of a [`MetricSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMetric {
    CosEmbeddings,
    Bleu,
    Bm25,
    TfIdf,
    /// Mean of all eight concrete functions after per-thread min–max
    /// normalization; only meaningful inside [`rank_thread`].
    Avg,
}

/// One concrete ranking function: a base plus the optional `+qc-sim` term.
/// `Avg` ignores its own `qc_sim` flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSpec {
    pub base: BaseMetric,
    pub qc_sim: bool,
}

impl MetricSpec {
    pub fn new(base: BaseMetric, qc_sim: bool) -> MetricSpec {
        MetricSpec { base, qc_sim }
    }

    /// The strongest variant in practice and the selection default.
    pub fn tfidf_qc_sim() -> MetricSpec {
        MetricSpec::new(BaseMetric::TfIdf, true)
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.base {
            BaseMetric::CosEmbeddings => "cos",
            BaseMetric::Bleu => "bleu",
            BaseMetric::Bm25 => "bm25",
            BaseMetric::TfIdf => "tfidf",
            BaseMetric::Avg => "avg",
        };
        if self.qc_sim && self.base != BaseMetric::Avg {
            write!(f, "{base}+qc-sim")
        } else {
            f.write_str(base)
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<MetricSpec> {
        let lower = s.to_lowercase();
        let (base_str, qc_sim) = match lower.strip_suffix("+qc-sim") {
            Some(prefix) => (prefix, true),
            None => (lower.as_str(), false),
        };
        let base = match base_str {
            "cos" | "cos-embeddings" => BaseMetric::CosEmbeddings,
            "bleu" => BaseMetric::Bleu,
            "bm25" => BaseMetric::Bm25,
            "tfidf" => BaseMetric::TfIdf,
            "avg" => BaseMetric::Avg,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown metric {s:?} (expected cos|bleu|bm25|tfidf|avg, optionally +qc-sim)"
                )))
            }
        };
        Ok(MetricSpec { base, qc_sim })
    }
}

/// Shared immutable inputs for scoring. Fields a metric does not need may
/// stay `None`; using a metric without its context is an error.
#[derive(Clone)]
pub struct RankContext<'a> {
    pub embeddings: Option<&'a EmbeddingTable>,
    pub idf: Option<&'a IdfTable>,
    pub stopwords: &'a Stopwords,
    pub bm25: Option<&'a Bm25Stats>,
    pub bleu: BleuConfig,
}

impl<'a> RankContext<'a> {
    fn need_idf(&self) -> Result<&'a IdfTable> {
        self.idf
            .ok_or_else(|| Error::invalid("this metric needs an IDF table"))
    }

    fn need_embeddings(&self) -> Result<&'a EmbeddingTable> {
        self.embeddings
            .ok_or_else(|| Error::invalid("this metric needs an embedding table"))
    }

    fn need_bm25(&self) -> Result<&'a Bm25Stats> {
        self.bm25
            .ok_or_else(|| Error::invalid("this metric needs BM25 statistics"))
    }
}

fn base_score(
    base: BaseMetric,
    utterance_tokens: &[String],
    comment_tokens: &[String],
    ctx: &RankContext,
) -> Result<f64> {
    match base {
        BaseMetric::CosEmbeddings => {
            let table = ctx.need_embeddings()?;
            let idf = ctx.need_idf()?;
            let u = sentence_embedding(utterance_tokens, table, idf, ctx.stopwords);
            let c = sentence_embedding(comment_tokens, table, idf, ctx.stopwords);
            u.cosine(&c)
        }
        BaseMetric::Bleu => {
            sentence_bleu_plus1(utterance_tokens, &[comment_tokens.to_vec()], &ctx.bleu)
        }
        BaseMetric::Bm25 => Ok(bm25(utterance_tokens, comment_tokens, ctx.need_bm25()?)),
        BaseMetric::TfIdf => {
            let idf = ctx.need_idf()?;
            Ok(tfidf_vector(utterance_tokens, idf).cosine(&tfidf_vector(comment_tokens, idf)))
        }
        BaseMetric::Avg => Err(Error::invalid(
            "Avg is defined per thread; use rank_thread",
        )),
    }
}

/// Scores one comment against the utterance under a metric.
///
/// With `qc_sim`, the raw TF×IDF cosine between the question and the
/// comment is added to the raw base score — the two live on different
/// scales for BM25, which is deliberate fidelity to "summed".
pub fn score(
    metric: &MetricSpec,
    question_tokens: &[String],
    utterance_tokens: &[String],
    comment_tokens: &[String],
    ctx: &RankContext,
) -> Result<f64> {
    let mut value = base_score(metric.base, utterance_tokens, comment_tokens, ctx)?;
    if metric.qc_sim {
        let idf = ctx.need_idf()?;
        value += tfidf_vector(question_tokens, idf).cosine(&tfidf_vector(comment_tokens, idf));
    }
    Ok(value)
}

/// One comment with its score and original thread position.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredComment {
    pub comment_id: String,
    pub score: f64,
    pub original_index: usize,
}

/// A thread's comments sorted by score descending, ties by original index.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedThread {
    pub thread_id: String,
    pub ranking: Vec<ScoredComment>,
}

impl RankedThread {
    /// TSV rows: `thread_id, rank (1-based), comment_id, score (6 decimals)`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (rank, comment) in self.ranking.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\n",
                self.thread_id,
                rank + 1,
                comment.comment_id,
                comment.score
            ));
        }
        out
    }
}

/// Sorts scored comments: score descending, ties by original index. This is
/// the one ordering rule every ranking in the pipeline uses.
pub fn rank_comments(thread_id: &str, mut scored: Vec<ScoredComment>) -> RankedThread {
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.original_index.cmp(&b.original_index))
    });
    RankedThread {
        thread_id: thread_id.to_string(),
        ranking: scored,
    }
}

const AVG_COMPONENTS: [MetricSpec; 8] = [
    MetricSpec { base: BaseMetric::CosEmbeddings, qc_sim: false },
    MetricSpec { base: BaseMetric::CosEmbeddings, qc_sim: true },
    MetricSpec { base: BaseMetric::Bleu, qc_sim: false },
    MetricSpec { base: BaseMetric::Bleu, qc_sim: true },
    MetricSpec { base: BaseMetric::Bm25, qc_sim: false },
    MetricSpec { base: BaseMetric::Bm25, qc_sim: true },
    MetricSpec { base: BaseMetric::TfIdf, qc_sim: false },
    MetricSpec { base: BaseMetric::TfIdf, qc_sim: true },
];

/// Min–max normalizes one thread's scores to [0, 1]; a constant vector maps
/// to all 0.5 so it cannot dominate or vanish in the average.
fn min_max_normalize(scores: &mut [f64]) {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        for s in scores.iter_mut() {
            *s = (*s - min) / (max - min);
        }
    } else {
        for s in scores.iter_mut() {
            *s = 0.5;
        }
    }
}

/// Ranks a thread's comments against an utterance.
///
/// For `Avg`, the eight concrete functions are evaluated per comment, each
/// min–max normalized over the thread, and averaged.
pub fn rank_thread(
    metric: &MetricSpec,
    thread: &Thread,
    utterance: &str,
    ctx: &RankContext,
) -> Result<RankedThread> {
    if thread.comments.is_empty() {
        return Err(Error::invalid(format!(
            "thread {:?} has no comments to rank",
            thread.id
        )));
    }
    let question_tokens = tokenize(&thread.question_text());
    let utterance_tokens = tokenize(utterance);
    let comment_tokens: Vec<Vec<String>> =
        thread.comments.iter().map(|c| tokenize(&c.text)).collect();

    let scores: Vec<f64> = if metric.base == BaseMetric::Avg {
        let mut sums = vec![0.0; thread.comments.len()];
        for component in &AVG_COMPONENTS {
            let mut component_scores = Vec::with_capacity(thread.comments.len());
            for tokens in &comment_tokens {
                component_scores.push(score(
                    component,
                    &question_tokens,
                    &utterance_tokens,
                    tokens,
                    ctx,
                )?);
            }
            min_max_normalize(&mut component_scores);
            for (sum, s) in sums.iter_mut().zip(&component_scores) {
                *sum += s;
            }
        }
        sums.into_iter()
            .map(|s| s / AVG_COMPONENTS.len() as f64)
            .collect()
    } else {
        let mut plain = Vec::with_capacity(thread.comments.len());
        for tokens in &comment_tokens {
            plain.push(score(
                metric,
                &question_tokens,
                &utterance_tokens,
                tokens,
                ctx,
            )?);
        }
        plain
    };

    let scored = thread
        .comments
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(original_index, (comment, score))| ScoredComment {
            comment_id: comment.id.clone(),
            score,
            original_index,
        })
        .collect();
    Ok(rank_comments(&thread.id, scored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, Label};

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn two_doc_stats() -> Bm25Stats {
        Bm25Stats::from_documents([toks(&["a", "b"]), toks(&["c", "d"])]).unwrap()
    }

    #[test]
    fn bm25_hand_value() {
        let stats = two_doc_stats();
        let score = bm25(&toks(&["a"]), &toks(&["a", "b"]), &stats);
        assert!((score - std::f64::consts::LN_2).abs() < 1e-9, "{score}");
    }

    #[test]
    fn bm25_zero_cases() {
        let stats = two_doc_stats();
        assert_eq!(bm25(&toks(&["zzz"]), &toks(&["a", "b"]), &stats), 0.0);
        assert_eq!(bm25(&[], &toks(&["a", "b"]), &stats), 0.0);
    }

    #[test]
    fn bm25_needs_documents() {
        assert!(Bm25Stats::from_documents(std::iter::empty::<Vec<String>>()).is_err());
    }

    #[test]
    fn bm25_matches_independent_oracle_vectors() {
        // Expected values from a separately written implementation of the
        // same formula, over small explicit corpora.
        let corpora: [Vec<Vec<&str>>; 3] = [
            vec![vec!["a", "b"], vec!["c", "d"]],
            vec![
                vec!["taxi", "karwa", "good"],
                vec!["beach", "sand"],
                vec!["taxi", "slow", "taxi", "queue"],
            ],
            vec![
                vec!["x"],
                vec!["x", "y"],
                vec!["x", "y", "z"],
                vec!["q", "r", "s", "t", "u"],
            ],
        ];
        let cases: [(usize, Vec<&str>, Vec<&str>, f64); 5] = [
            (0, vec!["a"], vec!["a", "b"], 0.693147180560),
            (1, vec!["taxi", "good", "taxi"], vec!["taxi", "slow", "taxi", "queue"], 0.590861705337),
            (1, vec!["karwa", "beach"], vec!["beach", "sand"], 1.135697029803),
            (2, vec!["x", "y", "z"], vec!["x", "y"], 1.181660251761),
            (2, vec!["x", "q"], vec!["q", "r", "s", "t", "u"], 0.902047735749),
        ];
        for (corpus_idx, query, doc, expected) in cases {
            let stats = Bm25Stats::from_documents(
                corpora[corpus_idx].iter().map(|d| toks(d)),
            )
            .unwrap();
            let got = bm25(&toks(&query), &toks(&doc), &stats);
            assert!(
                (got - expected).abs() < 1e-9,
                "query {query:?} vs doc {doc:?}: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn bm25_monotone_in_term_frequency() {
        let stats = Bm25Stats::from_documents([
            toks(&["a", "b", "c", "d"]),
            toks(&["a", "x", "y", "z"]),
            toks(&["p", "q", "r", "s"]),
        ])
        .unwrap();
        let query = toks(&["a"]);
        // More occurrences of the query term in a fixed-length document
        // never lower the score.
        let low = bm25(&query, &toks(&["a", "x", "y", "z"]), &stats);
        let high = bm25(&query, &toks(&["a", "a", "y", "z"]), &stats);
        assert!(high >= low);
    }

    fn ctx_with<'a>(
        idf: Option<&'a IdfTable>,
        table: Option<&'a EmbeddingTable>,
        bm25: Option<&'a Bm25Stats>,
        stopwords: &'a Stopwords,
    ) -> RankContext<'a> {
        RankContext {
            embeddings: table,
            idf,
            stopwords,
            bm25,
            bleu: BleuConfig::default(),
        }
    }

    #[test]
    fn tfidf_identity_scores_one() {
        let idf = IdfTable::from_documents([toks(&["souq", "beach"])]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let metric = MetricSpec::new(BaseMetric::TfIdf, false);
        let u = toks(&["souq", "beach"]);
        let s = score(&metric, &[], &u, &u.clone(), &ctx).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qc_sim_is_additive() {
        let idf = IdfTable::from_documents([toks(&["souq", "beach", "mall"])]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let question = toks(&["souq", "mall"]);
        let utterance = toks(&["souq"]);
        let comment = toks(&["souq", "beach"]);
        let plain = MetricSpec::new(BaseMetric::TfIdf, false);
        let with_qc = MetricSpec::new(BaseMetric::TfIdf, true);
        let base = score(&plain, &question, &utterance, &comment, &ctx).unwrap();
        let combined = score(&with_qc, &question, &utterance, &comment, &ctx).unwrap();
        let qc = tfidf_vector(&question, &idf).cosine(&tfidf_vector(&comment, &idf));
        assert!((combined - (base + qc)).abs() < 1e-12);
        assert!(qc > 0.0);
    }

    #[test]
    fn cos_with_zero_utterance_vector_scores_zero() {
        let table = EmbeddingTable::from_vectors([("souq", vec![1.0, 0.0])]).unwrap();
        let idf = IdfTable::from_documents([toks(&["souq"])]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), Some(&table), None, &stop);
        let metric = MetricSpec::new(BaseMetric::CosEmbeddings, false);
        // "zzz" is out of table, so the utterance embeds to zero.
        let s = score(&metric, &[], &toks(&["zzz"]), &toks(&["souq"]), &ctx).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn missing_context_is_an_error() {
        let stop = Stopwords::bundled();
        let ctx = ctx_with(None, None, None, &stop);
        let metric = MetricSpec::new(BaseMetric::TfIdf, false);
        assert!(score(&metric, &[], &toks(&["a"]), &toks(&["a"]), &ctx).is_err());
    }

    #[test]
    fn avg_outside_rank_thread_is_an_error() {
        let stop = Stopwords::bundled();
        let ctx = ctx_with(None, None, None, &stop);
        let metric = MetricSpec::new(BaseMetric::Avg, false);
        assert!(score(&metric, &[], &toks(&["a"]), &toks(&["a"]), &ctx).is_err());
    }

    #[test]
    fn rank_comments_sorts_with_stable_ties() {
        let scored = vec![
            ScoredComment { comment_id: "c1".into(), score: 0.2, original_index: 0 },
            ScoredComment { comment_id: "c2".into(), score: 0.9, original_index: 1 },
            ScoredComment { comment_id: "c3".into(), score: 0.9, original_index: 2 },
        ];
        let ranked = rank_comments("t", scored);
        let ids: Vec<&str> = ranked.ranking.iter().map(|c| c.comment_id.as_str()).collect();
        assert_eq!(ids, vec!["c2", "c3", "c1"]);
    }

    #[test]
    fn ranking_invariant_under_increasing_transform() {
        let scores = [0.3, -1.0, 0.7, 0.7, 0.0];
        let build = |values: &[f64]| {
            rank_comments(
                "t",
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &score)| ScoredComment {
                        comment_id: format!("c{i}"),
                        score,
                        original_index: i,
                    })
                    .collect(),
            )
        };
        let base = build(&scores);
        let transformed: Vec<f64> = scores.iter().map(|s| 3.0 * s.exp() + 1.0).collect();
        let shifted = build(&transformed);
        let order =
            |r: &RankedThread| r.ranking.iter().map(|c| c.comment_id.clone()).collect::<Vec<_>>();
        assert_eq!(order(&base), order(&shifted));
    }

    fn thread_of(texts: &[&str]) -> Thread {
        Thread {
            id: "t".into(),
            subject: String::new(),
            body: "where is the souq".into(),
            comments: texts
                .iter()
                .enumerate()
                .map(|(i, text)| Comment {
                    id: format!("c{i}"),
                    text: text.to_string(),
                    label: Label::Unlabeled,
                })
                .collect(),
        }
    }

    #[test]
    fn rank_thread_requires_comments() {
        let idf = IdfTable::from_documents([toks(&["souq"])]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let empty = thread_of(&[]);
        assert!(rank_thread(&MetricSpec::tfidf_qc_sim(), &empty, "souq", &ctx).is_err());
    }

    #[test]
    fn rank_thread_orders_by_similarity() {
        let thread = thread_of(&["the souq is there", "buy a phone", "souq souq souq"]);
        let ds = Dataset {
            threads: vec![thread.clone()],
            split_tag: crate::corpus::SplitTag::Raw,
        };
        let idf = IdfTable::from_datasets(&[&ds]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let metric = MetricSpec::new(BaseMetric::TfIdf, false);
        let ranked = rank_thread(&metric, &thread, "souq", &ctx).unwrap();
        assert_eq!(ranked.ranking[0].comment_id, "c2");
        assert_eq!(ranked.ranking.last().unwrap().comment_id, "c1");
        assert_eq!(ranked.ranking.len(), 3);
    }

    #[test]
    fn single_comment_ranks_first() {
        let thread = thread_of(&["only one answer"]);
        let ds = Dataset {
            threads: vec![thread.clone()],
            split_tag: crate::corpus::SplitTag::Raw,
        };
        let idf = IdfTable::from_datasets(&[&ds]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let ranked =
            rank_thread(&MetricSpec::tfidf_qc_sim(), &thread, "anything", &ctx).unwrap();
        assert_eq!(ranked.ranking.len(), 1);
        assert_eq!(ranked.ranking[0].comment_id, "c0");
    }

    #[test]
    fn avg_on_identical_comments_keeps_original_order() {
        let thread = thread_of(&["same words here", "same words here", "same words here"]);
        let ds = Dataset {
            threads: vec![thread.clone()],
            split_tag: crate::corpus::SplitTag::Raw,
        };
        let idf = IdfTable::from_datasets(&[&ds]).unwrap();
        let table = EmbeddingTable::from_vectors([("words", vec![1.0, 0.5])]).unwrap();
        let stats = Bm25Stats::from_dataset_comments(&ds).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), Some(&table), Some(&stats), &stop);
        let metric = MetricSpec::new(BaseMetric::Avg, false);
        let ranked = rank_thread(&metric, &thread, "anything else", &ctx).unwrap();
        let ids: Vec<&str> = ranked.ranking.iter().map(|c| c.comment_id.as_str()).collect();
        assert_eq!(ids, vec!["c0", "c1", "c2"]);
        for c in &ranked.ranking {
            assert!((c.score - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn qc_sim_term_independent_of_utterance() {
        let thread = thread_of(&["souq phone deals", "beach day out"]);
        let ds = Dataset {
            threads: vec![thread.clone()],
            split_tag: crate::corpus::SplitTag::Raw,
        };
        let idf = IdfTable::from_datasets(&[&ds]).unwrap();
        let stop = Stopwords::bundled();
        let ctx = ctx_with(Some(&idf), None, None, &stop);
        let question_tokens = tokenize(&thread.question_text());
        for comment in &thread.comments {
            let comment_tokens = tokenize(&comment.text);
            let mut diffs = Vec::new();
            for utterance in ["souq", "completely different words"] {
                let u = tokenize(utterance);
                let plain = score(
                    &MetricSpec::new(BaseMetric::TfIdf, false),
                    &question_tokens,
                    &u,
                    &comment_tokens,
                    &ctx,
                )
                .unwrap();
                let with_qc = score(
                    &MetricSpec::new(BaseMetric::TfIdf, true),
                    &question_tokens,
                    &u,
                    &comment_tokens,
                    &ctx,
                )
                .unwrap();
                diffs.push(with_qc - plain);
            }
            assert!((diffs[0] - diffs[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_spec_parsing() {
        assert_eq!(
            "tfidf+qc-sim".parse::<MetricSpec>().unwrap(),
            MetricSpec::tfidf_qc_sim()
        );
        assert_eq!(
            "bm25".parse::<MetricSpec>().unwrap(),
            MetricSpec::new(BaseMetric::Bm25, false)
        );
        assert!("frobnicate".parse::<MetricSpec>().is_err());
        assert_eq!(MetricSpec::tfidf_qc_sim().to_string(), "tfidf+qc-sim");
    }
}

//! The representation layer: tokens, sentences, IDF statistics, TF×IDF
//! vectors, word embeddings, and weighted-average sentence vectors.
//!
//! Everything downstream (pair selection, ranking, evaluation) speaks in
//! these types. All similarity math is 64-bit, and every float accumulation
//! runs in a deterministic order so that repeated runs produce byte-identical
//! output files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::Dataset;
use crate::error::{Error, Result};

/// Lowercases and splits text into tokens: maximal runs of Unicode
/// letters/digits become one token, every other non-whitespace character is
/// its own single-character token, whitespace is discarded.
///
/// ```
/// let t = cqabot::textrep::tokenize("How good are Karwa services?");
/// assert_eq!(t, ["how", "good", "are", "karwa", "services", "?"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Splits text into sentences after `.`, `!` or `?` when the terminator is
/// followed by whitespace or end of text. Consecutive terminators stay
/// attached to their sentence; segments are trimmed and empty ones dropped.
/// Text without any terminator is one sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let at_end = i + 1 == chars.len();
            if at_end || chars[i + 1].is_whitespace() {
                push_trimmed(&mut sentences, &chars[start..=i]);
                start = i + 1;
            }
        }
    }
    if start < chars.len() {
        push_trimmed(&mut sentences, &chars[start..]);
    }
    sentences
}

fn push_trimmed(out: &mut Vec<String>, segment: &[char]) {
    let s: String = segment.iter().collect();
    let trimmed = s.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// A fixed set of words removed before sentence embedding.
#[derive(Debug, Clone)]
pub struct Stopwords(HashSet<String>);

const BUNDLED_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "cannot", "could", "couldn", "d", "did", "didn", "do", "does", "doesn",
    "doing", "don", "down", "during", "each", "few", "for", "from", "further", "had", "hadn",
    "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just",
    "ll", "m", "me", "more", "most", "mustn", "my", "myself", "no", "nor", "not", "now", "o",
    "of", "off", "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
    "over", "own", "re", "s", "same", "shan", "she", "should", "shouldn", "so", "some", "such",
    "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "ve",
    "very", "was", "wasn", "we", "were", "weren", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "won", "would", "wouldn", "you", "your", "yours",
    "yourself", "yourselves",
];

impl Stopwords {
    /// The bundled English list.
    pub fn bundled() -> Stopwords {
        Stopwords(BUNDLED_STOPWORDS.iter().map(|s| s.to_string()).collect())
    }

    /// No stopwords at all.
    pub fn empty() -> Stopwords {
        Stopwords(HashSet::new())
    }

    /// Loads an override list: one word per line, lowercased on load.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Stopwords> {
        let path = path.as_ref();
        let content =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Stopwords::from_words(content.lines()))
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Stopwords {
        Stopwords(
            words
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords::bundled()
    }
}

/// Document-frequency statistics over a corpus.
///
/// Each question text and each comment text counts as one document.
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`; a token never seen gets
/// `df = 0`, i.e. `ln(1 + N) + 1`. The smoothing keeps every weight
/// strictly positive.
#[derive(Debug, Clone)]
pub struct IdfTable {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
}

impl IdfTable {
    /// Builds the table from tokenized documents. Errors on zero documents.
    pub fn from_documents<I>(documents: I) -> Result<IdfTable>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut doc_count = 0usize;
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for tokens in documents {
            doc_count += 1;
            let distinct: HashSet<String> = tokens.into_iter().collect();
            for token in distinct {
                *doc_freq.entry(token).or_insert(0) += 1;
            }
        }
        if doc_count == 0 {
            return Err(Error::invalid("idf requires at least one document"));
        }
        Ok(IdfTable {
            doc_count,
            doc_freq,
        })
    }

    /// Builds the table from whole datasets: one document per question text
    /// and one per comment text, tokenized with [`tokenize`].
    pub fn from_datasets(datasets: &[&Dataset]) -> Result<IdfTable> {
        let docs = datasets.iter().flat_map(|ds| {
            ds.threads.iter().flat_map(|t| {
                std::iter::once(tokenize(&t.question_text()))
                    .chain(t.comments.iter().map(|c| tokenize(&c.text)))
            })
        });
        IdfTable::from_documents(docs)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq(token);
        ((1.0 + self.doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
    }
}

/// A sparse TF×IDF vector; zero weights are never stored.
///
/// Backed by an ordered map so dot products accumulate in a deterministic
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfIdfVector(BTreeMap<String, f64>);

impl TfIdfVector {
    pub fn weight(&self, token: &str) -> f64 {
        self.0.get(token).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cosine between two sparse vectors; 0.0 if either has zero norm.
    /// Weights are positive, so the result lies in `[0, 1]`.
    pub fn cosine(&self, other: &TfIdfVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (&self.0, &other.0)
        } else {
            (&other.0, &self.0)
        };
        let mut dot = 0.0;
        for (token, w) in small {
            if let Some(v) = large.get(token) {
                dot += w * v;
            }
        }
        let norm_self: f64 = self.0.values().map(|w| w * w).sum::<f64>().sqrt();
        let norm_other: f64 = other.0.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm_self == 0.0 || norm_other == 0.0 {
            0.0
        } else {
            dot / (norm_self * norm_other)
        }
    }
}

/// Builds the TF×IDF vector of a token list: `weight(t) = count(t) × idf(t)`.
pub fn tfidf_vector(tokens: &[String], idf: &IdfTable) -> TfIdfVector {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    TfIdfVector(
        counts
            .into_iter()
            .map(|(token, count)| (token.to_string(), count as f64 * idf.idf(token)))
            .collect(),
    )
}

/// Cosine of two dense vectors. Zero norm on either side gives 0.0 by
/// convention; mismatched lengths are an error.
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "cosine of vectors with different lengths: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        Ok(0.0)
    } else {
        Ok(dot / (nx.sqrt() * ny.sqrt()))
    }
}

/// A word-vector store with one fixed dimensionality.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table in memory, checking that all vectors share one length.
    pub fn from_vectors<I, S>(entries: I) -> Result<EmbeddingTable>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (word, vector) in entries {
            let word = word.into();
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::invalid(format!(
                        "vector for {word:?} has {} components, expected {d}",
                        vector.len()
                    )))
                }
                _ => {}
            }
            vectors.insert(word, vector);
        }
        let dim = dim.ok_or_else(|| Error::invalid("embedding table needs at least one word"))?;
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Loads word vectors from the text format: an optional `<count> <dim>`
/// header, then one `word v1 v2 ... vD` row per line.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    parse_embeddings(&content, &display)
}

/// Same as [`load_embeddings`] but from an in-memory string.
pub fn parse_embeddings(content: &str, source: &str) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut vectors = HashMap::new();
    let mut lines = content.lines().enumerate().peekable();

    // A leading line whose first token is numeric is a "<count> <dim>" header.
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if !fields.is_empty() && fields[0].parse::<usize>().is_ok() {
            if fields.len() != 2 {
                return Err(Error::parse(
                    source,
                    1,
                    "header line must be `<count> <dim>`",
                ));
            }
            let d: usize = fields[1].parse().map_err(|_| {
                Error::parse(source, 1, format!("bad dimension {:?} in header", fields[1]))
            })?;
            dim = Some(d);
            lines.next();
        }
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a first field");
        let mut vector = Vec::new();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(
                    source,
                    line_no,
                    format!("non-numeric component {field:?} for word {word:?}"),
                )
            })?;
            vector.push(value);
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!(
                        "word {word:?} has {} components, expected {d}",
                        vector.len()
                    ),
                ))
            }
            _ => {}
        }
        vectors.insert(word.to_string(), vector);
    }

    let dim = dim.ok_or_else(|| Error::parse(source, 1, "no vectors in file"))?;
    Ok(EmbeddingTable { dim, vectors })
}

/// A dense sentence vector of the embedding table's dimensionality.
/// All-zero is the degenerate "nothing kept" value.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector(Vec<f64>);

impl SentenceVector {
    pub fn zeros(dim: usize) -> SentenceVector {
        SentenceVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Cosine between two sentence vectors; errors on length mismatch.
    pub fn cosine(&self, other: &SentenceVector) -> Result<f64> {
        cosine(&self.0, &other.0)
    }
}

impl From<Vec<f64>> for SentenceVector {
    fn from(v: Vec<f64>) -> Self {
        SentenceVector(v)
    }
}

/// TF×IDF-weighted average of the word vectors of a token list.
///
/// Stopwords and words missing from the table are dropped first. Each kept
/// distinct token contributes its vector with weight
/// `tf(token in the kept list) × idf(token)`; the result is the weighted
/// mean. If nothing survives the filter, the all-zero vector is returned.
pub fn sentence_embedding(
    tokens: &[String],
    table: &EmbeddingTable,
    idf: &IdfTable,
    stopwords: &Stopwords,
) -> SentenceVector {
    let kept: Vec<&str> = tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !stopwords.contains(t) && table.get(t).is_some())
        .collect();
    if kept.is_empty() {
        return SentenceVector::zeros(table.dim());
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for token in &kept {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut sum = vec![0.0; table.dim()];
    let mut total_weight = 0.0;
    let mut seen = HashSet::new();
    // First-occurrence order keeps the accumulation deterministic.
    for token in &kept {
        if !seen.insert(*token) {
            continue;
        }
        let weight = counts[token] as f64 * idf.idf(token);
        let vector = table.get(token).expect("kept tokens are in the table");
        for (acc, v) in sum.iter_mut().zip(vector) {
            *acc += weight * v;
        }
        total_weight += weight;
    }
    for value in &mut sum {
        *value /= total_weight;
    }
    SentenceVector(sum)
}

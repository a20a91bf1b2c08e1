//! Reduce each question–answer pair to its single most similar sentence
//! pair.
//!
//! Long forum posts make poor seq2seq training rows. Both sides are split
//! into sentences, every (question sentence, answer sentence) combination is
//! scored by the cosine of their averaged embeddings, and only the best pair
//! is kept. The similarity doubles as a noise filter: random garbage rarely
//! looks alike on both sides.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::textrep::{
    sentence_embedding, split_sentences, tokenize, EmbeddingTable, IdfTable, Stopwords,
};

/// One selected sentence pair, the seq2seq training unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub thread_id: String,
    pub comment_id: String,
    pub question_sentence: String,
    pub answer_sentence: String,
    pub similarity: f64,
}

/// The winning sentence pair of one question/answer text pair, before
/// thread/comment ids are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPair {
    pub question_sentence: String,
    pub answer_sentence: String,
    pub similarity: f64,
}

/// Knobs for [`build_training_pairs`].
#[derive(Debug, Clone, Default)]
pub struct PairOptions {
    /// Drop pairs whose similarity is below this floor. `None` disables the
    /// filter (the default).
    pub min_similarity: Option<f64>,
    /// Keep only comments with these labels. `None` keeps every label,
    /// including `Unlabeled`.
    pub label_filter: Option<HashSet<Label>>,
}

/// Picks the most similar (question sentence, answer sentence) pair.
///
/// Every question sentence is compared with every answer sentence by the
/// cosine of their sentence embeddings. Ties go to the earlier question
/// sentence, then the earlier answer sentence. Returns `None` when either
/// side has no sentences after splitting.
pub fn select_best_pair(
    question_text: &str,
    answer_text: &str,
    table: &EmbeddingTable,
    idf: &IdfTable,
    stopwords: &Stopwords,
) -> Option<SelectedPair> {
    let question_sentences = split_sentences(question_text);
    let answer_sentences = split_sentences(answer_text);
    if question_sentences.is_empty() || answer_sentences.is_empty() {
        return None;
    }

    let embed = |s: &str| sentence_embedding(&tokenize(s), table, idf, stopwords);
    let question_vectors: Vec<_> = question_sentences.iter().map(|s| embed(s)).collect();
    let answer_vectors: Vec<_> = answer_sentences.iter().map(|s| embed(s)).collect();

    let mut best: Option<(usize, usize, f64)> = None;
    for (qi, qv) in question_vectors.iter().enumerate() {
        for (ai, av) in answer_vectors.iter().enumerate() {
            let sim = qv.cosine(av).expect("embeddings share the table dimension");
            // Strict > keeps the earliest (question, answer) index pair on ties.
            if best.is_none_or(|(_, _, b)| sim > b) {
                best = Some((qi, ai, sim));
            }
        }
    }

    best.map(|(qi, ai, sim)| SelectedPair {
        question_sentence: question_sentences[qi].clone(),
        answer_sentence: answer_sentences[ai].clone(),
        similarity: sim,
    })
}

/// Converts a whole dataset into training sentence pairs, one per
/// (thread, comment) with a valid selection, in input order.
///
/// Only `train` and `raw` splits are accepted; passing dev/test data is an
/// error so evaluation threads can never leak into training. Degenerate
/// comments (nothing left after sentence splitting) are skipped, not fatal.
pub fn build_training_pairs(
    dataset: &Dataset,
    table: &EmbeddingTable,
    idf: &IdfTable,
    stopwords: &Stopwords,
    options: &PairOptions,
) -> Result<Vec<SentencePair>> {
    if !dataset.split_tag.is_training_source() {
        return Err(Error::invalid(format!(
            "refusing to build training pairs from a {} split",
            dataset.split_tag
        )));
    }
    let mut pairs = Vec::new();
    for thread in &dataset.threads {
        let question_text = thread.question_text();
        for comment in &thread.comments {
            if let Some(filter) = &options.label_filter {
                if !filter.contains(&comment.label) {
                    continue;
                }
            }
            let Some(selected) =
                select_best_pair(&question_text, &comment.text, table, idf, stopwords)
            else {
                continue;
            };
            if let Some(floor) = options.min_similarity {
                if selected.similarity < floor {
                    continue;
                }
            }
            pairs.push(SentencePair {
                thread_id: thread.id.clone(),
                comment_id: comment.id.clone(),
                question_sentence: selected.question_sentence,
                answer_sentence: selected.answer_sentence,
                similarity: selected.similarity,
            });
        }
    }
    Ok(pairs)
}

fn sanitize_field(text: &str) -> String {
    text.chars()
        .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
        .collect()
}

/// Renders pairs as TSV: `thread_id, comment_id, similarity (6 decimals),
/// question_sentence, answer_sentence`. Tabs and newlines inside sentences
/// become single spaces.
pub fn pairs_to_tsv(pairs: &[SentencePair]) -> String {
    let mut out = String::new();
    for pair in pairs {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\t{}\n",
            sanitize_field(&pair.thread_id),
            sanitize_field(&pair.comment_id),
            pair.similarity,
            sanitize_field(&pair.question_sentence),
            sanitize_field(&pair.answer_sentence),
        ));
    }
    out
}

/// Writes the TSV form to `path`.
pub fn save_pairs(pairs: &[SentencePair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pairs_to_tsv(pairs)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a pairs TSV file back.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    parse_pairs_tsv(&content, &display)
}

/// Parses the TSV pair format; `source` names the input in errors.
pub fn parse_pairs_tsv(content: &str, source: &str) -> Result<Vec<SentencePair>> {
    let mut pairs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let similarity: f64 = fields[2].parse().map_err(|_| {
            Error::parse(source, line_no, format!("bad similarity {:?}", fields[2]))
        })?;
        pairs.push(SentencePair {
            thread_id: fields[0].to_string(),
            comment_id: fields[1].to_string(),
            similarity,
            question_sentence: fields[3].to_string(),
            answer_sentence: fields[4].to_string(),
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, SplitTag, Thread};

    fn toy_table() -> EmbeddingTable {
        EmbeddingTable::from_vectors([
            ("eat", vec![1.0, 0.0]),
            ("souq", vec![1.0, 0.0]),
            ("beach", vec![0.0, 1.0]),
            ("sand", vec![0.0, 1.0]),
        ])
        .unwrap()
    }

    fn toy_idf() -> IdfTable {
        IdfTable::from_documents([vec![
            "eat".to_string(),
            "souq".to_string(),
            "beach".to_string(),
            "sand".to_string(),
        ]])
        .unwrap()
    }

    #[test]
    fn single_candidate_pair() {
        let table = toy_table();
        let idf = toy_idf();
        let stop = Stopwords::bundled();
        let got = select_best_pair("Where to eat?", "Try the souq.", &table, &idf, &stop).unwrap();
        assert_eq!(got.question_sentence, "Where to eat?");
        assert_eq!(got.answer_sentence, "Try the souq.");
        assert!((got.similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_earlier_question_sentence() {
        // Question sentences embed to [1,0] then [0,1]; answers to [0,1] then
        // [1,0]. Both (q1,a2) and (q2,a1) reach cosine 1.0; the earlier
        // question sentence wins.
        let table = toy_table();
        let idf = toy_idf();
        let stop = Stopwords::empty();
        let got = select_best_pair(
            "eat. beach.",
            "sand. souq.",
            &table,
            &idf,
            &stop,
        )
        .unwrap();
        assert_eq!(got.question_sentence, "eat.");
        assert_eq!(got.answer_sentence, "souq.");
        assert!((got.similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_embeddings_fall_back_to_first_pair() {
        let table = toy_table();
        let idf = toy_idf();
        let stop = Stopwords::bundled();
        // No content words are in the table, so every vector is zero and
        // every cosine is 0.0; the first question/answer sentences win.
        let got = select_best_pair(
            "zzz one. zzz two.",
            "yyy one. yyy two.",
            &table,
            &idf,
            &stop,
        )
        .unwrap();
        assert_eq!(got.question_sentence, "zzz one.");
        assert_eq!(got.answer_sentence, "yyy one.");
        assert_eq!(got.similarity, 0.0);
    }

    #[test]
    fn empty_side_yields_none() {
        let table = toy_table();
        let idf = toy_idf();
        let stop = Stopwords::bundled();
        assert!(select_best_pair("", "Try the souq.", &table, &idf, &stop).is_none());
        assert!(select_best_pair("Where to eat?", "   ", &table, &idf, &stop).is_none());
    }

    fn toy_dataset(split_tag: SplitTag) -> Dataset {
        Dataset {
            threads: vec![Thread {
                id: "q1".into(),
                subject: "".into(),
                body: "Where to eat?".into(),
                comments: vec![
                    Comment {
                        id: "c1".into(),
                        text: "Try the souq.".into(),
                        label: Label::Unlabeled,
                    },
                    Comment {
                        id: "c2".into(),
                        text: "The beach has sand.".into(),
                        label: Label::Unlabeled,
                    },
                ],
            }],
            split_tag,
        }
    }

    #[test]
    fn one_pair_per_comment() {
        let ds = toy_dataset(SplitTag::Train);
        let pairs = build_training_pairs(
            &ds,
            &toy_table(),
            &toy_idf(),
            &Stopwords::bundled(),
            &PairOptions::default(),
        )
        .unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].comment_id, "c1");
        assert_eq!(pairs[1].comment_id, "c2");
    }

    #[test]
    fn whitespace_comment_skipped() {
        let mut ds = toy_dataset(SplitTag::Raw);
        ds.threads[0].comments[0].text = "   ".into();
        let pairs = build_training_pairs(
            &ds,
            &toy_table(),
            &toy_idf(),
            &Stopwords::bundled(),
            &PairOptions::default(),
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].comment_id, "c2");
    }

    #[test]
    fn evaluation_split_is_rejected() {
        let ds = toy_dataset(SplitTag::Test);
        let err = build_training_pairs(
            &ds,
            &toy_table(),
            &toy_idf(),
            &Stopwords::bundled(),
            &PairOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("test"));
    }

    #[test]
    fn label_filter_keeps_selected_labels() {
        let mut ds = toy_dataset(SplitTag::Train);
        ds.threads[0].comments[0].label = Label::Good;
        ds.threads[0].comments[1].label = Label::Bad;
        let options = PairOptions {
            min_similarity: None,
            label_filter: Some([Label::Good].into_iter().collect()),
        };
        let pairs = build_training_pairs(
            &ds,
            &toy_table(),
            &toy_idf(),
            &Stopwords::bundled(),
            &options,
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].comment_id, "c1");
    }

    #[test]
    fn tsv_roundtrip_and_sanitization() {
        let pairs = vec![SentencePair {
            thread_id: "q1".into(),
            comment_id: "c1".into(),
            question_sentence: "has\ttab and\nnewline".into(),
            answer_sentence: "plain".into(),
            similarity: 0.25,
        }];
        let tsv = pairs_to_tsv(&pairs);
        assert_eq!(tsv, "q1\tc1\t0.250000\thas tab and newline\tplain\n");
        let back = parse_pairs_tsv(&tsv, "mem").unwrap();
        assert_eq!(back[0].question_sentence, "has tab and newline");
        assert_eq!(back[0].similarity, 0.25);
    }

    #[test]
    fn tsv_output_is_deterministic() {
        let ds = toy_dataset(SplitTag::Train);
        let render = || {
            let pairs = build_training_pairs(
                &ds,
                &toy_table(),
                &toy_idf(),
                &Stopwords::bundled(),
                &PairOptions::default(),
            )
            .unwrap();
            pairs_to_tsv(&pairs)
        };
        assert_eq!(render(), render());
    }
}

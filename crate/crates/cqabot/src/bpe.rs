//! Byte-pair-encoding subword units for seq2seq vocabulary control.
//!
//! Words are split into characters with the `</w>` marker fused onto the
//! final character; the most frequent adjacent symbol pair is merged, over
//! and over, and the recorded merge list segments unseen text the same way.
//! Applying then restoring is lossless for any token that does not itself
//! contain the literal marker.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// The symbol appended to the final character of every word.
pub const END_OF_WORD: &str = "</w>";

const MERGES_HEADER: &str = "#bpe-v1";

/// An ordered list of learned merges; the list position is the rank.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
}

fn word_symbols(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut symbols: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

/// Learns `num_merges` merges from a token stream.
///
/// Pairs are counted over the weighted word vocabulary; the most frequent
/// pair wins each round, with ties going to the lexicographically smallest
/// `(left, right)`. Learning stops early once no pair occurs at least twice.
/// An empty stream yields a model with zero merges.
pub fn learn_bpe<I, S>(tokens: I, num_merges: usize) -> BpeModel
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for token in tokens {
        *word_counts.entry(token.as_ref().to_string()).or_insert(0) += 1;
    }
    let mut vocab: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .map(|(word, count)| (word_symbols(&word), count))
        .collect();

    let mut merges = Vec::new();
    for _ in 0..num_merges {
        let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &vocab {
            for window in symbols.windows(2) {
                *pair_counts
                    .entry((window[0].as_str(), window[1].as_str()))
                    .or_insert(0) += count;
            }
        }
        // Max count, ties by smallest (left, right); the comparison makes
        // the winner independent of hash-map iteration order.
        let best = pair_counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), count)) = best else {
            break;
        };
        if count < 2 {
            break;
        }
        let pair = (left.to_string(), right.to_string());
        for (symbols, _) in &mut vocab {
            merge_in_place(symbols, &pair);
        }
        merges.push(pair);
    }
    BpeModel { merges }
}

fn merge_in_place(symbols: &mut Vec<String>, pair: &(String, String)) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(std::mem::take(&mut symbols[i]));
            i += 1;
        }
    }
    *symbols = out;
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>) -> Result<BpeModel> {
        let mut seen = std::collections::HashSet::new();
        for merge in &merges {
            if !seen.insert(merge.clone()) {
                return Err(Error::invalid(format!(
                    "duplicate merge pair {:?} {:?}",
                    merge.0, merge.1
                )));
            }
        }
        Ok(BpeModel { merges })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Segments one token into subword symbols: characters plus the fused
    /// end-of-word marker, then merges applied lowest rank first until none
    /// applies.
    pub fn segment(&self, token: &str) -> Vec<String> {
        let ranks: HashMap<(&str, &str), usize> = self
            .merges
            .iter()
            .enumerate()
            .map(|(rank, (l, r))| ((l.as_str(), r.as_str()), rank))
            .collect();
        self.segment_with_ranks(token, &ranks)
    }

    fn segment_with_ranks(&self, token: &str, ranks: &HashMap<(&str, &str), usize>) -> Vec<String> {
        let mut symbols = word_symbols(token);
        loop {
            let mut best: Option<(usize, usize)> = None; // (rank, index)
            for (i, window) in symbols.windows(2).enumerate() {
                if let Some(&rank) = ranks.get(&(window[0].as_str(), window[1].as_str())) {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let pair = self.merges[rank].clone();
            merge_in_place(&mut symbols, &pair);
        }
        symbols
    }
}

/// Applies the model to a token list, concatenating the per-token symbol
/// sequences.
pub fn apply_bpe(tokens: &[String], model: &BpeModel) -> Vec<String> {
    let ranks: HashMap<(&str, &str), usize> = model
        .merges
        .iter()
        .enumerate()
        .map(|(rank, (l, r))| ((l.as_str(), r.as_str()), rank))
        .collect();
    let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
    let mut out = Vec::new();
    for token in tokens {
        let symbols = cache
            .entry(token.as_str())
            .or_insert_with(|| model.segment_with_ranks(token, &ranks));
        out.extend(symbols.iter().cloned());
    }
    out
}

/// Joins subword symbols back into tokens, splitting a word boundary at
/// every end-of-word marker. Trailing symbols with no marker become a final
/// token rather than an error.
pub fn restore_words(symbols: &[String]) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for symbol in symbols {
        if let Some(stem) = symbol.strip_suffix(END_OF_WORD) {
            current.push_str(stem);
            words.push(std::mem::take(&mut current));
        } else {
            current.push_str(symbol);
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Renders the merges file: a `#bpe-v1` header line, then one
/// space-separated `left right` merge per line in rank order.
pub fn merges_to_string(model: &BpeModel) -> String {
    let mut out = String::from(MERGES_HEADER);
    out.push('\n');
    for (left, right) in &model.merges {
        out.push_str(left);
        out.push(' ');
        out.push_str(right);
        out.push('\n');
    }
    out
}

/// Writes the merges file.
pub fn save_merges(model: &BpeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, merges_to_string(model))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a merges file written by [`save_merges`].
pub fn load_merges(path: impl AsRef<Path>) -> Result<BpeModel> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    parse_merges(&content, &display)
}

/// Parses the merges format; `source` names the input in errors.
pub fn parse_merges(content: &str, source: &str) -> Result<BpeModel> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MERGES_HEADER => {}
        _ => {
            return Err(Error::parse(
                source,
                1,
                format!("expected {MERGES_HEADER} header"),
            ))
        }
    }
    let mut merges = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected `left right`, got {line:?}"),
            ));
        }
        merges.push((fields[0].to_string(), fields[1].to_string()));
    }
    BpeModel::from_merges(merges).map_err(|e| Error::parse(source, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn learn_picks_most_frequent_pair() {
        // Pairs: ("a","a</w>") occurs twice, ("a","b</w>") once.
        let model = learn_bpe(["aa", "aa", "ab"], 1);
        assert_eq!(
            model.merges(),
            &[("a".to_string(), "a</w>".to_string())]
        );
    }

    #[test]
    fn zero_merges_requested() {
        let model = learn_bpe(["aa", "aa"], 0);
        assert!(model.merges().is_empty());
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let model = learn_bpe(["ab"], 5);
        assert!(model.merges().is_empty());
    }

    #[test]
    fn empty_stream_is_not_an_error() {
        let model = learn_bpe(Vec::<&str>::new(), 3);
        assert!(model.merges().is_empty());
    }

    #[test]
    fn tie_breaks_lexicographically() {
        // "ba" and "bc": pairs ("b","a</w>") and ("b","c</w>") each occur
        // twice; the lexicographically smaller right side wins.
        let model = learn_bpe(["ba", "ba", "bc", "bc"], 1);
        assert_eq!(
            model.merges(),
            &[("b".to_string(), "a</w>".to_string())]
        );
    }

    #[test]
    fn apply_merges_in_rank_order() {
        let model = BpeModel::from_merges(vec![("a".into(), "a</w>".into())]).unwrap();
        assert_eq!(apply_bpe(&toks(&["aa"]), &model), vec!["aa</w>"]);

        let empty = BpeModel::default();
        assert_eq!(apply_bpe(&toks(&["ab"]), &empty), vec!["a", "b</w>"]);
        assert_eq!(apply_bpe(&[], &empty), Vec::<String>::new());
    }

    #[test]
    fn learned_merge_roundtrips_through_apply() {
        let model = learn_bpe(["aa", "aa", "ab"], 1);
        assert_eq!(apply_bpe(&toks(&["aa"]), &model), vec!["aa</w>"]);
        assert_eq!(apply_bpe(&toks(&["ab"]), &model), vec!["a", "b</w>"]);
    }

    #[test]
    fn restore_examples() {
        assert_eq!(restore_words(&toks(&["aa</w>"])), vec!["aa"]);
        assert_eq!(restore_words(&toks(&["a", "b</w>", "c</w>"])), vec!["ab", "c"]);
        assert_eq!(restore_words(&toks(&["a"])), vec!["a"]);
    }

    #[test]
    fn restore_inverts_apply() {
        let corpus = ["hello", "help", "held", "hello", "hello", "шапка", "шапка"];
        let model = learn_bpe(corpus, 10);
        let tokens = toks(&["hello", "held", "unseen", "ш"]);
        assert_eq!(restore_words(&apply_bpe(&tokens, &model)), tokens);
    }

    #[test]
    fn symbol_count_non_increasing_in_merges() {
        let corpus: Vec<&str> = vec!["aaa", "aaa", "aab", "abb", "aaa"];
        let tokens = toks(&["aaab", "abab", "aaaa"]);
        let mut prev = usize::MAX;
        for merges in 0..6 {
            let model = learn_bpe(corpus.clone(), merges);
            let count = apply_bpe(&tokens, &model).len();
            assert!(count <= prev, "count grew at {merges} merges");
            prev = count;
        }
    }

    #[test]
    fn learning_is_deterministic() {
        let corpus = ["abc", "abd", "bcd", "abc", "bcd", "xyz"];
        let a = learn_bpe(corpus, 8);
        let b = learn_bpe(corpus, 8);
        assert_eq!(a, b);
    }

    #[test]
    fn merges_file_roundtrip() {
        let model = learn_bpe(["aa", "aa", "aab", "aab"], 3);
        let text = merges_to_string(&model);
        assert!(text.starts_with("#bpe-v1\n"));
        let back = parse_merges(&text, "mem").unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn merges_file_requires_header() {
        assert!(parse_merges("a b\n", "mem").is_err());
    }
}

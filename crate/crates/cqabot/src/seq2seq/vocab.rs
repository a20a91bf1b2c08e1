use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const GO: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<go>", "<eos>", "<unk>"];

/// A symbol↔id bijection with the four reserved ids fixed at the front.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from a symbol stream, keeping at most
    /// `max_size - 4` of the most frequent symbols (ties broken by symbol
    /// order, so the result is reproducible).
    pub fn build<I, S>(symbols: I, max_size: usize) -> Result<Vocab>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < RESERVED.len() + 1 {
            return Err(Error::invalid("vocabulary size must be at least 5"));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for symbol in symbols {
            let symbol = symbol.as_ref();
            if RESERVED.contains(&symbol) {
                continue;
            }
            *counts.entry(symbol.to_string()).or_insert(0) += 1;
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());

        let symbols: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(s, _)| s))
            .collect();
        Vocab::from_symbols(symbols)
    }

    /// Rebuilds a vocabulary from its id-ordered symbol list (the checkpoint
    /// representation). The first four entries must be the reserved symbols
    /// and no symbol may repeat.
    pub fn from_symbols(symbols: Vec<String>) -> Result<Vocab> {
        if symbols.len() < RESERVED.len() {
            return Err(Error::invalid("vocabulary is missing reserved symbols"));
        }
        for (i, reserved) in RESERVED.iter().enumerate() {
            if symbols[i] != *reserved {
                return Err(Error::invalid(format!(
                    "vocabulary id {i} must be {reserved:?}, found {:?}",
                    symbols[i]
                )));
            }
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (id, symbol) in symbols.iter().enumerate() {
            if index.insert(symbol.clone(), id).is_some() {
                return Err(Error::invalid(format!("duplicate symbol {symbol:?}")));
            }
        }
        Ok(Vocab { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved symbols are always present
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// The id of a symbol, or [`UNK`] when it is out of vocabulary.
    pub fn id(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK)
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn encode(&self, symbols: &[String]) -> Vec<usize> {
        symbols.iter().map(|s| self.id(s)).collect()
    }

    /// Maps ids back to symbols; unknown ids render as the `<unk>` symbol.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.symbol(id).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_fixed() {
        let vocab = Vocab::build(["x", "y", "x"], 10).unwrap();
        assert_eq!(vocab.id("<pad>"), PAD);
        assert_eq!(vocab.id("<go>"), GO);
        assert_eq!(vocab.id("<eos>"), EOS);
        assert_eq!(vocab.id("<unk>"), UNK);
        // x is more frequent than y, so it gets the first free id.
        assert_eq!(vocab.id("x"), 4);
        assert_eq!(vocab.id("y"), 5);
    }

    #[test]
    fn capping_keeps_most_frequent() {
        let stream = ["a", "a", "a", "b", "b", "c"];
        let vocab = Vocab::build(stream, 6).unwrap();
        assert_eq!(vocab.len(), 6);
        assert_ne!(vocab.id("a"), UNK);
        assert_ne!(vocab.id("b"), UNK);
        assert_eq!(vocab.id("c"), UNK);
    }

    #[test]
    fn frequency_ties_break_by_symbol_order() {
        let vocab = Vocab::build(["beta", "alpha"], 5).unwrap();
        assert_ne!(vocab.id("alpha"), UNK);
        assert_eq!(vocab.id("beta"), UNK);
    }

    #[test]
    fn encode_decode_roundtrip_known_symbols() {
        let vocab = Vocab::build(["x", "y"], 10).unwrap();
        let symbols: Vec<String> = vec!["x".into(), "y".into(), "zzz".into()];
        let ids = vocab.encode(&symbols);
        assert_eq!(ids, vec![vocab.id("x"), vocab.id("y"), UNK]);
        assert_eq!(vocab.decode(&ids), vec!["x", "y", "<unk>"]);
    }

    #[test]
    fn from_symbols_validates() {
        assert!(Vocab::from_symbols(vec!["<pad>".into()]).is_err());
        let bad = vec![
            "<pad>".into(),
            "<go>".into(),
            "<eos>".into(),
            "<unk>".into(),
            "x".into(),
            "x".into(),
        ];
        assert!(Vocab::from_symbols(bad).is_err());
    }
}

//! Train a chatbot from community-question-answering forum data and judge it
//! by how well its answers rank the forum's own replies.
//!
//! The pipeline, end to end:
//!
//! 1. [`corpus`] loads forum threads (a question plus labeled comments) from
//!    JSONL and keeps train/dev/test data apart.
//! 2. [`textrep`] provides tokenization, sentence splitting, IDF statistics,
//!    TF×IDF vectors and averaged word-embedding sentence vectors.
//! 3. [`pairselect`] reduces every question–answer pair to its single most
//!    similar sentence pair, the seq2seq training unit.
//! 4. [`bpe`] learns and applies byte-pair-encoding subword units.
//! 5. [`seq2seq`] is a small GRU encoder–decoder with additive attention,
//!    trained by plain SGD with handwritten gradients.
//! 6. [`ranking`] scores thread comments against a generated utterance with a
//!    family of similarity functions (cosine over embeddings, BLEU+1, BM25,
//!    TF×IDF cosine, and their +qc-sim variants).
//! 7. [`metrics`] computes Average Precision / MAP and sentence-level BLEU+1.
//! 8. [`harness`] runs the train/evaluate/select loop and the baselines.
//!
//! The [`guide`] module holds the long-form book; its code blocks double as
//! doctests, so the narrative stays in sync with the crate.

pub mod bpe;
pub mod corpus;
mod error;
pub mod guide;
pub mod harness;
pub mod metrics;
pub mod pairselect;
pub mod ranking;
pub mod seq2seq;
pub mod textrep;

pub use error::{Error, Result};

//! The long-form guide, rendered from the `book/` directory.
//!
//! Each chapter of the mdbook is included here as module documentation, so
//! every Rust code block in the book runs under `cargo test --doc` and the
//! prose can never drift away from the API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/representations.md")]
pub mod representations {}

#[doc = include_str!("../../../book/src/pair_selection.md")]
pub mod pair_selection {}

#[doc = include_str!("../../../book/src/subwords.md")]
pub mod subwords {}

#[doc = include_str!("../../../book/src/ranking.md")]
pub mod ranking {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/seq2seq.md")]
pub mod seq2seq {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

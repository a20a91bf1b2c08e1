//! A desk-scale GRU encoder–decoder with additive attention, trained by SGD
//! with handwritten gradients.
//!
//! The architecture follows the classic recipe: subword ids are embedded
//! (one matrix shared by encoder and decoder), the reversed source runs
//! through a stacked GRU, and the decoder attends over the encoder's
//! top-layer states at every step. Everything is 64-bit so the analytic
//! gradients can be checked against central finite differences.

mod batch;
mod checkpoint;
mod hyper;
mod model;
mod net;
mod vocab;

pub use batch::{prepare_batch, Batch};
pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, Checkpoint,
};
pub use hyper::Hyperparams;
pub use model::{Attention, BlockMut, BlockRef, GruLayer, Seq2SeqModel};
pub use net::{backward, forward_loss, greedy_decode, sgd_step, ForwardCache};
pub use vocab::{Vocab, EOS, GO, PAD, UNK};

//! A small fusion-in-decoder encoder-decoder in double precision with
//! hand-written backpropagation.
//!
//! Each repo context is encoded on its own, with sinusoidal positions that
//! restart at zero. The encoder outputs are stacked into one
//! `n_contexts * max_rc_tokens` memory and the decoder cross-attends over
//! all of it at once. Layers are post-norm with a GELU feed-forward block.
//! With `cross_position_bias` off, nothing in the decoder can tell which
//! slot a key came from, so the output does not depend on context order.

mod model;
mod train;
mod vocab;

pub use model::{sinusoidal, Fid, ModelConfig, Params, TensorSpec, ToyExample, Trace};
pub use train::{
    encode_packed, greedy_decode, load_model, pad_contexts, save_model, train, train_with,
    vocab_for, write_loss_curve, Adam, Decoded, FidProvider, TrainConfig, TrainOutput, Trainer,
};
pub use vocab::{build_vocab, model_tokens, Vocab, BOS, EOS, NEWLINE, N_SPECIALS, PAD, UNK};

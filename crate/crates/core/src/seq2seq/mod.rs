//! A small attention-based recurrent decoder over encoder node
//! representations, with greedy and beam search and BLEU.

mod bleu;
mod decoder;
mod search;
mod vocab;

pub use bleu::{bleu, corpus_bleu, strip_pad, BleuStats};
pub use decoder::{
    attend, decode_step, embed, initial_state, DecoderConfig, DecoderParams, DecoderState,
    DecoderWeights, TapeDecoder,
};
pub use search::{beam_decode, greedy_decode, log_softmax, sequence_score, Hypothesis, StepModel};
pub use vocab::{Vocab, BOS, EOS, PAD, UNK};

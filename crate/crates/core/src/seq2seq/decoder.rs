use rand::Rng;

use super::search::StepModel;
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub hidden: usize,
    pub embed: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            embed: 32,
        }
    }
}

/// Row lookup into an embedding table.
pub fn embed(tape: &Tape, table: Var, tokens: &[usize]) -> Result<Var> {
    tape.gather_rows(table, tokens)
}

/// Decoder parameters allocated under `decoder.`. Gate blocks inside the
/// recurrent weights are ordered update, reset, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderParams {
    pub config: DecoderConfig,
    pub memory: usize,
    pub vocab: usize,
    pub embed: ParamId,
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub b_gates: ParamId,
    pub w_attn: ParamId,
    pub w_init: ParamId,
    pub b_init: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl DecoderParams {
    /// `memory` is the width of the encoder node representations.
    pub fn allocate<R: Rng>(
        store: &mut ParamStore,
        config: DecoderConfig,
        memory: usize,
        vocab: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let DecoderConfig {
            hidden: h,
            embed: e,
        } = config;
        if h == 0 || e == 0 || memory == 0 || vocab == 0 {
            return Err(Error::config("decoder dimensions must be positive"));
        }
        Ok(Self {
            config,
            memory,
            vocab,
            embed: store.add_glorot("decoder.embed", vocab, e, rng)?,
            w_input: store.add_glorot("decoder.gru.w_input", e + memory, 3 * h, rng)?,
            w_hidden: store.add_glorot("decoder.gru.w_hidden", h, 3 * h, rng)?,
            b_gates: store.add_zeros("decoder.gru.b", 1, 3 * h)?,
            w_attn: store.add_glorot("decoder.attn.w", memory, h, rng)?,
            w_init: store.add_glorot("decoder.init.w", memory, h, rng)?,
            b_init: store.add_zeros("decoder.init.b", 1, h)?,
            w_out: store.add_glorot("decoder.out.w", h + memory, vocab, rng)?,
            b_out: store.add_zeros("decoder.out.b", 1, vocab)?,
        })
    }

    pub fn bind(&self, tape: &Tape, store: &ParamStore) -> DecoderWeights {
        let p = |id| tape.param(store, id);
        DecoderWeights {
            hidden: self.config.hidden,
            memory: self.memory,
            vocab: self.vocab,
            embed: p(self.embed),
            w_input: p(self.w_input),
            w_hidden: p(self.w_hidden),
            b_gates: p(self.b_gates),
            w_attn: p(self.w_attn),
            w_init: p(self.w_init),
            b_init: p(self.b_init),
            w_out: p(self.w_out),
            b_out: p(self.b_out),
        }
    }
}

/// Decoder weights bound on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderWeights {
    pub hidden: usize,
    pub memory: usize,
    pub vocab: usize,
    pub embed: Var,
    pub w_input: Var,
    pub w_hidden: Var,
    pub b_gates: Var,
    pub w_attn: Var,
    pub w_init: Var,
    pub b_init: Var,
    pub w_out: Var,
    pub b_out: Var,
}

/// Recurrent hidden row, previous attention context and step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderState {
    pub hidden: Var,
    pub context: Var,
    pub step: usize,
}

fn check_memory(tape: &Tape, w: &DecoderWeights, node_reps: Var) -> Result<()> {
    let cols = tape.value(node_reps).cols();
    if cols != w.memory {
        return Err(Error::shape(format!(
            "node representations are {cols} wide, decoder expects {}",
            w.memory
        )));
    }
    Ok(())
}

/// `tanh(mean(node_reps)·W + b)` with a zero context.
pub fn initial_state(tape: &Tape, w: &DecoderWeights, node_reps: Var) -> Result<DecoderState> {
    check_memory(tape, w, node_reps)?;
    let mean = tape.mean_rows(node_reps);
    let lin = tape.matmul(mean, w.w_init)?;
    let hidden = tape.tanh(tape.add_row(lin, w.b_init)?);
    let context = tape.constant(Tensor::zeros(1, w.memory));
    Ok(DecoderState {
        hidden,
        context,
        step: 0,
    })
}

/// Bilinear attention of a `1×h` query over `n×d` node representations.
/// Returns the `1×d` context and the `1×n` weights.
pub fn attend(tape: &Tape, w: &DecoderWeights, query: Var, node_reps: Var) -> Result<(Var, Var)> {
    check_memory(tape, w, node_reps)?;
    let q = tape.transpose(query);
    let projected = tape.matmul(w.w_attn, q)?;
    let scores = tape.matmul(node_reps, projected)?;
    let weights = tape.softmax_rows(tape.transpose(scores));
    let context = tape.matmul(weights, node_reps)?;
    Ok((context, weights))
}

/// One gated recurrent step fed with `[embed(prev); context]`, followed by
/// attention and the output projection.
pub fn decode_step(
    tape: &Tape,
    w: &DecoderWeights,
    state: &DecoderState,
    prev: usize,
    node_reps: Var,
) -> Result<(Var, DecoderState)> {
    let h = w.hidden;
    let x = embed(tape, w.embed, &[prev])?;
    let x = tape.concat_cols(&[x, state.context])?;
    let xg = tape.add_row(tape.matmul(x, w.w_input)?, w.b_gates)?;
    let hg = tape.matmul(state.hidden, w.w_hidden)?;
    let part = |v: Var, i: usize| tape.slice_cols(v, i * h, (i + 1) * h);
    let z = tape.sigmoid(tape.add(part(xg, 0)?, part(hg, 0)?)?);
    let r = tape.sigmoid(tape.add(part(xg, 1)?, part(hg, 1)?)?);
    let gated = tape.mul(r, part(hg, 2)?)?;
    let n = tape.tanh(tape.add(part(xg, 2)?, gated)?);
    // (1 − z)⊙n + z⊙h
    let keep = tape.mul(z, tape.sub(state.hidden, n)?)?;
    let hidden = tape.add(n, keep)?;
    let (context, _) = attend(tape, w, hidden, node_reps)?;
    let out = tape.concat_cols(&[hidden, context])?;
    let logits = tape.add_row(tape.matmul(out, w.w_out)?, w.b_out)?;
    Ok((
        logits,
        DecoderState {
            hidden,
            context,
            step: state.step + 1,
        },
    ))
}

/// Drives [`decode_step`] on a tape for the search routines.
pub struct TapeDecoder<'t> {
    pub tape: &'t Tape,
    pub weights: DecoderWeights,
    pub node_reps: Var,
}

impl StepModel for TapeDecoder<'_> {
    type State = DecoderState;

    fn start(&self) -> Result<DecoderState> {
        initial_state(self.tape, &self.weights, self.node_reps)
    }

    fn step(&self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState)> {
        let (logits, next) = decode_step(self.tape, &self.weights, state, prev, self.node_reps)?;
        let row = self.tape.value(logits).data().to_vec();
        Ok((row, next))
    }
}

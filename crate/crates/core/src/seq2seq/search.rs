use std::cmp::Ordering;

use super::vocab::{BOS, EOS};
use crate::error::{Error, Result};
use crate::tensor::log_sum_exp;

/// Something that maps a state and the previous token to next-token logits.
pub trait StepModel {
    type State: Clone;

    fn start(&self) -> Result<Self::State>;

    fn step(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|v| v - lse).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn check_len(max_len: usize) -> Result<()> {
    if max_len == 0 {
        return Err(Error::Usage("max_len must be at least 1".into()));
    }
    Ok(())
}

/// Argmax decoding from `<s>`, lowest index on ties. Stops at `</s>`
/// (not included) or after `max_len` tokens.
pub fn greedy_decode<M: StepModel>(model: &M, max_len: usize) -> Result<Vec<usize>> {
    check_len(max_len)?;
    let mut state = model.start()?;
    let mut prev = BOS;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let (logits, next) = model.step(&state, prev)?;
        let tok = argmax(&log_softmax(&logits));
        if tok == EOS {
            break;
        }
        out.push(tok);
        prev = tok;
        state = next;
    }
    Ok(out)
}

/// A search result. `tokens` excludes the closing `</s>`; `finished`
/// records whether one was emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Scored length, counting `</s>` when present.
    pub fn len(&self) -> usize {
        self.tokens.len() + self.finished as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Log-probability per emitted token.
    pub fn score(&self) -> f64 {
        self.log_prob / self.len() as f64
    }

    /// Emitted tokens including `</s>` when finished.
    pub fn emitted(&self) -> Vec<usize> {
        let mut t = self.tokens.clone();
        if self.finished {
            t.push(EOS);
        }
        t
    }
}

/// Higher score first, then lexicographically smaller emissions.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then_with(|| a.emitted().cmp(&b.emitted()))
}

/// Beam search over length-normalized log-probability. Hypotheses that
/// emit `</s>` leave the beam; search ends when none remain or after
/// `max_len` steps, when survivors are scored as they stand.
pub fn beam_decode<M: StepModel>(model: &M, beam: usize, max_len: usize) -> Result<Hypothesis> {
    check_len(max_len)?;
    if beam == 0 {
        return Err(Error::Usage("beam width must be at least 1".into()));
    }
    let mut live: Vec<(Vec<usize>, f64, M::State)> = vec![(Vec::new(), 0.0, model.start()?)];
    let mut done: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut children = Vec::with_capacity(live.len());
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        for (i, (tokens, score, state)) in live.iter().enumerate() {
            let prev = tokens.last().copied().unwrap_or(BOS);
            let (logits, next) = model.step(state, prev)?;
            for (tok, lp) in log_softmax(&logits).into_iter().enumerate() {
                cands.push((i, tok, score + lp));
            }
            children.push(next);
        }
        // equal lengths here, so raw and normalized order agree
        cands.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| live[a.0].0.cmp(&live[b.0].0))
                .then_with(|| a.1.cmp(&b.1))
        });
        cands.truncate(beam);
        let mut next_live = Vec::with_capacity(cands.len());
        for (parent, tok, score) in cands {
            let tokens = live[parent].0.clone();
            if tok == EOS {
                done.push(Hypothesis {
                    tokens,
                    log_prob: score,
                    finished: true,
                });
            } else {
                let mut tokens = tokens;
                tokens.push(tok);
                next_live.push((tokens, score, children[parent].clone()));
            }
        }
        live = next_live;
    }
    done.extend(live.into_iter().map(|(tokens, log_prob, _)| Hypothesis {
        tokens,
        log_prob,
        finished: false,
    }));
    done.sort_by(rank);
    Ok(done.into_iter().next().expect("at least one hypothesis"))
}

/// Summed log-probability of emitting `tokens` in order from `<s>`,
/// accumulated in the same order as [`beam_decode`].
pub fn sequence_score<M: StepModel>(model: &M, tokens: &[usize]) -> Result<f64> {
    let mut state = model.start()?;
    let mut prev = BOS;
    let mut total = 0.0;
    for &t in tokens {
        let (logits, next) = model.step(&state, prev)?;
        let lp = log_softmax(&logits);
        let p = *lp
            .get(t)
            .ok_or_else(|| Error::Vocab(format!("token {t} outside {} logits", lp.len())))?;
        total += p;
        prev = t;
        state = next;
    }
    Ok(total)
}

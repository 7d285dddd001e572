//! BLEU with clipped n-gram counts, add-one smoothing of empty higher-order
//! matches and a closest-reference brevity penalty.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";

/// Removes padding tokens.
pub fn strip_pad<S: AsRef<str>>(tokens: &[S]) -> Vec<&str> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| *t != PAD_TOKEN)
        .collect()
}

fn ngrams<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped match and candidate n-gram totals per order, plus candidate and
/// closest reference lengths. Adds across sentences for corpus scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub cand_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn new<S: AsRef<str>, R: AsRef<[S]>>(
        candidate: &[S],
        references: &[R],
        max_n: usize,
    ) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::Eval("BLEU needs at least one reference".into()));
        }
        if max_n == 0 {
            return Err(Error::Usage("BLEU order must be at least 1".into()));
        }
        let cand = strip_pad(candidate);
        let refs: Vec<Vec<&str>> = references.iter().map(|r| strip_pad(r.as_ref())).collect();
        let mut matches = vec![0; max_n];
        let mut totals = vec![0; max_n];
        for n in 1..=max_n {
            let cand_counts = ngrams(&cand, n);
            let mut max_ref: HashMap<&[&str], usize> = HashMap::new();
            for r in &refs {
                for (g, c) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in cand_counts {
                matches[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
        let c = cand.len();
        // closest reference length, shorter on ties
        let ref_len = refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(c), r))
            .expect("non-empty");
        Ok(Self {
            matches,
            totals,
            cand_len: c,
            ref_len,
        })
    }

    pub fn add(&mut self, other: &BleuStats) {
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    /// Modified precision of order `n` (1-based) after smoothing.
    pub fn precision(&self, n: usize) -> f64 {
        let (m, t) = (self.matches[n - 1], self.totals[n - 1]);
        if n == 1 {
            return if t == 0 { 0.0 } else { m as f64 / t as f64 };
        }
        match (m, t) {
            (_, 0) => 1.0,
            (0, t) => 1.0 / (t as f64 + 1.0),
            (m, t) => m as f64 / t as f64,
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.cand_len == 0 {
            0.0
        } else if self.cand_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        }
    }

    pub fn score(&self) -> f64 {
        if self.cand_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let n = self.matches.len();
        let log_mean = (1..=n).map(|k| self.precision(k).ln()).sum::<f64>() / n as f64;
        (self.brevity_penalty() * log_mean.exp()).min(1.0)
    }
}

/// Sentence BLEU of `candidate` against `references`.
pub fn bleu<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
    max_n: usize,
) -> Result<f64> {
    Ok(BleuStats::new(candidate, references, max_n)?.score())
}

/// Corpus BLEU from statistics summed over `(candidate, references)` pairs.
pub fn corpus_bleu<S: AsRef<str>, R: AsRef<[S]>>(
    pairs: &[(Vec<S>, Vec<R>)],
    max_n: usize,
) -> Result<f64> {
    let mut iter = pairs.iter();
    let (c, r) = iter
        .next()
        .ok_or_else(|| Error::Eval("corpus BLEU of an empty corpus".into()))?;
    let mut stats = BleuStats::new(c, r, max_n)?;
    for (c, r) in iter {
        stats.add(&BleuStats::new(c, r, max_n)?);
    }
    Ok(stats.score())
}

use super::data::Example;
use super::model::Model;
use crate::error::{Error, Result};
use crate::seq2seq::corpus_bleu;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Position-wise agreement over the longer of hypothesis and reference.
    pub token_accuracy: f64,
    pub bleu: f64,
    pub hypotheses: Vec<Vec<String>>,
}

pub fn evaluate(model: &Model, examples: &[Example], beam: usize) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Eval("evaluation set is empty".into()));
    }
    let mut hypotheses = Vec::with_capacity(examples.len());
    let mut pairs = Vec::with_capacity(examples.len());
    let (mut matched, mut slots) = (0usize, 0usize);
    for ex in examples {
        let reference = ex.target_tokens()?.to_vec();
        let p = model.prepare(ex)?;
        let ids = model.decode(&p, beam)?;
        let hyp: Vec<String> = model
            .target_vocab
            .decode(&ids)
            .map_err(|e| Error::Eval(e.to_string()))?
            .into_iter()
            .map(str::to_string)
            .collect();
        matched += hyp.iter().zip(&reference).filter(|(a, b)| a == b).count();
        slots += hyp.len().max(reference.len());
        pairs.push((hyp.clone(), vec![reference]));
        hypotheses.push(hyp);
    }
    Ok(EvalReport {
        token_accuracy: if slots == 0 {
            1.0
        } else {
            matched as f64 / slots as f64
        },
        bleu: corpus_bleu(&pairs, 4)?,
        hypotheses,
    })
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::data::{shuffled, Example};
use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::{Adam, Tape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-token loss over the epoch's examples.
    pub loss: f64,
    /// Teacher-forced argmax accuracy, measured before each update.
    pub token_acc: f64,
}

impl EpochMetrics {
    /// `epoch\tloss\ttoken_acc`; floats print in shortest round-trip form.
    pub fn log_line(&self) -> String {
        format!("{}\t{}\t{}", self.epoch, self.loss, self.token_acc)
    }
}

pub fn format_log(log: &[EpochMetrics]) -> String {
    log.iter().map(|m| m.log_line() + "\n").collect()
}

pub fn parse_log(text: &str) -> Result<Vec<EpochMetrics>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let bad = || Error::Usage(format!("malformed log line `{l}`"));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| bad())?,
                loss: f[1].parse().map_err(|_| bad())?,
                token_acc: f[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochMetrics>,
}

pub fn train(config: &RunConfig, examples: &[Example]) -> Result<TrainOutcome> {
    train_with(config, examples, |_| {})
}

/// Per-example Adam updates over `config.epochs` shuffled passes, calling
/// `on_epoch` after each.
pub fn train_with(
    config: &RunConfig,
    examples: &[Example],
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let (src, tgt) = Model::vocabularies(examples)?;
    let mut model = Model::new(config.clone(), src, tgt)?;
    let prepared = examples
        .iter()
        .map(|e| model.prepare(e))
        .collect::<Result<Vec<_>>>()?;
    let mut opt = Adam::new(config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let (mut correct, mut total) = (0, 0);
        for idx in shuffled(prepared.len(), &mut rng) {
            let tape = Tape::new();
            let forced = model.forced_loss(&tape, &prepared[idx], Some(&mut rng))?;
            let loss = tape.value(forced.loss).item();
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    example: idx,
                    loss,
                });
            }
            loss_sum += loss;
            correct += forced.correct;
            total += forced.total;
            let grads = tape.backward(forced.loss)?;
            opt.step(&mut model.store, grads.params())?;
        }
        let m = EpochMetrics {
            epoch,
            loss: loss_sum / prepared.len() as f64,
            token_acc: correct as f64 / total as f64,
        };
        on_epoch(&m);
        log.push(m);
    }
    Ok(TrainOutcome { model, log })
}

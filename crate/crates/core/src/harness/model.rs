use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::data::Example;
use crate::adjacency::{AdjacencyFlags, SparseAdjacency};
use crate::error::{Error, Result};
use crate::seq2seq::{
    beam_decode, decode_step, embed, greedy_decode, initial_state, DecoderParams, TapeDecoder,
    Vocab, BOS, EOS,
};
use crate::strategies::Encoder;
use crate::tensor::{checkpoint, ParamId, ParamStore, Tape, Tensor, Var};

/// An example turned into indices and an adjacency.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub adjacency: Arc<SparseAdjacency>,
    pub source: Vec<usize>,
    /// Target indices without the closing `</s>`.
    pub target: Vec<usize>,
}

/// Teacher-forced loss (mean per token) and argmax agreement.
pub struct ForcedLoss {
    pub loss: Var,
    pub correct: usize,
    pub total: usize,
}

/// Source embedding, graph encoder and attentional decoder.
pub struct Model {
    pub config: RunConfig,
    pub store: ParamStore,
    pub source_vocab: Vocab,
    pub target_vocab: Vocab,
    source_embed: ParamId,
    encoder: Encoder,
    decoder: DecoderParams,
}

const SOURCE_EMBED: &str = "source.embed";
const TARGET_EMBED: &str = "decoder.embed";

impl Model {
    /// Initializes every parameter from `config.seed`.
    pub fn new(config: RunConfig, source_vocab: Vocab, target_vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.width;
        let source_embed = store.add_glorot(SOURCE_EMBED, source_vocab.len(), d, &mut rng)?;
        let encoder = Encoder::new(config.stack_config()?, &mut store, &mut rng)?;
        let decoder = DecoderParams::allocate(
            &mut store,
            config.decoder(),
            d,
            target_vocab.len(),
            &mut rng,
        )?;
        Ok(Self {
            config,
            store,
            source_vocab,
            target_vocab,
            source_embed,
            encoder,
            decoder,
        })
    }

    /// Node labels and target tokens in first-seen order.
    pub fn vocabularies(examples: &[Example]) -> Result<(Vocab, Vocab)> {
        let mut src = Vocab::new();
        let mut tgt = Vocab::new();
        for ex in examples {
            for n in ex.graph.nodes() {
                src.insert(&n.label);
            }
            for t in ex.target_tokens()? {
                tgt.insert(t);
            }
        }
        Ok((src, tgt))
    }

    pub fn adjacency_flags(&self) -> AdjacencyFlags {
        AdjacencyFlags {
            row_normalize: self.config.normalize,
            ..AdjacencyFlags::default()
        }
    }

    pub fn prepare(&self, ex: &Example) -> Result<Prepared> {
        let source = ex
            .graph
            .nodes()
            .iter()
            .map(|n| self.source_vocab.id(&n.label))
            .collect();
        let target = match &ex.target {
            Some(t) => self.target_vocab.encode(t),
            None => Vec::new(),
        };
        Ok(Prepared {
            adjacency: Arc::new(SparseAdjacency::from_graph(
                &ex.graph,
                self.adjacency_flags(),
            )),
            source,
            target,
        })
    }

    /// Encoder node representations, `n×d`.
    pub fn encode(&self, tape: &Tape, p: &Prepared) -> Result<Var> {
        let table = tape.param(&self.store, self.source_embed);
        let h0 = embed(tape, table, &p.source)?;
        self.encoder.forward(tape, &self.store, h0, &p.adjacency)
    }

    /// Teacher-forced cross-entropy over the target plus `</s>`. Dropout on
    /// the node representations is applied when `rng` is given.
    pub fn forced_loss(
        &self,
        tape: &Tape,
        p: &Prepared,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForcedLoss> {
        let mut reps = self.encode(tape, p)?;
        let rate = self.config.dropout;
        if let (Some(rng), true) = (rng, rate > 0.0) {
            let (r, c) = {
                let v = tape.value(reps);
                (v.rows(), v.cols())
            };
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..r * c)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect();
            let mask = tape.constant(Tensor::from_vec(r, c, mask)?);
            reps = tape.mul(reps, mask)?;
        }
        let w = self.decoder.bind(tape, &self.store);
        let mut state = initial_state(tape, &w, reps)?;
        let mut prev = BOS;
        let mut total_loss: Option<Var> = None;
        let mut correct = 0;
        let targets: Vec<usize> = p.target.iter().copied().chain([EOS]).collect();
        for &t in &targets {
            let (logits, next) = decode_step(tape, &w, &state, prev, reps)?;
            {
                let row = tape.value(logits);
                let row = row.data();
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                correct += (best == t) as usize;
            }
            let ce = tape.cross_entropy(logits, &[t])?;
            total_loss = Some(match total_loss {
                None => ce,
                Some(acc) => tape.add(acc, ce)?,
            });
            prev = t;
            state = next;
        }
        let loss = tape.scale(
            total_loss.expect("at least </s>"),
            1.0 / targets.len() as f64,
        );
        Ok(ForcedLoss {
            loss,
            correct,
            total: targets.len(),
        })
    }

    /// Greedy decoding when `beam == 1`, beam search otherwise.
    pub fn decode(&self, p: &Prepared, beam: usize) -> Result<Vec<usize>> {
        let tape = Tape::new();
        let reps = self.encode(&tape, p)?;
        let dec = TapeDecoder {
            tape: &tape,
            weights: self.decoder.bind(&tape, &self.store),
            node_reps: reps,
        };
        if beam == 1 {
            greedy_decode(&dec, self.config.max_len)
        } else {
            Ok(beam_decode(&dec, beam, self.config.max_len)?.tokens)
        }
    }

    /// Beam search regardless of width, for cross-checking the greedy path.
    pub fn beam_search(&self, p: &Prepared, beam: usize) -> Result<Vec<usize>> {
        let tape = Tape::new();
        let reps = self.encode(&tape, p)?;
        let dec = TapeDecoder {
            tape: &tape,
            weights: self.decoder.bind(&tape, &self.store),
            node_reps: reps,
        };
        Ok(beam_decode(&dec, beam, self.config.max_len)?.tokens)
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    /// Writes the parameters to `path` and config plus vocabularies to
    /// `path.meta`.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.store, path)?;
        let mut meta = self.config.to_text();
        meta.push_str("[source]\n");
        for t in self.source_vocab.tokens() {
            meta.push_str(t);
            meta.push('\n');
        }
        meta.push_str("[target]\n");
        for t in self.target_vocab.tokens() {
            meta.push_str(t);
            meta.push('\n');
        }
        let mp = Self::meta_path(path);
        std::fs::write(&mp, meta).map_err(|e| Error::io(mp, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mp = Self::meta_path(path);
        let meta = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let bad = || Error::Checkpoint(format!("{}: malformed metadata", mp.display()));
        let (cfg_text, rest) = meta.split_once("[source]\n").ok_or_else(bad)?;
        let (src, tgt) = rest.split_once("[target]\n").ok_or_else(bad)?;
        let config = RunConfig::parse(cfg_text, None)?;
        let list = |s: &str| s.lines().map(str::to_string).collect::<Vec<_>>();
        let source_vocab = Vocab::from_list(&list(src))?;
        let target_vocab = Vocab::from_list(&list(tgt))?;
        let loaded = checkpoint::load(path)?;
        for (name, vocab) in [(SOURCE_EMBED, &source_vocab), (TARGET_EMBED, &target_vocab)] {
            let rows = loaded
                .id(name)
                .map(|id| loaded.get(id).rows())
                .ok_or_else(|| Error::Checkpoint(format!("checkpoint lacks `{name}`")))?;
            if rows != vocab.len() {
                return Err(Error::Eval(format!(
                    "vocab mismatch: `{name}` has {rows} rows, metadata lists {} tokens",
                    vocab.len()
                )));
            }
        }
        let mut model = Self::new(config, source_vocab, target_vocab)?;
        checkpoint::restore_into(&mut model.store, &loaded)?;
        Ok(model)
    }
}

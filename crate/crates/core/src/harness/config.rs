use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layers::{ConvKind, DfmConfig};
use crate::seq2seq::DecoderConfig;
use crate::strategies::{StackConfig, Strategy, SubBlock};
use crate::tensor::{Activation, AdamConfig};

/// Everything a training or evaluation run needs. Parsed from flat
/// `key = value` files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: Strategy,
    /// Layer counts per sub-block, one list per block.
    pub blocks: Vec<Vec<usize>>,
    /// Layerwise groups per sub-block; `None` means one per layer.
    pub layer_groups: Option<Vec<usize>>,
    pub width: usize,
    pub depth_groups: usize,
    pub vanilla: bool,
    pub lambda: f64,
    pub order: usize,
    pub activation: Activation,
    pub hidden: usize,
    pub embed: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beam: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub normalize: bool,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Group,
            blocks: vec![vec![4, 2]; 2],
            layer_groups: None,
            width: 32,
            depth_groups: 2,
            vanilla: false,
            lambda: 0.7,
            order: 2,
            activation: Activation::Relu,
            hidden: 64,
            embed: 32,
            lr: 1e-3,
            epochs: 10,
            seed: 1,
            beam: 1,
            max_len: 50,
            dropout: 0.0,
            normalize: true,
            data: None,
            checkpoint: None,
            log: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

/// `4+2,4+2` into `[[4, 2], [4, 2]]`.
pub fn parse_blocks(value: &str) -> Result<Vec<Vec<usize>>> {
    value
        .split(',')
        .map(|b| {
            b.trim()
                .split('+')
                .map(|n| parse_num("blocks", n.trim()))
                .collect()
        })
        .collect()
}

fn format_blocks(blocks: &[Vec<usize>]) -> String {
    blocks
        .iter()
        .map(|b| b.iter().map(usize::to_string).collect::<Vec<_>>().join("+"))
        .collect::<Vec<_>>()
        .join(",")
}

fn format_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("+")
}

impl RunConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut layers: Option<usize> = None;
        let mut blocks_set = false;
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "strategy" => cfg.strategy = value.parse()?,
                "blocks" => {
                    cfg.blocks = parse_blocks(value)?;
                    blocks_set = true;
                }
                "L" => layers = Some(parse_num(key, value)?),
                "M" => {
                    cfg.layer_groups = Some(
                        value
                            .split('+')
                            .map(|n| parse_num(key, n.trim()))
                            .collect::<Result<_>>()?,
                    )
                }
                "d" => cfg.width = parse_num(key, value)?,
                "N" => cfg.depth_groups = parse_num(key, value)?,
                "conv" => {
                    cfg.vanilla = match value {
                        "dfm" => false,
                        "vanilla" => true,
                        _ => {
                            return Err(Error::config(format!(
                                "`conv`: expected dfm or vanilla, got `{value}`"
                            )))
                        }
                    }
                }
                "lambda" => cfg.lambda = parse_num(key, value)?,
                "K" => cfg.order = parse_num(key, value)?,
                "activation" => cfg.activation = value.parse()?,
                "hidden" => cfg.hidden = parse_num(key, value)?,
                "embed" => cfg.embed = parse_num(key, value)?,
                "lr" => cfg.lr = parse_num(key, value)?,
                "epochs" => cfg.epochs = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "beam" => cfg.beam = parse_num(key, value)?,
                "max_len" => cfg.max_len = parse_num(key, value)?,
                "dropout" => cfg.dropout = parse_num(key, value)?,
                "normalize" => cfg.normalize = parse_bool(key, value)?,
                "data" => cfg.data = Some(path(value)),
                "checkpoint" => cfg.checkpoint = Some(path(value)),
                "log" => cfg.log = Some(path(value)),
                _ => {
                    return Err(Error::config(format!(
                        "line {}: unknown key `{key}`",
                        lineno + 1
                    )))
                }
            }
        }
        if let Some(l) = layers {
            if blocks_set {
                return Err(Error::config("set either `L` or `blocks`, not both"));
            }
            cfg.blocks = vec![vec![l]];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    /// Text that [`RunConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("strategy", self.strategy.to_string());
        kv("blocks", format_blocks(&self.blocks));
        if let Some(m) = &self.layer_groups {
            kv("M", format_list(m));
        }
        kv("d", self.width.to_string());
        kv("N", self.depth_groups.to_string());
        kv(
            "conv",
            if self.vanilla { "vanilla" } else { "dfm" }.to_string(),
        );
        kv("lambda", self.lambda.to_string());
        kv("K", self.order.to_string());
        kv("activation", self.activation.name().to_string());
        kv("hidden", self.hidden.to_string());
        kv("embed", self.embed.to_string());
        kv("lr", self.lr.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("beam", self.beam.to_string());
        kv("max_len", self.max_len.to_string());
        kv("dropout", self.dropout.to_string());
        kv("normalize", self.normalize.to_string());
        for (k, p) in [
            ("data", &self.data),
            ("checkpoint", &self.checkpoint),
            ("log", &self.log),
        ] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.stack_config()?.validate()?;
        if self.hidden == 0 || self.embed == 0 {
            return Err(Error::config("`hidden` and `embed` must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "`lr` must be positive, got {}",
                self.lr
            )));
        }
        if self.beam == 0 || self.max_len == 0 {
            return Err(Error::config("`beam` and `max_len` must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "`dropout` {} not in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn dfm(&self) -> DfmConfig {
        DfmConfig {
            lambda: self.lambda,
            order: self.order,
            activation: self.activation,
        }
    }

    pub fn conv(&self) -> ConvKind {
        if self.vanilla {
            ConvKind::Vanilla(self.activation)
        } else {
            ConvKind::Dfm(self.dfm())
        }
    }

    pub fn stack_config(&self) -> Result<StackConfig> {
        let blocks = self
            .blocks
            .iter()
            .map(|block| {
                if let Some(m) = &self.layer_groups {
                    if m.len() != 1 && m.len() != block.len() {
                        return Err(Error::config(format!(
                            "`M` lists {} values for a block of {} sub-blocks",
                            m.len(),
                            block.len()
                        )));
                    }
                }
                Ok(block
                    .iter()
                    .enumerate()
                    .map(|(i, &layers)| SubBlock {
                        layers,
                        layer_groups: match &self.layer_groups {
                            None => layers,
                            Some(m) if m.len() == 1 => m[0],
                            Some(m) => m[i],
                        },
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let cfg = StackConfig {
            strategy: self.strategy,
            width: self.width,
            depth_groups: self.depth_groups,
            blocks,
            conv: self.conv(),
        };
        Ok(cfg)
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            hidden: self.hidden,
            embed: self.embed,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

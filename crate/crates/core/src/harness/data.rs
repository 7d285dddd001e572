//! Dataset files: records separated by blank lines, each a PENMAN graph
//! optionally followed on its last line by a tab and a target sentence.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, ParseError, Result};
use crate::penman::{parse_penman, serialize_penman, AmrGraph, Edge, Node};

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub graph: AmrGraph,
    /// Whitespace-split target tokens; `None` for bare graphs.
    pub target: Option<Vec<String>>,
}

impl Example {
    pub fn target_tokens(&self) -> Result<&[String]> {
        self.target
            .as_deref()
            .ok_or_else(|| Error::Usage("record has no target sentence".into()))
    }
}

/// Byte ranges of non-empty records.
fn records(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                out.push((s, &text[s..offset]));
            }
        } else if start.is_none() {
            start = Some(offset);
        }
        offset += line.len();
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

/// Parses every record. Parse error offsets are relative to `text`.
pub fn parse_dataset(text: &str) -> Result<Vec<Example>> {
    records(text)
        .into_iter()
        .map(|(start, rec)| {
            let (graph_text, target) = match rec.rfind('\t') {
                Some(i) => (
                    &rec[..i],
                    Some(
                        rec[i + 1..]
                            .split_whitespace()
                            .map(str::to_string)
                            .collect(),
                    ),
                ),
                None => (rec, None),
            };
            let graph = parse_penman(graph_text)
                .map_err(|e| ParseError::new(start + e.offset, e.message))?;
            Ok(Example { graph, target })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn format_dataset(examples: &[Example]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&serialize_penman(&ex.graph));
        if let Some(t) = &ex.target {
            let _ = write!(out, "\t{}", t.join(" "));
        }
        out.push('\n');
    }
    out
}

pub const CONCEPTS: [&str; 50] = [
    "want-01",
    "boy",
    "girl",
    "go-01",
    "believe-01",
    "say-01",
    "know-01",
    "see-01",
    "city",
    "country",
    "person",
    "thing",
    "and",
    "or",
    "possible-01",
    "need-01",
    "have-03",
    "make-01",
    "give-01",
    "take-01",
    "think-01",
    "house",
    "school",
    "teacher",
    "book",
    "read-01",
    "write-01",
    "big",
    "small",
    "good-02",
    "bad-07",
    "new-01",
    "old",
    "eat-01",
    "food",
    "water",
    "run-02",
    "walk-01",
    "car",
    "day",
    "night",
    "time",
    "work-01",
    "help-01",
    "tell-01",
    "ask-01",
    "friend",
    "family",
    "child",
    "money",
];

const ROLES: [&str; 10] = [
    "ARG0", "ARG1", "ARG2", "mod", "time", "location", "manner", "op1", "op2", "poss",
];

/// Drops a trailing sense suffix such as `-01`.
pub fn strip_sense(concept: &str) -> &str {
    match concept.rsplit_once('-') {
        Some((head, tail))
            if !head.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) =>
        {
            head
        }
        _ => concept,
    }
}

/// A random tree of `1..=max_nodes` concepts plus up to two re-entrant
/// edges, paired with its depth-first concept sequence.
pub fn synthetic_example<R: Rng>(rng: &mut R, max_nodes: usize) -> Result<Example> {
    if max_nodes == 0 {
        return Err(Error::Usage("max_nodes must be at least 1".into()));
    }
    let n = rng.gen_range(1..=max_nodes);
    let mut counts = [0usize; 26];
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let concept = CONCEPTS[rng.gen_range(0..CONCEPTS.len())];
        let letter = concept.as_bytes()[0];
        let c = &mut counts[(letter - b'a') as usize];
        *c += 1;
        let var = if *c == 1 {
            (letter as char).to_string()
        } else {
            format!("{}{}", letter as char, c)
        };
        nodes.push(Node::instance(var, concept));
    }
    let mut edges: Vec<Edge> = (1..n)
        .map(|i| Edge {
            source: rng.gen_range(0..i),
            target: i,
            role: ROLES[rng.gen_range(0..ROLES.len())].to_string(),
        })
        .collect();
    if n >= 3 {
        let extra = rng.gen_range(0..=2);
        for _ in 0..extra {
            for _attempt in 0..8 {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(1..n);
                if u != v && !edges.iter().any(|e| e.source == u && e.target == v) {
                    edges.push(Edge {
                        source: u,
                        target: v,
                        role: ROLES[rng.gen_range(0..3)].to_string(),
                    });
                    break;
                }
            }
        }
    }
    let graph = AmrGraph::new(nodes, edges, 0)?;
    let target = graph
        .linearize()
        .into_iter()
        .map(|c| strip_sense(c).to_string())
        .collect();
    Ok(Example {
        graph,
        target: Some(target),
    })
}

/// `count` synthetic records as dataset text; same seed, same bytes.
pub fn gen_synthetic(seed: u64, count: usize, max_nodes: usize) -> Result<String> {
    if count == 0 {
        return Err(Error::Usage("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..count)
        .map(|_| synthetic_example(&mut rng, max_nodes))
        .collect::<Result<Vec<_>>>()?;
    Ok(format_dataset(&examples))
}

/// Deterministic shuffle of `0..n`.
pub(crate) fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

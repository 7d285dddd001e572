//! AMR graphs and the PENMAN text notation.
//!
//! A graph is a rooted, directed, labeled multigraph. Each node is either an
//! instance (`(v / concept)`) carrying a variable name, or a constant leaf
//! (`"Obama"`, `-`, `12`) whose label is the literal token. Edges keep their
//! role label exactly as written, inverse roles such as `:ARG1-of` included.

mod parse;
mod serialize;

pub use parse::parse_penman;
pub use serialize::serialize_penman;

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    /// `None` for constant leaves.
    pub var: Option<String>,
    pub label: String,
}

impl Node {
    pub fn instance(var: impl Into<String>, concept: impl Into<String>) -> Self {
        Self {
            var: Some(var.into()),
            label: concept.into(),
        }
    }

    pub fn constant(label: impl Into<String>) -> Self {
        Self {
            var: None,
            label: label.into(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.var.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub role: String,
}

/// A validated AMR graph.
///
/// Every node is reachable from the root along edges in their written
/// direction, which is what makes the graph expressible as a single PENMAN
/// tree (and implies undirected connectivity). Constants are leaves with
/// exactly one incoming edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AmrGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
}

impl AmrGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, root: usize) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Graph("graph has no nodes".into()));
        }
        if root >= n {
            return Err(Error::Graph(format!(
                "root {root} out of range for {n} nodes"
            )));
        }
        if nodes[root].is_constant() {
            return Err(Error::Graph("root must be an instance node".into()));
        }
        let mut seen = HashSet::new();
        for node in &nodes {
            if let Some(var) = &node.var {
                if !seen.insert(var.as_str()) {
                    return Err(Error::Graph(format!("duplicate variable `{var}`")));
                }
            }
        }
        let mut in_degree = vec![0usize; n];
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::Graph(format!(
                    "edge {} -> {} out of range for {n} nodes",
                    e.source, e.target
                )));
            }
            if nodes[e.source].is_constant() {
                return Err(Error::Graph(format!(
                    "constant `{}` cannot have outgoing edges",
                    nodes[e.source].label
                )));
            }
            in_degree[e.target] += 1;
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.is_constant() && in_degree[i] != 1 {
                return Err(Error::Graph(format!(
                    "constant `{}` must have exactly one incoming edge",
                    node.label
                )));
            }
        }
        let graph = Self { nodes, edges, root };
        let reached = graph.reachable_from_root();
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(Error::Graph(format!(
                "node {i} is not reachable from the root"
            )));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find_var(&self, var: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.var.as_deref() == Some(var))
    }

    /// Variables of nodes with more than one incoming edge.
    pub fn reentrancies(&self) -> Vec<&str> {
        let mut in_degree = vec![0usize; self.len()];
        for e in &self.edges {
            in_degree[e.target] += 1;
        }
        self.nodes
            .iter()
            .zip(&in_degree)
            .filter(|(_, &d)| d > 1)
            .filter_map(|(n, _)| n.var.as_deref())
            .collect()
    }

    /// Connectivity from the root when edge direction is ignored.
    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.len()];
        for e in &self.edges {
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.root]);
        seen[self.root] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut check = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut check[p], true))
        {
            return Err(Error::Usage(format!("not a permutation of 0..{n}")));
        }
        let mut nodes = vec![Node::constant(""); n];
        for (i, node) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = node.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                source: perm[e.source],
                target: perm[e.target],
                role: e.role.clone(),
            })
            .collect();
        Self::new(nodes, edges, perm[self.root])
    }

    /// Concept labels of instance nodes in depth-first order of first
    /// appearance, following edges in insertion order.
    pub fn linearize(&self) -> Vec<&str> {
        let children = self.out_edges();
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            if !self.nodes[u].is_constant() {
                out.push(self.nodes[u].label.as_str());
            }
            for &e in children[u].iter().rev() {
                let v = self.edges[e].target;
                if !seen[v] {
                    stack.push(v);
                }
            }
        }
        out
    }

    /// Edge indices grouped by source node, in insertion order.
    pub(crate) fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.source].push(i);
        }
        out
    }

    fn reachable_from_root(&self) -> Vec<bool> {
        let children = self.out_edges();
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(u) = stack.pop() {
            for &e in &children[u] {
                let v = self.edges[e].target;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Label-preserving isomorphism test that identifies instance nodes by
    /// variable name and constants by their attachment.
    pub fn isomorphic(&self, other: &AmrGraph) -> bool {
        if self.len() != other.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        let key = |g: &AmrGraph| {
            let mut nodes: HashMap<(Option<String>, String), usize> = HashMap::new();
            for n in &g.nodes {
                *nodes.entry((n.var.clone(), n.label.clone())).or_default() += 1;
            }
            let mut edges: HashMap<(String, String, String, bool), usize> = HashMap::new();
            for e in &g.edges {
                let src = g.nodes[e.source].var.clone().unwrap_or_default();
                let tgt = &g.nodes[e.target];
                let k = (
                    src,
                    e.role.clone(),
                    tgt.var.clone().unwrap_or_else(|| tgt.label.clone()),
                    tgt.is_constant(),
                );
                *edges.entry(k).or_default() += 1;
            }
            let root = g.nodes[g.root].var.clone();
            (nodes, edges, root)
        };
        key(self) == key(other)
    }
}

//! Sparse adjacency matrices and right-to-left higher-order propagation.

use std::cell::Cell;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::penman::AmrGraph;
use crate::tensor::Tensor;

/// How a graph's edges become matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjacencyFlags {
    pub reverse_edges: bool,
    pub self_loops: bool,
    pub row_normalize: bool,
}

impl AdjacencyFlags {
    /// Forward edges only, binary entries.
    pub const NONE: Self = Self {
        reverse_edges: false,
        self_loops: false,
        row_normalize: false,
    };
}

impl Default for AdjacencyFlags {
    fn default() -> Self {
        Self {
            reverse_edges: true,
            self_loops: true,
            row_normalize: false,
        }
    }
}

/// Coordinate-format `n×n` matrix; entries are unique and sorted by
/// `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    flags: AdjacencyFlags,
}

impl SparseAdjacency {
    /// Builds `A` from a graph. Edge labels are ignored; parallel edges and
    /// coordinates produced by several flags collapse to one entry before
    /// normalization.
    pub fn from_graph(graph: &AmrGraph, flags: AdjacencyFlags) -> Self {
        let n = graph.len();
        let mut coords: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in graph.edges() {
            coords.insert((e.source, e.target), 1.0);
            if flags.reverse_edges {
                coords.insert((e.target, e.source), 1.0);
            }
        }
        if flags.self_loops {
            for i in 0..n {
                coords.insert((i, i), 1.0);
            }
        }
        let mut entries: Vec<_> = coords.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        if flags.row_normalize {
            let mut sums = vec![0.0; n];
            for &(r, _, v) in &entries {
                sums[r] += v;
            }
            for e in &mut entries {
                e.2 /= sums[e.0];
            }
        }
        Self { n, entries, flags }
    }

    /// Wraps explicit coordinates. Duplicates and out-of-range indices are
    /// rejected; the result carries no construction flags.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("adjacency of zero nodes".into()));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::Graph(format!(
                    "duplicate entry ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::Graph(format!("entry ({r}, {c}) outside {n}x{n}")));
        }
        Ok(Self {
            n,
            entries,
            flags: AdjacencyFlags::NONE,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, `m`.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn flags(&self) -> AdjacencyFlags {
        self.flags
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            t.set(r, c, v);
        }
        t
    }

    /// `P·A·Pᵀ` where old index `i` maps to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Usage("permutation length mismatch".into()));
        }
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| (perm[r], perm[c], v))
            .collect();
        let mut out = Self::from_entries(self.n, entries)?;
        out.flags = self.flags;
        Ok(out)
    }

    fn check_rows(&self, h: &Tensor) -> Result<()> {
        h.require_matrix("spmm")?;
        if h.rows() != self.n {
            return Err(Error::shape(format!(
                "adjacency is {n}x{n} but features have {} rows",
                h.rows(),
                n = self.n
            )));
        }
        Ok(())
    }

    /// `A·H`, costing exactly `m·d` multiply-adds.
    pub fn spmm(&self, h: &Tensor) -> Result<Tensor> {
        self.check_rows(h)?;
        let d = h.cols();
        let mut out = Tensor::zeros(self.n, d);
        let src = h.data();
        let dst = out.data_mut();
        for &(r, c, v) in &self.entries {
            let (o, i) = (r * d, c * d);
            for j in 0..d {
                dst[o + j] += v * src[i + j];
            }
        }
        Ok(out)
    }

    /// `Aᵀ·G`, used for back-propagation through [`spmm`](Self::spmm).
    pub fn spmm_transpose(&self, g: &Tensor) -> Result<Tensor> {
        self.check_rows(g)?;
        let d = g.cols();
        let mut out = Tensor::zeros(self.n, d);
        let src = g.data();
        let dst = out.data_mut();
        for &(r, c, v) in &self.entries {
            let (o, i) = (c * d, r * d);
            for j in 0..d {
                dst[o + j] += v * src[i + j];
            }
        }
        Ok(out)
    }
}

/// Tallies of multiply-add operations, split by sparse propagation and dense
/// matrix products.
#[derive(Debug, Default)]
pub struct MulAddCounter {
    sparse: Cell<u64>,
    dense: Cell<u64>,
}

impl MulAddCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sparse(&self) -> u64 {
        self.sparse.get()
    }

    pub fn dense(&self) -> u64 {
        self.dense.get()
    }

    pub fn reset(&self) {
        self.sparse.set(0);
        self.dense.set(0);
    }

    pub(crate) fn add_sparse(&self, n: u64) {
        self.sparse.set(self.sparse.get() + n);
    }

    pub(crate) fn add_dense(&self, n: u64) {
        self.dense.set(self.dense.get() + n);
    }
}

/// `A^k·H` computed as `A(A(…(A·H)))`; `A^k` is never formed.
pub fn kth_order_apply(adj: &SparseAdjacency, h: &Tensor, k: usize) -> Result<Tensor> {
    kth_order_apply_counted(adj, h, k, &MulAddCounter::new())
}

/// [`kth_order_apply`] that adds its `k·m·d` multiply-adds to `counter`.
pub fn kth_order_apply_counted(
    adj: &SparseAdjacency,
    h: &Tensor,
    k: usize,
    counter: &MulAddCounter,
) -> Result<Tensor> {
    if k == 0 {
        return Err(Error::Usage("kth_order_apply needs k >= 1".into()));
    }
    let mut cur = adj.spmm(h)?;
    for _ in 1..k {
        cur = adj.spmm(&cur)?;
    }
    counter.add_sparse((k * adj.nnz() * h.cols()) as u64);
    Ok(cur)
}

//! Independent reference implementations. Everything here works on plain
//! row-major `Vec<Vec<f64>>` matrices and materializes adjacency powers, so
//! it shares no arithmetic with the library's sparse path.

#![allow(dead_code)]

use std::collections::HashSet;

use ldgcn::tensor::Tensor;
use ldgcn::{Activation, AmrGraph, Edge, Node, SparseAdjacency};
use rand::Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn to_tensor(m: &Mat) -> Tensor {
    Tensor::from_rows(m)
}

/// Dense `A` rebuilt from the stored coordinates.
pub fn dense_adjacency(adj: &SparseAdjacency) -> Mat {
    let n = adj.n();
    let mut a = vec![vec![0.0; n]; n];
    for &(r, c, v) in adj.entries() {
        a[r][c] += v;
    }
    a
}

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner);
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// `A^k` by repeated squaring-free multiplication.
pub fn power(a: &Mat, k: usize) -> Mat {
    let mut p = identity(a.len());
    for _ in 0..k {
        p = matmul(&p, a);
    }
    p
}

fn add_bias(m: &Mat, b: &[f64]) -> Mat {
    m.iter()
        .map(|row| row.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect()
}

fn map(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    m.iter()
        .map(|row| row.iter().map(|&x| f(x)).collect())
        .collect()
}

pub fn act(a: Activation, x: f64) -> f64 {
    match a.name() {
        "relu" => x.max(0.0),
        "tanh" => x.tanh(),
        "identity" => x,
        other => panic!("no oracle for activation {other}"),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `A^k·H·W + b`.
pub fn propagate(a: &Mat, h: &Mat, w: &Mat, b: &[f64], k: usize) -> Mat {
    add_bias(&matmul(&matmul(&power(a, k), h), w), b)
}

pub fn gcn(a: &Mat, h: &Mat, w: &Mat, b: &[f64], activation: Activation) -> Mat {
    map(&propagate(a, h, w, b, 1), |x| act(activation, x))
}

/// Gates `(1 − λ^k)σ(P_k)` for `k = 2..=order`.
pub fn gates(a: &Mat, h: &Mat, w: &Mat, b: &[f64], lambda: f64, order: usize) -> Vec<Mat> {
    (2..=order)
        .map(|k| {
            let scale = 1.0 - lambda.powi(k as i32);
            map(&propagate(a, h, w, b, k), |x| scale * sigmoid(x))
        })
        .collect()
}

/// The fused layer in its textbook form
/// `(1 − mean_k g_k)⊙φ(P₁) + mean_k(g_k⊙φ(P_k))`.
pub fn dfm(
    a: &Mat,
    h: &Mat,
    w: &Mat,
    b: &[f64],
    lambda: f64,
    order: usize,
    activation: Activation,
) -> Mat {
    let g = gates(a, h, w, b, lambda, order);
    let values: Vec<Mat> = (1..=order)
        .map(|k| map(&propagate(a, h, w, b, k), |x| act(activation, x)))
        .collect();
    let count = (order - 1) as f64;
    let (rows, cols) = (h.len(), w[0].len());
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let mean_gate: f64 = g.iter().map(|gk| gk[i][j]).sum::<f64>() / count;
            let mixed: f64 = g
                .iter()
                .zip(&values[1..])
                .map(|(gk, vk)| gk[i][j] * vk[i][j])
                .sum::<f64>()
                / count;
            out[i][j] = (1.0 - mean_gate) * values[0][i][j] + mixed;
        }
    }
    out
}

pub fn concat_cols(parts: &[&Mat]) -> Mat {
    let rows = parts[0].len();
    (0..rows)
        .map(|r| parts.iter().flat_map(|p| p[r].iter().copied()).collect())
        .collect()
}

/// `N` weight matrices on the diagonal of one zero matrix.
pub fn block_diagonal(blocks: &[Tensor]) -> Tensor {
    let rows: usize = blocks.iter().map(Tensor::rows).sum();
    let cols: usize = blocks.iter().map(Tensor::cols).sum();
    let mut out = Tensor::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for r in 0..b.rows() {
            for c in 0..b.cols() {
                out.set(r0 + r, c0 + c, b.get(r, c));
            }
        }
        r0 += b.rows();
        c0 += b.cols();
    }
    out
}

pub fn max_dev(a: &Mat, b: &Tensor) -> f64 {
    assert_eq!(a.len(), b.rows(), "row count");
    let mut worst = 0.0f64;
    for (r, row) in a.iter().enumerate() {
        assert_eq!(row.len(), b.cols(), "column count");
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((v - b.get(r, c)).abs());
        }
    }
    worst
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// A random rooted graph of `n` instance nodes: a tree plus a few extra
/// edges into non-root nodes, with distinct variables `v0, v1, …`.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> AmrGraph {
    const LABELS: [&str; 6] = ["want-01", "boy", "girl", "go-01", "city", "and"];
    const ROLES: [&str; 4] = ["ARG0", "ARG1", "mod", "op1"];
    let nodes = (0..n)
        .map(|i| Node::instance(format!("v{i}"), LABELS[rng.gen_range(0..LABELS.len())]))
        .collect();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for t in 1..n {
        let s = rng.gen_range(0..t);
        seen.insert((s, t));
        edges.push(Edge {
            source: s,
            target: t,
            role: ROLES[rng.gen_range(0..ROLES.len())].into(),
        });
    }
    if n > 2 {
        for _ in 0..rng.gen_range(0..=n / 2) {
            let (s, t) = (rng.gen_range(0..n), rng.gen_range(1..n));
            if s != t && seen.insert((s, t)) {
                edges.push(Edge {
                    source: s,
                    target: t,
                    role: ROLES[rng.gen_range(0..ROLES.len())].into(),
                });
            }
        }
    }
    AmrGraph::new(nodes, edges, 0).unwrap()
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// Rows of `h` moved so that old row `i` lands at `perm[i]`.
pub fn permute_rows(h: &Tensor, perm: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(h.rows(), h.cols());
    for (i, &p) in perm.iter().enumerate() {
        for c in 0..h.cols() {
            out.set(p, c, h.get(i, c));
        }
    }
    out
}

pub fn bias_row(t: &Tensor) -> Vec<f64> {
    t.row(0).to_vec()
}

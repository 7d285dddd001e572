use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjacency::SparseAdjacency;
use crate::error::{Error, Result};
use crate::layers::{dfm_layer, DfmConfig, GcnWeights};
use crate::tensor::{glorot_uniform, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nodes: usize,
    pub edges: usize,
    pub order: usize,
    /// Multiply-adds spent in sparse propagation.
    pub sparse: u64,
    /// Multiply-adds spent in dense products.
    pub dense: u64,
    /// Median wall time of one layer, in milliseconds.
    pub millis: f64,
}

impl BenchRow {
    pub fn total(&self) -> u64 {
        self.sparse + self.dense
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Least-squares `(slope, intercept, r²)` of sparse count against edges.
    /// Sums are taken in exact integer arithmetic, so an exactly linear
    /// series reports `r² == 1.0`.
    pub fn linear_fit(&self) -> (f64, f64, f64) {
        let n = self.rows.len() as i128;
        let xs: Vec<i128> = self.rows.iter().map(|r| r.edges as i128).collect();
        let ys: Vec<i128> = self.rows.iter().map(|r| r.sparse as i128).collect();
        let (sx, sy): (i128, i128) = (xs.iter().sum(), ys.iter().sum());
        let sxy: i128 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: i128 = xs.iter().map(|x| x * x).sum();
        let syy: i128 = ys.iter().map(|y| y * y).sum();
        let cov = n * sxy - sx * sy;
        let vx = n * sxx - sx * sx;
        let vy = n * syy - sy * sy;
        if vx == 0 {
            return (0.0, sy as f64 / n as f64, 1.0);
        }
        let slope = cov as f64 / vx as f64;
        let intercept = (sy as f64 - slope * sx as f64) / n as f64;
        let r2 = if vy == 0 {
            1.0
        } else {
            match (cov.checked_mul(cov), vx.checked_mul(vy)) {
                (Some(a), Some(b)) if a == b => 1.0,
                _ => (cov as f64 / vx as f64) * (cov as f64 / vy as f64),
            }
        };
        (slope, intercept, r2)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:>8} {:>10} {:>3} {:>14} {:>14} {:>14} {:>10}\n",
            "nodes", "edges", "K", "sparse", "dense", "total", "ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>8} {:>10} {:>3} {:>14} {:>14} {:>14} {:>10.3}\n",
                r.nodes,
                r.edges,
                r.order,
                r.sparse,
                r.dense,
                r.total(),
                r.millis
            ));
        }
        let (slope, intercept, r2) = self.linear_fit();
        out.push_str(&format!(
            "sparse ~ {slope} * edges + {intercept} (r^2 = {r2})\n"
        ));
        out
    }
}

/// A random `n`-node adjacency with exactly `m` distinct entries.
pub fn random_adjacency(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<SparseAdjacency> {
    if m > n * n {
        return Err(Error::Usage(format!(
            "{m} entries do not fit a {n}x{n} matrix"
        )));
    }
    let mut set = BTreeSet::new();
    while set.len() < m {
        set.insert((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    SparseAdjacency::from_entries(n, set.into_iter().map(|(r, c)| (r, c, 1.0)).collect())
}

/// Times one fused layer of order `order` and width `d` on random graphs
/// with each of `sizes` edges, over a shared node count. Fails if the sparse
/// count differs from `K(K+1)/2·m·d`.
pub fn bench_scaling(
    sizes: &[usize],
    order: usize,
    d: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.is_empty() {
        return Err(Error::Usage("no benchmark sizes".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Usage(
            "benchmark sizes must be positive and ascending".into(),
        ));
    }
    if d == 0 || repeats == 0 {
        return Err(Error::Usage("width and repeats must be positive".into()));
    }
    let cfg = DfmConfig::new(0.7, order, Default::default())?;
    let max_m = *sizes.last().expect("non-empty");
    let n = 16usize.max(((2 * max_m) as f64).sqrt().ceil() as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = glorot_uniform(d, d, &mut rng);
    let h = Tensor::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let adj = Arc::new(random_adjacency(n, m, &mut rng)?);
        let mut times = Vec::with_capacity(repeats);
        let mut counts = None;
        for _ in 0..repeats {
            let tape = Tape::new();
            let hv = tape.constant(h.clone());
            let p = GcnWeights {
                w: tape.constant(w.clone()),
                b: tape.constant(Tensor::zeros(1, d)),
            };
            let start = Instant::now();
            dfm_layer(&tape, hv, &adj, p, &cfg)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            counts.get_or_insert((tape.counter().sparse(), tape.counter().dense()));
        }
        let (sparse, dense) = counts.expect("repeats >= 1");
        let expected = (order * (order + 1) / 2 * m * d) as u64;
        if sparse != expected {
            return Err(Error::Eval(format!(
                "sparse multiply-adds {sparse} for m = {m}, expected {expected}"
            )));
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            nodes: n,
            edges: m,
            order,
            sparse,
            dense,
            millis: times[times.len() / 2],
        });
    }
    Ok(BenchReport { width: d, rows })
}

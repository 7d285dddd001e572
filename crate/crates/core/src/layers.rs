//! Graph convolution layers: vanilla first-order convolution, the dynamic
//! fusion mechanism over higher-order adjacency powers, and densely
//! connected stacks of either.
//!
//! A fused layer with highest order `K` computes, with one shared `(W, b)`,
//!
//! ```text
//! P_k = A^k·H·W + b                       k = 1..K
//! G_k = (1 − λ^k) ⊙ σ(P_k)                k = 2..K
//! H'  = (1 − mean_k G_k) ⊙ φ(P_1) + mean_k (G_k ⊙ φ(P_k))
//! ```
//!
//! where `mean_k` averages the `K − 1` higher orders. Each `A^k·H` is taken
//! right to left from `H`, and the same `P_k` feeds both the gate and the
//! value.

use std::sync::Arc;

use rand::Rng;

use crate::adjacency::SparseAdjacency;
use crate::error::{Error, Result};
use crate::tensor::{Activation, ParamId, ParamStore, Tape, Var};

/// Hyperparameters of the fusion mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfmConfig {
    /// Gate decay λ in `(0, 1)`; order `k` gates are bounded by `1 − λ^k`.
    pub lambda: f64,
    /// Highest adjacency order `K ≥ 2`.
    pub order: usize,
    pub activation: Activation,
}

impl DfmConfig {
    pub fn new(lambda: f64, order: usize, activation: Activation) -> Result<Self> {
        let cfg = Self {
            lambda,
            order,
            activation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::config(format!(
                "lambda {} not in (0, 1)",
                self.lambda
            )));
        }
        if self.order < 2 {
            return Err(Error::config(format!(
                "order K = {} must be >= 2",
                self.order
            )));
        }
        Ok(())
    }

    /// Upper bound `1 − λ^k` on order-`k` gate entries.
    pub fn gate_bound(&self, k: usize) -> f64 {
        1.0 - self.lambda.powi(k as i32)
    }
}

impl Default for DfmConfig {
    /// λ = 0.7, K = 2, relu.
    fn default() -> Self {
        Self {
            lambda: 0.7,
            order: 2,
            activation: Activation::Relu,
        }
    }
}

/// Which convolution a stack uses in every layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvKind {
    Vanilla(Activation),
    Dfm(DfmConfig),
}

impl ConvKind {
    pub fn activation(&self) -> Activation {
        match self {
            ConvKind::Vanilla(a) => *a,
            ConvKind::Dfm(c) => c.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvKind::Vanilla(_) => Ok(()),
            ConvKind::Dfm(c) => c.validate(),
        }
    }
}

/// Ids of a layer's `W` (`d_in×d_out`) and `b` (`1×d_out`) in a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayerParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl GcnLayerParams {
    /// Glorot-initialized weight and zero bias named `{prefix}.w` / `{prefix}.b`.
    pub fn allocate<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add_glorot(format!("{prefix}.w"), d_in, d_out, rng)?;
        let b = store.add_zeros(format!("{prefix}.b"), 1, d_out)?;
        Ok(Self { w, b })
    }

    pub fn bind(&self, tape: &Tape, store: &ParamStore) -> GcnWeights {
        GcnWeights {
            w: tape.param(store, self.w),
            b: tape.param(store, self.b),
        }
    }

    pub fn dims(&self, store: &ParamStore) -> (usize, usize) {
        let w = store.get(self.w);
        (w.rows(), w.cols())
    }
}

/// A layer's weights bound on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnWeights {
    pub w: Var,
    pub b: Var,
}

fn check_rows(tape: &Tape, h: Var, adj: &SparseAdjacency) -> Result<()> {
    let rows = tape.value(h).rows();
    if rows != adj.n() {
        return Err(Error::shape(format!(
            "features have {rows} rows, adjacency is {n}x{n}",
            n = adj.n()
        )));
    }
    Ok(())
}

/// `A^k·H·W + b`.
fn pre_activation(
    tape: &Tape,
    h: Var,
    adj: &Arc<SparseAdjacency>,
    p: GcnWeights,
    k: usize,
) -> Result<Var> {
    let propagated = tape.kth_order(adj, h, k)?;
    let lin = tape.matmul(propagated, p.w)?;
    tape.add_row(lin, p.b)
}

/// `φ(A·H·W + b)`.
pub fn gcn_layer(
    tape: &Tape,
    h: Var,
    adj: &Arc<SparseAdjacency>,
    p: GcnWeights,
    activation: Activation,
) -> Result<Var> {
    check_rows(tape, h, adj)?;
    let pre = pre_activation(tape, h, adj, p, 1)?;
    Ok(tape.activate(pre, activation))
}

/// Order-`k` gate `(1 − λ^k) ⊙ σ(A^k·H·W + b)`.
pub fn dfm_gate(
    tape: &Tape,
    adj: &Arc<SparseAdjacency>,
    h: Var,
    p: GcnWeights,
    k: usize,
    lambda: f64,
) -> Result<Var> {
    if k < 2 {
        return Err(Error::Usage(format!("gate order {k} must be >= 2")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::config(format!("lambda {lambda} not in (0, 1)")));
    }
    check_rows(tape, h, adj)?;
    let pre = pre_activation(tape, h, adj, p, k)?;
    Ok(gate_from(tape, pre, k, lambda))
}

fn gate_from(tape: &Tape, pre: Var, k: usize, lambda: f64) -> Var {
    let s = tape.sigmoid(pre);
    tape.scale(s, 1.0 - lambda.powi(k as i32))
}

/// One fused layer.
pub fn dfm_layer(
    tape: &Tape,
    h: Var,
    adj: &Arc<SparseAdjacency>,
    p: GcnWeights,
    cfg: &DfmConfig,
) -> Result<Var> {
    cfg.validate()?;
    check_rows(tape, h, adj)?;
    let act = cfg.activation;
    let first = tape.activate(pre_activation(tape, h, adj, p, 1)?, act);
    // (1 − ḡ)⊙v₁ + mean(g_k⊙v_k) rewritten as v₁ + mean(g_k⊙(v_k − v₁)),
    // which is exactly v₁ whenever every order agrees.
    let mut mixed: Option<Var> = None;
    for k in 2..=cfg.order {
        let pre = pre_activation(tape, h, adj, p, k)?;
        let gate = gate_from(tape, pre, k, cfg.lambda);
        let value = tape.activate(pre, act);
        let delta = tape.sub(value, first)?;
        let term = tape.mul(gate, delta)?;
        mixed = Some(match mixed {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let mixed = mixed.expect("order >= 2");
    let mean = tape.scale(mixed, 1.0 / (cfg.order - 1) as f64);
    tape.add(first, mean)
}

/// Applies one layer of the given kind.
pub fn conv_layer(
    tape: &Tape,
    h: Var,
    adj: &Arc<SparseAdjacency>,
    p: GcnWeights,
    kind: &ConvKind,
) -> Result<Var> {
    match kind {
        ConvKind::Vanilla(a) => gcn_layer(tape, h, adj, p, *a),
        ConvKind::Dfm(cfg) => dfm_layer(tape, h, adj, p, cfg),
    }
}

/// Column-wise concatenation `[H₀; H₁; …]` in history order.
pub fn dense_concat(tape: &Tape, history: &[Var]) -> Result<Var> {
    match history {
        [] => Err(Error::Usage("dense_concat of an empty history".into())),
        [only] => Ok(*only),
        _ => tape.concat_cols(history),
    }
}

/// Runs a densely connected stack: layer `l` consumes the concatenation of
/// the input and all earlier outputs. Returns the layer outputs in order.
pub fn dense_stack(
    tape: &Tape,
    h0: Var,
    adj: &Arc<SparseAdjacency>,
    layers: &[GcnWeights],
    kind: &ConvKind,
) -> Result<Vec<Var>> {
    let mut history = vec![h0];
    for (l, p) in layers.iter().enumerate() {
        let input = dense_concat(tape, &history)?;
        let width = tape.value(input).cols();
        let rows = tape.value(p.w).rows();
        if rows != width {
            return Err(Error::shape(format!(
                "layer {} weight has {rows} rows but its dense input is {width} wide",
                l + 1
            )));
        }
        history.push(conv_layer(tape, input, adj, *p, kind)?);
    }
    history.remove(0);
    Ok(history)
}

/// Densely connected stack of fused layers; returns the last layer's output.
pub fn deep_dfm_forward(
    tape: &Tape,
    h0: Var,
    adj: &Arc<SparseAdjacency>,
    layers: &[GcnWeights],
    cfg: &DfmConfig,
) -> Result<Var> {
    if layers.is_empty() {
        return Err(Error::Usage(
            "deep_dfm_forward needs at least one layer".into(),
        ));
    }
    let outputs = dense_stack(tape, h0, adj, layers, &ConvKind::Dfm(*cfg))?;
    Ok(*outputs.last().expect("non-empty"))
}

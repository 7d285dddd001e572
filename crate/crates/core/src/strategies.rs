//! Encoder stacks and their parameter budgets.
//!
//! Three strategies share one block layout (a list of blocks, each a list of
//! sub-blocks):
//!
//! * `dense`: every layer sees the sub-block input plus all earlier outputs
//!   and emits `d/L` columns; the `L` outputs are concatenated back to `d`.
//! * `group`: as `dense`, but layer `l` only sees the first `min(l, M)` of
//!   `M` column groups of the sub-block input, and each layer is split into
//!   `N` independent column groups.
//! * `tied`: one `d×d` weight and bias reused by every layer at constant
//!   width, with the final representation a learned mix over depths.
//!
//! Each `dense`/`group` sub-block ends with a linear `d×d` projection.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::adjacency::SparseAdjacency;
use crate::error::{Error, Result};
use crate::layers::{conv_layer, ConvKind, DfmConfig, GcnLayerParams, GcnWeights};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Dense,
    Group,
    Tied,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dense => "dense",
            Strategy::Group => "group",
            Strategy::Tied => "tied",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Strategy::Dense),
            "group" => Ok(Strategy::Group),
            "tied" => Ok(Strategy::Tied),
            _ => Err(Error::config(format!("unknown strategy `{s}`"))),
        }
    }
}

/// `layers` convolutions; `layer_groups` is the layerwise group count `M`
/// (only read by the group strategy).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubBlock {
    pub layers: usize,
    pub layer_groups: usize,
}

impl SubBlock {
    /// A sub-block with `M = L`.
    pub fn new(layers: usize) -> Self {
        Self {
            layers,
            layer_groups: layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    pub strategy: Strategy,
    /// Hidden width `d`.
    pub width: usize,
    /// Depthwise group count `N` (group strategy only).
    pub depth_groups: usize,
    pub blocks: Vec<Vec<SubBlock>>,
    pub conv: ConvKind,
}

impl StackConfig {
    /// Width 480, four blocks of 6+3 layers, `N = 2`, `M = L`.
    pub fn paper(strategy: Strategy) -> Self {
        Self {
            strategy,
            width: 480,
            depth_groups: 2,
            blocks: vec![vec![SubBlock::new(6), SubBlock::new(3)]; 4],
            conv: ConvKind::Dfm(DfmConfig::default()),
        }
    }

    /// Width 32, two blocks of 4+2 layers, `N = 2`, `M = L`.
    pub fn desk(strategy: Strategy) -> Self {
        Self {
            strategy,
            width: 32,
            depth_groups: 2,
            blocks: vec![vec![SubBlock::new(4), SubBlock::new(2)]; 2],
            conv: ConvKind::Dfm(DfmConfig::default()),
        }
    }

    /// A single sub-block of `layers` layers.
    pub fn single(
        strategy: Strategy,
        width: usize,
        layers: usize,
        depth_groups: usize,
        layer_groups: usize,
    ) -> Self {
        Self {
            strategy,
            width,
            depth_groups,
            blocks: vec![vec![SubBlock {
                layers,
                layer_groups,
            }]],
            conv: ConvKind::Dfm(DfmConfig::default()),
        }
    }

    pub fn sub_blocks(&self) -> impl Iterator<Item = SubBlock> + '_ {
        self.blocks.iter().flatten().copied()
    }

    pub fn total_layers(&self) -> usize {
        self.sub_blocks().map(|s| s.layers).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.conv.validate()?;
        let d = self.width;
        if d == 0 {
            return Err(Error::config("width must be positive"));
        }
        if self.blocks.is_empty() || self.blocks.iter().any(Vec::is_empty) {
            return Err(Error::config("every block needs at least one sub-block"));
        }
        for sub in self.sub_blocks() {
            if sub.layers == 0 {
                return Err(Error::config("sub-block with zero layers"));
            }
        }
        if self.strategy == Strategy::Tied {
            return Ok(());
        }
        for sub in self.sub_blocks() {
            let plan = self.plan(sub);
            let l = sub.layers;
            if !d.is_multiple_of(l) {
                return Err(Error::config(format!(
                    "width {d} not divisible by {l} layers"
                )));
            }
            if plan.groups == 0 || plan.layer_groups == 0 {
                return Err(Error::config("group counts must be at least 1"));
            }
            if plan.layer_groups > l {
                return Err(Error::config(format!(
                    "{} layerwise groups exceed {l} layers",
                    plan.layer_groups
                )));
            }
            if !d.is_multiple_of(plan.layer_groups) {
                return Err(Error::config(format!(
                    "width {d} not divisible by {} layerwise groups",
                    plan.layer_groups
                )));
            }
            for layer in 1..=l {
                let (d_in, d_out) = plan.layer_dims(layer);
                if d_in % plan.groups != 0 || d_out % plan.groups != 0 {
                    return Err(Error::config(format!(
                        "layer {layer} ({d_in}x{d_out}) not divisible into {} depthwise groups",
                        plan.groups
                    )));
                }
            }
        }
        Ok(())
    }

    fn plan(&self, sub: SubBlock) -> SubBlockPlan {
        let (groups, layer_groups) = match self.strategy {
            Strategy::Group => (self.depth_groups, sub.layer_groups),
            _ => (1, 1),
        };
        SubBlockPlan {
            width: self.width,
            layers: sub.layers,
            groups,
            layer_groups,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SubBlockPlan {
    width: usize,
    layers: usize,
    groups: usize,
    layer_groups: usize,
}

impl SubBlockPlan {
    /// Ungrouped `(d_in, d_out)` of 1-based layer `l`.
    fn layer_dims(&self, l: usize) -> (usize, usize) {
        let d = self.width;
        let out = d / self.layers;
        let seen = l.min(self.layer_groups) * (d / self.layer_groups);
        (seen + (l - 1) * out, out)
    }
}

/// Splits `h` into `N` contiguous column groups, convolves each with its own
/// weights, and concatenates the results in group order.
pub fn depthwise_forward(
    tape: &Tape,
    h: Var,
    adj: &Arc<SparseAdjacency>,
    groups: &[GcnWeights],
    kind: &ConvKind,
) -> Result<Var> {
    let n = groups.len();
    if n == 0 {
        return Err(Error::config("depthwise convolution with zero groups"));
    }
    if n == 1 {
        return conv_layer(tape, h, adj, groups[0], kind);
    }
    let d_in = tape.value(h).cols();
    if !d_in.is_multiple_of(n) {
        return Err(Error::config(format!(
            "input width {d_in} not divisible into {n} groups"
        )));
    }
    let step = d_in / n;
    let mut outs = Vec::with_capacity(n);
    for (i, p) in groups.iter().enumerate() {
        let rows = tape.value(p.w).rows();
        if rows != step {
            return Err(Error::config(format!(
                "group {i} weight has {rows} rows, expected {step}"
            )));
        }
        let part = tape.slice_cols(h, i * step, (i + 1) * step)?;
        outs.push(conv_layer(tape, part, adj, *p, kind)?);
    }
    tape.concat_cols(&outs)
}

/// Splits `h` into `m` equal contiguous column groups.
pub fn split_groups(tape: &Tape, h: Var, m: usize) -> Result<Vec<Var>> {
    let d = tape.value(h).cols();
    if m == 0 || !d.is_multiple_of(m) {
        return Err(Error::config(format!(
            "width {d} not divisible into {m} groups"
        )));
    }
    if m == 1 {
        return Ok(vec![h]);
    }
    let step = d / m;
    (0..m)
        .map(|i| tape.slice_cols(h, i * step, (i + 1) * step))
        .collect()
}

/// Input of 1-based layer `l` of an `layers`-deep sub-block: the first
/// `min(l, M)` input groups followed by every earlier layer output.
pub fn layerwise_input(
    tape: &Tape,
    l: usize,
    layers: usize,
    input_groups: &[Var],
    prior_outputs: &[Var],
) -> Result<Var> {
    if l == 0 || l > layers {
        return Err(Error::Usage(format!("layer {l} outside 1..={layers}")));
    }
    if input_groups.is_empty() || input_groups.len() > layers {
        return Err(Error::Usage(format!(
            "{} input groups for {layers} layers",
            input_groups.len()
        )));
    }
    if prior_outputs.len() != l - 1 {
        return Err(Error::Usage(format!(
            "layer {l} needs {} prior outputs, got {}",
            l - 1,
            prior_outputs.len()
        )));
    }
    let seen = l.min(input_groups.len());
    let parts: Vec<Var> = input_groups[..seen]
        .iter()
        .chain(prior_outputs)
        .copied()
        .collect();
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    tape.concat_cols(&parts)
}

/// Linear map of the column-wise concatenation of `outputs`, deepest first.
pub fn jumping_connection(tape: &Tape, outputs: &[Var], map: Var) -> Result<Var> {
    if outputs.is_empty() {
        return Err(Error::Usage("jumping connection over zero outputs".into()));
    }
    let shape = tape.value(outputs[0]).shape().to_vec();
    if outputs
        .iter()
        .any(|&o| tape.value(o).shape() != shape.as_slice())
    {
        return Err(Error::shape("jumping connection outputs differ in shape"));
    }
    let rev: Vec<Var> = outputs.iter().rev().copied().collect();
    let cat = if rev.len() == 1 {
        rev[0]
    } else {
        tape.concat_cols(&rev)?
    };
    tape.matmul(cat, map)
}

/// `Σ_l α_l·H_l` for a `1×L` row `alpha`. Equals [`jumping_connection`]
/// with the block-scalar map from [`depth_mix_map`].
pub fn depth_mix(tape: &Tape, outputs: &[Var], alpha: Var) -> Result<Var> {
    let l = outputs.len();
    if l == 0 {
        return Err(Error::Usage("depth mix over zero outputs".into()));
    }
    if tape.value(alpha).shape() != [1, l] {
        return Err(Error::shape(format!(
            "mix weights are {:?}, expected [1, {l}]",
            tape.value(alpha).shape()
        )));
    }
    let mut acc: Option<Var> = None;
    for (i, &h) in outputs.iter().enumerate() {
        let a = tape.slice_cols(alpha, i, i + 1)?;
        let term = tape.scale_by(h, a)?;
        acc = Some(match acc {
            None => term,
            Some(s) => tape.add(s, term)?,
        });
    }
    Ok(acc.expect("non-empty"))
}

/// The `(L·d)×d` map with block `j` (deepest first) equal to `α_{L−j}·I`.
pub fn depth_mix_map(alpha: &[f64], d: usize) -> Tensor {
    let l = alpha.len();
    let mut map = Tensor::zeros(l * d, d);
    for (j, &a) in alpha.iter().rev().enumerate() {
        for i in 0..d {
            map.set(j * d + i, i, a);
        }
    }
    map
}

/// Applies the shared layer `layers` times at constant width, then mixes
/// every depth's output with `alpha`.
pub fn tied_stack_forward(
    tape: &Tape,
    h0: Var,
    adj: &Arc<SparseAdjacency>,
    shared: GcnWeights,
    alpha: Var,
    layers: usize,
    kind: &ConvKind,
) -> Result<Var> {
    if layers == 0 {
        return Err(Error::Usage("tied stack with zero layers".into()));
    }
    let d = tape.value(h0).cols();
    let w = tape.value(shared.w).shape().to_vec();
    if w != [d, d] {
        return Err(Error::shape(format!(
            "shared weight is {w:?}, expected [{d}, {d}]"
        )));
    }
    let mut h = h0;
    let mut outputs = Vec::with_capacity(layers);
    for _ in 0..layers {
        h = conv_layer(tape, h, adj, shared, kind)?;
        outputs.push(h);
    }
    depth_mix(tape, &outputs, alpha)
}

/// One sub-block of the combined scheme: layer `l` reads
/// [`layerwise_input`] over `layer_groups` input groups, runs
/// [`depthwise_forward`] with that layer's groups, and the layer outputs are
/// concatenated in order.
pub fn group_stack_forward(
    tape: &Tape,
    h0: Var,
    adj: &Arc<SparseAdjacency>,
    layer_groups: usize,
    layers: &[Vec<GcnWeights>],
    kind: &ConvKind,
) -> Result<Var> {
    if layers.is_empty() {
        return Err(Error::Usage("group stack with zero layers".into()));
    }
    let groups = split_groups(tape, h0, layer_groups)?;
    let mut outputs = Vec::with_capacity(layers.len());
    for (i, weights) in layers.iter().enumerate() {
        let input = layerwise_input(tape, i + 1, layers.len(), &groups, &outputs)?;
        outputs.push(depthwise_forward(tape, input, adj, weights, kind)?);
    }
    if outputs.len() == 1 {
        return Ok(outputs[0]);
    }
    tape.concat_cols(&outputs)
}

#[derive(Debug, Clone)]
struct SubBlockParams {
    plan: SubBlockPlan,
    /// Per layer, per depthwise group.
    layers: Vec<Vec<GcnLayerParams>>,
    projection: GcnLayerParams,
}

#[derive(Debug, Clone)]
enum Layout {
    Stacked(Vec<SubBlockParams>),
    Tied {
        shared: GcnLayerParams,
        mix: ParamId,
        layers: usize,
    },
}

/// Encoder parameters allocated under the `encoder.` prefix.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: StackConfig,
    layout: Layout,
}

pub const ENCODER_PREFIX: &str = "encoder.";

impl Encoder {
    pub fn new<R: Rng>(config: StackConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let layout = match config.strategy {
            Strategy::Tied => {
                let layers = config.total_layers();
                let shared = GcnLayerParams::allocate(store, "encoder.tied", d, d, rng)?;
                let mix = store.add(
                    "encoder.tied.mix",
                    Tensor::filled(1, layers, 1.0 / layers as f64),
                )?;
                Layout::Tied {
                    shared,
                    mix,
                    layers,
                }
            }
            _ => {
                let mut subs = Vec::new();
                for (bi, block) in config.blocks.iter().enumerate() {
                    for (si, &sub) in block.iter().enumerate() {
                        let plan = config.plan(sub);
                        let prefix = format!("encoder.b{}.s{}", bi + 1, si + 1);
                        let mut layers = Vec::with_capacity(plan.layers);
                        for l in 1..=plan.layers {
                            let (d_in, d_out) = plan.layer_dims(l);
                            let n = plan.groups;
                            let mut groups = Vec::with_capacity(n);
                            for g in 0..n {
                                let name = if n == 1 {
                                    format!("{prefix}.l{l}")
                                } else {
                                    format!("{prefix}.l{l}.g{}", g + 1)
                                };
                                groups.push(GcnLayerParams::allocate(
                                    store,
                                    &name,
                                    d_in / n,
                                    d_out / n,
                                    rng,
                                )?);
                            }
                            layers.push(groups);
                        }
                        let projection =
                            GcnLayerParams::allocate(store, &format!("{prefix}.proj"), d, d, rng)?;
                        subs.push(SubBlockParams {
                            plan,
                            layers,
                            projection,
                        });
                    }
                }
                Layout::Stacked(subs)
            }
        };
        Ok(Self { config, layout })
    }

    pub fn config(&self) -> &StackConfig {
        &self.config
    }

    pub fn forward(
        &self,
        tape: &Tape,
        store: &ParamStore,
        h0: Var,
        adj: &Arc<SparseAdjacency>,
    ) -> Result<Var> {
        let d = tape.value(h0).cols();
        if d != self.config.width {
            return Err(Error::shape(format!(
                "encoder input is {d} wide, expected {}",
                self.config.width
            )));
        }
        let kind = &self.config.conv;
        match &self.layout {
            Layout::Tied {
                shared,
                mix,
                layers,
            } => {
                let alpha = tape.param(store, *mix);
                tied_stack_forward(
                    tape,
                    h0,
                    adj,
                    shared.bind(tape, store),
                    alpha,
                    *layers,
                    kind,
                )
            }
            Layout::Stacked(subs) => {
                let mut h = h0;
                for sub in subs {
                    let layers: Vec<Vec<GcnWeights>> = sub
                        .layers
                        .iter()
                        .map(|layer| layer.iter().map(|p| p.bind(tape, store)).collect())
                        .collect();
                    let cat =
                        group_stack_forward(tape, h, adj, sub.plan.layer_groups, &layers, kind)?;
                    let proj = sub.projection.bind(tape, store);
                    let lin = tape.matmul(cat, proj.w)?;
                    h = tape.add_row(lin, proj.b)?;
                }
                Ok(h)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Conv,
    Projection,
    Shared,
    Mix,
}

/// One parameter group: `groups` weight matrices of `rows×cols` and `bias`
/// bias scalars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub layer: String,
    pub kind: RowKind,
    pub rows: usize,
    pub cols: usize,
    pub groups: usize,
    pub bias: usize,
}

impl ReportRow {
    pub fn weights(&self) -> usize {
        self.groups * self.rows * self.cols
    }

    pub fn count(&self) -> usize {
        self.weights() + self.bias
    }

    pub fn shape(&self) -> String {
        if self.groups == 1 {
            format!("{}x{}", self.rows, self.cols)
        } else {
            format!("{}x{}x{}", self.groups, self.rows, self.cols)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamReport {
    pub strategy: Strategy,
    pub rows: Vec<ReportRow>,
}

impl ParamReport {
    pub fn total(&self) -> usize {
        self.rows.iter().map(ReportRow::count).sum()
    }

    /// Weight scalars of convolution rows only.
    pub fn conv_weights(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.kind == RowKind::Conv)
            .map(ReportRow::weights)
            .sum()
    }

    /// Aligned table with a running total column.
    pub fn render(&self) -> String {
        let mut lines = vec![[
            "strategy".to_string(),
            "layer".to_string(),
            "shape".to_string(),
            "count".to_string(),
            "total".to_string(),
        ]];
        let mut running = 0;
        for r in &self.rows {
            running += r.count();
            lines.push([
                self.strategy.to_string(),
                r.layer.clone(),
                r.shape(),
                r.count().to_string(),
                running.to_string(),
            ]);
        }
        let mut widths = [0; 5];
        for l in &lines {
            for (w, c) in widths.iter_mut().zip(l) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i >= 3 {
                        format!("{c:>w$}")
                    } else {
                        format!("{c:<w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out.push_str(&format!("total {}\n", self.total()));
        out
    }

    /// Tab-separated `strategy layer shape count total` rows, no header.
    pub fn tsv(&self) -> String {
        let mut out = String::new();
        let mut running = 0;
        for r in &self.rows {
            running += r.count();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                self.strategy,
                r.layer,
                r.shape(),
                r.count(),
                running
            ));
        }
        out
    }
}

/// Exact encoder parameter shapes for `cfg`, computed from the layout
/// formulas independently of allocation.
pub fn count_parameters(cfg: &StackConfig) -> Result<ParamReport> {
    cfg.validate()?;
    let d = cfg.width;
    let mut rows = Vec::new();
    if cfg.strategy == Strategy::Tied {
        rows.push(ReportRow {
            layer: "shared".into(),
            kind: RowKind::Shared,
            rows: d,
            cols: d,
            groups: 1,
            bias: d,
        });
        rows.push(ReportRow {
            layer: "mix".into(),
            kind: RowKind::Mix,
            rows: 1,
            cols: cfg.total_layers(),
            groups: 1,
            bias: 0,
        });
    } else {
        for (bi, block) in cfg.blocks.iter().enumerate() {
            for (si, &sub) in block.iter().enumerate() {
                let plan = cfg.plan(sub);
                let tag = format!("b{}.s{}", bi + 1, si + 1);
                for l in 1..=plan.layers {
                    let (d_in, d_out) = plan.layer_dims(l);
                    rows.push(ReportRow {
                        layer: format!("{tag}.l{l}"),
                        kind: RowKind::Conv,
                        rows: d_in / plan.groups,
                        cols: d_out / plan.groups,
                        groups: plan.groups,
                        bias: d_out,
                    });
                }
                rows.push(ReportRow {
                    layer: format!("{tag}.proj"),
                    kind: RowKind::Projection,
                    rows: d,
                    cols: d,
                    groups: 1,
                    bias: d,
                });
            }
        }
    }
    Ok(ParamReport {
        strategy: cfg.strategy,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_first_layer_shape() {
        let cfg = StackConfig::single(Strategy::Dense, 360, 6, 1, 1);
        let r = count_parameters(&cfg).unwrap();
        assert_eq!((r.rows[0].rows, r.rows[0].cols), (360, 60));
        assert_eq!((r.rows[5].rows, r.rows[5].cols), (660, 60));
    }

    #[test]
    fn group_first_layer_shape() {
        let cfg = StackConfig::single(Strategy::Group, 360, 6, 3, 6);
        let r = count_parameters(&cfg).unwrap();
        assert_eq!(
            (r.rows[0].groups, r.rows[0].rows, r.rows[0].cols),
            (3, 20, 20)
        );
        // layer l input is 60(2l-1)
        assert_eq!(r.rows[2].rows * 3, 300);
    }

    #[test]
    fn depthwise_reduction_at_480() {
        let cfg = StackConfig {
            blocks: vec![vec![SubBlock {
                layers: 1,
                layer_groups: 1,
            }]],
            ..StackConfig::single(Strategy::Group, 480, 1, 2, 1)
        };
        let r = count_parameters(&cfg).unwrap();
        assert_eq!(r.rows[0].weights(), 115_200);
    }

    #[test]
    fn tied_independent_of_depth() {
        for layers in [1, 6, 36] {
            let cfg = StackConfig::single(Strategy::Tied, 32, layers, 1, 1);
            let r = count_parameters(&cfg).unwrap();
            assert_eq!(r.rows[0].count(), 32 * 32 + 32);
            assert_eq!(r.total(), 32 * 32 + 32 + layers);
        }
    }

    #[test]
    fn presets_validate_and_are_monotone() {
        for preset in [StackConfig::desk, StackConfig::paper] {
            let t = count_parameters(&preset(Strategy::Tied)).unwrap().total();
            let g = count_parameters(&preset(Strategy::Group)).unwrap().total();
            let d = count_parameters(&preset(Strategy::Dense)).unwrap().total();
            assert!(t < g && g < d, "{t} {g} {d}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(StackConfig::single(Strategy::Dense, 32, 3, 1, 1)
            .validate()
            .is_err());
        assert!(StackConfig::single(Strategy::Group, 32, 4, 3, 4)
            .validate()
            .is_err());
        assert!(StackConfig::single(Strategy::Group, 32, 2, 1, 4)
            .validate()
            .is_err());
        let mut c = StackConfig::desk(Strategy::Tied);
        c.blocks.push(vec![]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn allocation_matches_report() {
        for strategy in [Strategy::Dense, Strategy::Group, Strategy::Tied] {
            let cfg = StackConfig::desk(strategy);
            let mut store = ParamStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            Encoder::new(cfg.clone(), &mut store, &mut rng).unwrap();
            assert_eq!(
                store.num_scalars_with_prefix(ENCODER_PREFIX),
                count_parameters(&cfg).unwrap().total(),
                "{strategy}"
            );
        }
    }

    #[test]
    fn layerwise_input_contract() {
        let tape = Tape::new();
        let groups: Vec<Var> = (0..3)
            .map(|i| tape.leaf(Tensor::filled(2, 2, i as f64)))
            .collect();
        let first = layerwise_input(&tape, 1, 3, &groups, &[]).unwrap();
        assert_eq!(first, groups[0]);
        let o1 = tape.leaf(Tensor::filled(2, 2, 9.0));
        let second = layerwise_input(&tape, 2, 3, &groups, &[o1]).unwrap();
        assert_eq!(tape.value(second).row(0), &[0.0, 0.0, 1.0, 1.0, 9.0, 9.0]);
        assert!(matches!(
            layerwise_input(&tape, 0, 3, &groups, &[]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            layerwise_input(&tape, 4, 3, &groups, &[]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn depth_mix_map_layout() {
        let m = depth_mix_map(&[0.1, 0.2], 2);
        // deepest output (0.2) occupies the first block
        assert_eq!(m.row(0), &[0.2, 0.0]);
        assert_eq!(m.row(3), &[0.0, 0.1]);
    }

    #[test]
    fn report_render_lists_rows() {
        let r = count_parameters(&StackConfig::single(Strategy::Group, 360, 6, 3, 6)).unwrap();
        let text = r.render();
        assert!(text.contains("3x20x20"));
        assert_eq!(r.tsv().lines().count(), 7);
        assert!(text.ends_with(&format!("total {}\n", r.total())));
    }
}

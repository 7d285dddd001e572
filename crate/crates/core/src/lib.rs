//! Graph convolutional encoders for AMR-to-text generation: PENMAN ingest,
//! sparse adjacency propagation, a small reverse-mode tape, dynamic fusion
//! layers, parameter-saving stack strategies and a toy graph-to-sequence
//! model.

pub mod adjacency;
pub mod error;
pub mod harness;
pub mod layers;
pub mod penman;
pub mod seq2seq;
pub mod strategies;
pub mod tensor;

pub use adjacency::{
    kth_order_apply, kth_order_apply_counted, AdjacencyFlags, MulAddCounter, SparseAdjacency,
};
pub use error::{Error, ParseError, Result};
pub use layers::{
    conv_layer, deep_dfm_forward, dense_concat, dense_stack, dfm_gate, dfm_layer, gcn_layer,
    ConvKind, DfmConfig, GcnLayerParams, GcnWeights,
};
pub use penman::{parse_penman, serialize_penman, AmrGraph, Edge, Node};
pub use strategies::{
    count_parameters, depth_mix, depthwise_forward, group_stack_forward, jumping_connection,
    layerwise_input, tied_stack_forward, Encoder, ParamReport, StackConfig, Strategy, SubBlock,
};
pub use tensor::{Activation, ParamId, ParamStore, Tape, Tensor, Var};

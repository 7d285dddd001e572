//! Run configuration, datasets, training, evaluation and benchmarks behind
//! the command-line front end.

mod bench;
mod config;
mod data;
mod eval;
mod model;
mod train;

pub use bench::{bench_scaling, random_adjacency, BenchReport, BenchRow};
pub use config::{parse_blocks, RunConfig};
pub use data::{
    format_dataset, gen_synthetic, parse_dataset, read_dataset, strip_sense, synthetic_example,
    Example, CONCEPTS,
};
pub use eval::{evaluate, EvalReport};
pub use model::{ForcedLoss, Model, Prepared};
pub use train::{format_log, parse_log, train, train_with, EpochMetrics, TrainOutcome};

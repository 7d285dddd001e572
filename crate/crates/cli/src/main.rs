use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ldgcn::harness::{self, Model, RunConfig};
use ldgcn::{count_parameters, serialize_penman};

#[derive(Parser)]
#[command(
    name = "ldgcn",
    version,
    about = "Graph convolutional AMR encoders at desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset or PENMAN file and print each graph.
    Parse { file: PathBuf },
    /// Write a synthetic graph-linearization dataset.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
    },
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Decode a dataset with a checkpoint and report accuracy and BLEU.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the `beam` the checkpoint was trained with.
        #[arg(long)]
        beam: Option<usize>,
        /// Also print each hypothesis.
        #[arg(long)]
        show: bool,
    },
    /// Count multiply-adds and time one fused layer across graph sizes.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long = "K", default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the encoder parameter report for a config file.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse(file: &Path) -> Result<()> {
    let examples = harness::read_dataset(file)?;
    let mut out = std::io::stdout().lock();
    for (i, ex) in examples.iter().enumerate() {
        let g = &ex.graph;
        writeln!(
            out,
            "#{}\tnodes={}\tedges={}\treentrancies={}",
            i + 1,
            g.len(),
            g.edges().len(),
            g.reentrancies().join(",")
        )?;
        writeln!(out, "{}", serialize_penman(g))?;
    }
    Ok(())
}

fn gen(seed: u64, count: usize, out: &Path, max_nodes: usize) -> Result<()> {
    let text = harness::gen_synthetic(seed, count, max_nodes)?;
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn train(config: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let Some(data) = &cfg.data else {
        bail!("config has no `data` path")
    };
    let Some(ckpt) = &cfg.checkpoint else {
        bail!("config has no `checkpoint` path")
    };
    let examples = harness::read_dataset(data)?;
    let log_path = cfg.log.clone().unwrap_or_else(|| {
        let mut s = ckpt.as_os_str().to_owned();
        s.push(".log");
        PathBuf::from(s)
    });
    let mut log =
        fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut write_err = None;
    let outcome = harness::train_with(&cfg, &examples, |m| {
        let line = m.log_line();
        println!("{line}");
        if let Err(e) = writeln!(log, "{line}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    outcome.model.save(ckpt)?;
    eprintln!("checkpoint written to {}", ckpt.display());
    Ok(())
}

fn eval(ckpt: &Path, data: &Path, beam: Option<usize>, show: bool) -> Result<()> {
    let model = Model::load(ckpt)?;
    let examples = harness::read_dataset(data)?;
    let beam = beam.unwrap_or(model.config.beam);
    let report = harness::evaluate(&model, &examples, beam)?;
    if show {
        for h in &report.hypotheses {
            println!("{}", h.join(" "));
        }
    }
    println!("token_accuracy\t{}", report.token_accuracy);
    println!("bleu\t{}", report.bleu);
    Ok(())
}

fn bench(sizes: &[usize], order: usize, d: usize, repeats: usize, seed: u64) -> Result<()> {
    let report = harness::bench_scaling(sizes, order, d, repeats, seed)?;
    print!("{}", report.render());
    Ok(())
}

fn params(config: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let report = count_parameters(&cfg.stack_config()?)?;
    print!("{}", report.render());
    println!();
    print!("{}", report.tsv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { file } => parse(&file),
        Command::Gen {
            seed,
            count,
            out,
            max_nodes,
        } => gen(seed, count, &out, max_nodes),
        Command::Train { config } => train(&config),
        Command::Eval {
            ckpt,
            data,
            beam,
            show,
        } => eval(&ckpt, &data, beam, show),
        Command::Bench {
            sizes,
            order,
            d,
            repeats,
            seed,
        } => bench(&sizes, order, d, repeats, seed),
        Command::Params { config } => params(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

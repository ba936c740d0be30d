//! `rfxp`: predict with, explain, encode and benchmark random forest models.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use rfxp::abstraction::Abstraction;
use rfxp::encoder::card::CardEncoding;
use rfxp::encoder::{encode, EncoderOptions};
use rfxp::explain::report::{aggregate_json, explain_instance, render_rows, render_table, to_jsonl, Mode, Report, RunOptions};
use rfxp::explain::{parse_order, ExplainOptions};
use rfxp::model::{Forest, Instance};
use rfxp::model_io::{emit_model, load_dataset, load_model};
use rfxp::oracle::Adapter;
use rfxp::verify::dnf::{reduce_dnf_to_rf, Dnf};
use rfxp::verify::DEFAULT_CELL_BUDGET;

#[derive(Parser)]
#[command(name = "rfxp", version, about = "SAT-based explanations for random forest predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the predicted class and vote count for each instance.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Explain each instance's prediction.
    Explain(RunArgs),
    /// Write the CNF for one instance in DIMACS with a variable map.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Zero-based row of the data file.
        #[arg(long, default_value_t = 0)]
        row: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// Aggregate statistics over a dataset, one table row.
    Bench(RunArgs),
    /// Turn a DNF (one term per line) into an equivalent forest model.
    Reduce {
        #[arg(long)]
        dnf: PathBuf,
        /// Number of variables; defaults to the largest one mentioned.
        #[arg(long)]
        vars: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Axp,
    Cxp,
    Enumerate,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdapterArg {
    Embedded,
    Subprocess,
}

#[derive(Clone, Copy, ValueEnum)]
enum CardArg {
    Network,
    Sequential,
}

#[derive(Args)]
struct EncoderArgs {
    /// Encode every threshold test on its own instead of sharing prefixes.
    #[arg(long)]
    no_chaining: bool,
    /// One comparator per rival class instead of the selector scheme.
    #[arg(long)]
    naive_comparators: bool,
    #[arg(long, value_enum)]
    card: Option<CardArg>,
}

impl EncoderArgs {
    fn options(&self) -> EncoderOptions {
        let mut opts = EncoderOptions { chaining: !self.no_chaining, selector_reduction: !self.naive_comparators, ..Default::default() };
        match self.card {
            Some(CardArg::Network) => opts.card = CardEncoding::Network,
            Some(CardArg::Sequential) => opts.card = CardEncoding::Sequential,
            None => {}
        }
        opts
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Axp)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = AdapterArg::Embedded)]
    adapter: AdapterArg,
    /// DIMACS solver for the subprocess adapter.
    #[arg(long, default_value = "rfxp-dpll")]
    solver_bin: String,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// Comma-separated feature names or indices, most preferred first.
    #[arg(long)]
    order: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-check each explanation by enumerating cells.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
    cell_budget: u64,
    #[arg(long)]
    json: bool,
    /// Worker threads across instances.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Maximum explanations per instance in enumerate mode.
    #[arg(long)]
    limit: Option<usize>,
}

impl RunArgs {
    fn run_options(&self, forest: &Forest) -> Result<RunOptions> {
        if self.limit.is_some() && !matches!(self.mode, ModeArg::Enumerate) {
            bail!("--limit only applies to --mode enumerate");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        let order = match &self.order {
            Some(text) => parse_order(forest, text)?,
            None => Vec::new(),
        };
        let adapter = match self.adapter {
            AdapterArg::Embedded => Adapter::Embedded { seed: self.seed },
            AdapterArg::Subprocess => Adapter::Subprocess { binary: self.solver_bin.clone() },
        };
        Ok(RunOptions {
            mode: match self.mode {
                ModeArg::Axp => Mode::Axp,
                ModeArg::Cxp => Mode::Cxp,
                ModeArg::Enumerate => Mode::Enumerate,
            },
            explain: ExplainOptions { order, adapter, encoder: self.encoder.options() },
            limit: self.limit,
            verify: self.verify,
            cell_budget: self.cell_budget,
        })
    }
}

fn run_dataset(args: &RunArgs) -> Result<(Forest, Report)> {
    let forest = load_model(&args.model)?;
    let opts = args.run_options(&forest)?;
    let instances = load_dataset(&args.data, &forest)?.instances;
    let explain = |(i, v): (usize, &Instance)| explain_instance(&forest, i, v, &opts);
    let rows = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
        pool.install(|| instances.par_iter().enumerate().map(explain).collect())
    } else {
        instances.iter().enumerate().map(explain).collect()
    };
    Ok((forest, Report::new(opts.mode, rows)))
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Predict { model, data, json } => {
            let forest = load_model(&model)?;
            for (i, v) in load_dataset(&data, &forest)?.instances.iter().enumerate() {
                let counts = forest.vote_counts(v);
                let class = &forest.classes()[forest.predict(v)];
                let votes = counts[forest.predict(v)];
                if json {
                    let by_class: serde_json::Map<_, _> =
                        forest.classes().iter().zip(&counts).map(|(c, n)| (c.clone(), json!(n))).collect();
                    writeln!(stdout, "{}", json!({ "index": i, "prediction": class, "votes": by_class }))?;
                } else {
                    writeln!(stdout, "{class} ({votes}/{})", forest.num_trees())?;
                }
            }
            Ok(true)
        }
        Command::Explain(args) => {
            let (forest, report) = run_dataset(&args)?;
            if args.json {
                write!(stdout, "{}", to_jsonl(&forest, &report))?;
            } else {
                write!(stdout, "{}", render_rows(&forest, &report))?;
                write!(stdout, "{}", render_table(&report.aggregate))?;
            }
            Ok(report.all_succeeded())
        }
        Command::Bench(args) => {
            let (_, report) = run_dataset(&args)?;
            if args.json {
                writeln!(stdout, "{}", aggregate_json(&report.aggregate))?;
            } else {
                write!(stdout, "{}", render_table(&report.aggregate))?;
            }
            Ok(report.all_succeeded())
        }
        Command::Encode { model, data, row, out, encoder } => {
            let forest = load_model(&model)?;
            let instances = load_dataset(&data, &forest)?.instances;
            let Some(v) = instances.get(row) else {
                bail!("row {row} out of range: {} has {} rows", data.display(), instances.len());
            };
            let abs = Abstraction::build(&forest);
            let enc = encode(&forest, &abs, v, &encoder.options());
            let mut text = Vec::new();
            enc.export_dimacs(&mut text, &forest)?;
            let counts = format!("#var {} #cl {}", enc.num_vars(), enc.num_clauses());
            match &out {
                Some(path) => {
                    fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
                    writeln!(stdout, "{counts}")?;
                }
                None => {
                    stdout.write_all(&text)?;
                    eprintln!("{counts}");
                }
            }
            Ok(true)
        }
        Command::Reduce { dnf, vars, out } => {
            let text = fs::read_to_string(&dnf).with_context(|| format!("reading {}", dnf.display()))?;
            let formula = Dnf::parse(&text, vars).with_context(|| format!("parsing {}", dnf.display()))?;
            drop(stdout);
            write_output(out.as_ref(), &emit_model(&reduce_dnf_to_rf(&formula)))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rfxp: {e:#}");
            ExitCode::from(2)
        }
    }
}

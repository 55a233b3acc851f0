//! `evprice`: train, evaluate, compare and serve used-vehicle price models.
//!
//! Exit status is 0 on success, 1 on a usage error (bad or missing flags)
//! and 2 when the data, model or pipeline could not be processed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "evprice", version, about = "Used-vehicle price prediction engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a CSV file and print its inferred schema.
    Import {
        #[arg(long)]
        data: PathBuf,
        /// Write the parsed dataset back out as normalized CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Price count, mean, median, mode and per-model means.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate calibrated synthetic listings.
    Synth {
        #[arg(long, default_value_t = 1600)]
        rows: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on a split of the data and report held-out errors.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long, value_enum, default_value_t = Algo::Boosted)]
        algo: Algo,
        /// Fraction of rows used for training; the rest is held out.
        #[arg(long, default_value_t = 0.75)]
        split: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Use the Date column (months since 2019-01) as a feature.
        #[arg(long)]
        include_date: bool,
        /// Where to write the trained model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a labelled CSV with a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the scored rows (with Scored Labels and Error columns).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several algorithms on one split and rank them by RMSE.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "boosted,forest,tree,knn")]
        algos: Vec<Algo>,
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long, default_value_t = 0.75)]
        split: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Score one vehicle given as flags, or a request document.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Request JSON (`-` for stdin) shaped like the HTTP scoring body.
        #[arg(long, conflicts_with_all = ["vehicle", "year", "battery", "miles", "price", "date"])]
        request: Option<PathBuf>,
        /// Value of the Model field, e.g. "Model X".
        #[arg(long, required_unless_present = "request")]
        vehicle: Option<String>,
        #[arg(long, required_unless_present = "request")]
        year: Option<String>,
        #[arg(long, required_unless_present = "request")]
        battery: Option<String>,
        #[arg(long, required_unless_present = "request")]
        miles: Option<String>,
        #[arg(long)]
        price: Option<String>,
        /// Listing date, YYYY-MM-DD.
        #[arg(long)]
        date: Option<String>,
    },
    /// Run the HTTP scoring service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
        /// File holding the bearer token; falls back to $EVPRICE_TOKEN.
        #[arg(long)]
        token_file: Option<PathBuf>,
    },
    /// Execute a pipeline graph.
    PipelineRun {
        /// Bundled graph name (paper_experiment, web_passthrough) or a JSON file.
        #[arg(long)]
        graph: String,
        /// Named input dataset, NAME=PATH.csv (repeatable).
        #[arg(long = "input", value_parser = parse_input)]
        inputs: Vec<(String, PathBuf)>,
        /// Also supply synthetic rows split into inputs named by month (jan, feb, mar).
        #[arg(long)]
        synth: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Node (or node.port) whose scored dataset is written to --out.
        #[arg(long, requires = "out")]
        export: Option<String>,
        #[arg(long, requires = "export")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct LearnerArgs {
    /// Boosting stages, or trees in a forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Boosting learning rate.
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    max_leaves: usize,
    #[arg(long, default_value_t = 10)]
    min_leaf: usize,
    /// Neighbours for knn.
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Algo {
    Boosted,
    Tree,
    Forest,
    Knn,
    Mean,
}

fn parse_input(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

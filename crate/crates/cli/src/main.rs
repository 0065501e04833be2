use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use causumx_core::synthgen::{bucket_attr, synthetic_grouping_attrs, treatment_attr, write_synthetic};
use causumx_core::{render_json, render_text, run_pipeline, Algorithm, Error, RunConfig, Settings};

/// Causal explanation summaries for group-by-average queries.
#[derive(Parser, Debug)]
#[command(name = "causumx", version, subcommand_negates_reqs = true, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset and its causal DAG.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// CSV file with a header row.
    #[arg(long, env = "CAUSUMX_DATA", required = true)]
    data: Option<PathBuf>,
    /// Causal DAG in DOT syntax.
    #[arg(long, env = "CAUSUMX_DAG", required = true)]
    dag: Option<PathBuf>,
    /// Group-by attributes, comma separated.
    #[arg(long, env = "CAUSUMX_GROUP_BY", value_delimiter = ',', required = true)]
    group_by: Vec<String>,
    /// Numeric attribute to average.
    #[arg(long, env = "CAUSUMX_AVG", required = true)]
    avg: Option<String>,
    /// Row filter, e.g. "Age >= 30 AND Country = US".
    #[arg(long = "where", env = "CAUSUMX_WHERE")]
    where_clause: Option<String>,
    #[arg(long, env = "CAUSUMX_K", default_value_t = 5)]
    k: usize,
    #[arg(long, env = "CAUSUMX_THETA", default_value_t = 0.75)]
    theta: f64,
    #[arg(long, env = "CAUSUMX_TAU", default_value_t = 0.1)]
    tau: f64,
    #[arg(long, env = "CAUSUMX_SAMPLE_SIZE", default_value_t = 1_000_000)]
    sample_size: usize,
    #[arg(long, env = "CAUSUMX_ALPHA", default_value_t = 0.05)]
    alpha: f64,
    /// Minimum rows per treatment arm.
    #[arg(long, env = "CAUSUMX_MIN_ARM", default_value_t = 10)]
    min_arm: usize,
    /// Quantile bins for numeric treatment attributes.
    #[arg(long, env = "CAUSUMX_BINS", default_value_t = 5)]
    bins: usize,
    #[arg(long, env = "CAUSUMX_ALGORITHM", value_enum, default_value_t = AlgorithmArg::Causumx)]
    algorithm: AlgorithmArg,
    #[arg(long, env = "CAUSUMX_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "CAUSUMX_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, env = "CAUSUMX_OUTPUT", value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Mine grouping patterns over these attributes only, comma separated.
    #[arg(long, env = "CAUSUMX_GROUPING_ATTRS", value_delimiter = ',')]
    grouping_attrs: Option<Vec<String>>,
    /// Read these columns as categorical even if they look numeric.
    #[arg(long, env = "CAUSUMX_CATEGORICAL", value_delimiter = ',')]
    categorical: Vec<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, env = "CAUSUMX_SYNTH_N")]
    n: usize,
    /// Number of grouping attributes.
    #[arg(long = "i", env = "CAUSUMX_SYNTH_I")]
    i: usize,
    /// Number of treatment attributes.
    #[arg(long = "j", env = "CAUSUMX_SYNTH_J")]
    j: usize,
    #[arg(long, env = "CAUSUMX_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "CAUSUMX_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Causumx,
    #[value(alias = "brute-force")]
    Bruteforce,
    Greedy,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Causumx => Algorithm::Causumx,
            AlgorithmArg::Bruteforce => Algorithm::Bruteforce,
            AlgorithmArg::Greedy => Algorithm::Greedy,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Output {
    Text,
    Json,
}

fn run(args: RunArgs) -> Result<String, Error> {
    let settings = Settings {
        k: args.k,
        theta: args.theta,
        tau: args.tau,
        sample_size: args.sample_size,
        alpha: args.alpha,
        min_arm: args.min_arm,
        bins: args.bins,
        algorithm: args.algorithm.into(),
        seed: args.seed,
        threads: args.threads,
        grouping_attrs: args.grouping_attrs,
    };
    let cfg = RunConfig {
        // clap enforces these when no subcommand is given
        data: args.data.expect("required"),
        dag: args.dag.expect("required"),
        group_by: args.group_by,
        avg: args.avg.expect("required"),
        where_clause: args.where_clause,
        categorical: args.categorical,
        settings,
    };
    let report = run_pipeline(&cfg)?;
    Ok(match args.output {
        Output::Text => render_text(&report),
        Output::Json => render_json(&report),
    })
}

fn synth(args: SynthArgs) -> Result<String, Error> {
    let (data, dag) = write_synthetic(&args.out_dir, args.n, args.i, args.j, args.seed)?;
    let mut categorical = vec!["G".to_string()];
    categorical.extend((1..=args.i).map(bucket_attr));
    categorical.extend((1..=args.j).map(treatment_attr));
    Ok(format!(
        "wrote {} and {}\nrun with:\n  causumx --data {} --dag {} --group-by G --avg O --grouping-attrs {} --categorical {}\n",
        data.display(),
        dag.display(),
        data.display(),
        dag.display(),
        synthetic_grouping_attrs(args.i).join(","),
        categorical.join(","),
    ))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = match cli.command {
        Some(Command::Synth(a)) => synth(a),
        None => run(cli.run),
    };
    match out {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

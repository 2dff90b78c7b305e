//! `asymcc` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use asymcc::Mode;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "asymcc", version, about = "Correlation clustering with asymmetric errors")]
struct Cli {
    /// Worker threads for trials and grid sweeps (default: all cores).
    #[arg(long, global = true, env = "CC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the LP on an instance file and round it.
    Solve(SolveArgs),
    /// Grid-check the triple inequality for a rounding function.
    Certify(CertifyArgs),
    /// Search for the smallest factor admitting a rounding function.
    Optf(OptfArgs),
    /// Generate instance files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Sweep random instances and report mean rounding ratios as CSV.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    /// Instance file (`cc-instance v1`).
    pub input: PathBuf,
    /// Override the instance's alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the instance's weight scale.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Also run the exhaustive solver (n <= 13).
    #[arg(long)]
    pub exact: bool,
    /// Use all triangle rows instead of lazy separation.
    #[arg(long)]
    pub full_lp: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_parser = parse_mode, default_value = "complete")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// Factor to certify (default: 3 + 2 ln(1/alpha), 5 + 2 ln(1/alpha) on bipartite).
    #[arg(long)]
    pub rho: Option<f64>,
    /// CSV of `x,f` rows (as written by `optf`) to certify instead of the
    /// built-in function.
    #[arg(long)]
    pub f_table: Option<PathBuf>,
    /// Skip the finer pass around near-tight cells.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct OptfArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Grid step h.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// Bisection tolerance on A.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// JSON report path; the table goes next to it with a `.csv` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenCommand {
    /// Planted partition with sign noise.
    Planted(PlantedArgs),
    /// Lower-bound family built on a random 3-regular graph.
    Gap(GapArgs),
    /// Uniform random signs and weights in the alpha band.
    Random(RandomArgs),
    /// Every positive pair weighs w, every negative pair w-minus.
    TwoWeight(TwoWeightArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PlantedArgs {
    /// Probability of `+` inside a planted cluster.
    #[arg(long)]
    pub p: f64,
    /// Probability of `-` across planted clusters.
    #[arg(long)]
    pub q: f64,
    /// Cluster sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Vertex count (default: large enough for the gap to show).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub bipartite: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance path; edge lengths go to `<out>.x.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct RandomArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub alpha: f64,
    /// Probability that a pair is positive.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TwoWeightArgs {
    #[arg(long)]
    pub n: usize,
    /// Weight of positive pairs.
    #[arg(long)]
    pub w: f64,
    /// Weight of negative pairs.
    #[arg(long)]
    pub w_minus: f64,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.2,1")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "8,12")]
    pub sizes: Vec<usize>,
    /// Random instances per (alpha, n) cell.
    #[arg(long, default_value_t = 5)]
    pub instances: u64,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|_| format!("expected `complete` or `bipartite`, got `{s}`"))
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    /// Certification ran but found a violated triangle.
    Certification,
    Input(String),
    Other(String),
}

impl From<asymcc::Error> for Failure {
    fn from(e: asymcc::Error) -> Self {
        use asymcc::Error::*;
        match e {
            InvalidInstance(_) | Dimension { .. } | Parameter(_) | Parse { .. } | TooLarge { .. } | Io(_) | Json(_) => {
                Failure::Input(e.to_string())
            }
            Solver { .. } | Model(_) | Sampling(_) | Recertification { .. } => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Certify(a) => commands::certify(a),
        Command::Optf(a) => commands::optf(a),
        Command::Gen(g) => commands::gen(g),
        Command::Bench(a) => commands::bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Certification) => ExitCode::from(2),
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

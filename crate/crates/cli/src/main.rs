//! Command-line front end: generate sets and measures, build and certify
//! decay-reweighted Frostman measures, classify operator symbols, and
//! evaluate divergence witness fields.
//!
//! Exit codes: 0 when every certificate passes, 1 when a certificate
//! fails (the failing supremum is printed), 2 on usage or input errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Settings;

#[derive(Parser)]
#[command(name = "frostman", version, about = "Measures with prescribed growth and decay: construction, certification, operator classification, divergence witness fields")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Optional key=value config file; flags and FROSTMAN_* environment
    /// variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate cube sets and discretized densities.
    Gen(GenArgs),
    /// Build a Frostman measure on a cube set (greedy tree construction
    /// plus ball-growth normalization).
    Frostman(FrostmanArgs),
    /// Damp a measure's mass annulus by annulus.
    Reweight(ReweightArgs),
    /// Certify growth and decay conditions of a measure.
    Verify(VerifyArgs),
    /// Classify an operator symbol (ellipticity, canceling, adjoint).
    Symbol(SymbolArgs),
    /// Evaluate the divergence witness field of a measure.
    Witness(WitnessArgs),
    /// Run the full pipeline: generate, build, reweight, certify, study.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Four-corner self-similar set in the unit square.
    FourCorner {
        /// Contraction ratio in (0, 1/2).
        #[arg(long)]
        ratio: f64,
        /// Number of generations; the set is snapped outward to the
        /// finest dyadic level whose cubes fit the corner squares.
        #[arg(long)]
        generations: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dyadic fractal percolation in the unit cube.
    Percolation {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 0.7)]
        survival: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discretized power density |x|^-m inside a ball.
    PowerDensity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        radius: f64,
        /// Grid step; cell centers sit at integer multiples.
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every dyadic cube of the unit cube at one level.
    Full {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CandidateKind {
    /// Atom positions (a net of the support itself).
    Atoms,
    /// Uniform grid over the inflated support bounding box.
    Grid,
}

#[derive(Args)]
struct FrostmanArgs {
    /// Cube set file.
    #[arg(long)]
    set: PathBuf,
    /// Growth exponent in (0, n).
    #[arg(long)]
    s: f64,
    /// Skip ball-growth normalization.
    #[arg(long)]
    skip_normalize: bool,
    /// Net spacing for normalization (default: the measure's r_min).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = CandidateKind::Atoms)]
    candidates: CandidateKind,
    #[arg(long)]
    out: PathBuf,
    /// Also write the report block to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReweightArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Annular decay rate (mass in annulus k is damped by 2^(-k*alpha)).
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Operator order for the growth checks; omitting it skips them.
    #[arg(long)]
    m: Option<usize>,
    /// Upper integration boundary fraction a in (0,1) for the Dini
    /// integral window [r_min, a|x|].
    #[arg(long)]
    a: Option<f64>,
    /// Pass threshold for the uniform Dini check (default: the bound
    /// implied by the measured far-field constant).
    #[arg(long)]
    threshold: Option<f64>,
    /// Net spacing (default: the measure's r_min).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    candidates: Option<CandidateKind>,
    /// Number of Dini sample centers.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SymbolArgs {
    /// Built-in operator name: gradient, laplacian, partial1.
    #[arg(long, conflicts_with = "file")]
    name: Option<String>,
    /// Ambient dimension for built-ins.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Operator description file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Deterministic sphere grid resolution.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Seeded random sphere samples.
    #[arg(long, default_value_t = 1024)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank tolerance relative to the largest singular value.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Also verify the adjoint weak identity on monomials up to this
    /// degree.
    #[arg(long)]
    adjoint_check: Option<u32>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Evaluation grid cells per axis.
    #[arg(long, default_value_t = 41)]
    grid: usize,
    /// Evaluation domain lower corner, comma-separated (default: the
    /// support bounding box inflated by 25%).
    #[arg(long)]
    domain_lo: Option<String>,
    /// Evaluation domain upper corner, comma-separated.
    #[arg(long)]
    domain_hi: Option<String>,
    /// Exclusion radius around atoms (default: the measure's r_min).
    #[arg(long)]
    rho: Option<f64>,
    /// Write field samples (CSV) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the weak divergence identity against a bump "cx,cy,...,radius".
    #[arg(long)]
    bump: Option<String>,
    #[arg(long, default_value_t = 256)]
    bump_grid: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Set kind: four-corner or percolation.
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    survival: Option<f64>,
    /// Generation count (four-corner) or dyadic level (percolation).
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Growth exponent; must equal n - m + alpha (the default).
    #[arg(long)]
    s: Option<f64>,
    /// Comma-separated study levels (default: level-1,level,level+1).
    #[arg(long)]
    study_levels: Option<String>,
    #[arg(long)]
    study_grid: Option<usize>,
    #[arg(long)]
    study_rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the generated set, measures and study table here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let settings = match Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => commands::run_gen(args),
        Command::Frostman(args) => commands::run_frostman(args),
        Command::Reweight(args) => commands::run_reweight(args),
        Command::Verify(args) => commands::run_verify(args, &settings),
        Command::Symbol(args) => commands::run_symbol(args),
        Command::Witness(args) => commands::run_witness(args),
        Command::Pipeline(args) => commands::run_pipeline(args, &settings),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

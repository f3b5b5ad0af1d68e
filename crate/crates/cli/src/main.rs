mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use knot_tower::integrals::DEFAULT_WORKERS;
use knot_tower::{Parity, Proposal, Weighting, CALIBRATION};
use output::Format;
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite-type knot invariants from configuration-space integrals, and their
/// factoring through the stages of the Taylor tower.
#[derive(Parser)]
#[command(name = "knot-tower", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagram space dimensions, checked against dense elimination.
    Dims(commands::DimsArgs),
    /// Basis of weight systems, primitive ones first.
    Weights(commands::WeightsArgs),
    /// Monte Carlo integrals I(D, K) for one diagram or a whole degree.
    Integrate(commands::IntegrateArgs),
    /// Calibrated invariant T(W)(K).
    Invariant(commands::InvariantArgs),
    /// Invariant evaluated on a point of a tower stage.
    TowerIntegrate(commands::TowerArgs),
    /// Compares I(D, K) with I(D, h) for the constant family of K.
    FactorCheck(commands::FactorArgs),
    /// Samples the face and neighbourhood conditions of the gamma map.
    GammaCheck(commands::GammaArgs),
    /// Gauss-diagram values v2, v3 and the Jones polynomial.
    Oracle(commands::OracleArgs),
    /// Invariant on a knot and several perturbations of it.
    PerturbSuite(commands::SuiteArgs),
}

#[derive(Args, Clone)]
pub struct KnotArgs {
    /// Standard knot name (`trefoil`, `figure_eight`, `torus(2,5)`, `mirror:trefoil`, `a#b`).
    #[arg(long, default_value = "trefoil")]
    knot: String,
    /// JSON spline description, used instead of `--knot`.
    #[arg(long)]
    knot_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProposalArg {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Automorphism,
    Orientations,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParityArg {
    Odd,
    Even,
    Both,
}

#[derive(Args, Clone)]
pub struct SamplingArgs {
    /// Samples per diagram; accepts forms like `1e6`.
    #[arg(long, default_value = "1e5", value_parser = parse_budget)]
    budget: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, env = "KNOT_TOWER_WORKERS", default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    #[arg(long, value_enum, default_value = "adaptive")]
    proposal: ProposalArg,
}

#[derive(Args, Clone)]
pub struct InvariantChoice {
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Index into the weight basis of the degree (primitive ones come first).
    #[arg(long, default_value_t = 0)]
    weight: usize,
    /// JSON table of anomaly constants keyed by diagram encoding.
    #[arg(long)]
    anomaly: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "automorphism")]
    weighting: WeightingArg,
    #[arg(long, default_value_t = CALIBRATION, allow_hyphen_values = true)]
    calibration: f64,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Output format.
    #[arg(long = "out", value_enum, default_value = "json")]
    format: Format,
    /// Write the output here and print a summary instead.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_budget(s: &str) -> Result<u64, String> {
    let clean = s.replace('_', "");
    if let Ok(n) = clean.parse::<u64>() {
        return if n > 0 { Ok(n) } else { Err("budget must be at least 1".into()) };
    }
    let x: f64 = clean.parse().map_err(|_| format!("`{s}` is not a sample count"))?;
    if !(x >= 1.0 && x.fract() == 0.0 && x <= u64::MAX as f64) {
        return Err(format!("`{s}` is not a positive whole number"));
    }
    Ok(x as u64)
}

impl From<ProposalArg> for Proposal {
    fn from(p: ProposalArg) -> Self {
        match p {
            ProposalArg::Uniform => Proposal::Uniform,
            ProposalArg::Adaptive => Proposal::Adaptive,
        }
    }
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Automorphism => Weighting::Automorphism,
            WeightingArg::Orientations => Weighting::Orientations,
        }
    }
}

impl ParityArg {
    fn parities(self) -> Vec<Parity> {
        match self {
            ParityArg::Odd => vec![Parity::Odd],
            ParityArg::Even => vec![Parity::Even],
            ParityArg::Both => vec![Parity::Odd, Parity::Even],
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dims(a) => commands::dims(a),
        Command::Weights(a) => commands::weights(a),
        Command::Integrate(a) => commands::integrate(a),
        Command::Invariant(a) => commands::invariant(a),
        Command::TowerIntegrate(a) => commands::tower_integrate(a),
        Command::FactorCheck(a) => commands::factor_check(a),
        Command::GammaCheck(a) => commands::gamma_check(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::PerturbSuite(a) => commands::perturb_suite(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

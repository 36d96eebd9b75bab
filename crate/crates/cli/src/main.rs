//! `purify`: drives decoherence, purification, tomography and Bell analysis
//! from the command line.

mod artifacts;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use purify_core::analysis::{chsh_s, s_max, tangle_entropy_frontier, ChshSettings, FrontierConfig};
use purify_core::channels::{calibrate_alpha, BellKind};
use purify_core::quantum::DensityMatrix;
use purify_core::tomography::{
    counts_from_csv, mle_reconstruct_with, monte_carlo_errors_many, standard_settings, Flux, Functional, MleConfig,
};
use serde::Serialize;

use artifacts::Artifacts;
use config::{Globals, PipelineConfig, PipelineOverrides};

#[derive(Debug, Parser)]
#[command(name = "purify", version, about = "Entanglement purification simulator")]
struct Cli {
    /// Seed for every random draw (count simulation, resampling, frontier search).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat TOML file with default values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving the output files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Analyze the exact model states instead of simulated tomography.
    #[arg(long, global = true)]
    exact_states: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decohere, purify, reconstruct and analyze both pairs and the output.
    Pipeline(PipelineArgs),
    /// Find the decoherer angle giving a target maximal Bell parameter.
    Calibrate(CalibrateArgs),
    /// Reconstruct a state from a counts CSV.
    Tomography(TomographyArgs),
    /// Evaluate the CHSH parameter of a stored state.
    BellTest(BellTestArgs),
    /// Numerical tangle/linear-entropy frontier as CSV.
    Frontier(FrontierArgs),
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    alpha_forward: Option<f64>,
    #[arg(long)]
    alpha_backward: Option<f64>,
    #[arg(long)]
    source_bell: Option<BellKind>,
    #[arg(long)]
    pre_rotate_45: Option<bool>,
    /// Mean counts per setting at unit Born probability.
    #[arg(long)]
    flux_n: Option<f64>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    frontier_grid: Option<usize>,
    #[arg(long)]
    frontier_random_states: Option<usize>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    target_s_max: f64,
    #[arg(long, default_value = "phi_minus")]
    source_bell: BellKind,
}

#[derive(Debug, Args)]
struct TomographyArgs {
    /// CSV with header `label,count,exposure`.
    #[arg(long)]
    counts: PathBuf,
    /// Reconstructed state; defaults to `<output-dir>/reconstructed.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// s_max, tangle, linear_entropy, chsh or fidelity:<bell state>; repeatable.
    #[arg(long = "functional")]
    functionals: Vec<Functional>,
    #[arg(long, default_value_t = 100)]
    resamples: usize,
    /// Fix the flux instead of fitting it.
    #[arg(long)]
    flux_n: Option<f64>,
}

#[derive(Debug, Args)]
struct BellTestArgs {
    #[arg(long)]
    state: PathBuf,
    /// Analyzer angles a a' b b' in degrees.
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["A", "A_PRIME", "B", "B_PRIME"])]
    settings: Option<Vec<f64>>,
    /// Also report the maximum over all settings.
    #[arg(long)]
    optimal: bool,
}

#[derive(Debug, Args)]
struct FrontierArgs {
    #[arg(long, default_value_t = 100)]
    n_grid: usize,
    #[arg(long, default_value_t = 100_000)]
    random_states: usize,
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

fn run(cli: Cli) -> Result<()> {
    let globals = Globals::resolve(cli.seed, cli.output_dir, cli.exact_states, cli.config.as_deref())?;
    match cli.command {
        Command::Pipeline(args) => cmd_pipeline(&globals, args),
        Command::Calibrate(args) => cmd_calibrate(&globals, args),
        Command::Tomography(args) => cmd_tomography(&globals, args),
        Command::BellTest(args) => cmd_bell_test(&globals, args),
        Command::Frontier(args) => cmd_frontier(&globals, args),
    }
}

fn cmd_pipeline(globals: &Globals, args: PipelineArgs) -> Result<()> {
    let flags = PipelineOverrides {
        alpha_forward: args.alpha_forward,
        alpha_backward: args.alpha_backward,
        source_bell: args.source_bell,
        pre_rotate_45: args.pre_rotate_45,
        flux_n: args.flux_n,
        resamples: args.resamples,
        frontier_grid: args.frontier_grid,
        frontier_random_states: args.frontier_random_states,
    };
    let cfg = PipelineConfig::resolve(globals, &flags)?;
    let run = pipeline::run(&cfg)?;
    run.artifacts.commit()?;
    print!("{}", pipeline::summary_table(&run.metrics));
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_calibrate(globals: &Globals, args: CalibrateArgs) -> Result<()> {
    let cal = calibrate_alpha(args.target_s_max, args.source_bell)?;
    let mut out = Artifacts::new();
    out.add(globals.output_dir.join("calibration.json"), serde_json::to_string_pretty(&cal)? + "\n");
    out.commit()?;
    println!("alpha = {} deg (S_MAX {} for target {})", cal.alpha, cal.achieved, cal.target);
    Ok(())
}

#[derive(Debug, Serialize)]
struct FunctionalReport {
    name: String,
    estimate: f64,
    mean: f64,
    std: f64,
    n_resamples: usize,
    failures: usize,
    valid: bool,
}

#[derive(Debug, Serialize)]
struct TomographyReport {
    converged: bool,
    iterations: usize,
    neg_log_likelihood: f64,
    flux: f64,
    functionals: Vec<FunctionalReport>,
}

fn cmd_tomography(globals: &Globals, args: TomographyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.counts).with_context(|| format!("reading {}", args.counts.display()))?;
    let counts = counts_from_csv(&text, &standard_settings()).with_context(|| format!("parsing {}", args.counts.display()))?;
    let mle = MleConfig {
        flux: args.flux_n.map_or(Flux::Fitted, Flux::Fixed),
        ..MleConfig::default()
    };
    let fit = mle_reconstruct_with(&counts, &mle)?;
    let mc = if args.functionals.is_empty() {
        Vec::new()
    } else {
        monte_carlo_errors_many(&counts, &args.functionals, args.resamples, globals.seed, &mle)?
    };
    let functionals = args
        .functionals
        .iter()
        .zip(mc)
        .map(|(f, r)| {
            Ok(FunctionalReport {
                name: r.name,
                estimate: f.evaluate(&fit.rho_hat)?,
                mean: r.mean,
                std: r.std,
                n_resamples: r.n_resamples,
                failures: r.failures,
                valid: r.valid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = TomographyReport {
        converged: fit.converged,
        iterations: fit.iterations,
        neg_log_likelihood: fit.neg_log_likelihood,
        flux: fit.flux,
        functionals,
    };
    let state_path = args.out.unwrap_or_else(|| globals.output_dir.join("reconstructed.json"));
    let mut out = Artifacts::new();
    out.add(&state_path, fit.rho_hat.to_json() + "\n");
    out.add(globals.output_dir.join("functionals.json"), serde_json::to_string_pretty(&report)? + "\n");
    out.commit()?;

    println!("converged {} after {} iterations", report.converged, report.iterations);
    for f in &report.functionals {
        println!("{:<22}{:.8}  (resampled {:.6} ± {:.6}, {} failures)", f.name, f.estimate, f.mean, f.std, f.failures);
    }
    println!("wrote {}", state_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BellTestReport {
    settings: ChshSettings,
    #[serde(flatten)]
    value: purify_core::analysis::ChshValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_max: Option<f64>,
}

fn cmd_bell_test(globals: &Globals, args: BellTestArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.state).with_context(|| format!("reading {}", args.state.display()))?;
    let rho = DensityMatrix::from_json(&text).with_context(|| format!("loading state {}", args.state.display()))?;
    let settings = match args.settings.as_deref() {
        None => ChshSettings::default(),
        Some(&[a, a_prime, b, b_prime]) => ChshSettings { a, a_prime, b, b_prime },
        Some(other) => bail!("expected four angles, got {}", other.len()),
    };
    let value = chsh_s(&rho, &settings)?;
    let s_max = if args.optimal { Some(s_max(&rho)?) } else { None };
    let report = BellTestReport { settings, value, s_max };
    let mut out = Artifacts::new();
    out.add(globals.output_dir.join("bell_test.json"), serde_json::to_string_pretty(&report)? + "\n");
    out.commit()?;
    println!("S = {} (minus sign on {:?})", value.s, value.minus_on);
    if let Some(s) = s_max {
        println!("S_MAX = {s}");
    }
    Ok(())
}

fn cmd_frontier(globals: &Globals, args: FrontierArgs) -> Result<()> {
    let mut cfg = FrontierConfig::new(args.n_grid);
    cfg.random_states = args.random_states;
    cfg.seed = globals.seed;
    let frontier = tangle_entropy_frontier(&cfg)?;
    let path = globals.output_dir.join("frontier.csv");
    let mut out = Artifacts::new();
    out.add(&path, frontier.to_csv());
    out.commit()?;
    println!("wrote {} ({} points)", path.display(), frontier.points.len());
    Ok(())
}

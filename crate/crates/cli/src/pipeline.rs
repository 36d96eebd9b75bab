use anyhow::{Context, Result};
use purify_core::analysis::{chsh_s, tangle_entropy_frontier, ChshSettings, ChshValue, FrontierConfig, StateMetrics};
use purify_core::channels::bell_state;
use purify_core::purification::{purification_target, purify_decohered_with};
use purify_core::quantum::{fidelity_with_pure, DensityMatrix};
use purify_core::rng::derive_seed;
use purify_core::tomography::{
    mle_reconstruct, monte_carlo_errors_many, simulate_counts, standard_settings, Functional, McResult, MleConfig,
};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::PipelineConfig;

pub const STATE_NAMES: [&str; 3] = ["input_fw", "input_bw", "purified"];

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub iterations: usize,
    pub neg_log_likelihood: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateReport {
    #[serde(flatten)]
    pub metrics: StateMetrics,
    pub target_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<Vec<McResult>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsFile {
    pub source_bell: purify_core::channels::BellKind,
    pub target_bell: purify_core::channels::BellKind,
    pub exact_states: bool,
    pub success_probability: f64,
    pub input_fw: StateReport,
    pub input_bw: StateReport,
    pub purified: StateReport,
}

#[derive(Debug, Clone, Serialize)]
struct BellRow<'a> {
    state: &'a str,
    #[serde(flatten)]
    value: ChshValue,
    s_max: f64,
}

#[derive(Debug, Clone, Serialize)]
struct BellFile<'a> {
    settings: ChshSettings,
    states: Vec<BellRow<'a>>,
}

pub struct PipelineRun {
    pub metrics: MetricsFile,
    pub artifacts: Artifacts,
}

/// Runs the whole chain and stages every output file; nothing touches the
/// disk until [`Artifacts::commit`].
pub fn run(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let model = purify_decohered_with(cfg.source_bell, cfg.alpha_forward, cfg.alpha_backward, cfg.pre_rotate_45)
        .context("decoherence and purification")?;
    let target = purification_target(cfg.source_bell, cfg.pre_rotate_45);
    let exact = [&model.input_fw, &model.input_bw, &model.outcome.output];

    let mut states = Vec::with_capacity(3);
    let mut reports = Vec::with_capacity(3);
    for (k, (rho, name)) in exact.into_iter().zip(STATE_NAMES).enumerate() {
        let (state, report) = if cfg.exact_states {
            (rho.clone(), analyze(rho, target, None, None)?)
        } else {
            measure(cfg, rho, target, k as u64).with_context(|| format!("tomography of {name}"))?
        };
        states.push(state);
        reports.push(report);
    }

    let settings = ChshSettings::default();
    let bell_rows = states
        .iter()
        .zip(STATE_NAMES)
        .zip(&reports)
        .map(|((rho, name), r)| {
            Ok(BellRow {
                state: name,
                value: chsh_s(rho, &settings)?,
                s_max: r.metrics.s_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut frontier_cfg = FrontierConfig::new(cfg.frontier_grid);
    frontier_cfg.random_states = cfg.frontier_random_states;
    frontier_cfg.seed = derive_seed(cfg.seed, 0xf4);
    let frontier = tangle_entropy_frontier(&frontier_cfg).context("frontier search")?;
    let mut fig4 = String::from("series,linear_entropy,tangle\n");
    for (name, r) in STATE_NAMES.iter().zip(&reports) {
        fig4.push_str(&format!("{name},{},{}\n", r.metrics.linear_entropy, r.metrics.tangle));
    }
    for (sl, t) in &frontier.points {
        fig4.push_str(&format!("frontier,{sl},{t}\n"));
    }

    let mut it = reports.into_iter();
    let metrics = MetricsFile {
        source_bell: cfg.source_bell,
        target_bell: target,
        exact_states: cfg.exact_states,
        success_probability: model.outcome.success_probability,
        input_fw: it.next().expect("three reports"),
        input_bw: it.next().expect("three reports"),
        purified: it.next().expect("three reports"),
    };

    let dir = &cfg.output_dir;
    let mut artifacts = Artifacts::new();
    for (rho, name) in states.iter().zip(STATE_NAMES) {
        artifacts.add(dir.join(format!("{name}.json")), rho.to_json() + "\n");
    }
    artifacts.add(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n");
    artifacts.add(
        dir.join("bell_test.json"),
        serde_json::to_string_pretty(&BellFile {
            settings,
            states: bell_rows,
        })? + "\n",
    );
    artifacts.add(dir.join("fig4.csv"), fig4);
    artifacts.add(dir.join("config.toml"), cfg.to_toml());
    Ok(PipelineRun { metrics, artifacts })
}

fn analyze(
    rho: &DensityMatrix,
    target: purify_core::channels::BellKind,
    tomography: Option<FitSummary>,
    monte_carlo: Option<Vec<McResult>>,
) -> Result<StateReport> {
    Ok(StateReport {
        metrics: StateMetrics::of(rho)?,
        target_fidelity: fidelity_with_pure(rho, &bell_state(target))?,
        tomography,
        monte_carlo,
    })
}

/// Simulated counts, reconstruction and Monte Carlo errors for one state.
fn measure(
    cfg: &PipelineConfig,
    rho: &DensityMatrix,
    target: purify_core::channels::BellKind,
    index: u64,
) -> Result<(DensityMatrix, StateReport)> {
    let counts = simulate_counts(rho, &standard_settings(), cfg.flux_n, derive_seed(cfg.seed, index))?;
    let fit = mle_reconstruct(&counts)?;
    let functionals = [
        Functional::SMax,
        Functional::Tangle,
        Functional::LinearEntropy,
        Functional::fidelity_to_bell(target),
    ];
    let errors = monte_carlo_errors_many(
        &counts,
        &functionals,
        cfg.resamples,
        derive_seed(cfg.seed, 100 + index),
        &MleConfig::default(),
    )?;
    let summary = FitSummary {
        converged: fit.converged,
        iterations: fit.iterations,
        neg_log_likelihood: fit.neg_log_likelihood,
    };
    let report = analyze(&fit.rho_hat, target, Some(summary), Some(errors))?;
    Ok((fit.rho_hat, report))
}

/// Human-readable table of the three states.
pub fn summary_table(m: &MetricsFile) -> String {
    let cell = |value: f64, name: &str, r: &StateReport| {
        let err = r
            .monte_carlo
            .as_ref()
            .and_then(|mc| mc.iter().find(|x| x.name == name))
            .map(|x| format!(" ± {:.4}", x.std))
            .unwrap_or_default();
        format!("{:<18}", format!("{value:.4}{err}"))
    };
    let target_name = format!("fidelity:{}", m.target_bell);
    let mut out = format!(
        "{:<10}{:<18}{:<18}{:<18}F({})\n",
        "state", "S_MAX", "tangle", "S_L", m.target_bell
    );
    for (name, r) in [("input_fw", &m.input_fw), ("input_bw", &m.input_bw), ("purified", &m.purified)] {
        out.push_str(&format!(
            "{name:<10}{}{}{}{}\n",
            cell(r.metrics.s_max, "s_max", r),
            cell(r.metrics.tangle, "tangle", r),
            cell(r.metrics.linear_entropy, "linear_entropy", r),
            cell(r.target_fidelity, &target_name, r).trim_end(),
        ));
    }
    out.push_str(&format!("success probability {:.6}\n", m.success_probability));
    out
}

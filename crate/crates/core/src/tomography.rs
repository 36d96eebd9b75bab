//! Two-photon polarization tomography: count simulation, maximum-likelihood
//! reconstruction and Monte Carlo error propagation.
//!
//! Reconstructed states are parametrized as `ρ = T†T / Tr[T†T]` with `T`
//! lower triangular (4 real diagonal entries, 6 complex below), which makes
//! every iterate physical. The fit minimizes the Poisson negative
//! log-likelihood with an L-BFGS descent on the 16 real parameters.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{chsh_s, linear_entropy, s_max, tangle, ChshSettings};
use crate::channels::{bell_state, BellKind, Polarization};
use crate::quantum::{eig_hermitian, fidelity_with_pure, hermitize, CMatrix, CVector, DensityMatrix, PureState, Tensor, C64};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Probabilities below this are floored inside the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// A product projector `|a⟩ ⊗ |b⟩` on the two photons.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub projector_a: PureState,
    pub projector_b: PureState,
    pub label: String,
}

impl MeasurementSetting {
    pub fn new(projector_a: PureState, projector_b: PureState, label: impl Into<String>) -> Result<Self> {
        for p in [&projector_a, &projector_b] {
            if p.dim() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: p.dim(),
                });
            }
        }
        Ok(Self {
            projector_a,
            projector_b,
            label: label.into(),
        })
    }

    pub fn joint_state(&self) -> PureState {
        self.projector_a.tensor(&self.projector_b)
    }

    /// Born probability `⟨ab|ρ|ab⟩`.
    pub fn probability(&self, rho: &DensityMatrix) -> Result<f64> {
        fidelity_with_pure(rho, &self.joint_state())
    }
}

/// All 36 pairs of {H, V, D, A, R, L} analyzers, labelled e.g. `"HV"`.
pub fn standard_settings() -> Vec<MeasurementSetting> {
    let mut out = Vec::with_capacity(36);
    for a in Polarization::ALL {
        for b in Polarization::ALL {
            let label = format!("{}{}", a.label(), b.label());
            out.push(MeasurementSetting::new(a.state(), b.state(), label).expect("qubit analyzers"));
        }
    }
    out
}

/// Coincidences recorded for one setting. `count` may be fractional when
/// records hold expected rather than sampled counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub count: f64,
    pub exposure: f64,
}

impl CountRecord {
    pub fn new(setting: MeasurementSetting, count: f64, exposure: f64) -> Result<Self> {
        if !count.is_finite() || count < 0.0 {
            return Err(Error::InvalidCount(format!("count {count} for {}", setting.label)));
        }
        if !exposure.is_finite() || exposure <= 0.0 {
            return Err(Error::InvalidCount(format!("exposure {exposure} for {}", setting.label)));
        }
        Ok(Self {
            setting,
            count,
            exposure,
        })
    }
}

fn check_flux(n: f64) -> Result<()> {
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::InvalidParameter(format!("flux {n} must be positive")));
    }
    Ok(())
}

/// Poisson counts with mean `n_per_setting · p`, one draw per setting.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    n_per_setting: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    check_flux(n_per_setting)?;
    let mut rng = stream_rng(seed, 0);
    settings
        .iter()
        .map(|s| {
            let mean = n_per_setting * s.probability(rho)?.max(0.0);
            let count = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            CountRecord::new(s.clone(), count, 1.0)
        })
        .collect()
}

/// Noiseless counts `n_per_setting · p` (not rounded).
pub fn expected_counts(rho: &DensityMatrix, settings: &[MeasurementSetting], n_per_setting: f64) -> Result<Vec<CountRecord>> {
    check_flux(n_per_setting)?;
    settings
        .iter()
        .map(|s| CountRecord::new(s.clone(), n_per_setting * s.probability(rho)?.max(0.0), 1.0))
        .collect()
}

/// How the overall count rate `N` is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flux {
    /// `N` is a free positive parameter (absorbed into `Tr[T†T]`).
    Fitted,
    /// Expected counts are `N · exposure · p`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub flux: Flux,
    pub max_iterations: usize,
    /// Stop when the relative objective decrease of an iteration falls below this.
    pub rel_tol: f64,
    /// Stop when the largest parameter change of an iteration falls below this.
    pub step_tol: f64,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            flux: Flux::Fitted,
            max_iterations: 100_000,
            rel_tol: 1e-10,
            step_tol: 1e-9,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub rho_hat: DensityMatrix,
    /// `Σ [μ − n ln μ]` at the optimum, original count scale.
    pub neg_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted (or supplied) `N`.
    pub flux: f64,
    /// Negative log-likelihood after each accepted iteration, starting with
    /// the initial guess.
    pub nll_history: Vec<f64>,
}

const N_PARAMS: usize = 16;
type Params = [f64; N_PARAMS];

const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn params_to_t(x: &Params) -> CMatrix {
    let mut t = CMatrix::zeros(4, 4);
    for i in 0..4 {
        t[(i, i)] = C64::new(x[i], 0.0);
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        t[(i, j)] = C64::new(x[4 + 2 * k], x[5 + 2 * k]);
    }
    t
}

/// Inverse of [`params_to_t`] for a positive definite `m = T†T`.
fn t_from_matrix(m: &CMatrix) -> Option<Params> {
    // With J the exchange matrix, J m J = L L† gives m = (J L J)(J L J)†,
    // and T = (J L J)† is lower triangular.
    let j = |i: usize| 3 - i;
    let flipped = CMatrix::from_fn(4, 4, |r, c| m[(j(r), j(c))]);
    let l = nalgebra::Cholesky::new(flipped)?.l();
    let u = CMatrix::from_fn(4, 4, |r, c| l[(j(r), j(c))]);
    let t = u.adjoint();
    let mut x = [0.0; N_PARAMS];
    for i in 0..4 {
        x[i] = t[(i, i)].re;
    }
    for (k, &(r, c)) in LOWER.iter().enumerate() {
        x[4 + 2 * k] = t[(r, c)].re;
        x[5 + 2 * k] = t[(r, c)].im;
    }
    Some(x)
}

/// Poisson objective in deviance form (`Σ μ − n − n ln(μ/n)`), which has the
/// same minimizer and gradient as the negative log-likelihood. Counts are
/// pre-scaled to unit total for conditioning.
struct Likelihood {
    vectors: Vec<CVector>,
    counts: Vec<f64>,
    exposures: Vec<f64>,
    flux: Option<f64>,
    scale: f64,
}

impl Likelihood {
    fn new(records: &[CountRecord], flux: Flux) -> Self {
        let total: f64 = records.iter().map(|r| r.count).sum();
        let scale = 1.0 / total;
        Self {
            vectors: records.iter().map(|r| r.setting.joint_state().amplitudes().clone()).collect(),
            counts: records.iter().map(|r| r.count * scale).collect(),
            exposures: records.iter().map(|r| r.exposure).collect(),
            flux: match flux {
                Flux::Fitted => None,
                Flux::Fixed(n) => Some(n * scale),
            },
            scale,
        }
    }

    /// Expected (scaled) count and floored expected count for setting `m`.
    fn mu(&self, m: usize, q: f64, tau: f64) -> (f64, f64, bool) {
        let p = q / tau;
        let e = self.exposures[m];
        let norm = self.flux.unwrap_or(tau);
        let mu = norm * e * p;
        if p < PROBABILITY_FLOOR {
            (mu, norm * e * PROBABILITY_FLOOR, true)
        } else {
            (mu, mu, false)
        }
    }

    fn value_grad(&self, x: &Params) -> (f64, Params) {
        let t = params_to_t(x);
        let tau: f64 = x.iter().map(|v| v * v).sum();
        let mut f = 0.0;
        let mut g_mat = CMatrix::zeros(4, 4);
        let mut identity_coeff = 0.0;
        for (m, psi) in self.vectors.iter().enumerate() {
            let q = (&t * psi).norm_squared();
            let (mu, mu_log, floored) = self.mu(m, q, tau);
            let n = self.counts[m];
            f += mu - n;
            if n > 0.0 {
                f -= n * (mu_log / n).ln();
            }
            let coeff = if n > 0.0 && !floored { 1.0 - n / mu } else { 1.0 };
            let e = self.exposures[m];
            let proj = psi * psi.adjoint();
            match self.flux {
                None => {
                    g_mat += proj.scale(coeff * e);
                    if n > 0.0 && floored {
                        identity_coeff -= n / tau;
                    }
                }
                Some(norm) => {
                    let p = q / tau;
                    g_mat += proj.scale(coeff * norm * e / tau);
                    identity_coeff -= coeff * norm * e * p / tau;
                }
            }
        }
        for i in 0..4 {
            g_mat[(i, i)] += C64::new(identity_coeff, 0.0);
        }
        let a = &t * g_mat;
        let mut grad = [0.0; N_PARAMS];
        for i in 0..4 {
            grad[i] = 2.0 * a[(i, i)].re;
        }
        for (k, &(i, j)) in LOWER.iter().enumerate() {
            grad[4 + 2 * k] = 2.0 * a[(i, j)].re;
            grad[5 + 2 * k] = 2.0 * a[(i, j)].im;
        }
        (f, grad)
    }

    /// Converts a scaled deviance to the negative log-likelihood on the
    /// original count scale.
    fn nll_from_deviance(&self, deviance: f64) -> f64 {
        let constant: f64 = self
            .counts
            .iter()
            .filter(|&&n| n > 0.0)
            .map(|&n| {
                let n = n / self.scale;
                n * n.ln() - n
            })
            .sum();
        deviance / self.scale - constant
    }

    fn fitted_flux(&self, x: &Params) -> f64 {
        match self.flux {
            Some(n) => n / self.scale,
            None => x.iter().map(|v| v * v).sum::<f64>() / self.scale,
        }
    }
}

fn pauli_basis() -> Vec<CMatrix> {
    let i = C64::new(0.0, 1.0);
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let single = [
        CMatrix::identity(2, 2),
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &single {
        for b in &single {
            out.push(a.kronecker(b));
        }
    }
    out
}

/// Design matrix `A[m, k] = ⟨ψ_m|P_k|ψ_m⟩` over the two-qubit Pauli basis.
fn design_matrix(vectors: &[CVector]) -> DMatrix<f64> {
    let basis = pauli_basis();
    DMatrix::from_fn(vectors.len(), 16, |m, k| {
        vectors[m].dotc(&(&basis[k] * &vectors[m])).re
    })
}

/// Number of independent operator directions probed by `settings`.
pub fn informational_rank(settings: &[MeasurementSetting]) -> usize {
    if settings.is_empty() {
        return 0;
    }
    let vectors: Vec<CVector> = settings.iter().map(|s| s.joint_state().amplitudes().clone()).collect();
    let a = design_matrix(&vectors);
    let gram = a.transpose() * &a;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let top = eig.iter().cloned().fold(0.0, f64::max);
    eig.iter().filter(|&&v| v > 1e-10 * top.max(1e-300)).count()
}

/// Least-squares linear inversion projected onto the PSD cone, slightly
/// mixed with the identity so the starting point is full rank.
fn initial_guess(lik: &Likelihood) -> Params {
    let a = design_matrix(&lik.vectors);
    let y = nalgebra::DVector::from_iterator(
        lik.counts.len(),
        lik.counts.iter().zip(&lik.exposures).map(|(n, e)| n / e),
    );
    let total_rate: f64 = y.iter().sum::<f64>().max(1e-300);
    let fallback = {
        // Σ_m p_m is 9 for the standard set; any positive scale works as a start.
        let tau = total_rate * 4.0 / lik.counts.len() as f64;
        let mut x = [0.0; N_PARAMS];
        for v in x.iter_mut().take(4) {
            *v = (tau / 4.0).sqrt();
        }
        x
    };
    let gram = a.transpose() * &a;
    let Some(chol) = nalgebra::Cholesky::new(gram) else {
        return fallback;
    };
    let c = chol.solve(&(a.transpose() * y));
    let basis = pauli_basis();
    let mut m = CMatrix::zeros(4, 4);
    for (k, b) in basis.iter().enumerate() {
        m += b.scale(c[k]);
    }
    let Ok((vals, vecs)) = eig_hermitian(&hermitize(&m)) else {
        return fallback;
    };
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let tau: f64 = clipped.iter().sum();
    if tau <= 0.0 {
        return fallback;
    }
    let mix = 1e-3;
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        4,
        clipped.iter().map(|&v| C64::new((1.0 - mix) * v + mix * tau / 4.0, 0.0)),
    ));
    let m0 = hermitize(&(&vecs * d * vecs.adjoint()));
    t_from_matrix(&m0).unwrap_or(fallback)
}

fn dot(a: &Params, b: &Params) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &Params) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Maximum-likelihood reconstruction with default settings.
pub fn mle_reconstruct(counts: &[CountRecord]) -> Result<TomographyResult> {
    mle_reconstruct_with(counts, &MleConfig::default())
}

pub fn mle_reconstruct_with(counts: &[CountRecord], cfg: &MleConfig) -> Result<TomographyResult> {
    let settings: Vec<MeasurementSetting> = counts.iter().map(|c| c.setting.clone()).collect();
    let rank = informational_rank(&settings);
    if rank < 16 {
        return Err(Error::InsufficientSettings { rank });
    }
    if counts.iter().all(|c| c.count == 0.0) {
        return Err(Error::AllZeroCounts);
    }
    if let Flux::Fixed(n) = cfg.flux {
        check_flux(n)?;
    }
    let lik = Likelihood::new(counts, cfg.flux);
    let mut x = initial_guess(&lik);
    let (mut f, mut g) = lik.value_grad(&x);
    let mut history = vec![lik.nll_from_deviance(f)];
    let mut memory: VecDeque<(Params, Params, f64)> = VecDeque::new();
    const MEMORY: usize = 10;
    let mut converged = max_norm(&g) < cfg.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        // two-loop recursion
        let mut d = g.map(|v| -v);
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            for k in 0..N_PARAMS {
                d[k] -= a * y[k];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            d = d.map(|v| v * gamma);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for k in 0..N_PARAMS {
                d[k] += (a - b) * s[k];
            }
        }
        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            memory.clear();
            d = g.map(|v| -v);
            slope = dot(&g, &d);
        }
        let mut step = if memory.is_empty() {
            (1.0 / max_norm(&g).max(1e-300)).min(1.0) * max_norm(&x).max(1e-3) * 0.1
        } else {
            1.0
        };
        // Armijo backtracking
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = x;
            for k in 0..N_PARAMS {
                trial[k] += step * d[k];
            }
            let (ft, gt) = lik.value_grad(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope && ft < f {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no representable decrease along a descent direction: stationary to
            // working precision if the previous step was a fresh gradient step
            if memory.is_empty() {
                converged = max_norm(&g) <= 1e-8 * (1.0 + f.abs());
                break;
            }
            memory.clear();
            continue;
        };
        let mut s = [0.0; N_PARAMS];
        let mut y = [0.0; N_PARAMS];
        for k in 0..N_PARAMS {
            s[k] = x_new[k] - x[k];
            y[k] = g_new[k] - g[k];
        }
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let decrease = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(lik.nll_from_deviance(f));
        converged = decrease <= cfg.rel_tol * f.abs()
            || max_norm(&s) < cfg.step_tol
            || max_norm(&g) < cfg.grad_tol;
    }

    let t = params_to_t(&x);
    let rho_hat = DensityMatrix::from_unnormalized(hermitize(&(t.adjoint() * &t)), vec![2, 2])?;
    Ok(TomographyResult {
        rho_hat,
        neg_log_likelihood: *history.last().expect("history has the initial entry"),
        iterations,
        converged,
        flux: lik.fitted_flux(&x),
        nll_history: history,
    })
}

/// A scalar extracted from a reconstructed state.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    SMax,
    Tangle,
    LinearEntropy,
    FidelityTo(PureState),
    Chsh(ChshSettings),
}

impl Functional {
    pub fn fidelity_to_bell(kind: BellKind) -> Self {
        Functional::FidelityTo(bell_state(kind))
    }

    pub fn name(&self) -> String {
        match self {
            Functional::SMax => "s_max".into(),
            Functional::Tangle => "tangle".into(),
            Functional::LinearEntropy => "linear_entropy".into(),
            Functional::FidelityTo(psi) => {
                match BellKind::ALL.into_iter().find(|k| bell_state(*k) == *psi) {
                    Some(k) => format!("fidelity:{k}"),
                    None => "fidelity".into(),
                }
            }
            Functional::Chsh(_) => "chsh".into(),
        }
    }

    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            Functional::SMax => s_max(rho),
            Functional::Tangle => tangle(rho),
            Functional::LinearEntropy => linear_entropy(rho),
            Functional::FidelityTo(psi) => fidelity_with_pure(rho, psi),
            Functional::Chsh(s) => Ok(chsh_s(rho, s)?.s),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    /// `s_max`, `tangle`, `linear_entropy`, `chsh` (default settings) or
    /// `fidelity:<bell state>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_max" => Ok(Functional::SMax),
            "tangle" => Ok(Functional::Tangle),
            "linear_entropy" => Ok(Functional::LinearEntropy),
            "chsh" => Ok(Functional::Chsh(ChshSettings::default())),
            _ => match s.strip_prefix("fidelity:") {
                Some(kind) => Ok(Functional::fidelity_to_bell(kind.parse()?)),
                None => Err(Error::InvalidParameter(format!("unknown functional `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub n_resamples: usize,
    pub failures: usize,
    /// False when more than 10% of resamples failed to reconstruct.
    pub valid: bool,
}

/// Mean and sample standard deviation of `functional` over Poisson
/// resamples of `counts`.
pub fn monte_carlo_errors(
    counts: &[CountRecord],
    functional: &Functional,
    n_resamples: usize,
    seed: u64,
) -> Result<McResult> {
    let mut out = monte_carlo_errors_many(counts, std::slice::from_ref(functional), n_resamples, seed, &MleConfig::default())?;
    Ok(out.remove(0))
}

/// Like [`monte_carlo_errors`] for several functionals sharing one set of
/// resampled reconstructions. Resample `i` draws from stream `(seed, i)`.
pub fn monte_carlo_errors_many(
    counts: &[CountRecord],
    functionals: &[Functional],
    n_resamples: usize,
    seed: u64,
    cfg: &MleConfig,
) -> Result<Vec<McResult>> {
    if n_resamples < 2 {
        return Err(Error::TooFewResamples(n_resamples));
    }
    let samples: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let resampled: Vec<CountRecord> = counts
                .iter()
                .map(|c| {
                    let count = if c.count > 0.0 {
                        Poisson::new(c.count).map(|p| p.sample(&mut rng)).unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    CountRecord { count, ..c.clone() }
                })
                .collect();
            let fit = mle_reconstruct_with(&resampled, cfg).ok().filter(|r| r.converged)?;
            functionals.iter().map(|f| f.evaluate(&fit.rho_hat).ok()).collect()
        })
        .collect();
    let good: Vec<&Vec<f64>> = samples.iter().flatten().collect();
    let failures = n_resamples - good.len();
    let valid = failures * 10 <= n_resamples;
    Ok(functionals
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let values: Vec<f64> = good.iter().map(|v| v[k]).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            McResult {
                name: f.name(),
                mean,
                std: var.sqrt(),
                n_resamples,
                failures,
                valid,
            }
        })
        .collect())
}

/// Writes `label,count,exposure` CSV.
pub fn counts_to_csv(counts: &[CountRecord]) -> String {
    let mut s = String::from("label,count,exposure\n");
    for c in counts {
        s.push_str(&format!("{},{},{}\n", c.setting.label, c.count, c.exposure));
    }
    s
}

/// Parses `label,count,exposure` CSV, resolving labels against `settings`.
pub fn counts_from_csv(text: &str, settings: &[MeasurementSetting]) -> Result<Vec<CountRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (label_col, count_col, exposure_col) = (column("label")?, column("count")?, column("exposure")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| Error::Csv {
                line,
                message: format!("missing `{name}` field"),
            })
        };
        let number = |col: usize, name: &str| -> Result<f64> {
            let raw = field(col, name)?;
            raw.parse::<f64>().map_err(|_| Error::Csv {
                line,
                message: format!("`{name}` is not a number: `{raw}`"),
            })
        };
        let label = field(label_col, "label")?;
        let setting = settings
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel {
                line,
                label: label.to_string(),
            })?;
        let count = number(count_col, "count")?;
        let exposure = number(exposure_col, "exposure")?;
        out.push(CountRecord::new(setting.clone(), count, exposure).map_err(|e| Error::Csv {
            line,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

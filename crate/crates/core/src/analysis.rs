//! Nonlocality, entanglement and mixedness of two-qubit states.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{bell_state, BellKind};
use crate::quantum::{
    eig_hermitian, fidelity_with_pure, purity, random_density_matrix, CMatrix, DensityMatrix, C64, ONE, ZERO,
};
use crate::rng::stream_rng;
use crate::{Error, Result};

fn pauli(k: usize) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    let entries = match k {
        0 => [ZERO, ONE, ONE, ZERO],
        1 => [ZERO, -i, i, ZERO],
        _ => [ONE, ZERO, ZERO, -ONE],
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Linear-polarization analyzer `cos2θ σ_z + sin2θ σ_x`.
pub fn analyzer(theta_deg: f64) -> CMatrix {
    let (s, c) = (2.0 * theta_deg.to_radians()).sin_cos();
    pauli(2).scale(c) + pauli(0).scale(s)
}

/// `E(θa, θb) = Tr[ρ σ(θa) ⊗ σ(θb)]`
pub fn correlation(rho: &DensityMatrix, theta_a: f64, theta_b: f64) -> Result<f64> {
    require_two_qubits(rho)?;
    Ok(rho.expectation(&analyzer(theta_a).kronecker(&analyzer(theta_b)))?.re)
}

/// Analyzer angles in degrees for a CHSH test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshSettings {
    /// −22.5°, 22.5° on the first photon and 0°, 45° on the second.
    fn default() -> Self {
        Self {
            a: -22.5,
            a_prime: 22.5,
            b: 0.0,
            b_prime: 45.0,
        }
    }
}

/// Which correlation term carries the minus sign in the CHSH combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinusOn {
    AB,
    ABPrime,
    APrimeB,
    APrimeBPrime,
}

impl MinusOn {
    const ALL: [MinusOn; 4] = [MinusOn::AB, MinusOn::ABPrime, MinusOn::APrimeB, MinusOn::APrimeBPrime];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshValue {
    pub s: f64,
    pub minus_on: MinusOn,
    /// E(a,b), E(a,b'), E(a',b), E(a',b')
    pub correlations: [f64; 4],
}

/// CHSH value maximized over the four single-minus sign placements.
pub fn chsh_s(rho: &DensityMatrix, settings: &ChshSettings) -> Result<ChshValue> {
    let e = [
        correlation(rho, settings.a, settings.b)?,
        correlation(rho, settings.a, settings.b_prime)?,
        correlation(rho, settings.a_prime, settings.b)?,
        correlation(rho, settings.a_prime, settings.b_prime)?,
    ];
    let total: f64 = e.iter().sum();
    let (minus_on, s) = MinusOn::ALL
        .into_iter()
        .enumerate()
        .map(|(k, p)| (p, (total - 2.0 * e[k]).abs()))
        .fold((MinusOn::AB, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    Ok(ChshValue {
        s,
        minus_on,
        correlations: e,
    })
}

/// `T_ij = Tr[ρ σ_i ⊗ σ_j]` over (x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix(pub Matrix3<f64>);

pub fn correlation_matrix(rho: &DensityMatrix) -> Result<CorrelationMatrix> {
    require_two_qubits(rho)?;
    let mut t = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            t[(i, j)] = rho.expectation(&pauli(i).kronecker(&pauli(j)))?.re;
        }
    }
    Ok(CorrelationMatrix(t))
}

/// Largest CHSH value over all settings: `2√(m₁ + m₂)` with `m₁ ≥ m₂` the
/// two largest eigenvalues of `TᵀT`.
pub fn s_max(rho: &DensityMatrix) -> Result<f64> {
    let CorrelationMatrix(t) = correlation_matrix(rho)?;
    let mut m = SymmetricEigen::new(t.transpose() * t).eigenvalues;
    m.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    Ok(2.0 * (m[0] + m[1]).max(0.0).sqrt())
}

/// Wootters concurrence. With `ρ = WW†`, the `λᵢ` are the singular values of
/// `Wᵀ (σy⊗σy) W`, which avoids square roots of tiny eigenvalues of `ρρ̃`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    let (vals, vecs) = eig_hermitian(rho.elements())?;
    let root = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        vals.iter().map(|&x| C64::new(x.max(0.0).sqrt(), 0.0)),
    ));
    let w = vecs * root;
    let yy = pauli(1).kronecker(&pauli(1));
    let tau = w.transpose() * yy * &w;
    let mut l: Vec<f64> = tau.singular_values().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Squared concurrence.
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    Ok(concurrence(rho)?.powi(2))
}

/// `(4/3)(1 − Tr[ρ²])`
pub fn linear_entropy(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    Ok(4.0 / 3.0 * (1.0 - purity(rho)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellFidelities {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
}

impl BellFidelities {
    pub fn get(&self, kind: BellKind) -> f64 {
        match kind {
            BellKind::PhiPlus => self.phi_plus,
            BellKind::PhiMinus => self.phi_minus,
            BellKind::PsiPlus => self.psi_plus,
            BellKind::PsiMinus => self.psi_minus,
        }
    }

    pub fn max(&self) -> f64 {
        BellKind::ALL.iter().map(|&k| self.get(k)).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn bell_fidelities(rho: &DensityMatrix) -> Result<BellFidelities> {
    let f = |k| fidelity_with_pure(rho, &bell_state(k));
    Ok(BellFidelities {
        phi_plus: f(BellKind::PhiPlus)?,
        phi_minus: f(BellKind::PhiMinus)?,
        psi_plus: f(BellKind::PsiPlus)?,
        psi_minus: f(BellKind::PsiMinus)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub s_max: f64,
    pub tangle: f64,
    pub linear_entropy: f64,
    pub bell_fidelities: BellFidelities,
}

impl StateMetrics {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        Ok(Self {
            s_max: s_max(rho)?,
            tangle: tangle(rho)?,
            linear_entropy: linear_entropy(rho)?,
            bell_fidelities: bell_fidelities(rho)?,
        })
    }
}

/// Settings for the numerical tangle/linear-entropy frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierConfig {
    pub n_grid: usize,
    pub random_states: usize,
    /// Grid resolution per axis of the structured family.
    pub family_steps: usize,
    pub seed: u64,
}

impl FrontierConfig {
    pub fn new(n_grid: usize) -> Self {
        Self {
            n_grid,
            random_states: 100_000,
            family_steps: 200,
            seed: 0x5eed_f00d,
        }
    }
}

/// `g(|HH⟩⟨HH| + |VV⟩⟨VV|) + (x/2)(|HH⟩⟨VV| + h.c.) + (1−2g)|HV⟩⟨HV|`,
/// `0 ≤ x ≤ 2g ≤ 1`: φ± mixtures plus an HV population. The rank-2 members
/// (`x = 2g`) are `2g|φ+⟩⟨φ+| + (1−2g)|HV⟩⟨HV|`.
pub fn bell_population_state(g: f64, x: f64) -> Result<DensityMatrix> {
    if !(0.0..=0.5).contains(&g) || !(0.0..=2.0 * g + 1e-15).contains(&x) {
        return Err(Error::InvalidParameter(format!("g = {g}, x = {x} outside family")));
    }
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(g, 0.0);
    m[(3, 3)] = C64::new(g, 0.0);
    m[(0, 3)] = C64::new(0.5 * x.min(2.0 * g), 0.0);
    m[(3, 0)] = m[(0, 3)];
    m[(1, 1)] = C64::new(1.0 - 2.0 * g, 0.0);
    DensityMatrix::new(m, vec![2, 2])
}

/// `(linear_entropy, tangle)` of every state the frontier search visits:
/// the structured family, the maximally mixed state and the random states.
pub fn frontier_samples(cfg: &FrontierConfig) -> Result<Vec<(f64, f64)>> {
    let point = |rho: &DensityMatrix| -> Result<(f64, f64)> { Ok((linear_entropy(rho)?, tangle(rho)?)) };
    let steps = cfg.family_steps.max(1);
    let mut out: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let g = 0.5 * i as f64 / steps as f64;
            (0..=steps)
                .map(|j| point(&bell_population_state(g, 2.0 * g * j as f64 / steps as f64)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    out.push(point(&DensityMatrix::maximally_mixed(vec![2, 2]))?);
    let random: Vec<(f64, f64)> = (0..cfg.random_states)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, k as u64);
            point(&random_density_matrix(&mut rng, vec![2, 2], 1 + k % 4))
        })
        .collect::<Result<_>>()?;
    out.extend(random);
    Ok(out)
}

/// Upper envelope of tangle against linear entropy, on nodes
/// `k/(n_grid−1)`. Node `k` holds the largest tangle among visited states
/// with linear entropy ≥ node `k`, so the curve is non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub points: Vec<(f64, f64)>,
}

impl Frontier {
    pub fn from_samples(n_grid: usize, samples: &[(f64, f64)]) -> Result<Self> {
        if n_grid < 10 {
            return Err(Error::InvalidParameter(format!("n_grid = {n_grid} < 10")));
        }
        let last = n_grid - 1;
        let mut best = vec![0.0f64; n_grid];
        for &(sl, t) in samples {
            let k = Self::node_below(last, sl);
            best[k] = best[k].max(t);
        }
        // isotonic cleanup: suffix maximum
        for k in (0..last).rev() {
            best[k] = best[k].max(best[k + 1]);
        }
        Ok(Self {
            points: (0..n_grid).map(|k| (k as f64 / last as f64, best[k])).collect(),
        })
    }

    fn node_below(last: usize, linear_entropy: f64) -> usize {
        ((linear_entropy.clamp(0.0, 1.0) * last as f64).floor() as usize).min(last)
    }

    /// Frontier value governing a state with the given linear entropy.
    pub fn bound_at(&self, linear_entropy: f64) -> f64 {
        self.points[Self::node_below(self.points.len() - 1, linear_entropy)].1
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("linear_entropy,max_tangle\n");
        for (x, t) in &self.points {
            s.push_str(&format!("{x},{t}\n"));
        }
        s
    }
}

pub fn tangle_entropy_frontier(cfg: &FrontierConfig) -> Result<Frontier> {
    Frontier::from_samples(cfg.n_grid, &frontier_samples(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn bell(k: BellKind) -> DensityMatrix {
        bell_state(k).to_density()
    }

    fn mixed() -> DensityMatrix {
        DensityMatrix::maximally_mixed(vec![2, 2])
    }

    fn werner(p: f64) -> DensityMatrix {
        DensityMatrix::mixture(&[(p, &bell(BellKind::PhiPlus)), (1.0 - p, &mixed())]).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let pp = bell(BellKind::PhiPlus);
        let sp = bell(BellKind::PsiPlus);
        for (a, b) in [(0.0_f64, 0.0_f64), (10.0, 40.0), (-22.5, 67.0)] {
            let d = 2.0 * (a - b).to_radians();
            let s = 2.0 * (a + b).to_radians();
            assert!((correlation(&pp, a, b).unwrap() - d.cos()).abs() < 1e-12);
            assert!((correlation(&sp, a, b).unwrap() + s.cos()).abs() < 1e-12);
            assert!(correlation(&mixed(), a, b).unwrap().abs() < 1e-15);
        }
        assert!((correlation(&pp, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(&sp, 0.0, 0.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn chsh_examples() {
        let v = chsh_s(&bell(BellKind::PsiPlus), &ChshSettings::default()).unwrap();
        assert!((v.s - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(v.minus_on, MinusOn::APrimeBPrime);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (e, want) in v.correlations.iter().zip([-h, -h, -h, h]) {
            assert!((e - want).abs() < 1e-12);
        }
        assert!(chsh_s(&mixed(), &ChshSettings::default()).unwrap().s.abs() < 1e-15);
        let opt = ChshSettings {
            a: 0.0,
            a_prime: 45.0,
            b: 22.5,
            b_prime: -22.5,
        };
        assert!((chsh_s(&werner(0.75), &opt).unwrap().s - 2.0 * SQRT_2 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn s_max_examples() {
        for k in BellKind::ALL {
            assert!((s_max(&bell(k)).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        }
        assert!((s_max(&werner(0.7)).unwrap() - 1.979898987322333).abs() < 1e-12);
        let classical = DensityMatrix::mixture(&[
            (0.5, &crate::quantum::PureState::basis(vec![2, 2], 0).unwrap().to_density()),
            (0.5, &crate::quantum::PureState::basis(vec![2, 2], 3).unwrap().to_density()),
        ])
        .unwrap();
        assert!((s_max(&classical).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tangle_examples() {
        for k in BellKind::ALL {
            assert!((tangle(&bell(k)).unwrap() - 1.0).abs() < 1e-10);
        }
        let product = crate::quantum::PureState::normalized(vec![ONE, ONE, ZERO, ZERO], vec![2, 2]).unwrap();
        assert!(tangle(&product.to_density()).unwrap() < 1e-12);
        assert!((concurrence(&werner(0.75)).unwrap() - 0.625).abs() < 1e-10);
        assert!((tangle(&werner(0.75)).unwrap() - 0.390625).abs() < 1e-10);
    }

    #[test]
    fn linear_entropy_examples() {
        assert!(linear_entropy(&bell(BellKind::PsiMinus)).unwrap().abs() < 1e-12);
        assert!((linear_entropy(&mixed()).unwrap() - 1.0).abs() < 1e-12);
        assert!((linear_entropy(&werner(0.75)).unwrap() - 0.4375).abs() < 1e-12);
    }

    #[test]
    fn family_concurrence_is_coherence() {
        for (g, x) in [(0.5, 1.0), (0.4, 0.3), (1.0 / 3.0, 0.5), (0.2, 0.0)] {
            let rho = bell_population_state(g, x).unwrap();
            assert!((concurrence(&rho).unwrap() - x).abs() < 1e-9, "g={g} x={x}");
        }
        assert!(bell_population_state(0.6, 0.1).is_err());
    }

    #[test]
    fn frontier_endpoints_and_self_test() {
        let cfg = FrontierConfig {
            n_grid: 21,
            random_states: 5_000,
            family_steps: 60,
            seed: 11,
        };
        let samples = frontier_samples(&cfg).unwrap();
        let frontier = Frontier::from_samples(cfg.n_grid, &samples).unwrap();
        assert!((frontier.bound_at(0.0) - 1.0).abs() < 1e-9);
        assert!(frontier.bound_at(1.0).abs() < 1e-12);
        for &(sl, t) in &samples {
            assert!(t <= frontier.bound_at(sl) + 1e-9);
        }
        for w in frontier.points.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        assert!(Frontier::from_samples(5, &samples).is_err());
        assert!(frontier.to_csv().starts_with("linear_entropy,max_tangle\n"));
    }
}

//! Bell states, polarization rotations and the polarization/arrival-time
//! decoherer.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::s_max;
use crate::quantum::{embed_operator, CMatrix, DensityMatrix, PureState, Tensor, C64, ONE, ZERO};
use crate::{Error, Result};

/// The four maximally entangled two-photon polarization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi_plus",
            BellKind::PhiMinus => "phi_minus",
            BellKind::PsiPlus => "psi_plus",
            BellKind::PsiMinus => "psi_minus",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Bell state `{s}`")))
    }
}

/// Bell state in the (HH, HV, VH, VV) basis with dims `[2, 2]`.
pub fn bell_state(kind: BellKind) -> PureState {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let amps = match kind {
        BellKind::PhiPlus => [r, ZERO, ZERO, r],
        BellKind::PhiMinus => [r, ZERO, ZERO, -r],
        BellKind::PsiPlus => [ZERO, r, r, ZERO],
        BellKind::PsiMinus => [ZERO, r, -r, ZERO],
    };
    PureState::normalized(amps.to_vec(), vec![2, 2]).expect("Bell states are normalized")
}

/// Single-photon polarization states used by analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    pub fn label(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::A => 'A',
            Polarization::R => 'R',
            Polarization::L => 'L',
        }
    }

    /// H, V, D = (H+V)/√2, A = (H−V)/√2, R = (H+iV)/√2, L = (H−iV)/√2
    pub fn state(self) -> PureState {
        let i = C64::new(0.0, 1.0);
        let amps = match self {
            Polarization::H => [ONE, ZERO],
            Polarization::V => [ZERO, ONE],
            Polarization::D => [ONE, ONE],
            Polarization::A => [ONE, -ONE],
            Polarization::R => [ONE, i],
            Polarization::L => [ONE, -i],
        };
        PureState::normalized(amps.to_vec(), vec![2]).expect("nonzero amplitudes")
    }
}

/// Polarization rotation: `R(θ)|H⟩ = cosθ|H⟩ + sinθ|V⟩`,
/// `R(θ)|V⟩ = −sinθ|H⟩ + cosθ|V⟩`.
pub fn rotation(theta_deg: f64) -> CMatrix {
    let (s, c) = theta_deg.to_radians().sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
    )
}

/// Which photons of a pair pass through a decoherer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoheredPhotons {
    #[default]
    Both,
    First,
    Second,
}

impl DecoheredPhotons {
    fn photons(self) -> &'static [usize] {
        match self {
            DecoheredPhotons::Both => &[0, 1],
            DecoheredPhotons::First => &[0],
            DecoheredPhotons::Second => &[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecohererConfig {
    /// Rotation applied between the two time tags, degrees; 90 is ideal
    /// compensation.
    alpha: f64,
    #[serde(default)]
    apply_to: DecoheredPhotons,
}

impl DecohererConfig {
    pub fn new(alpha: f64, apply_to: DecoheredPhotons) -> Result<Self> {
        if !(0.0..=90.0).contains(&alpha) {
            return Err(Error::AngleOutOfRange(alpha));
        }
        Ok(Self { alpha, apply_to })
    }

    pub fn both(alpha: f64) -> Result<Self> {
        Self::new(alpha, DecoheredPhotons::Both)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn apply_to(&self) -> DecoheredPhotons {
        self.apply_to
    }
}

const TIME_LEVELS: usize = 3;

/// `|H⟩⟨H| ⊗ 1 + |V⟩⟨V| ⊗ X₃` on (polarization, time), where `X₃` advances the
/// time level by one.
fn time_tag() -> CMatrix {
    let n = 2 * TIME_LEVELS;
    let mut m = CMatrix::zeros(n, n);
    for t in 0..TIME_LEVELS {
        m[(t, t)] = ONE;
        m[(TIME_LEVELS + (t + 1) % TIME_LEVELS, TIME_LEVELS + t)] = ONE;
    }
    m
}

/// Entangles each treated photon's polarization with a three-level arrival
/// time (tag on V, rotate by `alpha`, tag on V again) and traces the time
/// out.
pub fn decohere_pair(rho: &DensityMatrix, cfg: &DecohererConfig) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let dims = [2, 2, TIME_LEVELS, TIME_LEVELS];
    let ancilla = PureState::basis(vec![TIME_LEVELS], 0)?.to_density();
    let mut joint = DensityMatrix::new(rho.elements().clone(), vec![2, 2])?
        .tensor(&ancilla)
        .tensor(&ancilla)
        .elements()
        .clone();
    let tag = time_tag();
    let rot = rotation(cfg.alpha);
    for &photon in cfg.apply_to.photons() {
        let tag_full = embed_operator(&tag, &[photon, 2 + photon], &dims)?;
        let rot_full = embed_operator(&rot, &[photon], &dims)?;
        let u = &tag_full * rot_full * &tag_full;
        joint = &u * joint * u.adjoint();
    }
    DensityMatrix::new(
        crate::quantum::partial_trace_operator(&joint, &dims, &[0, 1])?,
        vec![2, 2],
    )
}

/// Maximal Bell parameter of `source` after symmetric decoherence at `alpha`.
pub fn decohered_s_max(source: BellKind, alpha: f64) -> Result<f64> {
    let rho = decohere_pair(&bell_state(source).to_density(), &DecohererConfig::both(alpha)?)?;
    s_max(&rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub target: f64,
    pub alpha: f64,
    pub achieved: f64,
}

const CALIBRATION_TOL: f64 = 1e-6;

/// Range of S_MAX reachable on the branch adjacent to ideal compensation,
/// with the branch's lower alpha: `(alpha_low, s_low, s_high)`.
pub fn calibration_branch(source: BellKind) -> Result<(f64, f64, f64)> {
    let scan: Vec<f64> = (0..=90)
        .map(|a| decohered_s_max(source, a as f64))
        .collect::<Result<_>>()?;
    let low = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if let Some(k) = (low..90).find(|&k| scan[k + 1] <= scan[k]) {
        return Err(Error::NonMonotonic { alpha: k as f64 });
    }
    Ok((low as f64, scan[low], scan[90]))
}

/// Finds the decoherer angle at which `source` reaches `target_s_max`.
///
/// A 91-point scan locates the minimum of the response; the search runs on
/// the monotone branch from that minimum up to 90°.
pub fn calibrate_alpha(target_s_max: f64, source: BellKind) -> Result<Calibration> {
    let (mut lo, s_lo, s_hi) = calibration_branch(source)?;
    if !(s_lo - 1e-12..=s_hi + 1e-12).contains(&target_s_max) {
        return Err(Error::TargetOutOfRange {
            target: target_s_max,
            min: s_lo,
            max: s_hi,
        });
    }
    let mut hi = 90.0;
    if (target_s_max - s_hi).abs() <= 1e-12 {
        return Ok(Calibration {
            target: target_s_max,
            alpha: hi,
            achieved: s_hi,
        });
    }
    if (target_s_max - s_lo).abs() <= 1e-12 {
        return Ok(Calibration {
            target: target_s_max,
            alpha: lo,
            achieved: s_lo,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    let mut achieved = decohered_s_max(source, mid)?;
    for _ in 0..200 {
        if (achieved - target_s_max).abs() <= 1e-3 * CALIBRATION_TOL || hi - lo < 1e-14 {
            break;
        }
        if achieved < target_s_max {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        achieved = decohered_s_max(source, mid)?;
    }
    if (achieved - target_s_max).abs() > CALIBRATION_TOL {
        return Err(Error::NonMonotonic { alpha: mid });
    }
    Ok(Calibration {
        target: target_s_max,
        alpha: mid,
        achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{fidelity_with_pure, max_abs, purity};
    use std::f64::consts::SQRT_2;

    #[test]
    fn bell_definitions() {
        let r = FRAC_1_SQRT_2;
        let pp = bell_state(BellKind::PhiPlus);
        let amps: Vec<f64> = pp.amplitudes().iter().map(|z| z.re).collect();
        assert_eq!(amps, vec![r, 0.0, 0.0, r]);
        let sp = bell_state(BellKind::PsiPlus);
        let amps: Vec<f64> = sp.amplitudes().iter().map(|z| z.re).collect();
        assert_eq!(amps, vec![0.0, r, r, 0.0]);
        for a in BellKind::ALL {
            for b in BellKind::ALL {
                let overlap = bell_state(a).inner(&bell_state(b)).unwrap().norm();
                assert!((overlap - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bell_kind_parses() {
        for k in BellKind::ALL {
            assert_eq!(k.to_string().parse::<BellKind>().unwrap(), k);
        }
        assert!("phi".parse::<BellKind>().is_err());
    }

    #[test]
    fn rotation_examples() {
        assert!(max_abs(&(rotation(0.0) - CMatrix::identity(2, 2))) < 1e-15);
        let v = rotation(90.0) * Polarization::H.state().amplitudes();
        assert!((v[0].norm()) < 1e-15 && (v[1] - ONE).norm() < 1e-15);
        for theta in [-30.0, 12.5, 45.0, 171.0] {
            let r = rotation(theta);
            assert!(max_abs(&(r.adjoint() * &r - CMatrix::identity(2, 2))) < 1e-12);
        }
    }

    #[test]
    fn rotation_45_maps_phi_minus_to_psi_plus() {
        // direct 4x4: R⊗R (|HH⟩ − |VV⟩)/√2 = (|HV⟩ + |VH⟩)/√2 with the sign convention above
        let r = rotation(45.0);
        let out = bell_state(BellKind::PhiMinus).evolve(&r.kronecker(&r)).unwrap();
        let overlap = bell_state(BellKind::PsiPlus).inner(&out).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoherer_at_90_keeps_purity() {
        let rho = bell_state(BellKind::PhiMinus).to_density();
        let out = decohere_pair(&rho, &DecohererConfig::both(90.0).unwrap()).unwrap();
        let r = rotation(90.0);
        let ideal = bell_state(BellKind::PhiMinus).evolve(&r.kronecker(&r)).unwrap();
        assert!((fidelity_with_pure(&out, &ideal).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_with_pure(&out, &bell_state(BellKind::PhiMinus)).unwrap() - 1.0).abs() < 1e-12);
        assert!(purity(&out) >= 1.0 - 1e-10);
    }

    #[test]
    fn decoherer_at_0_fully_dephases() {
        let rho = bell_state(BellKind::PhiMinus).to_density();
        let out = decohere_pair(&rho, &DecohererConfig::both(0.0).unwrap()).unwrap();
        let m = out.elements();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j && (i == 0 || i == 3) { 0.5 } else { 0.0 };
                assert!((m[(i, j)] - C64::new(expected, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn decoherer_rejects_bad_angles() {
        assert!(matches!(DecohererConfig::both(90.5), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(DecohererConfig::both(-1.0), Err(Error::AngleOutOfRange(_))));
    }

    #[test]
    fn decoherer_single_arm_differs_from_both() {
        let rho = bell_state(BellKind::PhiMinus).to_density();
        let one = decohere_pair(&rho, &DecohererConfig::new(50.0, DecoheredPhotons::First).unwrap()).unwrap();
        let two = decohere_pair(&rho, &DecohererConfig::both(50.0).unwrap()).unwrap();
        assert!(max_abs(&(one.elements() - two.elements())) > 1e-3);
        // one arm at alpha = 90 is a local rotation: the state stays pure
        let local = decohere_pair(&rho, &DecohererConfig::new(90.0, DecoheredPhotons::Second).unwrap()).unwrap();
        assert!(purity(&local) > 1.0 - 1e-12);
    }

    #[test]
    fn calibration_boundaries() {
        let top = calibrate_alpha(2.0 * SQRT_2, BellKind::PhiMinus).unwrap();
        assert_eq!(top.alpha, 90.0);
        let err = calibrate_alpha(3.0, BellKind::PhiMinus).unwrap_err();
        match err {
            Error::TargetOutOfRange { min, max, .. } => {
                assert!(min < 0.4 && (max - 2.0 * SQRT_2).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

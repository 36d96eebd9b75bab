//! Post-selected PBS parity-check purification of two shared pairs.
//!
//! The four-qubit register is ordered (A1, B1, A2, B2): pair 1 is (A1, B1),
//! pair 2 is (A2, B2). Alice holds A1 and A2, Bob holds B1 and B2. After the
//! parity checks Alice measures A1 and Bob measures B2 in the ±45° basis;
//! the pair (A2, B1) is kept when both see `|+⟩`.

use serde::{Deserialize, Serialize};

use crate::channels::{bell_state, decohere_pair, rotation, BellKind, DecohererConfig, Polarization};
use crate::quantum::{
    apply_channel, embed_operator, CMatrix, DensityMatrix, KrausChannel, Tensor, ONE,
};
use crate::{Error, Result};

pub const A1: usize = 0;
pub const B1: usize = 1;
pub const A2: usize = 2;
pub const B2: usize = 3;

const REGISTER: [usize; 4] = [2, 2, 2, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    fn qubits(self) -> [usize; 2] {
        match self {
            Side::Alice => [A1, A2],
            Side::Bob => [B1, B2],
        }
    }
}

/// Two pairs shared between Alice and Bob, dims `[2, 2, 2, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPairState(DensityMatrix);

impl TwoPairState {
    pub fn from_pairs(pair1: &DensityMatrix, pair2: &DensityMatrix) -> Result<Self> {
        for p in [pair1, pair2] {
            if p.dim() != 4 {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    found: p.dim(),
                });
            }
        }
        let joint = DensityMatrix::new(pair1.elements().clone(), vec![2, 2])?
            .tensor(&DensityMatrix::new(pair2.elements().clone(), vec![2, 2])?);
        Ok(Self(joint))
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.0
    }
}

/// Projector onto even H/V parity (`|HH⟩`, `|VV⟩`) of one party's two
/// photons; identity on the other party.
pub fn parity_projector(side: Side) -> KrausChannel {
    let mut even = CMatrix::zeros(4, 4);
    even[(0, 0)] = ONE;
    even[(3, 3)] = ONE;
    let op = embed_operator(&even, &side.qubits(), &REGISTER).expect("static register layout");
    KrausChannel::post_selection(op).expect("projectors are contractions")
}

/// CNOT with the given control and target on an `n_qubits` register:
/// `|V⟩_C` flips the target between H and V.
pub fn cnot(control: usize, target: usize, n_qubits: usize) -> Result<CMatrix> {
    if control == target {
        return Err(Error::SameQubit(control));
    }
    let mut gate = CMatrix::zeros(4, 4);
    gate[(0, 0)] = ONE; // HH -> HH
    gate[(1, 1)] = ONE; // HV -> HV
    gate[(3, 2)] = ONE; // VH -> VV
    gate[(2, 3)] = ONE; // VV -> VH
    embed_operator(&gate, &[control, target], &vec![2; n_qubits])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationOutcome {
    /// Kept pair on (A2, B1), i.e. modes a2' and b1'.
    pub output: DensityMatrix,
    /// Joint probability of both even-parity events and both `|+⟩` outcomes.
    pub success_probability: f64,
}

/// Kraus operator for the full post-selection: both parity checks, then
/// `|+⟩⟨+|` on A1 and B2.
pub fn post_selection_operator() -> CMatrix {
    let plus = Polarization::D.state().projector();
    let both_plus = embed_operator(&plus.kronecker(&plus), &[A1, B2], &REGISTER).expect("static layout");
    let alice = parity_projector(Side::Alice).operators()[0].clone();
    let bob = parity_projector(Side::Bob).operators()[0].clone();
    both_plus * bob * alice
}

pub fn purify(pair1: &DensityMatrix, pair2: &DensityMatrix, pre_rotate_45: bool) -> Result<PurificationOutcome> {
    let mut joint = TwoPairState::from_pairs(pair1, pair2)?.0;
    if pre_rotate_45 {
        let r = rotation(45.0);
        let u = r.kronecker(&r).kronecker(&r).kronecker(&r);
        joint = joint.transform(&u)?;
    }
    let channel = KrausChannel::post_selection(post_selection_operator())?;
    let (selected, success_probability) = apply_channel(&joint, &channel)?.into_kept()?;
    // trace keeps (B1, A2); swap to (A2, B1)
    let output = selected.partial_trace(&[B1, A2])?.permute(&[1, 0])?;
    Ok(PurificationOutcome {
        output,
        success_probability,
    })
}

/// Bell state the protocol produces from two copies of `source`.
pub fn purification_target(source: BellKind, pre_rotate_45: bool) -> BellKind {
    if !pre_rotate_45 {
        return source;
    }
    let r = rotation(45.0);
    let rotated = bell_state(source)
        .evolve(&r.kronecker(&r))
        .expect("two-qubit rotation");
    BellKind::ALL
        .into_iter()
        .max_by(|a, b| {
            let fa = bell_state(*a).inner(&rotated).unwrap().norm();
            let fb = bell_state(*b).inner(&rotated).unwrap().norm();
            fa.total_cmp(&fb)
        })
        .unwrap_or(source)
}

/// Inputs and result of the decohere-then-purify pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoheredPurification {
    pub input_fw: DensityMatrix,
    pub input_bw: DensityMatrix,
    pub outcome: PurificationOutcome,
}

/// Decoheres `source` at each angle and purifies the two pairs. The backward
/// pair occupies (A1, B1) and the forward pair (A2, B2).
pub fn purify_decohered_with(
    source: BellKind,
    alpha_forward: f64,
    alpha_backward: f64,
    pre_rotate_45: bool,
) -> Result<DecoheredPurification> {
    let src = bell_state(source).to_density();
    let input_fw = decohere_pair(&src, &DecohererConfig::both(alpha_forward)?)?;
    let input_bw = decohere_pair(&src, &DecohererConfig::both(alpha_backward)?)?;
    let outcome = purify(&input_bw, &input_fw, pre_rotate_45)?;
    Ok(DecoheredPurification {
        input_fw,
        input_bw,
        outcome,
    })
}

/// `|φ−⟩` source with the 45° pre-rotation.
pub fn purify_decohered(alpha_forward: f64, alpha_backward: f64) -> Result<DecoheredPurification> {
    purify_decohered_with(BellKind::PhiMinus, alpha_forward, alpha_backward, true)
}

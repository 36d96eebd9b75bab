//! Dense complex linear algebra for small multi-partite registers.
//!
//! States carry an explicit list of subsystem dimensions. Basis indices are
//! row-major over that list: the first subsystem is the most significant
//! digit, matching the Kronecker product `a ⊗ b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::tolerance::TOL;
use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

fn check_dims(dims: &[usize], dim: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) || dims.iter().product::<usize>() != dim {
        return Err(Error::InvalidDims {
            dims: dims.to_vec(),
            dim,
        });
    }
    Ok(())
}

/// Largest element of `m - m†` in absolute value.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†) / 2`
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in descending order; column `k` of the second
/// component is the eigenvector for eigenvalue `k`.
pub fn eig_hermitian(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let dev = hermitian_deviation(m);
    if dev > TOL.hermitian {
        return Err(Error::NotHermitian(dev));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    let (values, _) = eig_hermitian(m)?;
    Ok(values.last().copied().unwrap_or(0.0))
}

/// Digit decomposition of a basis index over `dims`.
fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn validate_selection(sel: &[usize], count: usize) -> Result<()> {
    if sel.is_empty() {
        return Err(Error::InvalidSelection);
    }
    for (k, &i) in sel.iter().enumerate() {
        if i >= count {
            return Err(Error::SubsystemOutOfRange { index: i, count });
        }
        if sel[..k].contains(&i) {
            return Err(Error::InvalidSelection);
        }
    }
    Ok(())
}

/// Lifts `op`, acting on `targets` (in the listed order), to the full
/// register described by `dims`; identity on every other subsystem.
pub fn embed_operator(op: &CMatrix, targets: &[usize], dims: &[usize]) -> Result<CMatrix> {
    validate_selection(targets, dims.len())?;
    let local: usize = targets.iter().map(|&t| dims[t]).product();
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::DimensionMismatch {
            expected: local,
            found: op.nrows(),
        });
    }
    let total: usize = dims.iter().product();
    let split: Vec<(usize, Vec<usize>)> = (0..total)
        .map(|i| {
            let d = digits(i, dims);
            let sub = targets.iter().fold(0, |acc, &t| acc * dims[t] + d[t]);
            let rest = d
                .iter()
                .enumerate()
                .filter(|(k, _)| !targets.contains(k))
                .map(|(_, &v)| v)
                .collect();
            (sub, rest)
        })
        .collect();
    let mut out = CMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            if split[i].1 == split[j].1 {
                out[(i, j)] = op[(split[i].0, split[j].0)];
            }
        }
    }
    Ok(out)
}

/// Partial trace of an arbitrary (not necessarily normalized) operator.
/// The kept subsystems appear in their original order.
pub fn partial_trace_operator(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    check_dims(dims, m.nrows())?;
    validate_selection(keep, dims.len())?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let total = m.nrows();
    let index: Vec<(usize, usize)> = (0..total)
        .map(|i| {
            let d = digits(i, dims);
            let kept = keep.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
            let rest = traced.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
            (kept, rest)
        })
        .collect();
    let out_dim: usize = kept_dims.iter().product();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for i in 0..total {
        for j in 0..total {
            if index[i].1 == index[j].1 {
                out[(index[i].0, index[j].0)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Things that combine by Kronecker product with concatenated dims.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, amplitudes.len())?;
        let amplitudes = CVector::from_vec(amplitudes);
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > TOL.norm {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(Self { amplitudes, dims })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect(), dims)
    }

    /// Computational basis state `index` over `dims`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let d: usize = dims.iter().product();
        if index >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: index,
            });
        }
        let mut amps = vec![ZERO; d];
        amps[index] = ONE;
        Self::new(amps, dims)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `U|ψ⟩` for a unitary `U`.
    pub fn evolve(&self, unitary: &CMatrix) -> Result<PureState> {
        if unitary.ncols() != self.dim() || unitary.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.ncols(),
            });
        }
        Self::new((unitary * &self.amplitudes).iter().copied().collect(), self.dims.clone())
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            elements: hermitize(&self.projector()),
            dims: self.dims.clone(),
        }
    }
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            dims,
        }
    }
}

/// A physical (Hermitian, unit-trace, positive semidefinite) density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixJson", into = "DensityMatrixJson")]
pub struct DensityMatrix {
    elements: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates and wraps `elements`. Small anti-Hermitian rounding residue
    /// is symmetrized away after the check.
    pub fn new(elements: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::DimensionMismatch {
                expected: elements.nrows(),
                found: elements.ncols(),
            });
        }
        check_dims(&dims, elements.nrows())?;
        let dev = hermitian_deviation(&elements);
        if dev > TOL.hermitian {
            return Err(Error::NotHermitian(dev));
        }
        let trace = elements.trace();
        if (trace.re - 1.0).abs() > TOL.trace || trace.im.abs() > TOL.trace {
            return Err(Error::InvalidTrace(trace.re));
        }
        let elements = hermitize(&elements);
        let low = min_eigenvalue(&elements)?;
        if low < TOL.min_eigenvalue {
            return Err(Error::NotPositive(low));
        }
        Ok(Self { elements, dims })
    }

    /// Divides by the trace, then validates.
    pub fn from_unnormalized(elements: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let trace = elements.trace().re;
        if trace.abs() <= TOL.null_weight {
            return Err(Error::NullOutcome);
        }
        Self::new(elements.unscale(trace), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self {
            elements: CMatrix::identity(d, d).unscale(d as f64),
            dims,
        }
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::InvalidSelection)?;
        let d = first.1.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, rho) in parts {
            if rho.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: rho.dim(),
                });
            }
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            acc += rho.elements.scale(*w);
        }
        Self::new(acc, first.1.dims.clone())
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    /// `Tr[ρ A]`
    pub fn expectation(&self, op: &CMatrix) -> Result<C64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok((&self.elements * op).trace())
    }

    /// `U ρ U†`
    pub fn transform(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.nrows() != self.dim() || unitary.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.ncols(),
            });
        }
        Self::new(unitary * &self.elements * unitary.adjoint(), self.dims.clone())
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let out = partial_trace_operator(&self.elements, &self.dims, keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        Self::new(out, keep.iter().map(|&k| self.dims[k]).collect())
    }

    /// Reorders subsystems: output subsystem `k` is input subsystem `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        validate_selection(order, self.dims.len())?;
        if order.len() != self.dims.len() {
            return Err(Error::InvalidSelection);
        }
        let new_dims: Vec<usize> = order.iter().map(|&k| self.dims[k]).collect();
        let d = self.dim();
        // map[new index] = old index
        let map: Vec<usize> = (0..d)
            .map(|i| {
                let nd = digits(i, &new_dims);
                let mut od = vec![0; order.len()];
                for (k, &src) in order.iter().enumerate() {
                    od[src] = nd[k];
                }
                od.iter().zip(&self.dims).fold(0, |acc, (&v, &dm)| acc * dm + v)
            })
            .collect();
        let elements = CMatrix::from_fn(d, d, |i, j| self.elements[(map[i], map[j])]);
        Ok(Self {
            elements,
            dims: new_dims,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("density matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            elements: self.elements.kronecker(&other.elements),
            dims,
        }
    }
}

impl From<&PureState> for DensityMatrix {
    fn from(psi: &PureState) -> Self {
        psi.to_density()
    }
}

/// Interchange format: `{dims, re, im}` with row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DensityMatrixJson {
    dims: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        let d = rho.dim();
        let row = |f: fn(&C64) -> f64, i: usize| (0..d).map(|j| f(&rho.elements[(i, j)])).collect();
        Self {
            re: (0..d).map(|i| row(|z| z.re, i)).collect(),
            im: (0..d).map(|i| row(|z| z.im, i)).collect(),
            dims: rho.dims,
        }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(raw: DensityMatrixJson) -> Result<Self> {
        let d = raw.re.len();
        if raw.im.len() != d || raw.re.iter().chain(&raw.im).any(|r| r.len() != d) {
            return Err(Error::InvalidDims { dims: raw.dims, dim: d });
        }
        let m = CMatrix::from_fn(d, d, |i, j| C64::new(raw.re[i][j], raw.im[i][j]));
        // Keep the stored values bit-exact when they already pass validation.
        let checked = DensityMatrix::new(m.clone(), raw.dims)?;
        Ok(DensityMatrix {
            elements: m,
            dims: checked.dims,
        })
    }
}

/// `⟨ψ|ρ|ψ⟩`
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.dim(),
        });
    }
    let a = psi.amplitudes();
    Ok(a.dotc(&(rho.elements() * a)).re)
}

/// `Tr[ρ²]`
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.elements().iter().map(|z| z.norm_sqr()).sum()
}

/// A set of Kraus operators. Post-selected (trace-decreasing) maps are
/// allowed when `trace_preserving` is false.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    trace_preserving: bool,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>, trace_preserving: bool) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidChannel("no operators".into()))?;
        let (rows, cols) = first.shape();
        if operators.iter().any(|k| k.shape() != (rows, cols)) {
            return Err(Error::InvalidChannel("operators differ in shape".into()));
        }
        let mut sum = CMatrix::zeros(cols, cols);
        for k in &operators {
            sum += k.adjoint() * k;
        }
        if trace_preserving {
            let dev = max_abs(&(sum - CMatrix::identity(cols, cols)));
            if dev > TOL.completeness {
                return Err(Error::InvalidChannel(format!(
                    "Σ K†K deviates from identity by {dev:e}"
                )));
            }
        } else {
            let (values, _) = eig_hermitian(&hermitize(&sum))?;
            if values[0] > 1.0 + TOL.completeness {
                return Err(Error::InvalidChannel(format!(
                    "Σ K†K has eigenvalue {} > 1",
                    values[0]
                )));
            }
        }
        Ok(Self {
            operators,
            trace_preserving,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![CMatrix::identity(dim, dim)],
            trace_preserving: true,
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u], true)
    }

    /// Single-operator post-selection (e.g. a projector).
    pub fn post_selection(op: CMatrix) -> Result<Self> {
        Self::new(vec![op], false)
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn input_dim(&self) -> usize {
        self.operators[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.operators[0].nrows()
    }

    /// `Σ K ρ K†` without renormalization.
    pub fn apply_unnormalized(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: rho.nrows(),
            });
        }
        let d = self.output_dim();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.operators {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }
}

/// Result of applying a channel: a renormalized state with its weight, or
/// an explicit null outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelOutcome {
    Kept { state: DensityMatrix, weight: f64 },
    Null,
}

impl ChannelOutcome {
    pub fn weight(&self) -> f64 {
        match self {
            Self::Kept { weight, .. } => *weight,
            Self::Null => 0.0,
        }
    }

    pub fn state(&self) -> Option<&DensityMatrix> {
        match self {
            Self::Kept { state, .. } => Some(state),
            Self::Null => None,
        }
    }

    pub fn into_kept(self) -> Result<(DensityMatrix, f64)> {
        match self {
            Self::Kept { state, weight } => Ok((state, weight)),
            Self::Null => Err(Error::NullOutcome),
        }
    }
}

pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel) -> Result<ChannelOutcome> {
    let out = ch.apply_unnormalized(rho.elements())?;
    let weight = out.trace().re;
    if weight <= TOL.null_weight {
        return Ok(ChannelOutcome::Null);
    }
    let dims = if ch.output_dim() == rho.dim() {
        rho.dims().to_vec()
    } else {
        vec![ch.output_dim()]
    };
    let state = DensityMatrix::new(hermitize(&out).unscale(weight), dims)?;
    Ok(ChannelOutcome::Kept { state, weight })
}

/// Random density matrix `G G† / Tr` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>, rank: usize) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = CMatrix::from_fn(d, rank.max(1), |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix {
        elements: hermitize(&m.unscale(tr)),
        dims,
    }
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_diagonal(&CVector::from_fn(dim, |i, _| {
        let z = r[(i, i)];
        if z.norm() == 0.0 {
            ONE
        } else {
            z / z.norm()
        }
    }));
    q * phases
}

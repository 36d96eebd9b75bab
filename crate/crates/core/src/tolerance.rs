//! Numerical tolerances shared by every module.

/// The single record of structural and physicality tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Squared-norm slack for pure states.
    pub norm: f64,
    /// Max element deviation from Hermiticity.
    pub hermitian: f64,
    /// Trace deviation from 1.
    pub trace: f64,
    /// Lowest eigenvalue still accepted as physical.
    pub min_eigenvalue: f64,
    /// Completeness slack for Kraus operators.
    pub completeness: f64,
    /// Post-selection weights at or below this are treated as a null outcome.
    pub null_weight: f64,
}

pub const TOL: Tolerances = Tolerances {
    norm: 1e-12,
    hermitian: 1e-10,
    trace: 1e-10,
    min_eigenvalue: -1e-9,
    completeness: 1e-10,
    null_weight: 1e-14,
};

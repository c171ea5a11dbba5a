//! States, operators, superoperators and the scalar functionals driving the
//! feedback laws.
//!
//! Conventions: `ħ = 1`, Hilbert space dimension `n = 2^N` for `N` qubits,
//! computational basis ordered big-endian (`|00⟩, |01⟩, |10⟩, |11⟩` for two
//! qubits).

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, commutator, frobenius, hermitian_eigenvalues, hermiticity_defect, hermitize, CMatrix,
    CVector,
};

/// Tolerance ladder: exact algebraic identities.
pub const TOL_ALGEBRA: f64 = 1e-12;
/// Tolerance ladder: structural conditions on operators and states.
pub const TOL_STRUCTURE: f64 = 1e-10;
/// Tolerance ladder: positive semidefiniteness after stochastic integration.
pub const TOL_PSD: f64 = 1e-8;
/// Tolerance on the trace of a density matrix.
pub const TOL_TRACE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Pauli building blocks
// ---------------------------------------------------------------------------

pub fn identity2() -> CMatrix {
    CMatrix::identity(2, 2)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)],
    )
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0)],
    )
}

/// N-fold tensor product `σz ⊗ σz ⊗ … ⊗ σz`; for two qubits this is the
/// dephasing direction `σz ⊗ σz`.
pub fn dephasing_operator(n_qubits: usize) -> CMatrix {
    let mut op = sigma_z();
    for _ in 1..n_qubits {
        op = op.kronecker(&sigma_z());
    }
    op
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// An `n×n` Hermitian, unit-trace, positive-semidefinite state.
///
/// Validation happens once at construction; the integrator re-establishes
/// the invariants through `sme::sanitize` rather than re-checking here.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || n != mat.ncols() {
            return Err(Error::InvalidDimension(format!(
                "density matrix must be square and nonempty, got {}x{}",
                n,
                mat.ncols()
            )));
        }
        let defect = hermiticity_defect(&mat);
        if defect > TOL_STRUCTURE {
            return Err(Error::NotHermitian { defect });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!(
                "trace {} + {}i is not 1",
                tr.re, tr.im
            )));
        }
        let min_eig = hermitian_eigenvalues(&hermitize(&mat))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -TOL_PSD {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min_eig:.3e} below PSD tolerance"
            )));
        }
        Ok(Self { mat })
    }

    /// Wrap a matrix whose invariants are guaranteed by the caller
    /// (sanitized integrator output, analytic constructions).
    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn from_pure(ket: &CVector) -> Result<Self> {
        let nrm = ket.norm();
        if (nrm - 1.0).abs() > TOL_STRUCTURE {
            return Err(Error::InvalidState(format!("ket norm {nrm} is not 1")));
        }
        Ok(Self::new_unchecked(ket * ket.adjoint()))
    }

    /// Maximally mixed state `I/n`, the intermediate attractor of the
    /// two-step strategy.
    pub fn maximally_mixed(n: usize) -> Self {
        Self::new_unchecked(CMatrix::identity(n, n) * cplx(1.0 / n as f64, 0.0))
    }

    /// Diagonal state from populations (must sum to 1).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!(
                "populations sum to {sum}, expected 1"
            )));
        }
        if p.iter().any(|&x| x < -TOL_PSD) {
            return Err(Error::InvalidState("negative population".into()));
        }
        let v = CVector::from_iterator(p.len(), p.iter().map(|&x| cplx(x, 0.0)));
        Ok(Self::new_unchecked(CMatrix::from_diagonal(&v)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }
}

// ---------------------------------------------------------------------------
// Hermitian operators
// ---------------------------------------------------------------------------

/// An `n×n` Hermitian operator (Hamiltonian or observable).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = hermiticity_defect(&mat);
        if defect > TOL_ALGEBRA {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self { mat })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&x| cplx(x, 0.0)));
        Self {
            mat: CMatrix::from_diagonal(&v),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

// ---------------------------------------------------------------------------
// Target entangled states
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The GHZ/Bell family `(|ζ⟩ ± |ζᶜ⟩)/√2`, written as a bit string plus a
/// relative sign. `ζᶜ` flips every bit of `ζ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSpec {
    bits: Vec<bool>,
    sign: Sign,
}

impl TargetSpec {
    pub fn new(bits: &str, sign: Sign) -> Result<Self> {
        let parsed: Result<Vec<bool>> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfig(format!(
                    "target bit string may contain only 0/1, got '{other}'"
                ))),
            })
            .collect();
        let bits = parsed?;
        if bits.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "target needs at least 2 qubits, got {}",
                bits.len()
            )));
        }
        Ok(Self { bits, sign })
    }

    pub fn n_qubits(&self) -> usize {
        self.bits.len()
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Basis index of `|ζ⟩` (big-endian).
    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    /// Basis index of the complement `|ζᶜ⟩`.
    pub fn complement_index(&self) -> usize {
        let dim = 1usize << self.bits.len();
        (dim - 1) ^ self.index()
    }
}

/// Pure density matrix of the entangled target `(|ζ⟩ ± |ζᶜ⟩)/√2`.
///
/// The result is rank one with exactly four entries of magnitude 1/2 at the
/// `(idx(ζ), idx(ζᶜ))` corners.
pub fn ghz_state(target: &TargetSpec) -> DensityMatrix {
    let n = target.n_qubits();
    let dim = 1usize << n;
    // Corner entries are written out exactly (1/√2 squared rounds away from
    // 1/2 in floating point), which keeps the target an exact fixed point of
    // the integrator.
    let i = target.index();
    let ic = target.complement_index();
    let s = target.sign().value();
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, i)] = cplx(0.5, 0.0);
    m[(ic, ic)] = cplx(0.5, 0.0);
    m[(i, ic)] = cplx(0.5 * s, 0.0);
    m[(ic, i)] = cplx(0.5 * s, 0.0);
    DensityMatrix::new_unchecked(m)
}

// ---------------------------------------------------------------------------
// Measured observable
// ---------------------------------------------------------------------------

/// Validate a diagonal observable of the degenerate pattern
/// `diag(λ_d, λ_2, …, λ_{n-1}, λ_d)` with every interior `λ_i ≠ λ_d`, and
/// return it together with the shared eigenvalue `λ_d`.
///
/// Interior eigenvalues may repeat among themselves; only coincidence with
/// `λ_d` is rejected.
pub fn build_observable(diag_entries: &[f64]) -> Result<(HermitianOperator, f64)> {
    let n = diag_entries.len();
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::InvalidDimension(format!(
            "observable diagonal length must be 2^N with N >= 2, got {n}"
        )));
    }
    let lambda_d = diag_entries[0];
    if diag_entries[n - 1] != lambda_d {
        return Err(Error::ObservablePattern(format!(
            "first and last eigenvalues must coincide, got {} and {}",
            lambda_d,
            diag_entries[n - 1]
        )));
    }
    for (i, &l) in diag_entries.iter().enumerate().take(n - 1).skip(1) {
        if l == lambda_d {
            return Err(Error::ObservablePattern(format!(
                "interior eigenvalue at index {i} equals the degenerate eigenvalue {lambda_d}"
            )));
        }
    }
    Ok((HermitianOperator::from_real_diagonal(diag_entries), lambda_d))
}

/// Convenience constructor `Σ_i a_i σz^{(i)}`; the result is validated
/// against the degenerate diagonal pattern rather than trusted.
pub fn observable_from_sigma_z_weights(weights: &[f64]) -> Result<(HermitianOperator, f64)> {
    let n_qubits = weights.len();
    if n_qubits < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 qubits, got {n_qubits}"
        )));
    }
    let dim = 1usize << n_qubits;
    let mut diag = vec![0.0; dim];
    for (basis, d) in diag.iter_mut().enumerate() {
        for (i, &a) in weights.iter().enumerate() {
            let bit = (basis >> (n_qubits - 1 - i)) & 1;
            *d += a * if bit == 0 { 1.0 } else { -1.0 };
        }
    }
    build_observable(&diag)
}

// ---------------------------------------------------------------------------
// System specification
// ---------------------------------------------------------------------------

/// Full description of the controlled system: free Hamiltonian `H0`, control
/// Hamiltonians `H1`/`H2`, measured observable `A`, measurement strength and
/// efficiency, and the target state.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    n_qubits: usize,
    h0: HermitianOperator,
    h1: HermitianOperator,
    h2: HermitianOperator,
    observable: HermitianOperator,
    gamma_meas: f64,
    eta_meas: f64,
    target: DensityMatrix,
    lambda_d: f64,
    dephasing_op: CMatrix,
}

impl SystemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_qubits: usize,
        h0: HermitianOperator,
        h1: HermitianOperator,
        h2: HermitianOperator,
        observable: HermitianOperator,
        gamma_meas: f64,
        eta_meas: f64,
        target: DensityMatrix,
    ) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::InvalidDimension(format!(
                "system needs at least 2 qubits, got {n_qubits}"
            )));
        }
        let dim = 1usize << n_qubits;
        for (name, d) in [
            ("h0", h0.dim()),
            ("h1", h1.dim()),
            ("h2", h2.dim()),
            ("observable", observable.dim()),
            ("target", target.dim()),
        ] {
            if d != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has dimension {d}, expected {dim}"
                )));
            }
        }
        if !(gamma_meas > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "measurement strength must be positive, got {gamma_meas}"
            )));
        }
        if !(eta_meas > 0.0 && eta_meas <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "measurement efficiency must lie in (0, 1], got {eta_meas}"
            )));
        }

        // A must be diagonal with the degenerate pattern.
        let a = observable.matrix();
        let mut off = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    off = off.max(a[(i, j)].norm());
                }
            }
        }
        if off > TOL_ALGEBRA {
            return Err(Error::ObservablePattern(format!(
                "observable must be diagonal, largest off-diagonal entry {off:.3e}"
            )));
        }
        let diag: Vec<f64> = (0..dim).map(|i| a[(i, i)].re).collect();
        let (_, lambda_d) = build_observable(&diag)?;

        // Target must be an eigenstate of A: A ρ_d = λ_d ρ_d.
        let resid = a * target.matrix() - target.matrix() * cplx(lambda_d, 0.0);
        let defect = resid.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > TOL_STRUCTURE {
            return Err(Error::ConditionViolation {
                condition: "target-eigenstate",
                detail: format!("max |A ρ_d − λ_d ρ_d| = {defect:.3e}"),
            });
        }

        // First structural condition on H1: [H0 + H1, ρ_d] = 0.
        let drift = h0.matrix() + h1.matrix();
        let comm = commutator(&drift, target.matrix());
        let cnorm = frobenius(&comm);
        if cnorm > TOL_STRUCTURE {
            return Err(Error::ConditionViolation {
                condition: "target-commutation",
                detail: format!("‖[H0+H1, ρ_d]‖_F = {cnorm:.3e}"),
            });
        }

        let dephasing_op = dephasing_operator(n_qubits);
        Ok(Self {
            n_qubits,
            h0,
            h1,
            h2,
            observable,
            gamma_meas,
            eta_meas,
            target,
            lambda_d,
            dephasing_op,
        })
    }

    /// The worked two-qubit system: `H0 = diag(1,-1,-1,1)`,
    /// `H1 = I⊗σx − σx⊗I`, `H2 = σz⊗I`, `A = σz⊗σz`, Bell target
    /// `(|00⟩ + |11⟩)/√2`.
    pub fn two_qubit_standard(eta_meas: f64, gamma_meas: f64) -> Result<Self> {
        let h0 = HermitianOperator::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]);
        let h1 = HermitianOperator::new(
            identity2().kronecker(&sigma_x()) - sigma_x().kronecker(&identity2()),
        )?;
        let h2 = HermitianOperator::new(sigma_z().kronecker(&identity2()))?;
        let (a, _) = build_observable(&[1.0, -1.0, -1.0, 1.0])?;
        let target = ghz_state(&TargetSpec::new("00", Sign::Plus)?);
        Self::new(2, h0, h1, h2, a, gamma_meas, eta_meas, target)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }
    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }
    pub fn h1(&self) -> &HermitianOperator {
        &self.h1
    }
    pub fn h2(&self) -> &HermitianOperator {
        &self.h2
    }
    pub fn observable(&self) -> &HermitianOperator {
        &self.observable
    }
    pub fn gamma_meas(&self) -> f64 {
        self.gamma_meas
    }
    pub fn eta_meas(&self) -> f64 {
        self.eta_meas
    }
    pub fn target(&self) -> &DensityMatrix {
        &self.target
    }
    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }
    /// Direction of the stochastic dephasing Hamiltonian `Δ(t) = β(t)·σz⊗…⊗σz`.
    pub fn dephasing_direction(&self) -> &CMatrix {
        &self.dephasing_op
    }
}

// ---------------------------------------------------------------------------
// Superoperators
// ---------------------------------------------------------------------------

pub(crate) fn dissipator_raw(a: &CMatrix, rho: &CMatrix) -> CMatrix {
    let ad = a.adjoint();
    let ada = &ad * a;
    a * rho * ad - (&ada * rho + rho * ada) * cplx(0.5, 0.0)
}

pub(crate) fn backaction_raw(a: &CMatrix, rho: &CMatrix) -> CMatrix {
    let ad = a.adjoint();
    let sum = a + &ad;
    let expect = (&sum * rho).trace();
    a * rho + rho * ad - rho * expect
}

fn check_dims(op: &str, a: &HermitianOperator, rho: &DensityMatrix) -> Result<()> {
    if a.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{op}: operator is {}x{} but state is {}x{}",
            a.dim(),
            a.dim(),
            rho.dim(),
            rho.dim()
        )));
    }
    Ok(())
}

/// Measurement-induced decoherence `D[A]ρ = AρA† − (A†Aρ + ρA†A)/2`.
/// Traceless; Hermitian whenever `A` is.
pub fn dissipator(a: &HermitianOperator, rho: &DensityMatrix) -> Result<CMatrix> {
    check_dims("dissipator", a, rho)?;
    Ok(dissipator_raw(a.matrix(), rho.matrix()))
}

/// Measurement back-action `H[A]ρ = Aρ + ρA† − Tr[(A+A†)ρ]·ρ`, the
/// innovation gain multiplying the Wiener increment.
pub fn backaction(a: &HermitianOperator, rho: &DensityMatrix) -> Result<CMatrix> {
    check_dims("backaction", a, rho)?;
    Ok(backaction_raw(a.matrix(), rho.matrix()))
}

// ---------------------------------------------------------------------------
// Scalar functionals
// ---------------------------------------------------------------------------

/// Distance to the target, `V(ρ) = 1 − Tr²(ρ ρ_d) ∈ [0, 1]`.
pub fn distance_v(rho: &DensityMatrix, target: &DensityMatrix) -> f64 {
    assert_eq!(rho.dim(), target.dim(), "distance_v: dimension mismatch");
    let overlap = (rho.matrix() * target.matrix()).trace().re;
    1.0 - overlap * overlap
}

/// Distance to the maximally mixed state,
/// `V1(ρ) = Tr[(ρ − I/n)²] = Tr(ρ²) − 1/n ≥ 0`.
pub fn lyapunov_v1(rho: &DensityMatrix) -> f64 {
    let n = rho.dim() as f64;
    rho.purity() - 1.0 / n
}

pub(crate) fn control_signal_raw_mat(rho: &CMatrix, h2: &CMatrix, target: &CMatrix) -> f64 {
    let c = commutator(h2, rho) * cplx(0.0, 1.0);
    (c * target).trace().re
}

/// The feedback bracket `Tr(i[H2, ρ] ρ_d)`; real for Hermitian arguments,
/// and the quantity the delayed Lyapunov law multiplies by `−k`.
pub fn control_signal_raw(
    rho: &DensityMatrix,
    h2: &HermitianOperator,
    target: &DensityMatrix,
) -> Result<f64> {
    check_dims("control_signal_raw", h2, rho)?;
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch(
            "control_signal_raw: state and target dimensions differ".into(),
        ));
    }
    Ok(control_signal_raw_mat(
        rho.matrix(),
        h2.matrix(),
        target.matrix(),
    ))
}

//! Numerical validation of the structural conditions the control
//! Hamiltonians must satisfy.
//!
//! The two-step strategy needs (a) `[H0 + H1, ρ_d] = 0`, (b) the target to be
//! the only equilibrium of `ρ̇ = -i[H0 + H1, ρ]` inside the degenerate
//! eigenspace family of the observable, and (c) the maximally mixed state to
//! be the only equilibrium of `ρ̇ = -i[H0 + H1 + H2, ρ]` among states
//! commuting with the observable.
//!
//! (b) and (c) are established two ways: rejection sampling over each family
//! (reports the worst commutator norm seen) and a deterministic kernel-rank
//! check of the commutator map restricted to the family's subspace. The
//! kernel check is the one that catches spurious equilibria lying on
//! measure-zero directions, which sampling alone cannot hit.

use crate::error::{Error, Result};
use crate::linalg::{cplx, commutator, frobenius, symmetric_eigenvalues, CMatrix};
use crate::quantum::{DensityMatrix, SystemSpec, TOL_STRUCTURE};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;

/// Samples closer than this (Frobenius) to the reference equilibrium are
/// redrawn; commutator lower bounds degrade linearly near the equilibrium.
pub const REJECTION_TOL: f64 = 1e-6;
/// A sampled state counts as a spurious equilibrium when its commutator norm
/// falls at or below this.
pub const COMMUTATOR_TOL: f64 = 1e-8;
/// Second-smallest singular value of the restricted commutator map must
/// exceed this for the equilibrium to be unique in the family.
pub const KERNEL_TOL: f64 = 1e-7;

const SAMPLER_SEED: u64 = 0x5eed_ab1e;

/// Outcome of a successful validation run.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// `‖[H0+H1, ρ_d]‖_F`
    pub target_commutator: f64,
    /// States sampled in the degenerate-eigenspace family.
    pub eigenspace_samples: usize,
    /// Smallest `‖[H0+H1, ρ]‖_F` seen over the eigenspace family.
    pub min_eigenspace_commutator: f64,
    /// Second-smallest singular value of `[H0+H1, ·]` on the corner subspace
    /// (the smallest belongs to the target direction itself).
    pub eigenspace_kernel_margin: f64,
    /// States sampled in the commutant of the observable.
    pub commutant_samples: usize,
    /// Smallest `‖[H0+H1+H2, ρ]‖_F` seen over the commutant.
    pub min_commutant_commutator: f64,
    /// Second-smallest singular value of `[H0+H1+H2, ·]` on the commutant
    /// subspace (the smallest belongs to the identity direction).
    pub commutant_kernel_margin: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target commutator defect: {:.3e}", self.target_commutator)?;
        writeln!(
            f,
            "eigenspace uniqueness: {} samples, min commutator {:.3e}, kernel margin {:.3e}",
            self.eigenspace_samples,
            self.min_eigenspace_commutator,
            self.eigenspace_kernel_margin
        )?;
        write!(
            f,
            "commutant uniqueness: {} samples, min commutator {:.3e}, kernel margin {:.3e}",
            self.commutant_samples, self.min_commutant_commutator, self.commutant_kernel_margin
        )
    }
}

/// A state from the degenerate eigenspace family: support on the two corner
/// basis states only, `ρ11 = p`, `ρnn = 1-p`, `ρ1n = c` with `|c|² ≤ p(1-p)`.
fn sample_eigenspace_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let p: f64 = rng.random_range(0.0..1.0);
    let u: f64 = rng.random_range(0.0..1.0);
    let r = (u * p * (1.0 - p)).sqrt();
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let c = cplx(r * phi.cos(), r * phi.sin());
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, 0)] = cplx(p, 0.0);
    m[(dim - 1, dim - 1)] = cplx(1.0 - p, 0.0);
    m[(0, dim - 1)] = c;
    m[(dim - 1, 0)] = c.conj();
    m
}

/// A random state commuting with the observable: block-diagonal across the
/// eigenvalue groups of its diagonal, each block a normalized Wishart draw.
fn sample_commutant_state<R: Rng + ?Sized>(
    groups: &[Vec<usize>],
    dim: usize,
    rng: &mut R,
) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for group in groups {
        let k = group.len();
        let g = CMatrix::from_fn(k, k, |_, _| {
            cplx(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let block = &g * g.adjoint();
        for (bi, &i) in group.iter().enumerate() {
            for (bj, &j) in group.iter().enumerate() {
                m[(i, j)] = block[(bi, bj)];
            }
        }
    }
    let tr = m.trace().re;
    m * cplx(1.0 / tr, 0.0)
}

/// Group basis indices by equal observable eigenvalue.
fn eigenvalue_groups(spec: &SystemSpec) -> Vec<Vec<usize>> {
    let a = spec.observable().matrix();
    let dim = spec.dim();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..dim {
        let lam = a[(i, i)].re;
        match groups.iter_mut().find(|(l, _)| *l == lam) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((lam, vec![i])),
        }
    }
    groups.into_iter().map(|(_, idx)| idx).collect()
}

/// Hermitian basis of the corner subspace spanned by
/// `{e11, enn, (e1n + en1)/√2, i(e1n − en1)/√2}`.
fn corner_basis(dim: usize) -> Vec<CMatrix> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(4);
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, 0)] = cplx(1.0, 0.0);
    basis.push(m);
    let mut m = CMatrix::zeros(dim, dim);
    m[(dim - 1, dim - 1)] = cplx(1.0, 0.0);
    basis.push(m);
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, dim - 1)] = cplx(inv, 0.0);
    m[(dim - 1, 0)] = cplx(inv, 0.0);
    basis.push(m);
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, dim - 1)] = cplx(0.0, inv);
    m[(dim - 1, 0)] = cplx(0.0, -inv);
    basis.push(m);
    basis
}

/// Hermitian basis of the commutant subspace (block Hermitian matrices over
/// the eigenvalue groups).
fn commutant_basis(groups: &[Vec<usize>], dim: usize) -> Vec<CMatrix> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::new();
    for group in groups {
        for (a, &i) in group.iter().enumerate() {
            for &j in group.iter().skip(a) {
                if i == j {
                    let mut m = CMatrix::zeros(dim, dim);
                    m[(i, i)] = cplx(1.0, 0.0);
                    basis.push(m);
                } else {
                    let mut m = CMatrix::zeros(dim, dim);
                    m[(i, j)] = cplx(inv, 0.0);
                    m[(j, i)] = cplx(inv, 0.0);
                    basis.push(m);
                    let mut m = CMatrix::zeros(dim, dim);
                    m[(i, j)] = cplx(0.0, inv);
                    m[(j, i)] = cplx(0.0, -inv);
                    basis.push(m);
                }
            }
        }
    }
    basis
}

/// Singular values (ascending) of `E ↦ [h, E]` restricted to the span of
/// `basis`, computed from the Gram matrix of the mapped basis.
fn restricted_commutator_singular_values(h: &CMatrix, basis: &[CMatrix]) -> Vec<f64> {
    let d = basis.len();
    let images: Vec<CMatrix> = basis.iter().map(|e| commutator(h, e)).collect();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            // ⟨X, Y⟩ = Re Tr(X† Y); commutators of Hermitian matrices are
            // anti-Hermitian so the inner product is real anyway.
            let ip = (images[i].adjoint() * &images[j]).trace().re;
            gram[(i, j)] = ip;
        }
    }
    let mut evs = symmetric_eigenvalues(&gram);
    evs.sort_by(f64::total_cmp);
    evs.into_iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// Run checks (a)-(c) with `samples` random states per family.
///
/// Sampling is internally seeded, so the report is reproducible for a given
/// spec and sample count.
pub fn validate_hamiltonians(spec: &SystemSpec, samples: usize) -> Result<ValidationReport> {
    let dim = spec.dim();
    let drift = spec.h0().matrix() + spec.h1().matrix();
    let full = &drift + spec.h2().matrix();

    // (a) the target must commute with the uncontrolled drift.
    let target_commutator = frobenius(&commutator(&drift, spec.target().matrix()));
    if target_commutator > TOL_STRUCTURE {
        return Err(Error::ConditionViolation {
            condition: "target-commutation",
            detail: format!("‖[H0+H1, ρ_d]‖_F = {target_commutator:.3e}"),
        });
    }

    // (b) kernel of [H0+H1, ·] on the corner subspace must be exactly the
    // target direction.
    let sv = restricted_commutator_singular_values(&drift, &corner_basis(dim));
    let eigenspace_kernel_margin = sv[1];
    if eigenspace_kernel_margin <= KERNEL_TOL {
        return Err(Error::ConditionViolation {
            condition: "eigenspace-equilibrium-uniqueness",
            detail: format!(
                "the drift H0+H1 annihilates a second direction in the degenerate eigenspace \
                 (singular values {:.3e}, {:.3e})",
                sv[0], sv[1]
            ),
        });
    }

    // (c) kernel of [H0+H1+H2, ·] on the commutant subspace must be exactly
    // the identity direction.
    let groups = eigenvalue_groups(spec);
    let sv = restricted_commutator_singular_values(&full, &commutant_basis(&groups, dim));
    let commutant_kernel_margin = sv[1];
    if commutant_kernel_margin <= KERNEL_TOL {
        return Err(Error::ConditionViolation {
            condition: "commutant-equilibrium-uniqueness",
            detail: format!(
                "H0+H1+H2 annihilates a second observable-commuting direction \
                 (singular values {:.3e}, {:.3e})",
                sv[0], sv[1]
            ),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLER_SEED);

    // Sampled version of (b): no corner state away from the target may
    // commute with the drift.
    let mut min_eig = f64::INFINITY;
    let mut accepted = 0usize;
    while accepted < samples {
        let rho = sample_eigenspace_state(dim, &mut rng);
        if frobenius(&(&rho - spec.target().matrix())) < REJECTION_TOL {
            continue;
        }
        accepted += 1;
        let cn = frobenius(&commutator(&drift, &rho));
        if cn <= COMMUTATOR_TOL {
            return Err(Error::ConditionViolation {
                condition: "eigenspace-equilibrium-uniqueness",
                detail: format!(
                    "state with p = {:.6}, ρ1n = {:.6}+{:.6}i commutes with H0+H1 (norm {:.3e})",
                    rho[(0, 0)].re,
                    rho[(0, dim - 1)].re,
                    rho[(0, dim - 1)].im,
                    cn
                ),
            });
        }
        min_eig = min_eig.min(cn);
    }

    // Sampled version of (c).
    let mixed = DensityMatrix::maximally_mixed(dim);
    let mut min_comm = f64::INFINITY;
    accepted = 0;
    while accepted < samples {
        let rho = sample_commutant_state(&groups, dim, &mut rng);
        if frobenius(&(&rho - mixed.matrix())) < REJECTION_TOL {
            continue;
        }
        accepted += 1;
        let cn = frobenius(&commutator(&full, &rho));
        if cn <= COMMUTATOR_TOL {
            return Err(Error::ConditionViolation {
                condition: "commutant-equilibrium-uniqueness",
                detail: format!(
                    "observable-commuting state commutes with H0+H1+H2 (norm {cn:.3e}; \
                     diagonal {:?})",
                    (0..dim).map(|i| rho[(i, i)].re).collect::<Vec<_>>()
                ),
            });
        }
        min_comm = min_comm.min(cn);
    }

    Ok(ValidationReport {
        target_commutator,
        eigenspace_samples: samples,
        min_eigenspace_commutator: min_eig,
        eigenspace_kernel_margin,
        commutant_samples: samples,
        min_commutant_commutator: min_comm,
        commutant_kernel_margin,
    })
}

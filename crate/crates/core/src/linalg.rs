//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Dimensions here are tiny (4 for two qubits, 2^N in general, 5 for the
//! stability matrices), so every routine favours robustness and determinism
//! over asymptotic speed. Eigendecompositions use cyclic Jacobi sweeps,
//! which are foolproof for Hermitian input and bit-reproducible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `[a, b] = ab - ba`
#[inline]
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `-i [h, m]`, the Hamiltonian part of a master equation right-hand side.
#[inline]
pub fn liouville(h: &CMatrix, m: &CMatrix) -> CMatrix {
    commutator(h, m) * cplx(0.0, -1.0)
}

#[inline]
pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Largest entry-wise deviation from `m = m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// `(m + m†) / 2`
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cplx(0.5, 0.0)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigenvalues of a Hermitian matrix, unordered.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    jacobi(m, false).0
}

/// Full eigendecomposition `m = V diag(w) V†` of a Hermitian matrix.
/// Eigenvalues are unordered; column `k` of `V` pairs with `w[k]`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (w, v) = jacobi(m, true);
    (w, v.expect("vectors requested"))
}

/// Eigenvalues of a real symmetric matrix via the Hermitian path.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let c = m.map(|x| cplx(x, 0.0));
    hermitian_eigenvalues(&c)
}

/// Cyclic Jacobi sweeps with complex (phase-carrying) rotations.
///
/// Each rotation annihilates one off-diagonal entry of the Hermitian working
/// copy; sweeps repeat until the off-diagonal mass is at rounding level.
fn jacobi(m: &CMatrix, want_vectors: bool) -> (Vec<f64>, Option<CMatrix>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi: matrix must be square");
    debug_assert!(
        hermiticity_defect(m) <= 1e-9 * (1.0 + frobenius(m)),
        "jacobi: input must be Hermitian"
    );

    let mut a = hermitize(m);
    let mut v = want_vectors.then(|| CMatrix::identity(n, n));
    if n == 1 {
        return (vec![a[(0, 0)].re], v);
    }

    let scale = frobenius(&a).max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    const MAX_SWEEPS: usize = 64;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / r;

                // Smaller of the two rotation angles, as in the classic
                // real-symmetric formulation.
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A <- J† A J with J acting on the (p, q) plane:
                //   J[p][p] = c, J[p][q] = s·phase, J[q][p] = -s·conj(phase), J[q][q] = c.
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = akp * c - akq * (phase.conj() * s);
                    let new_kq = akp * (phase * s) + akq * c;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp.conj();
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq.conj();
                }
                let new_pp = app * c * c + aqq * s * s - 2.0 * s * c * r;
                let new_qq = app * s * s + aqq * c * c + 2.0 * s * c * r;
                a[(p, p)] = cplx(new_pp, 0.0);
                a[(q, q)] = cplx(new_qq, 0.0);
                a[(p, q)] = cplx(0.0, 0.0);
                a[(q, p)] = cplx(0.0, 0.0);

                if let Some(vm) = v.as_mut() {
                    for k in 0..n {
                        let vkp = vm[(k, p)];
                        let vkq = vm[(k, q)];
                        vm[(k, p)] = vkp * c - vkq * (phase.conj() * s);
                        vm[(k, q)] = vkp * (phase * s) + vkq * c;
                    }
                }
            }
        }
    }

    let w = (0..n).map(|i| a[(i, i)].re).collect();
    (w, v)
}

/// Haar-like random unitary from the QR factorisation of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        cplx(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix column phases so the distribution does not depend on the QR sign
    // convention.
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            cplx(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= ph.conj();
        }
    }
    q
}

/// Random Hermitian matrix with independent Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        cplx(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    hermitize(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(w: &[f64], v: &CMatrix) -> CMatrix {
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            w.len(),
            w.iter().map(|&x| cplx(x, 0.0)),
        ));
        v * d * v.adjoint()
    }

    #[test]
    fn jacobi_diagonalises_known_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[cplx(2.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(2.0, 0.0)],
        );
        let mut w = hermitian_eigenvalues(&m);
        w.sort_by(f64::total_cmp);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_handles_complex_offdiagonals() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(0.0, -1.0), cplx(1.0, 0.0)],
        );
        let mut w = hermitian_eigenvalues(&m);
        w.sort_by(f64::total_cmp);
        assert_relative_eq!(w[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 5, 8] {
            for _ in 0..20 {
                let m = random_hermitian(n, &mut rng);
                let (w, v) = hermitian_eigen(&m);
                let back = reconstruct(&w, &v);
                assert!(
                    frobenius(&(&back - &m)) <= 1e-12 * (1.0 + frobenius(&m)),
                    "reconstruction failed at n={n}"
                );
                // Columns must be orthonormal.
                let g = v.adjoint() * &v;
                assert!(frobenius(&(&g - CMatrix::identity(n, n))) <= 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_match_trace_and_square_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let m = random_hermitian(4, &mut rng);
            let w = hermitian_eigenvalues(&m);
            let tr: f64 = w.iter().sum();
            assert_relative_eq!(tr, m.trace().re, epsilon = 1e-10);
            let tr2: f64 = w.iter().map(|x| x * x).sum();
            assert_relative_eq!(tr2, (&m * &m).trace().re, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let u = random_unitary(4, &mut rng);
            let g = u.adjoint() * &u;
            assert!(frobenius(&(&g - CMatrix::identity(4, 4))) <= 1e-12);
        }
    }
}

//! Delay-dependent stability certificate for the two-qubit switching
//! Lyapunov loop, plus the reduced scalar model used for cross-checks.
//!
//! Feasibility of the matrix inequality below at a given delay `τ` and gain
//! `k` certifies that the delayed feedback still contracts the coherence
//! coordinate `μ3`. Decision variables are `q, r, ε > 0` and `S ∈ R³`:
//!
//! ```text
//! sym [ M + S·S̃   S    τS  ]
//!     [ Sᵀ        -ε    0   ]   ≺ 0,      S̃ = [2  -2  0],
//!     [ τSᵀ        0   -τr  ]
//!
//! M = [ q + τε   -2k    0   ]
//!     [ -2k      -q     0   ]
//!     [ 0         0    -τr  ]
//! ```
//!
//! Two transcription choices are deliberate. First, `S·S̃` is a rank-one
//! non-symmetric product; definiteness is tested on the symmetric part,
//! which is equivalent for the quadratic form. Second, the delay-penalty
//! slot `M[2][2]` enters with a negative sign: with `+τr` the matrix has a
//! positive diagonal entry for every `τ, r > 0` and the inequality is
//! unsatisfiable outright, while `-τr` recovers the delay-free limit and
//! yields finite maximal delays. At `τ = 0` the third and fifth diagonal
//! entries vanish identically, so the test reduces to the principal rows
//! `{1, 2, 4}`.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::quantum::DensityMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feasibility margin: a candidate certifies only if the largest eigenvalue
/// sits below `-MARGIN`.
pub const FEASIBILITY_MARGIN: f64 = 1e-6;

/// A delay/gain pair to certify.
#[derive(Debug, Clone, Copy)]
pub struct LmiProblem {
    pub tau: f64,
    pub k: f64,
}

impl LmiProblem {
    pub fn new(tau: f64, k: f64) -> Result<Self> {
        if !tau.is_finite() || !k.is_finite() || tau < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "LMI problem needs finite tau >= 0 and finite k, got tau = {tau}, k = {k}"
            )));
        }
        Ok(Self { tau, k })
    }
}

/// Decision variables of the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiCandidate {
    pub q: f64,
    pub r: f64,
    pub eps: f64,
    pub s: [f64; 3],
}

impl LmiCandidate {
    pub fn new(q: f64, r: f64, eps: f64, s: [f64; 3]) -> Result<Self> {
        if !(q > 0.0 && r > 0.0 && eps > 0.0) || s.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "candidate needs q, r, eps > 0 and finite S, got q = {q}, r = {r}, eps = {eps}"
            )));
        }
        Ok(Self { q, r, eps, s })
    }
}

/// Assemble the full 5×5 certificate matrix (symmetric part).
pub fn assemble_lmi(prob: &LmiProblem, cand: &LmiCandidate) -> DMatrix<f64> {
    let (tau, k) = (prob.tau, prob.k);
    let (q, r, eps) = (cand.q, cand.r, cand.eps);
    let s = cand.s;
    let s_tilde = [2.0, -2.0, 0.0];

    let mut m = DMatrix::<f64>::zeros(5, 5);
    // M block.
    m[(0, 0)] = q + tau * eps;
    m[(0, 1)] = -2.0 * k;
    m[(1, 0)] = -2.0 * k;
    m[(1, 1)] = -q;
    m[(2, 2)] = -tau * r;
    // Rank-one coupling S·S̃.
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] += s[i] * s_tilde[j];
        }
    }
    // Borders.
    for i in 0..3 {
        m[(i, 3)] = s[i];
        m[(3, i)] = s[i];
        m[(i, 4)] = tau * s[i];
        m[(4, i)] = tau * s[i];
    }
    m[(3, 3)] = -eps;
    m[(4, 4)] = -tau * r;

    // Definiteness is a statement about the quadratic form, so work with the
    // symmetric part (only the S·S̃ block is asymmetric).
    (&m + m.transpose()) * 0.5
}

/// The matrix actually tested for feasibility: the 5×5 assembly for
/// `τ > 0`, or the principal submatrix on rows/columns `{1, 2, 4}` at
/// `τ = 0`, where the two delay-scaled diagonal slots vanish identically.
pub fn feasibility_matrix(prob: &LmiProblem, cand: &LmiCandidate) -> DMatrix<f64> {
    let full = assemble_lmi(prob, cand);
    if prob.tau > 0.0 {
        return full;
    }
    let keep = [0usize, 1, 3];
    DMatrix::<f64>::from_fn(3, 3, |i, j| full[(keep[i], keep[j])])
}

/// Strict negative-definiteness test with the largest eigenvalue as witness.
///
/// Returns `(true, λ_max)` iff `λ_max < -margin`. The input must be
/// symmetric; eigenvalues come from cyclic Jacobi sweeps.
pub fn is_negative_definite(m: &DMatrix<f64>, margin: f64) -> Result<(bool, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Contract(format!(
            "definiteness test needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if margin < 0.0 {
        return Err(Error::Contract(format!("margin must be >= 0, got {margin}")));
    }
    let scale = m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())).max(1.0);
    let mut defect = 0.0f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if defect > 1e-12 * scale {
        return Err(Error::Contract(format!(
            "definiteness test needs a symmetric matrix (defect {defect:.3e})"
        )));
    }
    let max_eig = symmetric_eigenvalues(m)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((max_eig < -margin, max_eig))
}

// ---------------------------------------------------------------------------
// Feasibility search
// ---------------------------------------------------------------------------

/// Search box: log-uniform over `(q, r, ε)`, uniform over the entries of `S`.
#[derive(Debug, Clone, Copy)]
pub struct SearchRanges {
    pub q: (f64, f64),
    pub r: (f64, f64),
    pub eps: (f64, f64),
    pub s: (f64, f64),
}

impl Default for SearchRanges {
    fn default() -> Self {
        Self {
            q: (1e-3, 1e3),
            r: (1e-3, 1e3),
            eps: (1e-3, 1e3),
            s: (-10.0, 10.0),
        }
    }
}

impl SearchRanges {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("q", self.q), ("r", self.r), ("eps", self.eps)] {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Contract(format!(
                    "range for {name} must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.s.1 > self.s.0) {
            return Err(Error::Contract(format!(
                "range for S must be nonempty, got ({}, {})",
                self.s.0, self.s.1
            )));
        }
        Ok(())
    }
}

/// Result of a feasibility search. `witness` is the best (lowest) largest
/// eigenvalue found; `feasible` means it cleared the margin. An infeasible
/// report is always "not found within budget", never a proof.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub problem: LmiProblem,
    pub feasible: bool,
    pub candidate: LmiCandidate,
    pub witness: f64,
    pub evaluations: usize,
}

const REFINE_ITERATIONS: usize = 200;
const REFINE_TOP: usize = 8;

fn objective(prob: &LmiProblem, cand: &LmiCandidate) -> f64 {
    symmetric_eigenvalues(&feasibility_matrix(prob, cand))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Six-coordinate view used by the refinement: `(ln q, ln r, ln ε, s1, s2, s3)`.
fn to_coords(c: &LmiCandidate) -> [f64; 6] {
    [c.q.ln(), c.r.ln(), c.eps.ln(), c.s[0], c.s[1], c.s[2]]
}

fn from_coords(x: &[f64; 6], ranges: &SearchRanges) -> LmiCandidate {
    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    LmiCandidate {
        q: clamp(x[0].exp(), ranges.q),
        r: clamp(x[1].exp(), ranges.r),
        eps: clamp(x[2].exp(), ranges.eps),
        s: [
            clamp(x[3], ranges.s),
            clamp(x[4], ranges.s),
            clamp(x[5], ranges.s),
        ],
    }
}

/// Derivative-free coordinate descent on the largest eigenvalue, in
/// log-space for the positive variables.
fn refine(
    prob: &LmiProblem,
    start: LmiCandidate,
    ranges: &SearchRanges,
    evals: &mut usize,
) -> (LmiCandidate, f64) {
    let mut x = to_coords(&start);
    let mut best = objective(prob, &start);
    *evals += 1;
    let mut steps = [0.5f64, 0.5, 0.5, 1.0, 1.0, 1.0];
    for _ in 0..REFINE_ITERATIONS {
        let mut improved = false;
        for dim in 0..6 {
            for sign in [-1.0, 1.0] {
                let mut trial = x;
                trial[dim] += sign * steps[dim];
                let cand = from_coords(&trial, ranges);
                let val = objective(prob, &cand);
                *evals += 1;
                if val < best {
                    best = val;
                    x = to_coords(&cand);
                    improved = true;
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps[0] < 1e-6 {
                break;
            }
        }
    }
    (from_coords(&x, ranges), best)
}

/// Multi-start random search with local refinement.
///
/// `budget` counts the random starts; each of the best `REFINE_TOP` starts
/// gets up to `REFINE_ITERATIONS` rounds of coordinate descent. Deterministic
/// for a fixed `seed`. Returns the first candidate whose largest eigenvalue
/// clears `-FEASIBILITY_MARGIN`, otherwise the best witness found.
pub fn search_feasible(
    prob: &LmiProblem,
    budget: usize,
    ranges: &SearchRanges,
    seed: u64,
) -> Result<FeasibilityReport> {
    if budget == 0 {
        return Err(Error::Contract("search budget must be >= 1".into()));
    }
    ranges.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x1a11);
    let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        (rng.random_range(lo.ln()..hi.ln())).exp()
    };

    let mut evals = 0usize;
    let mut pool: Vec<(f64, LmiCandidate)> = Vec::with_capacity(budget.min(1 << 20));
    for _ in 0..budget {
        let cand = LmiCandidate {
            q: log_uniform(&mut rng, ranges.q),
            r: log_uniform(&mut rng, ranges.r),
            eps: log_uniform(&mut rng, ranges.eps),
            s: [
                rng.random_range(ranges.s.0..ranges.s.1),
                rng.random_range(ranges.s.0..ranges.s.1),
                rng.random_range(ranges.s.0..ranges.s.1),
            ],
        };
        let val = objective(prob, &cand);
        evals += 1;
        if val < -FEASIBILITY_MARGIN {
            return Ok(FeasibilityReport {
                problem: *prob,
                feasible: true,
                candidate: cand,
                witness: val,
                evaluations: evals,
            });
        }
        pool.push((val, cand));
    }

    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = pool[0];
    for (_, start) in pool.into_iter().take(REFINE_TOP) {
        let (cand, val) = refine(prob, start, ranges, &mut evals);
        if val < best.0 {
            best = (val, cand);
        }
        if val < -FEASIBILITY_MARGIN {
            return Ok(FeasibilityReport {
                problem: *prob,
                feasible: true,
                candidate: cand,
                witness: val,
                evaluations: evals,
            });
        }
    }

    Ok(FeasibilityReport {
        problem: *prob,
        feasible: false,
        candidate: best.1,
        witness: best.0,
        evaluations: evals,
    })
}

/// Bracket on the largest certifiable delay for a given gain.
#[derive(Debug, Clone, Copy)]
pub struct DelayBracket {
    /// Largest delay found feasible.
    pub feasible_tau: f64,
    /// Smallest delay found infeasible (within budget).
    pub infeasible_tau: f64,
}

impl DelayBracket {
    pub fn width(&self) -> f64 {
        self.infeasible_tau - self.feasible_tau
    }
}

/// Bisect the feasibility boundary in `τ` for a fixed gain.
///
/// Feasibility is assumed monotone in the delay, which is a heuristic: each
/// probe is itself a budgeted random search, so "infeasible" means "not
/// found". The returned bracket has width at most `precision`, unless
/// feasibility persists up to the search cap (then the open bracket above
/// the cap is returned).
pub fn max_stable_delay(
    k: f64,
    precision: f64,
    budget: usize,
    seed: u64,
) -> Result<DelayBracket> {
    if !(precision > 0.0) {
        return Err(Error::Contract(format!(
            "precision must be positive, got {precision}"
        )));
    }
    let ranges = SearchRanges::default();
    let feasible_at = |tau: f64| -> Result<bool> {
        let prob = LmiProblem::new(tau, k)?;
        // Each probe derives its seed from the base seed and the delay, so
        // repeated calls reproduce the same bracket.
        let probe_seed = seed ^ (tau.to_bits().rotate_left(17));
        Ok(search_feasible(&prob, budget, &ranges, probe_seed)?.feasible)
    };

    let report = search_feasible(&LmiProblem::new(0.0, k)?, budget, &ranges, seed)?;
    if !report.feasible {
        return Err(Error::InfeasibleAtZero {
            witness: report.witness,
        });
    }

    // Grow until infeasible, then bisect.
    const TAU_CAP: f64 = 64.0;
    let mut lo = 0.0f64;
    let mut hi = precision.max(0.125);
    while feasible_at(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > TAU_CAP {
            return Ok(DelayBracket {
                feasible_tau: lo,
                infeasible_tau: hi,
            });
        }
    }
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DelayBracket {
        feasible_tau: lo,
        infeasible_tau: hi,
    })
}

// ---------------------------------------------------------------------------
// Reduced two-qubit model
// ---------------------------------------------------------------------------

/// Real parameterization of a two-qubit density matrix,
///
/// ```text
/// ρ = [ ν1        λ1-iμ1   λ2-iμ2   λ3-iμ3 ]
///     [ λ1+iμ1    ν2       λ4-iμ4   λ5-iμ5 ]
///     [ λ2+iμ2    λ4+iμ4   ν3       λ6-iμ6 ]
///     [ λ3+iμ3    λ5+iμ5   λ6+iμ6   1-ν1-ν2-ν3 ]
/// ```
///
/// `μ3 = -Im ρ14` is the coordinate the delayed feedback acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub lambda: [f64; 6],
    pub mu: [f64; 6],
}

impl ReducedState {
    pub fn mu3(&self) -> f64 {
        self.mu[2]
    }
    pub fn lambda3(&self) -> f64 {
        self.lambda[2]
    }
}

/// Read the real coordinates off a 4×4 state.
pub fn extract_reduced(rho: &DensityMatrix) -> Result<ReducedState> {
    if rho.dim() != 4 {
        return Err(Error::Contract(format!(
            "reduced model is two-qubit only, got dimension {}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut lambda = [0.0; 6];
    let mut mu = [0.0; 6];
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        lambda[idx] = m[(i, j)].re;
        mu[idx] = -m[(i, j)].im;
    }
    Ok(ReducedState {
        nu1: m[(0, 0)].re,
        nu2: m[(1, 1)].re,
        nu3: m[(2, 2)].re,
        lambda,
        mu,
    })
}

/// Inverse of [`extract_reduced`].
pub fn embed_reduced(s: &ReducedState) -> DensityMatrix {
    use crate::linalg::cplx;
    use crate::linalg::CMatrix;
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = cplx(s.nu1, 0.0);
    m[(1, 1)] = cplx(s.nu2, 0.0);
    m[(2, 2)] = cplx(s.nu3, 0.0);
    m[(3, 3)] = cplx(1.0 - s.nu1 - s.nu2 - s.nu3, 0.0);
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        m[(i, j)] = cplx(s.lambda[idx], -s.mu[idx]);
        m[(j, i)] = cplx(s.lambda[idx], s.mu[idx]);
    }
    DensityMatrix::new_unchecked(m)
}

/// One Euler-Maruyama step of the scalar coherence equation
/// `dμ3 = (λ1 - λ2 + λ5 - λ6 + 2 λ3 u2) dt + 4 μ3 (ν2 + ν3) dW`
/// (unit measurement strength and efficiency).
pub fn mu3_reduced_step(s: &ReducedState, u2: f64, dt: f64, dw: f64) -> f64 {
    let drift = s.lambda[0] - s.lambda[1] + s.lambda[4] - s.lambda[5] + 2.0 * s.lambda[2] * u2;
    let diffusion = 4.0 * s.mu[2] * (s.nu2 + s.nu3);
    s.mu[2] + drift * dt + diffusion * dw
}

//! Fixed-step Euler-Maruyama integration of the closed-loop filter equation
//!
//! ```text
//! dρ = (-i[H0 + H1 + u2·H2 + Δ(t), ρ] + Γ_A D[A]ρ) dt + √(η_A Γ_A) H[A]ρ dW
//! dy = dW + √(η_A Γ_A) Tr[(A + A†)ρ] dt
//! ```
//!
//! with the control channel for `H1` held at the constant value 1. One Wiener
//! increment per step drives both the state update and the measurement
//! record. States are periodically sanitized back onto the density-matrix
//! manifold (symmetrize, clip negative eigenvalues, renormalize).

use crate::error::{Error, Result};
use crate::linalg::{cplx, hermitian_eigen, hermitize, is_finite, liouville, CMatrix};
use crate::quantum::{backaction_raw, dissipator_raw, DensityMatrix, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Fixed-step integrator settings. The scheme is Euler-Maruyama; the
/// diffusion coefficient is state-dependent and the equation is in Itô form,
/// so weak order 1 is what ensemble statistics get.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Sanitize cadence in steps; 1 keeps region classification honest.
    pub sanitize_every: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 50.0,
            sanitize_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self, tau: f64) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon < self.dt {
            return Err(Error::InvalidConfig(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.dt
            )));
        }
        if tau > 0.0 && self.dt > tau {
            return Err(Error::InvalidConfig(format!(
                "dt = {} exceeds the delay {}; the buffer needs at least one slot",
                self.dt, tau
            )));
        }
        if self.sanitize_every == 0 {
            return Err(Error::InvalidConfig("sanitize_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// Measurement efficiency/strength plus the stochastic dephasing model
/// `Δ(t) = β(t)·σz⊗…⊗σz` with piecewise-constant `β` redrawn from
/// `N(0, σ_β²)` every `dephasing_dwell`.
///
/// `eta`/`gamma` mirror the system's measurement parameters; build with
/// [`NoiseModel::from_spec`] so the state update and the record stay
/// consistent.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub eta: f64,
    pub gamma: f64,
    pub dephasing_amp: f64,
    pub dephasing_dwell: f64,
}

impl NoiseModel {
    pub fn new(eta: f64, gamma: f64, dephasing_amp: f64, dephasing_dwell: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "efficiency must lie in (0, 1], got {eta}"
            )));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "measurement strength must be positive, got {gamma}"
            )));
        }
        if dephasing_amp < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dephasing amplitude must be >= 0, got {dephasing_amp}"
            )));
        }
        if !(dephasing_dwell > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dephasing dwell must be positive, got {dephasing_dwell}"
            )));
        }
        Ok(Self {
            eta,
            gamma,
            dephasing_amp,
            dephasing_dwell,
        })
    }

    pub fn from_spec(spec: &SystemSpec, dephasing_amp: f64, dephasing_dwell: f64) -> Result<Self> {
        Self::new(spec.eta_meas(), spec.gamma_meas(), dephasing_amp, dephasing_dwell)
    }
}

/// Stateless identifier of a dephasing realization. Values are a pure
/// function of `(master_seed, stream, interval index)`, so repeated queries
/// at the same time agree and trajectories never share noise.
#[derive(Debug, Clone, Copy)]
pub struct DephasingStream {
    pub master_seed: u64,
    pub stream: u64,
}

/// Piecewise-constant dephasing amplitude `β(t)`: i.i.d. `N(0, σ_β²)` per
/// dwell interval, identically zero when the amplitude is zero.
pub fn dephasing_sample(noise: &NoiseModel, t: f64, src: &DephasingStream) -> f64 {
    if noise.dephasing_amp == 0.0 {
        return 0.0;
    }
    // Nudge guards against t sitting a rounding error below an interval
    // boundary after many accumulated additions.
    let k = (t / noise.dephasing_dwell + 1e-9).floor().max(0.0) as u64;
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&src.master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&src.stream.to_le_bytes());
    seed[16..24].copy_from_slice(&k.to_le_bytes());
    seed[24..32].copy_from_slice(&0xdef0_0000_0000_0001u64.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    let z: f64 = rng.sample(StandardNormal);
    noise.dephasing_amp * z
}

/// One trajectory's conditioned state, clock, accumulated record and noise
/// stream. Each trajectory owns its state; nothing here is shared.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub rho: DensityMatrix,
    pub t: f64,
    pub y: f64,
    pub rng_stream: u64,
    pub step: u64,
}

impl TrajectoryState {
    pub fn new(rho: DensityMatrix, rng_stream: u64) -> Self {
        Self {
            rho,
            t: 0.0,
            y: 0.0,
            rng_stream,
            step: 0,
        }
    }
}

/// One Euler-Maruyama step of the closed-loop filter equation. `dw` must be
/// drawn as `N(0, dt)`; `beta` is the current dephasing amplitude. The output
/// is symmetrized but not otherwise sanitized, and `y` is carried through
/// unchanged (see [`measurement_increment`]).
pub fn em_step(
    state: &TrajectoryState,
    u2: f64,
    spec: &SystemSpec,
    noise: &NoiseModel,
    cfg: &IntegratorConfig,
    dw: f64,
    beta: f64,
) -> Result<TrajectoryState> {
    let rho = state.rho.matrix();
    let a = spec.observable().matrix();
    let dt = cfg.dt;

    let mut h = spec.h0().matrix() + spec.h1().matrix() + spec.h2().matrix() * cplx(u2, 0.0);
    if beta != 0.0 {
        h += spec.dephasing_direction() * cplx(beta, 0.0);
    }

    let drift = liouville(&h, rho) + dissipator_raw(a, rho) * cplx(noise.gamma, 0.0);
    let diffusion = backaction_raw(a, rho) * cplx((noise.eta * noise.gamma).sqrt(), 0.0);
    let next = rho + drift * cplx(dt, 0.0) + diffusion * cplx(dw, 0.0);
    let next = hermitize(&next);

    if !is_finite(&next) {
        return Err(Error::NumericalBlowup {
            step: state.step + 1,
            detail: format!("non-finite state entries (u2 = {u2}, dW = {dw})"),
        });
    }

    Ok(TrajectoryState {
        rho: DensityMatrix::new_unchecked(next),
        t: state.t + dt,
        y: state.y,
        rng_stream: state.rng_stream,
        step: state.step + 1,
    })
}

/// Measurement record increment `dy = dW + √(η_A Γ_A) Tr[(A + A†)ρ] dt`,
/// sharing the step's Wiener increment with the state update.
pub fn measurement_increment(rho: &DensityMatrix, spec: &SystemSpec, dw: f64, dt: f64) -> f64 {
    let a = spec.observable().matrix();
    let expect = ((a + a.adjoint()) * rho.matrix()).trace().re;
    dw + (spec.eta_meas() * spec.gamma_meas()).sqrt() * expect * dt
}

/// Project a near-valid state back onto the density-matrix manifold:
/// symmetrize, clip negative eigenvalues to zero, renormalize the trace.
///
/// States that are already positive semidefinite pass through with only the
/// symmetrization and trace renormalization, so exact fixed points (the
/// target state under zero control) stay bit-identical.
pub fn sanitize(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let m = hermitize(rho.matrix());
    let tr = m.trace().re;
    if !tr.is_finite() || tr < 0.5 {
        return Err(Error::IntegrationDiverged(format!(
            "trace fell to {tr} before renormalization"
        )));
    }

    let (vals, vecs) = hermitian_eigen(&m);
    let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);

    let mut out = if min_eig < 0.0 {
        let n = m.nrows();
        let clipped = nalgebra::DVector::from_iterator(
            n,
            vals.iter().map(|&w| cplx(w.max(0.0), 0.0)),
        );
        let rebuilt = &vecs * CMatrix::from_diagonal(&clipped) * vecs.adjoint();
        hermitize(&rebuilt)
    } else {
        m
    };

    let tr = out.trace().re;
    if (tr - 1.0).abs() > 1e-15 {
        out *= cplx(1.0 / tr, 0.0);
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// One explicit Euler step of the noise-averaged (deterministic) evolution
/// `ρ̄' = ρ̄ + (-i[H0 + H1 + u2·H2, ρ̄] + Γ_A D[A]ρ̄) dt`.
pub fn ensemble_drift_step(
    rho_bar: &DensityMatrix,
    u2: f64,
    spec: &SystemSpec,
    dt: f64,
) -> DensityMatrix {
    let rho = rho_bar.matrix();
    let h = spec.h0().matrix() + spec.h1().matrix() + spec.h2().matrix() * cplx(u2, 0.0);
    let rhs = liouville(&h, rho)
        + dissipator_raw(spec.observable().matrix(), rho) * cplx(spec.gamma_meas(), 0.0);
    DensityMatrix::new_unchecked(hermitize(&(rho + rhs * cplx(dt, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, random_hermitian};
    use crate::quantum::{
        distance_v, ghz_state, lyapunov_v1, HermitianOperator, Sign, TargetSpec,
    };
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn standard() -> SystemSpec {
        SystemSpec::two_qubit_standard(1.0, 1.0).unwrap()
    }

    fn unit_noise() -> NoiseModel {
        NoiseModel::new(1.0, 1.0, 0.0, 0.1).unwrap()
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = random_hermitian(n, rng);
        let p = &g * g.adjoint();
        let tr = p.trace().re;
        DensityMatrix::new(p * cplx(1.0 / tr, 0.0)).unwrap()
    }

    #[test]
    fn target_is_an_exact_fixed_point_of_the_step() {
        let spec = standard();
        let noise = unit_noise();
        let cfg = IntegratorConfig::default();
        let rho_d = ghz_state(&TargetSpec::new("00", Sign::Plus).unwrap());
        let state = TrajectoryState::new(rho_d.clone(), 0);
        for dw in [0.0, 0.03, -0.8] {
            let next = em_step(&state, 0.0, &spec, &noise, &cfg, dw, 0.0).unwrap();
            assert_eq!(next.rho.matrix(), rho_d.matrix(), "drift/diffusion must vanish exactly");
        }
    }

    #[test]
    fn measurement_off_leaves_only_the_h1_commutator() {
        let spec = standard();
        // Measurement off: relaxed model built directly for the test.
        let noise = NoiseModel {
            eta: 1.0,
            gamma: 0.0,
            dephasing_amp: 0.0,
            dephasing_dwell: 0.1,
        };
        let cfg = IntegratorConfig::default();
        let rho = DensityMatrix::from_populations(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let state = TrajectoryState::new(rho.clone(), 0);
        let next = em_step(&state, 0.0, &spec, &noise, &cfg, 0.7, 0.0).unwrap();
        // H0 commutes with any diagonal state, so only H1 contributes.
        let expected = rho.matrix()
            + liouville(spec.h1().matrix(), rho.matrix()) * cplx(cfg.dt, 0.0);
        assert!(frobenius(&(next.rho.matrix() - &expected)) <= 1e-15);
    }

    #[test]
    fn mu3_increment_matches_reduced_drift() {
        // With dW = 0 the increment of μ3 = -Im ρ14 equals
        // (λ1 - λ2 + λ5 - λ6 + 2 λ3 u2) dt for the worked two-qubit system.
        let spec = standard();
        let noise = unit_noise();
        let cfg = IntegratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let rho = random_density(4, &mut rng);
            let u2: f64 = rand::Rng::random_range(&mut rng, -2.0..2.0);
            let m = rho.matrix();
            let (l1, l2, l3) = (m[(0, 1)].re, m[(0, 2)].re, m[(0, 3)].re);
            let (l5, l6) = (m[(1, 3)].re, m[(2, 3)].re);
            let drift = l1 - l2 + l5 - l6 + 2.0 * l3 * u2;

            let state = TrajectoryState::new(rho.clone(), 0);
            let next = em_step(&state, u2, &spec, &noise, &cfg, 0.0, 0.0).unwrap();
            let dmu3 = -next.rho.matrix()[(0, 3)].im - (-m[(0, 3)].im);
            assert_relative_eq!(dmu3, drift * cfg.dt, epsilon = 1e-14, max_relative = 1e-10);
        }
    }

    #[test]
    fn trace_is_preserved_to_rounding_per_step() {
        let spec = standard();
        let noise = unit_noise();
        let cfg = IntegratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let rho = random_density(4, &mut rng);
            let state = TrajectoryState::new(rho, 0);
            let dw = rand::Rng::random_range(&mut rng, -0.1..0.1);
            let u2 = rand::Rng::random_range(&mut rng, -1.0..1.0);
            let next = em_step(&state, u2, &spec, &noise, &cfg, dw, 0.3).unwrap();
            assert!((next.rho.matrix().trace().re - 1.0).abs() <= 1e-12);
            assert!(next.rho.matrix().trace().im.abs() <= 1e-14);
        }
    }

    #[test]
    fn measurement_increment_examples() {
        let spec = standard();
        let dt = 1e-3;
        let dw = 0.017;
        let rho_d = ghz_state(&TargetSpec::new("00", Sign::Plus).unwrap());
        // Tr[(A+A†)ρ_d] = 2λ_d = 2.
        assert_relative_eq!(
            measurement_increment(&rho_d, &spec, dw, dt),
            dw + 2.0 * dt,
            epsilon = 1e-15
        );
        // Tr A = 0 on the maximally mixed state.
        assert_relative_eq!(
            measurement_increment(&DensityMatrix::maximally_mixed(4), &spec, dw, dt),
            dw,
            epsilon = 1e-15
        );
        // diag(0,1,0,0) has Tr[(A+A†)ρ] = -2.
        let rho = DensityMatrix::from_populations(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(
            measurement_increment(&rho, &spec, dw, dt),
            dw - 2.0 * dt,
            epsilon = 1e-15
        );
    }

    #[test]
    fn sanitize_is_identity_on_valid_states() {
        let rho_d = ghz_state(&TargetSpec::new("00", Sign::Plus).unwrap());
        let out = sanitize(&rho_d).unwrap();
        assert!(frobenius(&(out.matrix() - rho_d.matrix())) <= 1e-14);
    }

    #[test]
    fn sanitize_clips_and_renormalizes() {
        let raw = DensityMatrix::new_unchecked(CMatrix::from_diagonal(
            &nalgebra::DVector::from_vec(vec![
                cplx(1.05, 0.0),
                cplx(-0.05, 0.0),
                cplx(0.0, 0.0),
                cplx(0.0, 0.0),
            ]),
        ));
        let out = sanitize(&raw).unwrap();
        assert_relative_eq!(out.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        for i in 1..4 {
            assert!(out.matrix()[(i, i)].re.abs() <= 1e-14);
        }
    }

    #[test]
    fn sanitize_output_stays_close_to_input() {
        // States with a known slightly negative eigenvalue (min eig -1e-6,
        // unit trace) come back PSD, unit-trace, and within the clip bound.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let u = crate::linalg::random_unitary(4, &mut rng);
            let bulk: Vec<f64> = (0..3)
                .map(|_| rand::Rng::random_range(&mut rng, 0.05..0.5))
                .collect();
            let scale = (1.0 + 1e-6) / bulk.iter().sum::<f64>();
            let vals = [
                bulk[0] * scale,
                bulk[1] * scale,
                bulk[2] * scale,
                -1e-6,
            ];
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                4,
                vals.iter().map(|&w| cplx(w, 0.0)),
            ));
            let raw = DensityMatrix::new_unchecked(hermitize(&(&u * d * u.adjoint())));
            let out = sanitize(&raw).unwrap();
            assert!((out.matrix().trace().re - 1.0).abs() <= 1e-14);
            let min_out = crate::linalg::hermitian_eigenvalues(out.matrix())
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(min_out >= -1e-15);
            let dist = frobenius(&(out.matrix() - raw.matrix()));
            let bound = (10.0f64 * 1e-6).max(1e-12);
            assert!(dist <= bound, "dist {dist} exceeds bound {bound}");
        }
    }

    #[test]
    fn sanitize_rejects_collapsed_trace() {
        let raw = DensityMatrix::new_unchecked(
            CMatrix::identity(4, 4) * cplx(0.05, 0.0),
        );
        assert!(matches!(
            sanitize(&raw),
            Err(Error::IntegrationDiverged(_))
        ));
    }

    #[test]
    fn dephasing_sampler_contracts() {
        let src = DephasingStream {
            master_seed: 42,
            stream: 3,
        };
        let off = NoiseModel::new(1.0, 1.0, 0.0, 0.1).unwrap();
        assert_eq!(dephasing_sample(&off, 1.234, &src), 0.0);

        let on = NoiseModel::new(1.0, 1.0, 0.5, 0.1).unwrap();
        let a = dephasing_sample(&on, 0.5321, &src);
        let b = dephasing_sample(&on, 0.5321, &src);
        assert_eq!(a, b, "same seed and time must reproduce the value");
        // Constant within a dwell interval, redrawn across intervals.
        assert_eq!(a, dephasing_sample(&on, 0.5999, &src));
        assert_ne!(a, dephasing_sample(&on, 0.6001, &src));
    }

    #[test]
    fn dephasing_variance_matches_amplitude() {
        let on = NoiseModel::new(1.0, 1.0, 0.5, 0.1).unwrap();
        let src = DephasingStream {
            master_seed: 7,
            stream: 0,
        };
        let n = 10_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for k in 0..n {
            // One sample per dwell interval.
            let b = dephasing_sample(&on, (k as f64 + 0.5) * on.dephasing_dwell, &src);
            sum += b;
            sumsq += b * b;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let want = 0.25;
        assert!(
            (var - want).abs() <= 0.05 * want,
            "empirical variance {var} deviates more than 5% from {want}"
        );
    }

    #[test]
    fn drift_step_fixes_the_maximally_mixed_state() {
        let spec = standard();
        let mixed = DensityMatrix::maximally_mixed(4);
        for u2 in [0.0, 0.7, 1.0] {
            let next = ensemble_drift_step(&mixed, u2, &spec, 1e-3);
            assert!(frobenius(&(next.matrix() - mixed.matrix())) <= 1e-15);
        }
    }

    #[test]
    fn drift_step_preserves_trace_and_decreases_v1() {
        // Explicit Euler adds +dt²·‖rhs‖² per step, so the 1e-8 slack needs
        // a fine step near commutant states where the first-order decrease
        // vanishes.
        let spec = standard();
        let mut rho = DensityMatrix::from_populations(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        let dt = 1e-5;
        let mut v1 = lyapunov_v1(&rho);
        for _ in 0..10_000 {
            rho = ensemble_drift_step(&rho, 1.0, &spec, dt);
            assert!((rho.matrix().trace().re - 1.0).abs() <= 1e-12);
            let next_v1 = lyapunov_v1(&rho);
            assert!(
                next_v1 <= v1 + 1e-8,
                "V1 increased beyond slack: {v1} -> {next_v1}"
            );
            v1 = next_v1;
        }
    }

    #[test]
    fn drift_step_matches_em_step_without_noise() {
        let spec = standard();
        let noise = unit_noise();
        let cfg = IntegratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let rho = random_density(4, &mut rng);
            let u2 = rand::Rng::random_range(&mut rng, -1.0..1.0);
            let state = TrajectoryState::new(rho.clone(), 0);
            // dW = 0 removes the diffusion (η) term entirely.
            let stochastic = em_step(&state, u2, &spec, &noise, &cfg, 0.0, 0.0).unwrap();
            let deterministic = ensemble_drift_step(&rho, u2, &spec, cfg.dt);
            assert!(
                frobenius(&(stochastic.rho.matrix() - deterministic.matrix())) <= 1e-15
            );
        }
    }

    #[test]
    fn integrator_handles_three_qubit_systems() {
        // Dimension-generic path: an 8x8 system with the three-qubit GHZ
        // target. H1 = 0 satisfies the target-commutation condition (it
        // would fail equilibrium uniqueness, which the integrator does not
        // require).
        let h0 = HermitianOperator::from_real_diagonal(&[1.0; 8]);
        let h1 = HermitianOperator::from_real_diagonal(&[0.0; 8]);
        let h2 = HermitianOperator::new(
            crate::quantum::sigma_z()
                .kronecker(&crate::quantum::identity2())
                .kronecker(&crate::quantum::identity2()),
        )
        .unwrap();
        let (a, _) =
            crate::quantum::build_observable(&[1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0])
                .unwrap();
        let target = ghz_state(&TargetSpec::new("000", Sign::Plus).unwrap());
        let spec =
            SystemSpec::new(3, h0, h1, h2, a, 1.0, 1.0, target.clone()).unwrap();
        let noise = NoiseModel::from_spec(&spec, 0.0, 0.1).unwrap();
        let cfg = IntegratorConfig::default();

        // The target is invariant under zero control.
        let state = TrajectoryState::new(target.clone(), 0);
        let next = em_step(&state, 0.0, &spec, &noise, &cfg, 0.4, 0.0).unwrap();
        assert_eq!(next.rho.matrix(), target.matrix());

        // Trace preservation and sanitization on random 8x8 states.
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for _ in 0..20 {
            let rho = random_density(8, &mut rng);
            let state = TrajectoryState::new(rho, 0);
            let dw = rand::Rng::random_range(&mut rng, -0.05..0.05);
            let next = em_step(&state, 0.7, &spec, &noise, &cfg, dw, 0.2).unwrap();
            assert!((next.rho.matrix().trace().re - 1.0).abs() <= 1e-12);
            let clean = sanitize(&next.rho).unwrap();
            let min_eig = crate::linalg::hermitian_eigenvalues(clean.matrix())
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-15);
        }
    }

    #[test]
    fn target_absorption_over_many_steps() {
        // From the target with u2 = 0 and no dephasing, the trajectory stays
        // put for 100k steps.
        let spec = standard();
        let noise = unit_noise();
        let cfg = IntegratorConfig {
            dt: 1e-3,
            horizon: 100.0,
            sanitize_every: 1,
        };
        let rho_d = ghz_state(&TargetSpec::new("00", Sign::Plus).unwrap());
        let mut state = TrajectoryState::new(rho_d.clone(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut sup = 0.0f64;
        for _ in 0..100_000 {
            let dw: f64 = rand::Rng::sample::<f64, _>(&mut rng, StandardNormal) * cfg.dt.sqrt();
            state = em_step(&state, 0.0, &spec, &noise, &cfg, dw, 0.0).unwrap();
            state.rho = sanitize(&state.rho).unwrap();
            sup = sup.max(frobenius(&(state.rho.matrix() - rho_d.matrix())));
        }
        assert!(sup <= 1e-9, "target drifted by {sup}");
        assert!(distance_v(&state.rho, &rho_d) <= 1e-9);
    }
}

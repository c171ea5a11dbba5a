//! Statistical properties of the integrator and the closed loop that go
//! beyond single-step identities: supermartingale behaviour of the distance
//! under relaxed control, weak-order step-size refinement, and convergence
//! of the coherence coordinate at a certified delay/gain pair.

use qfb_core::{
    distance_v, em_step, run_trajectory_observed, sanitize, search_feasible, DensityMatrix,
    ExperimentConfig, InitialState, IntegratorConfig, LmiProblem, NoiseModel, SearchRanges,
    Strategy, SystemSpec, TrajectoryState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn standard() -> (SystemSpec, NoiseModel) {
    let spec = SystemSpec::two_qubit_standard(1.0, 1.0).unwrap();
    let noise = NoiseModel::new(1.0, 1.0, 0.0, 0.1).unwrap();
    (spec, noise)
}

/// Relaxed-control trajectory (u2 = 0) sampled at the given step indices.
fn relaxed_v_at(
    rho0: &DensityMatrix,
    stream: u64,
    seed: u64,
    cfg: &IntegratorConfig,
    checkpoints: &[u64],
) -> Vec<f64> {
    let (spec, noise) = standard();
    let target = spec.target().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut state = TrajectoryState::new(rho0.clone(), stream);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for step in 0..=cfg.n_steps() {
        if next < checkpoints.len() && checkpoints[next] == step {
            out.push(distance_v(&state.rho, &target));
            next += 1;
        }
        if step == cfg.n_steps() {
            break;
        }
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.dt.sqrt();
        state = em_step(&state, 0.0, &spec, &noise, cfg, dw, 0.0).unwrap();
        state.rho = sanitize(&state.rho).unwrap();
    }
    out
}

#[test]
fn distance_is_a_supermartingale_under_relaxed_control() {
    // With u2 = 0 the generator of V is non-positive, so the ensemble mean
    // of V(t) - V(0) must stay within noise of zero or below.
    let cfg = IntegratorConfig {
        dt: 1e-3,
        horizon: 2.0,
        sanitize_every: 1,
    };
    let rho0 = DensityMatrix::from_populations(&[1.0, 0.0, 0.0, 0.0]).unwrap();
    let checkpoints: Vec<u64> = vec![0, 500, 1000, 1500, 2000];
    let m = 200usize;

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| relaxed_v_at(&rho0, i as u64, 4242, &cfg, &checkpoints))
        .collect();

    for (ci, &step) in checkpoints.iter().enumerate().skip(1) {
        let diffs: Vec<f64> = rows.iter().map(|r| r[ci] - r[0]).collect();
        let mean = diffs.iter().sum::<f64>() / m as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m as f64 - 1.0);
        let se = (var / m as f64).sqrt();
        assert!(
            mean <= 3.0 * se,
            "at step {step}: mean ΔV = {mean:.4e} exceeds 3·SE = {:.4e}",
            3.0 * se
        );
    }
}

#[test]
fn terminal_mean_distance_refines_at_weak_order_one() {
    // Couple the Brownian path across three step sizes (fine increments
    // summed for the coarse runs); successive terminal-mean differences must
    // then shrink consistently with a first-order error model.
    let (spec, noise) = standard();
    let target = spec.target().clone();
    let rho0 = DensityMatrix::from_populations(&[1.0, 0.0, 0.0, 0.0]).unwrap();
    let horizon = 1.0;
    let fine_dt = 1e-3;
    let n_fine = (horizon / fine_dt) as usize;
    let m = 64usize;

    let terminal_v = |level: usize, fine_increments: &[f64]| -> f64 {
        // level 0: dt = 4e-3 (sum 4 fine increments), 1: 2e-3, 2: 1e-3.
        let group = 4usize >> level;
        let dt = fine_dt * group as f64;
        let cfg = IntegratorConfig {
            dt,
            horizon,
            sanitize_every: 1,
        };
        let mut state = TrajectoryState::new(rho0.clone(), 0);
        for chunk in fine_increments.chunks(group) {
            let dw: f64 = chunk.iter().sum();
            state = em_step(&state, 0.0, &spec, &noise, &cfg, dw, 0.0).unwrap();
            state.rho = sanitize(&state.rho).unwrap();
        }
        distance_v(&state.rho, &target)
    };

    let means: Vec<f64> = (0..3)
        .map(|level| {
            let sum: f64 = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(515);
                    rng.set_stream(i as u64);
                    let fine: Vec<f64> = (0..n_fine)
                        .map(|_| rng.sample::<f64, _>(StandardNormal) * fine_dt.sqrt())
                        .collect();
                    terminal_v(level, &fine)
                })
                .sum();
            sum / m as f64
        })
        .collect();

    let d1 = (means[0] - means[1]).abs();
    let d2 = (means[1] - means[2]).abs();
    // First-order model: the next halving moves the mean by about d1/2.
    let allowance = (2.0 * d1 / 2.0).max(1e-5);
    assert!(
        d2 <= allowance,
        "refinement differences {d1:.3e} -> {d2:.3e} inconsistent with weak order one"
    );
}

#[test]
fn coherence_coordinate_converges_at_certified_delay() {
    // At a delay/gain pair the certificate accepts, the switching Lyapunov
    // loop drives the ensemble mean of μ3² to zero by the horizon.
    let prob = LmiProblem::new(0.2, 1.0).unwrap();
    let report = search_feasible(&prob, 2000, &SearchRanges::default(), 1).unwrap();
    assert!(report.feasible, "certificate search failed: {}", report.witness);

    let cfg = ExperimentConfig {
        strategy: Strategy::SwitchingLyapunov,
        tau: 0.2,
        k: 1.0,
        horizon: 20.0,
        n_traj: 20,
        initial_state: InitialState::Rho1,
        seed: 3030,
        ..ExperimentConfig::default()
    };
    let n_steps = cfg.integrator().n_steps();
    let mean_mu3_sq: f64 = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut terminal_mu3 = f64::NAN;
            run_trajectory_observed(&cfg, i as u64, |step, rho| {
                if step == n_steps {
                    terminal_mu3 = -rho.matrix()[(0, 3)].im;
                }
            })
            .unwrap();
            terminal_mu3 * terminal_mu3
        })
        .sum::<f64>()
        / cfg.n_traj as f64;

    assert!(
        mean_mu3_sq < 1e-3,
        "terminal mean μ3² = {mean_mu3_sq:.3e} did not fall below 1e-3"
    );
}

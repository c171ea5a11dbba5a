//! Preparation of Bell/GHZ entangled states in continuously measured qubit
//! systems by delayed switching feedback.
//!
//! The crate simulates the closed-loop stochastic master equation of an
//! N-qubit system under homodyne measurement of a degenerate observable,
//! applies two switching control strategies fed by the delayed filter state
//! (a bang-bang law and a switching Lyapunov law), and certifies
//! delay-dependent stability of the two-qubit loop through a small linear
//! matrix inequality.
//!
//! Module map:
//! - [`linalg`]: dense complex algebra and Jacobi eigensolvers.
//! - [`quantum`]: states, operators, superoperators, scalar functionals.
//! - [`validate`]: structural checks on the control Hamiltonians.
//! - [`sme`]: the Euler-Maruyama integrator, noise models, sanitization.
//! - [`delay`]: delay buffer, state-space partition, switching policies.
//! - [`lmi`]: the stability certificate and the reduced coherence model.
//! - [`experiment`]: seeded ensembles, presets, CSV export.

// Validation guards use `!(x > 0.0)`-style comparisons so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lmi;
pub mod quantum;
pub mod sme;
pub mod validate;

pub use delay::{classify_region, ControllerState, DelayBuffer, Latch, Region, Strategy};
pub use error::{Error, Result};
pub use experiment::{
    export_csv, preset, run_ensemble, run_trajectory, run_trajectory_observed, EnsembleSummary,
    ExperimentConfig, InitialState, TrajectorySeries,
};
pub use lmi::{
    assemble_lmi, embed_reduced, extract_reduced, feasibility_matrix, is_negative_definite,
    max_stable_delay, mu3_reduced_step, search_feasible, DelayBracket, FeasibilityReport,
    LmiCandidate, LmiProblem, ReducedState, SearchRanges, FEASIBILITY_MARGIN,
};
pub use quantum::{
    backaction, build_observable, control_signal_raw, dissipator, distance_v, ghz_state,
    lyapunov_v1, observable_from_sigma_z_weights, DensityMatrix, HermitianOperator, Sign,
    SystemSpec, TargetSpec,
};
pub use sme::{
    dephasing_sample, em_step, ensemble_drift_step, measurement_increment, sanitize,
    DephasingStream, IntegratorConfig, NoiseModel, TrajectoryState,
};
pub use validate::{validate_hamiltonians, ValidationReport};

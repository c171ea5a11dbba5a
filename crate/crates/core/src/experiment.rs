//! Seeded Monte Carlo ensembles of closed-loop trajectories, named
//! experiment presets, and CSV export.
//!
//! Determinism contract: an [`EnsembleSummary`] is a pure function of the
//! configuration (seed included). Trajectory `i` draws from ChaCha stream
//! `i` of the master seed, so changing the trajectory count never perturbs
//! earlier trajectories, and aggregation runs in index order after the
//! parallel fan-out.

use crate::delay::{classify_region, ControllerState, DelayBuffer, Strategy};
use crate::error::{Error, Result};
use crate::lmi::{search_feasible, FeasibilityReport, LmiProblem, SearchRanges};
use crate::quantum::{distance_v, lyapunov_v1, DensityMatrix, SystemSpec};
use crate::sme::{
    dephasing_sample, em_step, measurement_increment, sanitize, DephasingStream,
    IntegratorConfig, NoiseModel, TrajectoryState,
};
use crate::validate::validate_hamiltonians;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Initial state of every trajectory in an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `diag(0, 1, 0, 0)`, inside the far region.
    Rho1,
    /// `diag(1, 0, 0, 0)`, inside the near region.
    Rho2,
    /// The target state itself.
    Target,
    /// `I/4`.
    MaximallyMixed,
    /// Explicit diagonal populations.
    Diagonal(Vec<f64>),
}

impl InitialState {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "rho1" => Ok(Self::Rho1),
            "rho2" => Ok(Self::Rho2),
            "target" => Ok(Self::Target),
            "mixed" => Ok(Self::MaximallyMixed),
            other => {
                if let Some(list) = other.strip_prefix("diag:") {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        list.split(',').map(|x| x.trim().parse::<f64>()).collect();
                    let p = parsed.map_err(|e| {
                        Error::InvalidConfig(format!("bad diagonal initial state '{list}': {e}"))
                    })?;
                    Ok(Self::Diagonal(p))
                } else {
                    Err(Error::InvalidConfig(format!(
                        "unknown initial state '{other}' (expected rho1|rho2|target|mixed|diag:p1,p2,...)"
                    )))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Rho1 => "rho1".into(),
            Self::Rho2 => "rho2".into(),
            Self::Target => "target".into(),
            Self::MaximallyMixed => "mixed".into(),
            Self::Diagonal(p) => format!(
                "diag:{}",
                p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }

    pub fn density(&self, spec: &SystemSpec) -> Result<DensityMatrix> {
        match self {
            Self::Rho1 => DensityMatrix::from_populations(&[0.0, 1.0, 0.0, 0.0]),
            Self::Rho2 => DensityMatrix::from_populations(&[1.0, 0.0, 0.0, 0.0]),
            Self::Target => Ok(spec.target().clone()),
            Self::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(spec.dim())),
            Self::Diagonal(p) => {
                if p.len() != spec.dim() {
                    return Err(Error::InvalidConfig(format!(
                        "diagonal initial state has {} entries, system dimension is {}",
                        p.len(),
                        spec.dim()
                    )));
                }
                DensityMatrix::from_populations(p)
            }
        }
    }
}

/// Everything a run needs: strategy, delay, partition width, gain, grid,
/// noise, seed, initial state.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub tau: f64,
    pub gamma: f64,
    pub k: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_traj: usize,
    pub eta: f64,
    pub gamma_meas: f64,
    pub dephasing_amp: f64,
    pub dephasing_dwell: f64,
    pub seed: u64,
    pub initial_state: InitialState,
    pub output_dir: Option<PathBuf>,
    /// Spacing of the ensemble statistics grid.
    pub checkpoint_dt: f64,
    pub sanitize_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::BangBang,
            tau: 0.2,
            gamma: 0.06,
            k: 1.0,
            dt: 1e-3,
            horizon: 50.0,
            n_traj: 30,
            eta: 1.0,
            gamma_meas: 1.0,
            dephasing_amp: 0.0,
            dephasing_dwell: 0.1,
            seed: 0,
            initial_state: InitialState::Rho1,
            output_dir: None,
            checkpoint_dt: 0.1,
            sanitize_every: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator().validate(self.tau)?;
        if self.n_traj < 1 {
            return Err(Error::InvalidConfig("need at least one trajectory".into()));
        }
        if !(self.checkpoint_dt >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "checkpoint spacing {} must be at least one step {}",
                self.checkpoint_dt, self.dt
            )));
        }
        // Builds carry the remaining range checks.
        let spec = self.system()?;
        ControllerState::new(self.gamma, self.k, self.strategy, spec.dim())?;
        NoiseModel::from_spec(&spec, self.dephasing_amp, self.dephasing_dwell)?;
        self.initial_state.density(&spec)?;
        Ok(())
    }

    pub fn system(&self) -> Result<SystemSpec> {
        SystemSpec::two_qubit_standard(self.eta, self.gamma_meas)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            horizon: self.horizon,
            sanitize_every: self.sanitize_every,
        }
    }

    fn checkpoint_stride(&self) -> u64 {
        (self.checkpoint_dt / self.dt).round().max(1.0) as u64
    }

    fn fingerprint(&self, stream: u64) -> String {
        format!(
            "strategy={} tau={} gamma={} k={} dt={} seed={} stream={}",
            self.strategy.as_str(),
            self.tau,
            self.gamma,
            self.k,
            self.dt,
            self.seed,
            stream
        )
    }

    /// Flat `key=value` text mirroring the config fields.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |e: String| Error::InvalidConfig(format!("line {}: {e}", lineno + 1));
            let parse_f64 =
                |v: &str| v.parse::<f64>().map_err(|e| bad(format!("bad number '{v}': {e}")));
            match key {
                "strategy" => {
                    cfg.strategy = match value {
                        "bang-bang" | "bangbang" => Strategy::BangBang,
                        "switching-lyapunov" | "lyapunov" => Strategy::SwitchingLyapunov,
                        other => {
                            return Err(bad(format!(
                                "unknown strategy '{other}' (bang-bang | switching-lyapunov)"
                            )))
                        }
                    }
                }
                "tau" => cfg.tau = parse_f64(value)?,
                "gamma" => cfg.gamma = parse_f64(value)?,
                "k" => cfg.k = parse_f64(value)?,
                "dt" => cfg.dt = parse_f64(value)?,
                "horizon" => cfg.horizon = parse_f64(value)?,
                "n_traj" => {
                    cfg.n_traj = value
                        .parse::<usize>()
                        .map_err(|e| bad(format!("bad trajectory count '{value}': {e}")))?
                }
                "eta" => cfg.eta = parse_f64(value)?,
                "gamma_meas" => cfg.gamma_meas = parse_f64(value)?,
                "dephasing_amp" => cfg.dephasing_amp = parse_f64(value)?,
                "dephasing_dwell" => cfg.dephasing_dwell = parse_f64(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|e| bad(format!("bad seed '{value}': {e}")))?
                }
                "initial_state" => cfg.initial_state = InitialState::parse(value)?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
                "checkpoint_dt" => cfg.checkpoint_dt = parse_f64(value)?,
                "sanitize_every" => {
                    cfg.sanitize_every = value
                        .parse::<u64>()
                        .map_err(|e| bad(format!("bad cadence '{value}': {e}")))?
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }
}

/// Named experiment presets mirroring the numerical studies: both switching
/// strategies from the far initial state (fig1/fig2), reduced efficiency and
/// dephasing robustness from the near initial state (fig3/fig4), and the
/// shorter-delay comparison pair (fig5).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::default();
    let cfg = match name {
        "fig1" => ExperimentConfig {
            strategy: Strategy::BangBang,
            initial_state: InitialState::Rho1,
            ..base
        },
        "fig2" => ExperimentConfig {
            strategy: Strategy::SwitchingLyapunov,
            initial_state: InitialState::Rho1,
            ..base
        },
        "fig3a" => ExperimentConfig {
            strategy: Strategy::SwitchingLyapunov,
            eta: 0.8,
            initial_state: InitialState::Rho2,
            ..base
        },
        "fig3b" => ExperimentConfig {
            strategy: Strategy::BangBang,
            eta: 0.8,
            initial_state: InitialState::Rho2,
            ..base
        },
        "fig4a" => ExperimentConfig {
            strategy: Strategy::SwitchingLyapunov,
            eta: 0.8,
            dephasing_amp: 0.5,
            initial_state: InitialState::Rho2,
            ..base
        },
        "fig4b" => ExperimentConfig {
            strategy: Strategy::BangBang,
            eta: 0.8,
            dephasing_amp: 0.5,
            initial_state: InitialState::Rho2,
            ..base
        },
        // Shorter horizon so the mid-run checkpoint falls inside the
        // transient where the two strategies actually differ.
        "fig5" => ExperimentConfig {
            strategy: Strategy::SwitchingLyapunov,
            tau: 0.1,
            n_traj: 100,
            horizon: 20.0,
            initial_state: InitialState::Rho1,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Per-step record of one trajectory.
#[derive(Debug, Clone, Default)]
pub struct TrajectorySeries {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub v1: Vec<f64>,
    pub u2: Vec<f64>,
    pub y: Vec<f64>,
}

impl TrajectorySeries {
    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            v1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, v: f64, v1: f64, u2: f64, y: f64) {
        self.t.push(t);
        self.v.push(v);
        self.v1.push(v1);
        self.u2.push(u2);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Simulate one closed-loop trajectory on ChaCha stream `stream`, invoking
/// `observe(step, state)` after every step (post-sanitize whenever the
/// cadence fires).
pub fn run_trajectory_observed(
    cfg: &ExperimentConfig,
    stream: u64,
    mut observe: impl FnMut(u64, &DensityMatrix),
) -> Result<TrajectorySeries> {
    cfg.validate()?;
    let spec = cfg.system()?;
    let noise = NoiseModel::from_spec(&spec, cfg.dephasing_amp, cfg.dephasing_dwell)?;
    let icfg = cfg.integrator();
    let n_steps = icfg.n_steps();

    let rho0 = cfg.initial_state.density(&spec)?;
    let mut buffer = DelayBuffer::new(cfg.tau, cfg.dt)?;
    let mut ctrl = ControllerState::new(cfg.gamma, cfg.k, cfg.strategy, spec.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let dephasing = DephasingStream {
        master_seed: cfg.seed,
        stream,
    };

    let mut state = TrajectoryState::new(rho0, stream);
    buffer.record(state.rho.clone());
    let mut series = TrajectorySeries::with_capacity(n_steps as usize + 1);

    let wrap = |e: Error, cfg: &ExperimentConfig| match e {
        Error::NumericalBlowup { step, detail } => Error::NumericalBlowup {
            step,
            detail: format!("{detail} [{}]", cfg.fingerprint(stream)),
        },
        other => other,
    };

    for step in 0..=n_steps {
        let delayed = buffer.delayed()?.clone();
        let v_delayed = distance_v(&delayed, spec.target());
        let region = classify_region(v_delayed, cfg.gamma)?;
        let u2 = match cfg.strategy {
            Strategy::BangBang => ctrl.bangbang_policy(region),
            Strategy::SwitchingLyapunov => ctrl.lyapunov_policy(&delayed, region, &spec)?,
        };

        series.push(
            state.t,
            distance_v(&state.rho, spec.target()),
            lyapunov_v1(&state.rho),
            u2,
            state.y,
        );
        if step == n_steps {
            break;
        }

        let beta = dephasing_sample(&noise, state.t, &dephasing);
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.dt.sqrt();
        let dy = measurement_increment(&state.rho, &spec, dw, cfg.dt);
        let mut next =
            em_step(&state, u2, &spec, &noise, &icfg, dw, beta).map_err(|e| wrap(e, cfg))?;
        next.y = state.y + dy;
        if next.step % icfg.sanitize_every == 0 {
            next.rho = sanitize(&next.rho).map_err(|e| wrap(e, cfg))?;
        }
        observe(next.step, &next.rho);
        buffer.record(next.rho.clone());
        state = next;
    }
    Ok(series)
}

/// Simulate one closed-loop trajectory; deterministic in `(cfg, stream)`.
pub fn run_trajectory(cfg: &ExperimentConfig, stream: u64) -> Result<TrajectorySeries> {
    run_trajectory_observed(cfg, stream, |_, _| {})
}

/// Ensemble statistics on the checkpoint grid plus two archived sample
/// paths and run metadata.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub v_mean: Vec<f64>,
    pub v_stderr: Vec<f64>,
    /// Final distance of every trajectory.
    pub terminal_v: Vec<f64>,
    /// Full per-step series of the first trajectories (at most two).
    pub samples: Vec<TrajectorySeries>,
    pub meta: RunMetadata,
}

#[derive(Debug, Clone)]
pub struct RunMetadata {
    /// Ordered `key=value` echo of the configuration and environment.
    pub entries: Vec<(String, String)>,
    pub wall_time_s: f64,
}

struct TrajectoryPayload {
    checkpoints: Vec<f64>,
    terminal_v: f64,
    full: Option<TrajectorySeries>,
}

/// Run `cfg.n_traj` trajectories (in parallel) and aggregate.
///
/// The Hamiltonian structure is validated before any trajectory runs. Any
/// trajectory failure aborts the ensemble with the list of failed streams.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    let spec = cfg.system()?;
    validate_hamiltonians(&spec, 1000)?;

    let start = Instant::now();
    let stride = cfg.checkpoint_stride();
    let n_steps = cfg.integrator().n_steps();

    let results: Vec<std::result::Result<TrajectoryPayload, (u64, Error)>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let stream = i as u64;
            match run_trajectory(cfg, stream) {
                Ok(series) => {
                    let checkpoints: Vec<f64> = (0..=n_steps)
                        .step_by(stride as usize)
                        .map(|s| series.v[s as usize])
                        .collect();
                    let terminal_v = *series.v.last().expect("nonempty series");
                    let full = (i < 2).then_some(series);
                    Ok(TrajectoryPayload {
                        checkpoints,
                        terminal_v,
                        full,
                    })
                }
                Err(e) => Err((stream, e)),
            }
        })
        .collect();

    let mut payloads = Vec::with_capacity(cfg.n_traj);
    let mut failures = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(p) => payloads.push(p),
            Err((stream, e)) => {
                if first_error.is_none() {
                    first_error = Some(e.to_string());
                }
                failures.push(stream);
            }
        }
    }
    if !failures.is_empty() {
        return Err(Error::PartialResults {
            failed: failures.len(),
            total: cfg.n_traj,
            streams: failures,
            first: first_error.unwrap_or_default(),
        });
    }

    let n_checkpoints = payloads[0].checkpoints.len();
    let m = payloads.len() as f64;
    let mut v_mean = vec![0.0; n_checkpoints];
    let mut v_stderr = vec![0.0; n_checkpoints];
    for p in &payloads {
        for (acc, &v) in v_mean.iter_mut().zip(&p.checkpoints) {
            *acc += v;
        }
    }
    for acc in v_mean.iter_mut() {
        *acc /= m;
    }
    if payloads.len() > 1 {
        for p in &payloads {
            for ((acc, &v), mean) in v_stderr.iter_mut().zip(&p.checkpoints).zip(&v_mean) {
                *acc += (v - mean) * (v - mean);
            }
        }
        for acc in v_stderr.iter_mut() {
            *acc = (*acc / (m - 1.0)).sqrt() / m.sqrt();
        }
    }

    let times: Vec<f64> = (0..=n_steps)
        .step_by(stride as usize)
        .map(|s| s as f64 * cfg.dt)
        .collect();
    let terminal_v: Vec<f64> = payloads.iter().map(|p| p.terminal_v).collect();
    let samples: Vec<TrajectorySeries> =
        payloads.into_iter().filter_map(|p| p.full).collect();

    // The certificate search only applies to the delayed Lyapunov loop.
    let lmi_report: Option<FeasibilityReport> = match cfg.strategy {
        Strategy::SwitchingLyapunov => {
            let prob = LmiProblem::new(cfg.tau, cfg.k)?;
            Some(search_feasible(&prob, 4000, &SearchRanges::default(), 0x10b1)?)
        }
        Strategy::BangBang => None,
    };

    let buffer = DelayBuffer::new(cfg.tau, cfg.dt)?;
    let mut entries: Vec<(String, String)> = vec![
        ("strategy".into(), cfg.strategy.as_str().into()),
        ("tau".into(), cfg.tau.to_string()),
        ("gamma".into(), cfg.gamma.to_string()),
        ("k".into(), cfg.k.to_string()),
        ("dt".into(), cfg.dt.to_string()),
        ("horizon".into(), cfg.horizon.to_string()),
        ("n_traj".into(), cfg.n_traj.to_string()),
        ("eta".into(), cfg.eta.to_string()),
        ("gamma_meas".into(), cfg.gamma_meas.to_string()),
        ("dephasing_amp".into(), cfg.dephasing_amp.to_string()),
        ("dephasing_dwell".into(), cfg.dephasing_dwell.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("initial_state".into(), cfg.initial_state.label()),
        ("checkpoint_dt".into(), cfg.checkpoint_dt.to_string()),
        ("sanitize_every".into(), cfg.sanitize_every.to_string()),
        ("scheme".into(), "euler-maruyama".into()),
        ("delay_steps".into(), buffer.lag_steps().to_string()),
        (
            "tau_quantization_error".into(),
            format!("{:e}", buffer.quantization_error()),
        ),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
    ];
    if let Some(report) = &lmi_report {
        entries.push(("lmi_feasible".into(), report.feasible.to_string()));
        entries.push(("lmi_witness".into(), format!("{:e}", report.witness)));
        entries.push((
            "lmi_candidate".into(),
            format!(
                "q={:e} r={:e} eps={:e} s1={:e} s2={:e} s3={:e}",
                report.candidate.q,
                report.candidate.r,
                report.candidate.eps,
                report.candidate.s[0],
                report.candidate.s[1],
                report.candidate.s[2]
            ),
        ));
        entries.push((
            "lmi_evaluations".into(),
            report.evaluations.to_string(),
        ));
    }

    Ok(EnsembleSummary {
        times,
        v_mean,
        v_stderr,
        terminal_v,
        samples,
        meta: RunMetadata {
            entries,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

/// Decimal text with 12 significant digits.
fn fmt12(x: f64) -> String {
    format!("{:.11e}", x)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Write `summary.csv` (t, v_mean, v_stderr), `sample_1.csv`/`sample_2.csv`
/// (t, v, u2, y) and `meta.txt` into `dir`. Comma-delimited, header row,
/// newline-terminated, 12 significant digits.
pub fn export_csv(summary: &EnsembleSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    let mut text = String::from("t,v_mean,v_stderr\n");
    for i in 0..summary.times.len() {
        let _ = writeln!(
            text,
            "{},{},{}",
            fmt12(summary.times[i]),
            fmt12(summary.v_mean[i]),
            fmt12(summary.v_stderr[i])
        );
    }
    written.push(write_file(dir, "summary.csv", &text)?);

    for (idx, sample) in summary.samples.iter().enumerate().take(2) {
        let mut text = String::from("t,v,u2,y\n");
        for i in 0..sample.len() {
            let _ = writeln!(
                text,
                "{},{},{},{}",
                fmt12(sample.t[i]),
                fmt12(sample.v[i]),
                fmt12(sample.u2[i]),
                fmt12(sample.y[i])
            );
        }
        written.push(write_file(dir, &format!("sample_{}.csv", idx + 1), &text)?);
    }

    let mut text = String::new();
    for (key, value) in &summary.meta.entries {
        let _ = writeln!(text, "{key}={value}");
    }
    let _ = writeln!(text, "wall_time_s={}", summary.meta.wall_time_s);
    written.push(write_file(dir, "meta.txt", &text)?);

    Ok(written)
}

//! Delay buffer for the filter state and the two switching control policies.
//!
//! The state space is partitioned by the distance function `V` into
//! `LOW = {V < 1-γ}`, `MID = {1-γ ≤ V < 1-γ/2}` and `HIGH = {V ≥ 1-γ/2}`.
//! Both policies drive with the constant value 1 in `HIGH`, relax in `LOW`
//! (to 0 for the bang-bang law, to the delayed Lyapunov feedback
//! `-k·Tr(i[H2, ρ_{t-τ}]ρ_d)` for the switching Lyapunov law), and resolve
//! `MID` by hysteresis: the control keeps the branch of the region the
//! trajectory last left.

use crate::error::{Error, Result};
use crate::quantum::{control_signal_raw, DensityMatrix, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Low,
    Mid,
    High,
}

/// Memory of the last non-intermediate region; `InitialMid` covers a
/// trajectory whose very first classified state already sits in `MID`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Latch {
    FromHigh,
    FromLow,
    InitialMid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    BangBang,
    SwitchingLyapunov,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::BangBang => "bang-bang",
            Strategy::SwitchingLyapunov => "switching-lyapunov",
        }
    }
}

/// Classify a distance value against the partition thresholds.
///
/// The set below `1-γ` is strict, the set above `1-γ/2` is closed, matching
/// the set definitions the switching rules are stated with. Values may
/// stray outside `[0, 1]` by at most `1e-9` (integration slack).
pub fn classify_region(v: f64, gamma: f64) -> Result<Region> {
    const SLACK: f64 = 1e-9;
    if !v.is_finite() || !(-SLACK..=1.0 + SLACK).contains(&v) {
        return Err(Error::InvalidDistance(v));
    }
    let v = v.clamp(0.0, 1.0);
    if v < 1.0 - gamma {
        Ok(Region::Low)
    } else if v < 1.0 - gamma / 2.0 {
        Ok(Region::Mid)
    } else {
        Ok(Region::High)
    }
}

/// Hysteresis state of one trajectory's controller.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub gamma: f64,
    pub k: f64,
    pub strategy: Strategy,
    region: Option<Region>,
    latch: Option<Latch>,
}

impl ControllerState {
    /// `gamma` must lie in `(0, 1/n²)` so the partition separates the target
    /// from the other entangled states; `gamma = 0` collapses `MID` and is
    /// rejected as degenerate.
    pub fn new(gamma: f64, k: f64, strategy: Strategy, dim: usize) -> Result<Self> {
        let upper = 1.0 / (dim as f64 * dim as f64);
        if !(gamma > 0.0 && gamma < upper) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, {upper}) for dimension {dim}, got {gamma}"
            )));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "feedback gain must be positive, got {k}"
            )));
        }
        Ok(Self {
            gamma,
            k,
            strategy,
            region: None,
            latch: None,
        })
    }

    pub fn region(&self) -> Option<Region> {
        self.region
    }

    pub fn latch(&self) -> Option<Latch> {
        self.latch
    }

    /// Latch updates only on entering HIGH or LOW, never inside MID; a MID
    /// first classification records `InitialMid`.
    fn observe(&mut self, region: Region) -> Latch {
        let latch = match region {
            Region::High => Latch::FromHigh,
            Region::Low => Latch::FromLow,
            Region::Mid => self.latch.unwrap_or(Latch::InitialMid),
        };
        self.latch = Some(latch);
        self.region = Some(region);
        latch
    }

    /// Bang-bang switching: 1 in HIGH, 0 in LOW, hysteresis in MID.
    pub fn bangbang_policy(&mut self, region_delayed: Region) -> f64 {
        let latch = self.observe(region_delayed);
        match region_delayed {
            Region::High => 1.0,
            Region::Low => 0.0,
            Region::Mid => match latch {
                Latch::FromLow => 0.0,
                Latch::FromHigh | Latch::InitialMid => 1.0,
            },
        }
    }

    /// Switching Lyapunov law: same branch structure, but the LOW branch
    /// (and MID entered from LOW) returns the delayed feedback
    /// `-k·Tr(i[H2, ρ_{t-τ}]ρ_d)`.
    pub fn lyapunov_policy(
        &mut self,
        rho_delayed: &DensityMatrix,
        region_delayed: Region,
        spec: &SystemSpec,
    ) -> Result<f64> {
        let latch = self.observe(region_delayed);
        let feedback = |ctrl: &Self| -> Result<f64> {
            Ok(-ctrl.k * control_signal_raw(rho_delayed, spec.h2(), spec.target())?)
        };
        match region_delayed {
            Region::High => Ok(1.0),
            Region::Low => feedback(self),
            Region::Mid => match latch {
                Latch::FromLow => feedback(self),
                Latch::FromHigh | Latch::InitialMid => Ok(1.0),
            },
        }
    }
}

/// Ring of state snapshots supplying `ρ_{t-τ}` at a fixed lag of
/// `d = round(τ/dt)` steps, with hold-initial history: until the buffer has
/// seen `d` steps, the delayed read returns the initial state.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    slots: Vec<DensityMatrix>,
    write_pos: usize,
    tau: f64,
    dt: f64,
    lag: usize,
}

impl DelayBuffer {
    pub fn new(tau: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delay buffer needs dt > 0 and tau >= 0, got dt = {dt}, tau = {tau}"
            )));
        }
        if tau > 0.0 && dt > tau {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} exceeds tau = {tau}; the buffer must hold at least one slot"
            )));
        }
        let lag = if tau == 0.0 {
            0
        } else {
            ((tau / dt).round() as usize).max(1)
        };
        Ok(Self {
            slots: Vec::with_capacity(lag + 1),
            write_pos: 0,
            tau,
            dt,
            lag,
        })
    }

    /// Number of steps between a snapshot and its delayed read; 0 means the
    /// delayed state is the current state.
    pub fn lag_steps(&self) -> usize {
        self.lag
    }

    /// `|d·dt - τ|`, the error introduced by quantizing the delay to steps.
    pub fn quantization_error(&self) -> f64 {
        (self.lag as f64 * self.dt - self.tau).abs()
    }

    /// Record the state at the current step. The first record back-fills the
    /// whole ring, realizing the hold-initial pre-history.
    pub fn record(&mut self, rho: DensityMatrix) {
        if self.slots.is_empty() {
            self.slots = vec![rho; self.lag + 1];
            self.write_pos = 0;
        } else {
            self.write_pos = (self.write_pos + 1) % self.slots.len();
            self.slots[self.write_pos] = rho;
        }
    }

    /// The snapshot recorded `lag` steps before the most recent `record`.
    pub fn delayed(&self) -> Result<&DensityMatrix> {
        if self.slots.is_empty() {
            return Err(Error::DelayNotInitialized);
        }
        let idx = (self.write_pos + 1) % self.slots.len();
        Ok(&self.slots[idx])
    }
}

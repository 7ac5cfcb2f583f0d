//! Nelson diffusions driven by closed-form wave densities.
//!
//! A particle moves forward in time as `dx = b⁺ dt + σ dW` and backward as
//! `dx = b⁻ dt + σ dW`, with `b± = ∇S ± ∇R` and `σ² = η/M`.

mod analysis;
mod ensemble;
mod wave;

pub use analysis::{
    continuity_residual, continuity_residual_analytic, energy_mc, energy_quadrature,
    madelung_residual, osmotic_residual, two_particle_energy, ContinuityReport, EnergyPoint,
    EnergyQuadrature, IncidentSide, OsmoticReport, QuadGrid, TwoParticlePoint, TwoParticleReport,
};
pub use ensemble::{
    evolve_ensemble, evolve_ensemble_in, sample_initial, DriftAccumulator, Envelope,
    EnsembleSnapshot, Histogram, SAMPLE_RETRY_CAP,
};
pub use wave::{Point, Potential, WaveKind, WaveModel, HISTOGRAM_EXTENT, QUADRATURE_EXTENT};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Forward and backward drifts `(b⁺, b⁻)` at `(x, t)`.
pub fn drifts(wave: &WaveModel, x: &Point, t: f64) -> Result<(Point, Point)> {
    wave.check_domain(x)?;
    let gr = wave.grad_r(x, t);
    let gs = wave.grad_s(x, t);
    let mut bp = [0.0; 3];
    let mut bm = [0.0; 3];
    for i in 0..wave.dim() {
        bp[i] = gs[i] + gr[i];
        bm[i] = gs[i] - gr[i];
    }
    Ok((bp, bm))
}

/// One Euler–Maruyama step. Forward: `x + b⁺(x,t) dt + σ√dt z`, arriving at `t + dt`.
/// Backward: `x − b⁻(x,t) dt + σ√dt z`, arriving at `t − dt`.
/// Periodic models wrap the result into their box.
pub fn step(
    x: &Point,
    t: f64,
    dt: f64,
    wave: &WaveModel,
    direction: Direction,
    rng: &mut impl Rng,
) -> Result<Point> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let mut out = raw_step(x, t, dt, wave, direction, rng)?;
    wave.wrap(&mut out);
    Ok(out)
}

/// Unwrapped Euler–Maruyama update.
pub(crate) fn raw_step(
    x: &Point,
    t: f64,
    dt: f64,
    wave: &WaveModel,
    direction: Direction,
    rng: &mut impl Rng,
) -> Result<Point> {
    let (bp, bm) = drifts(wave, x, t)?;
    let noise = wave.sigma() * dt.sqrt();
    let mut out = *x;
    for i in 0..wave.dim() {
        let z: f64 = rng.sample(StandardNormal);
        out[i] += match direction {
            Direction::Forward => bp[i] * dt,
            Direction::Backward => -bm[i] * dt,
        } + noise * z;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub wave: WaveModel,
    pub potential: Potential,
    pub n_particles: usize,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub seed: u64,
    /// Mean collision time; `None` stands for `τ̄ → ∞`.
    pub tau_bar: Option<f64>,
    pub direction: Direction,
    /// Number of snapshots, evenly spaced and including both ends.
    pub n_snapshots: usize,
    /// Bins per axis of the snapshot density histograms.
    pub histogram_bins: usize,
    /// Bins per axis of the drift accumulators.
    pub drift_bins: usize,
    pub envelope: Envelope,
}

impl DiffusionConfig {
    /// Defaults for everything except the physics.
    pub fn new(wave: WaveModel, n_particles: usize, t1: f64, dt: f64) -> Self {
        DiffusionConfig {
            potential: wave.natural_potential(),
            wave,
            n_particles,
            t0: 0.0,
            t1,
            dt,
            seed: 0,
            tau_bar: None,
            direction: Direction::Forward,
            n_snapshots: 11,
            histogram_bins: 200,
            drift_bins: 50,
            envelope: Envelope::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_particles == 0 {
            problems.push("n_particles must be at least 1".to_string());
        }
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 >= self.t0) {
            problems.push(format!("need finite t0 <= t1, got {} and {}", self.t0, self.t1));
        }
        if let Some(tau) = self.tau_bar {
            if !(tau.is_finite() && tau > 0.0) {
                problems.push(format!("tau_bar must be positive, got {tau}"));
            }
        }
        if self.n_snapshots < 1 {
            problems.push("n_snapshots must be at least 1".to_string());
        }
        if self.histogram_bins < 5 || self.drift_bins < 5 {
            problems.push("histogram_bins and drift_bins must be at least 5".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    /// Number of Euler–Maruyama steps; the last step is shortened to land on `t1`.
    pub fn n_steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// `3η/τ̄`, zero when `τ̄ → ∞`.
    pub fn collision_constant(&self) -> f64 {
        collision_constant(self.wave.eta(), self.tau_bar)
    }
}

/// `(M/2) · 3σ² · E[1/τ]` with `E[1/τ] = 2/τ̄`, i.e. `3η/τ̄`.
pub fn collision_constant(eta: f64, tau_bar: Option<f64>) -> f64 {
    tau_bar.map_or(0.0, |tau| 3.0 * eta / tau)
}

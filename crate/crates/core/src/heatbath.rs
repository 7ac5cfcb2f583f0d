//! Monte Carlo heat bath: a main particle colliding repeatedly with incident
//! particles drawn from a bath.
//!
//! Each collision `k` draws from its own stream `(seed, k)`, so a run is a
//! pure function of its configuration. Two exchange modes are offered:
//! [`Mode::Physical`] collides along a uniformly random axis, while
//! [`Mode::Paper`] replaces `P(φ)` by the identity, under which the scalar
//! drift and energy laws hold exactly in expectation.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{
    collide_with, nelson_energy_ledger, CollisionEvent, Exchange, MassPair, Projector,
    IDENTITY_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, stream};
use crate::stats::{batch_estimate, iid_estimate, Estimate, DEFAULT_BATCHES};
use crate::vec3::{Mat3, Vec3};

/// Every `SPOT_CHECK_STRIDE`-th collision of a run is checked against the
/// conservation identities.
pub const SPOT_CHECK_STRIDE: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathKind {
    /// `|w| = c_w`, direction uniform.
    IsotropicFixedSpeed,
    /// Gaussian components with `E|w|² = c_w²`.
    Maxwellian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Physical,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathConfig {
    pub masses: MassPair,
    /// `c_w`, with `E|w − bath_mean|² = c_w²`.
    pub bath_speed: f64,
    pub bath_kind: BathKind,
    pub mode: Mode,
    /// Correlation between the main velocity and the next incident velocity.
    pub target_correlation: Option<f64>,
    pub n_collisions: u64,
    pub seed: u64,
    /// Mean time between collisions.
    pub tau_bar: f64,
    pub initial_velocity: Vec3,
    /// Constant drift of the bath, added to every incident velocity.
    pub bath_mean: Vec3,
    /// Leading fraction of collisions left out of stationary moments.
    pub burn_in_fraction: f64,
}

impl BathConfig {
    pub fn new(masses: MassPair, bath_speed: f64, tau_bar: f64) -> Self {
        BathConfig {
            masses,
            bath_speed,
            bath_kind: BathKind::IsotropicFixedSpeed,
            mode: Mode::Paper,
            target_correlation: None,
            n_collisions: 100_000,
            seed: 0,
            tau_bar,
            initial_velocity: Vec3::ZERO,
            bath_mean: Vec3::ZERO,
            burn_in_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.bath_speed.is_finite() && self.bath_speed > 0.0) {
            problems.push(format!("bath_speed must be positive, got {}", self.bath_speed));
        }
        if !(self.tau_bar.is_finite() && self.tau_bar > 0.0) {
            problems.push(format!("tau_bar must be positive, got {}", self.tau_bar));
        }
        if let Some(r) = self.target_correlation {
            if !(r.is_finite() && (-1.0..=1.0).contains(&r)) {
                problems.push(format!("target_correlation must lie in [-1, 1], got {r}"));
            }
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            problems.push(format!(
                "burn_in_fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            ));
        }
        if !self.initial_velocity.is_finite() || !self.bath_mean.is_finite() {
            problems.push("initial_velocity and bath_mean must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    fn exchange(&self, rng: &mut impl Rng) -> Exchange {
        match self.mode {
            Mode::Paper => Exchange::Full,
            Mode::Physical => Exchange::Axis(
                Projector::new(sample_phi(rng)).expect("sphere samples are unit vectors"),
            ),
        }
    }
}

/// Uniformly distributed collision axis.
pub fn sample_phi(rng: &mut impl Rng) -> Vec3 {
    Vec3::from(UnitSphere.sample(rng))
}

/// Inter-collision time `τ ~ Gamma(shape 2, scale τ̄/2)`, so `E[τ] = τ̄` and `E[1/τ] = 2/τ̄`.
pub fn sample_tau(tau_bar: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(tau_bar.is_finite() && tau_bar > 0.0) {
        return Err(invalid(format!("tau_bar must be positive, got {tau_bar}")));
    }
    let gamma = Gamma::new(2.0, tau_bar / 2.0).map_err(|e| invalid(e.to_string()))?;
    Ok(gamma.sample(rng))
}

/// Sample moments of the inter-collision time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauMoments {
    pub n: u64,
    pub tau_bar: f64,
    /// `E[τ]`, expected `τ̄`.
    pub mean_tau: Estimate,
    /// `E[1/τ]`, expected `2/τ̄`.
    pub mean_inv_tau: Estimate,
}

/// `n` draws of `τ` from one stream. `1/τ` has a heavy right tail (infinite
/// variance for shape 2), so its standard error is only indicative.
pub fn tau_moments(tau_bar: f64, n: u64, seed: u64) -> Result<TauMoments> {
    if n < 2 {
        return Err(invalid("tau moments need at least 2 samples"));
    }
    let mut rng = stream(seed, domain::GAMMA_TAU, 0);
    let mut taus = Vec::with_capacity(n as usize);
    for _ in 0..n {
        taus.push(sample_tau(tau_bar, &mut rng)?);
    }
    let inv: Vec<f64> = taus.iter().map(|t| 1.0 / t).collect();
    Ok(TauMoments { n, tau_bar, mean_tau: iid_estimate(&taus), mean_inv_tau: iid_estimate(&inv) })
}

/// One incident velocity from the uncorrelated bath.
pub fn sample_bath_velocity(config: &BathConfig, rng: &mut impl Rng) -> Vec3 {
    let c = config.bath_speed;
    let noise = match config.bath_kind {
        BathKind::IsotropicFixedSpeed => c * sample_phi(rng),
        BathKind::Maxwellian => {
            let normal = Normal::new(0.0, c / 3f64.sqrt()).expect("positive bath speed");
            Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
        }
    };
    config.bath_mean + noise
}

/// Incident velocity correlated with the main velocity `v`:
/// `w = ρ c v̂ + sqrt(1 − ρ²) c u⊥` with `u⊥` an isotropic unit vector orthogonal to `v̂`.
///
/// A missing or zero target falls back to [`sample_bath_velocity`].
pub fn sample_correlated_bath(v: Vec3, config: &BathConfig, rng: &mut impl Rng) -> Result<Vec3> {
    let rho = match config.target_correlation {
        None | Some(0.0) => return Ok(sample_bath_velocity(config, rng)),
        Some(r) => r,
    };
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("target correlation {rho} outside [-1, 1]")));
    }
    let vhat = v.normalized().ok_or_else(|| {
        invalid("correlated bath needs a non-zero main velocity".to_string())
    })?;
    let c = config.bath_speed;
    let perp = loop {
        let u = sample_phi(rng);
        if let Some(p) = (u - vhat * vhat.dot(u)).normalized() {
            break p;
        }
    };
    Ok(config.bath_mean + rho * c * vhat + (1.0 - rho * rho).max(0.0).sqrt() * c * perp)
}

fn one_collision(v: Vec3, config: &BathConfig, index: u64, dom: u64) -> Result<CollisionEvent> {
    let mut rng = stream(config.seed, dom, index);
    let w = sample_correlated_bath(v, config, &mut rng)?;
    let exchange = config.exchange(&mut rng);
    collide_with(v, w, exchange, &config.masses)
}

/// All collisions of one main-particle trajectory.
pub fn simulate(config: &BathConfig) -> Result<Vec<CollisionEvent>> {
    config.validate()?;
    let mut v = config.initial_velocity;
    let mut events = Vec::with_capacity(config.n_collisions as usize);
    for k in 0..config.n_collisions {
        let e = one_collision(v, config, k, domain::BATH_COLLISION)?;
        v = e.v2;
        events.push(e);
    }
    Ok(events)
}

/// Moments of a bath run over its stationary window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub seed: u64,
    /// Collisions performed.
    pub n: u64,
    /// Collisions in the stationary window.
    pub n_stationary: u64,
    pub burn_in: u64,
    pub mean_v: Vec3,
    /// `E|v1|²`.
    pub mean_v2: Estimate,
    pub mean_w: Vec3,
    /// `E|w1|²`.
    pub mean_w2: Estimate,
    /// `E[v1ᵀw1]`.
    pub cross_vw: Estimate,
    pub rho: f64,
    pub rho_se: f64,
    /// `M E|v|² / (m c_w²)`.
    pub energy_ratio: Estimate,
    /// Mean velocity change per collision.
    pub mean_dv: Vec3,
    /// Mean of `w1 − v1`.
    pub mean_gap: Vec3,
    pub final_v: Vec3,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathRun {
    pub summary: StatSummary,
    /// Running summaries at evenly spaced checkpoints (the last equals `summary`).
    pub series: Vec<StatSummary>,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

/// One recorded collision of a trajectory dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub index: u64,
    pub v1: Vec3,
    pub w1: Vec3,
    pub v2: Vec3,
}

/// Summarize the first `upto` events of a run.
pub fn summarize(config: &BathConfig, events: &[CollisionEvent]) -> StatSummary {
    let n = events.len() as u64;
    let burn_in = (config.burn_in_fraction * n as f64).floor() as u64;
    let window = &events[burn_in as usize..];
    let (mut checks, mut violations) = (0, 0);
    for (k, e) in events.iter().enumerate() {
        if (k as u64).is_multiple_of(SPOT_CHECK_STRIDE) {
            checks += 1;
            if !e.satisfies_invariants(IDENTITY_TOL) {
                violations += 1;
            }
        }
    }
    let final_v = events.last().map_or(config.initial_velocity, |e| e.v2);
    if window.is_empty() {
        let v0 = config.initial_velocity;
        let nan = Estimate { mean: f64::NAN, se: f64::NAN };
        let g2 = config.masses.gamma2();
        return StatSummary {
            seed: config.seed,
            n,
            n_stationary: 0,
            burn_in,
            mean_v: v0,
            mean_v2: Estimate { mean: v0.norm2(), se: 0.0 },
            mean_w: Vec3::splat(f64::NAN),
            mean_w2: nan,
            cross_vw: nan,
            rho: f64::NAN,
            rho_se: f64::NAN,
            energy_ratio: Estimate {
                mean: v0.norm2() / (g2 * config.bath_speed * config.bath_speed),
                se: 0.0,
            },
            mean_dv: Vec3::ZERO,
            mean_gap: Vec3::splat(f64::NAN),
            final_v,
            invariant_checks: checks,
            invariant_violations: violations,
        };
    }
    let count = window.len() as f64;
    let mut sum_v = Vec3::ZERO;
    let mut sum_w = Vec3::ZERO;
    let mut sum_dv = Vec3::ZERO;
    let mut v2s = Vec::with_capacity(window.len());
    let mut w2s = Vec::with_capacity(window.len());
    let mut vws = Vec::with_capacity(window.len());
    for e in window {
        sum_v += e.v1;
        sum_w += e.w1;
        sum_dv += e.v2 - e.v1;
        v2s.push(e.v1.norm2());
        w2s.push(e.w1.norm2());
        vws.push(e.v1.dot(e.w1));
    }
    let mean_v2 = batch_estimate(&v2s, DEFAULT_BATCHES);
    let mean_w2 = batch_estimate(&w2s, DEFAULT_BATCHES);
    let cross_vw = batch_estimate(&vws, DEFAULT_BATCHES);
    let denom = (mean_v2.mean * mean_w2.mean).sqrt();
    let scale = 1.0 / (config.masses.gamma2() * config.bath_speed * config.bath_speed);
    StatSummary {
        seed: config.seed,
        n,
        n_stationary: window.len() as u64,
        burn_in,
        mean_v: sum_v / count,
        mean_v2,
        mean_w: sum_w / count,
        mean_w2,
        cross_vw,
        rho: if denom > 0.0 { cross_vw.mean / denom } else { 0.0 },
        rho_se: if denom > 0.0 { cross_vw.se / denom } else { 0.0 },
        energy_ratio: Estimate { mean: mean_v2.mean * scale, se: mean_v2.se * scale },
        mean_dv: sum_dv / count,
        mean_gap: (sum_w - sum_v) / count,
        final_v,
        invariant_checks: checks,
        invariant_violations: violations,
    }
}

/// Run the bath and summarize it; `checkpoints` running summaries are kept.
pub fn run_bath(config: &BathConfig, checkpoints: usize, keep_trajectory: bool) -> Result<BathRun> {
    let events = simulate(config)?;
    let n = events.len();
    let k = checkpoints.max(1);
    let mut ends: Vec<usize> = (1..=k).map(|i| i * n / k).filter(|&upto| upto > 0).collect();
    ends.dedup();
    if ends.is_empty() {
        ends.push(0);
    }
    let series = ends.into_iter().map(|upto| summarize(config, &events[..upto])).collect();
    let trajectory = keep_trajectory.then(|| {
        events
            .iter()
            .enumerate()
            .map(|(i, e)| TrajectoryRow { index: i as u64, v1: e.v1, w1: e.w1, v2: e.v2 })
            .collect()
    });
    Ok(BathRun { summary: summarize(config, &events), series, trajectory })
}

/// Single-collision drift over independent replicas that all start at
/// `config.initial_velocity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub replicas: u64,
    /// Mean of `v2 − v1` per component.
    pub mean_dv: [Estimate; 3],
    /// Sample mean of `w1 − v1`.
    pub mean_gap: Vec3,
    /// Sample mean of the exchange projector (the identity in paper mode).
    pub projector_mean: Mat3,
    /// Exact coefficient `γ sinθ = 2γ²/(1+γ²)`.
    pub coefficient: f64,
    /// `γ sinθ E[P] E[w1 − v1]` from the sample moments.
    pub predicted_dv: Vec3,
}

/// Independent single collisions that all start from `config.initial_velocity`.
pub fn replica_events(config: &BathConfig, replicas: u64) -> Result<Vec<CollisionEvent>> {
    config.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|r| one_collision(config.initial_velocity, config, r, domain::BATH_REPLICA))
        .collect()
}

pub fn single_step_drift(config: &BathConfig, replicas: u64) -> Result<DriftReport> {
    config.validate()?;
    if replicas == 0 {
        return Err(invalid("replicas must be at least 1"));
    }
    let events = replica_events(config, replicas)?;
    let n = replicas as f64;
    let mut comps: [Vec<f64>; 3] = Default::default();
    let mut gap = Vec3::ZERO;
    let mut proj = Mat3::ZERO;
    for e in &events {
        let dv = e.v2 - e.v1;
        for (i, c) in comps.iter_mut().enumerate() {
            c.push(dv[i]);
        }
        gap += e.w1 - e.v1;
        proj = proj.add(&e.exchange.matrix());
    }
    let gap = gap / n;
    let proj = proj.scale(1.0 / n);
    let coefficient = config.masses.gamma_sin();
    Ok(DriftReport {
        replicas,
        mean_dv: [0, 1, 2].map(|i| iid_estimate(&comps[i])),
        mean_gap: gap,
        projector_mean: proj,
        coefficient,
        predicted_dv: coefficient * proj.mul_vec(gap),
    })
}

/// Monte Carlo mean of `P(φ)` for uniformly sampled axes.
pub fn projector_mean_estimate(n: u64, rng: &mut impl Rng) -> Result<Mat3> {
    if n == 0 {
        return Err(invalid("projector mean needs at least one sample"));
    }
    let mut acc = Mat3::ZERO;
    for _ in 0..n {
        let phi = sample_phi(rng);
        acc = acc.add(&Mat3::outer(phi, phi));
    }
    Ok(acc.scale(1.0 / n as f64))
}

/// Sweep over main-particle speeds for the correlation that holds the speed constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedSweep {
    pub masses: MassPair,
    pub bath_speed: f64,
    pub mode: Mode,
    /// Main particle speeds as fractions of `c_w`.
    pub speeds: Vec<f64>,
    /// Collisions per energy evaluation.
    pub samples: u64,
    pub bisection_steps: u32,
    pub seed: u64,
}

impl SpeedSweep {
    pub fn new(masses: MassPair, bath_speed: f64, speeds: Vec<f64>) -> Self {
        SpeedSweep {
            masses,
            bath_speed,
            mode: Mode::Paper,
            speeds,
            samples: 20_000,
            bisection_steps: 40,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// `|v|/c_w`.
    pub speed_ratio: f64,
    /// Bath correlation found by bisection (`NaN` when not bracketed).
    pub required_rho: f64,
    /// Correlation measured on the sample drawn at `required_rho`.
    pub measured_rho: f64,
    /// Small-mass law `|v|/c_w`.
    pub predicted_rho: f64,
    /// Exact balance `((2−γs)|v|² − γs c²) / (2(1−γs) |v| c)`, `γs = γ sinθ`.
    pub predicted_rho_exact: f64,
    /// Mean `|v2|² − |v1|²` at `required_rho`.
    pub residual_energy_change: f64,
    pub converged: bool,
}

/// For each speed, bisect on the bath correlation in `[0, 1]` until the mean
/// speed is unchanged by a collision. Common random numbers are used across
/// bisection steps so the response is a smooth function of the correlation.
pub fn correlation_for_constant_speed(sweep: &SpeedSweep) -> Result<Vec<CorrelationRow>> {
    if !(sweep.bath_speed.is_finite() && sweep.bath_speed > 0.0) {
        return Err(invalid(format!("bath_speed must be positive, got {}", sweep.bath_speed)));
    }
    if sweep.samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let c = sweep.bath_speed;
    let gs = sweep.masses.gamma_sin();
    sweep
        .speeds
        .iter()
        .map(|&ratio| {
            if !(ratio.is_finite() && (0.0..1.0).contains(&ratio)) {
                return Err(invalid(format!("speed ratio {ratio} outside [0, 1)")));
            }
            let speed = ratio * c;
            if speed == 0.0 {
                // At rest the main particle always gains energy; its correlation with
                // any bath is zero by definition.
                return Ok(CorrelationRow {
                    speed_ratio: 0.0,
                    required_rho: 0.0,
                    measured_rho: 0.0,
                    predicted_rho: 0.0,
                    predicted_rho_exact: 0.0,
                    residual_energy_change: gs * gs * c * c,
                    converged: false,
                });
            }
            let v1 = Vec3::new(speed, 0.0, 0.0);
            let eval = |rho: f64| energy_response(sweep, v1, rho);
            let (mut lo, mut hi) = (0.0, 1.0);
            let (f_lo, f_hi) = (eval(lo)?.0, eval(hi)?.0);
            let exact = ((2.0 - gs) * speed * speed - gs * c * c) / (2.0 * (1.0 - gs) * speed * c);
            if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
                return Ok(CorrelationRow {
                    speed_ratio: ratio,
                    required_rho: f64::NAN,
                    measured_rho: f64::NAN,
                    predicted_rho: ratio,
                    predicted_rho_exact: exact,
                    residual_energy_change: f64::NAN,
                    converged: false,
                });
            }
            let increasing = f_hi > f_lo;
            for _ in 0..sweep.bisection_steps {
                let mid = 0.5 * (lo + hi);
                let f = eval(mid)?.0;
                if (f > 0.0) == increasing {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let (change, measured) = eval(root)?;
            Ok(CorrelationRow {
                speed_ratio: ratio,
                required_rho: root,
                measured_rho: measured,
                predicted_rho: ratio,
                predicted_rho_exact: exact,
                residual_energy_change: change,
                converged: true,
            })
        })
        .collect()
}

/// Mean `|v2|² − |v1|²` and the measured correlation for bath correlation `rho`.
fn energy_response(sweep: &SpeedSweep, v1: Vec3, rho: f64) -> Result<(f64, f64)> {
    let mut config = BathConfig::new(sweep.masses, sweep.bath_speed, 1.0);
    config.mode = sweep.mode;
    config.seed = sweep.seed;
    config.target_correlation = Some(rho);
    let mut change = 0.0;
    let mut cross = 0.0;
    let mut w2 = 0.0;
    for i in 0..sweep.samples {
        let e = one_collision(v1, &config, i, domain::CORRELATION_SWEEP)?;
        change += e.v2.norm2() - v1.norm2();
        cross += v1.dot(e.w1);
        w2 += e.w1.norm2();
    }
    let n = sweep.samples as f64;
    let measured = (cross / n) / (v1.norm2() * w2 / n).sqrt();
    Ok((change / n, measured))
}

/// The incident half of the energy ledger replaced by its expectation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentSplit {
    /// `(M/2) E[|(v2+v1)/2|² + |(v2−v1)/2|²]`.
    pub main_energy: f64,
    /// `(m/2) E[|(w2+w1)/2|² + |(w2−w1)/2|²]`.
    pub v_incident: f64,
    /// `E[H]` computed directly as `(M|v1|² + m|w1|²)/2`.
    pub total_energy: f64,
    /// `(m/2) E[(|w1|² + |w2|²)/2]`, the bath's own energy scale.
    pub bath_energy: f64,
}

pub fn incident_potential_split(events: &[CollisionEvent]) -> Result<IncidentSplit> {
    let first = events.first().ok_or_else(|| invalid("no events"))?;
    let (big_m, m) = (first.masses.main(), first.masses.incident());
    let n = events.len() as f64;
    let (mut main, mut inc, mut total, mut bath) = (0.0, 0.0, 0.0, 0.0);
    for e in events {
        let l = nelson_energy_ledger(e);
        main += l.sym_main + l.osm_main;
        inc += l.sym_inc + l.osm_inc;
        total += 0.5 * (big_m * e.v1.norm2() + m * e.w1.norm2());
        bath += 0.5 * (e.w1.norm2() + e.w2.norm2());
    }
    Ok(IncidentSplit {
        main_energy: 0.5 * big_m * main / n,
        v_incident: 0.5 * m * inc / n,
        total_energy: total / n,
        bath_energy: 0.5 * m * bath / n,
    })
}

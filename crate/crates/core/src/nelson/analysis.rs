//! Estimators over snapshots and deterministic checks on wave models.

use serde::{Deserialize, Serialize};

use super::ensemble::{evolve_ensemble_in, EnsembleSnapshot, Histogram};
use super::wave::{norm2, Point, Potential, WaveModel, QUADRATURE_EXTENT};
use super::{collision_constant, DiffusionConfig};
use crate::error::{invalid, Error, Result};
use crate::rng::domain;
use crate::stats::{correlation, iid_estimate, Estimate};

/// Bins whose occupancy falls below this are left out of histogram residuals.
pub const MIN_BIN_COUNT: u64 = 50;

/// Required grid coverage of the density for quadrature.
pub const MIN_GRID_MASS: f64 = 1.0 - 1e-8;

/// `S_t − ½|∇R|² + ½|∇S|² − (σ²/2) ΔR + V/M`, zero when `ψ` solves Schrödinger's equation.
pub fn madelung_residual(wave: &WaveModel, potential: &Potential, x: &Point, t: f64) -> Result<f64> {
    wave.check_domain(x)?;
    let d = wave.dim();
    let gr = norm2(&wave.grad_r(x, t), d);
    let gs = norm2(&wave.grad_s(x, t), d);
    Ok(wave.s_t(x, t) - 0.5 * gr + 0.5 * gs - 0.5 * wave.sigma2() * wave.lap_r(x, t)
        + potential.value(x, d, wave.mass()) / wave.mass())
}

/// Product trapezoid grid: `(lo, hi, points)` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadGrid {
    pub axes: Vec<(f64, f64, usize)>,
}

impl QuadGrid {
    /// Covers [`QUADRATURE_EXTENT`] standard deviations (or the periodic box).
    pub fn for_wave(wave: &WaveModel, t: f64) -> Self {
        let points = match wave.dim() {
            1 => 4001,
            2 => 401,
            _ => 121,
        };
        QuadGrid {
            axes: wave.extent(t, QUADRATURE_EXTENT).into_iter().map(|(a, b)| (a, b, points)).collect(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.axes.len() != dim {
            return Err(invalid(format!("grid has {} axes, model has {dim}", self.axes.len())));
        }
        for &(a, b, n) in &self.axes {
            if !(a.is_finite() && b.is_finite() && b > a && n >= 2) {
                return Err(invalid(format!("bad grid axis ({a}, {b}, {n})")));
            }
        }
        Ok(())
    }

    /// Visit every node with its trapezoid weight.
    fn for_each(&self, mut f: impl FnMut(&Point, f64)) {
        let dim = self.axes.len();
        let total: usize = self.axes.iter().map(|a| a.2).product();
        let mut x = [0.0; 3];
        for idx in 0..total {
            let mut rem = idx;
            let mut w = 1.0;
            for (i, &(a, b, n)) in self.axes.iter().enumerate().take(dim) {
                let k = rem % n;
                rem /= n;
                let h = (b - a) / (n - 1) as f64;
                x[i] = a + k as f64 * h;
                w *= if k == 0 || k == n - 1 { 0.5 * h } else { h };
            }
            f(&x, w);
        }
    }
}

/// Energy functional on a grid, in both algebraic forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyQuadrature {
    pub t: f64,
    /// `∫ ρ` over the grid.
    pub mass: f64,
    /// `(M/2) ∫ ρ (|∇S|² + |∇R|²) + ∫ ρ V + 3η/τ̄`.
    pub rs_form: f64,
    /// `(η²/2M) ∫ |∇ψ|² + ∫ |ψ|² V + 3η/τ̄`.
    pub psi_form: f64,
    pub constant: f64,
}

pub fn energy_quadrature(
    wave: &WaveModel,
    potential: &Potential,
    grid: &QuadGrid,
    t: f64,
    tau_bar: Option<f64>,
) -> Result<EnergyQuadrature> {
    let d = wave.dim();
    grid.validate(d)?;
    if let Some(tau) = tau_bar {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid(format!("tau_bar must be positive, got {tau}")));
        }
    }
    let (m, eta) = (wave.mass(), wave.eta());
    let (mut mass, mut rs, mut psi_sum) = (0.0, 0.0, 0.0);
    grid.for_each(|x, w| {
        let rho = wave.rho(x, t);
        let v = potential.value(x, d, m);
        mass += w * rho;
        rs += w * rho * (0.5 * m * (norm2(&wave.grad_s(x, t), d) + norm2(&wave.grad_r(x, t), d)) + v);
        let psi = wave.psi(x, t);
        let gp = wave.grad_psi(x, t);
        let grad2: f64 = gp[..d].iter().map(|c| c.norm_sqr()).sum();
        psi_sum += w * (eta * eta / (2.0 * m) * grad2 + psi.norm_sqr() * v);
    });
    if mass < MIN_GRID_MASS {
        return Err(Error::InsufficientData(format!(
            "grid holds {mass:.12} of the density (deficit {:.3e}, need at most 1e-8)",
            1.0 - mass
        )));
    }
    let constant = collision_constant(eta, tau_bar);
    Ok(EnergyQuadrature { t, mass, rs_form: rs + constant, psi_form: psi_sum + constant, constant })
}

/// Per-particle `(M/2)(|∇S|² + |∇R|²) + V` at time `t`.
pub fn particle_energies(
    positions: &[Point],
    wave: &WaveModel,
    potential: &Potential,
    t: f64,
) -> Result<Vec<f64>> {
    let d = wave.dim();
    let m = wave.mass();
    positions
        .iter()
        .map(|x| {
            wave.check_domain(x)?;
            Ok(0.5 * m * (norm2(&wave.grad_s(x, t), d) + norm2(&wave.grad_r(x, t), d))
                + potential.value(x, d, m))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub t: f64,
    pub n: usize,
    /// Includes the collision constant.
    pub energy: Estimate,
}

/// Monte Carlo energy at every snapshot; particles are independent so the SE is the i.i.d. one.
pub fn energy_mc(
    snapshots: &[EnsembleSnapshot],
    wave: &WaveModel,
    potential: &Potential,
    tau_bar: Option<f64>,
) -> Result<Vec<EnergyPoint>> {
    let constant = collision_constant(wave.eta(), tau_bar);
    snapshots
        .iter()
        .map(|s| {
            let e = particle_energies(&s.positions, wave, potential, s.t)?;
            let est = iid_estimate(&e);
            let se = if est.se.is_finite() { est.se } else { 0.0 };
            Ok(EnergyPoint { t: s.t, n: e.len(), energy: Estimate { mean: est.mean + constant, se } })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsmoticReport {
    /// Count-weighted RMS of the per-bin residual divided by `scale`.
    pub norm: f64,
    /// `max |b⁺|` over the evaluated bins.
    pub scale: f64,
    pub evaluated_bins: usize,
    pub excluded_bins: usize,
    pub warnings: Vec<String>,
    /// Bin centres per axis.
    pub centers: Vec<Vec<f64>>,
    /// `b⁻ − (b⁺ − σ² ∇log ρ̂)` per axis and bin, `NaN` where excluded.
    pub residual: Vec<Vec<f64>>,
}

/// Checks `b⁻ = b⁺ − σ² ∇log ρ` on the increments pooled over all snapshots after the first.
///
/// Both drifts are estimated from binned path increments and `ρ̂` from the
/// occupancy of the same bins. Each axis is treated through its marginal, which
/// is exact for the separable catalog models.
pub fn osmotic_residual(snapshots: &[EnsembleSnapshot], wave: &WaveModel) -> Result<OsmoticReport> {
    if snapshots.len() < 2 {
        return Err(Error::InsufficientData("osmotic residual needs at least 2 snapshots".into()));
    }
    let mut acc = snapshots[1].drift.clone();
    for s in &snapshots[2..] {
        acc.merge(&s.drift);
    }
    let s2 = wave.sigma2();
    let t_ref = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let d = wave.dim();
    let bins = acc.grid.bins;
    let h: Vec<f64> = (0..d).map(|a| acc.grid.width(a)).collect();
    let mut centers = Vec::with_capacity(d);
    let mut residual = Vec::with_capacity(d);
    let (mut num, mut den) = (0.0, 0.0);
    let (mut evaluated, mut excluded) = (0, 0);
    let mut scale: f64 = 0.0;
    let periodic = wave.period().is_some();
    for axis in 0..d {
        let c = acc.grid.centers(axis);
        let bp = acc.forward_drift(axis);
        let bm = acc.backward_drift(axis);
        let occ: Vec<u64> = (0..bins).map(|k| acc.fwd_count[axis][k] + acc.bwd_count[axis][k]).collect();
        let mut r = vec![f64::NAN; bins];
        for k in 0..bins {
            let (kl, kr) = if periodic {
                ((k + bins - 1) % bins, (k + 1) % bins)
            } else if k == 0 || k + 1 == bins {
                excluded += 1;
                continue;
            } else {
                (k - 1, k + 1)
            };
            let low = [k, kl, kr].iter().any(|&j| {
                acc.fwd_count[axis][j] < MIN_BIN_COUNT || acc.bwd_count[axis][j] < MIN_BIN_COUNT
            });
            if low {
                excluded += 1;
                continue;
            }
            let dlog = ((occ[kr] as f64).ln() - (occ[kl] as f64).ln()) / (2.0 * h[axis]);
            r[k] = bm[k] - (bp[k] - s2 * dlog);
            let w = acc.bwd_count[axis][k] as f64;
            num += w * r[k] * r[k];
            den += w;
            evaluated += 1;
            let probe = center_probe(wave, t_ref, axis, c[k]);
            if let Ok((b_plus, _)) = super::drifts(wave, &probe, t_ref) {
                scale = scale.max(b_plus[axis].abs());
            }
        }
        centers.push(c);
        residual.push(r);
    }
    let mut warnings = Vec::new();
    if excluded > 0 {
        warnings.push(format!("{excluded} bins excluded for occupancy below {MIN_BIN_COUNT}"));
    }
    if evaluated == 0 {
        return Err(Error::InsufficientData("no bin reached the occupancy threshold".into()));
    }
    if scale == 0.0 {
        warnings.push("max |b+| is zero; residual reported unscaled".into());
        scale = 1.0;
    }
    Ok(OsmoticReport {
        norm: (num / den).sqrt() / scale,
        scale,
        evaluated_bins: evaluated,
        excluded_bins: excluded,
        warnings,
        centers,
        residual,
    })
}

/// A point at the model's centre with coordinate `axis` set to `value`.
fn center_probe(wave: &WaveModel, t: f64, axis: usize, value: f64) -> Point {
    let mut x = wave.mean_position(t);
    x[axis] = value;
    x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// `(t, residual)` for every interior snapshot.
    pub per_time: Vec<(f64, f64)>,
    pub max: f64,
    pub rms: f64,
    pub excluded_bins: usize,
}

/// Histogram bins are coarsened by this factor when it divides the bin count.
const CONTINUITY_COARSEN: usize = 4;

/// `‖ρ̂(t+Δ) − ρ̂(t−Δ) + 2Δ ∂x(ρ̂ ∂xS)‖ / ‖ρ̂(t)‖` at each interior snapshot (1D only).
pub fn continuity_residual(snapshots: &[EnsembleSnapshot], wave: &WaveModel) -> Result<ContinuityReport> {
    if wave.dim() != 1 {
        return Err(Error::Unsupported("continuity residual is implemented for 1D models".into()));
    }
    if snapshots.len() < 3 {
        return Err(Error::InsufficientData("continuity residual needs at least 3 snapshots".into()));
    }
    let coarse = |h: &Histogram| -> Result<Histogram> {
        if h.bins.is_multiple_of(CONTINUITY_COARSEN) {
            h.coarsen(CONTINUITY_COARSEN)
        } else {
            Ok(h.clone())
        }
    };
    let hists: Vec<Histogram> = snapshots.iter().map(|s| coarse(&s.histogram)).collect::<Result<_>>()?;
    let periodic = wave.period().is_some();
    let mut per_time = Vec::new();
    let mut excluded = 0;
    for k in 1..snapshots.len() - 1 {
        let (tp, tc, tn) = (snapshots[k - 1].t, snapshots[k].t, snapshots[k + 1].t);
        let (d1, d2) = (tc - tp, tn - tc);
        if (d1 - d2).abs() > 1e-9 * d1.abs().max(d2.abs()) {
            return Err(invalid(format!("snapshots at {tp}, {tc}, {tn} are not evenly spaced")));
        }
        let h = &hists[k];
        let centers = h.centers(0);
        let grad_s: Vec<f64> = centers.iter().map(|&x| wave.grad_s(&[x, 0.0, 0.0], tc)[0]).collect();
        let mask: Vec<bool> = h.counts[0].iter().map(|&c| c >= MIN_BIN_COUNT).collect();
        excluded += mask.iter().filter(|m| !**m).count();
        let r = continuity_core(
            &hists[k - 1].density(0),
            &h.density(0),
            &hists[k + 1].density(0),
            &grad_s,
            h.width(0),
            tn - tp,
            &mask,
            periodic,
        )?;
        per_time.push((tc, r));
    }
    let max = per_time.iter().map(|p| p.1).fold(0.0, f64::max);
    let rms = (per_time.iter().map(|p| p.1 * p.1).sum::<f64>() / per_time.len() as f64).sqrt();
    Ok(ContinuityReport { per_time, max, rms, excluded_bins: excluded })
}

/// The same residual with the exact density at bin centres in place of histograms.
pub fn continuity_residual_analytic(
    wave: &WaveModel,
    t: f64,
    delta: f64,
    extent: (f64, f64),
    bins: usize,
) -> Result<f64> {
    if wave.dim() != 1 {
        return Err(Error::Unsupported("continuity residual is implemented for 1D models".into()));
    }
    if !(delta > 0.0) || bins < 5 || !(extent.1 > extent.0) {
        return Err(invalid("need delta > 0, at least 5 bins and a non-empty extent"));
    }
    let h = (extent.1 - extent.0) / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|k| extent.0 + (k as f64 + 0.5) * h).collect();
    let rho_at = |tt: f64| -> Vec<f64> { centers.iter().map(|&x| wave.rho(&[x, 0.0, 0.0], tt)).collect() };
    let grad_s: Vec<f64> = centers.iter().map(|&x| wave.grad_s(&[x, 0.0, 0.0], t)[0]).collect();
    continuity_core(
        &rho_at(t - delta),
        &rho_at(t),
        &rho_at(t + delta),
        &grad_s,
        h,
        2.0 * delta,
        &vec![true; bins],
        wave.period().is_some(),
    )
}

/// Fourth-order central differences of the flux `ρ ∂xS`.
#[allow(clippy::too_many_arguments)]
fn continuity_core(
    prev: &[f64],
    cur: &[f64],
    next: &[f64],
    grad_s: &[f64],
    h: f64,
    span: f64,
    mask: &[bool],
    periodic: bool,
) -> Result<f64> {
    let n = cur.len();
    let flux: Vec<f64> = cur.iter().zip(grad_s).map(|(r, g)| r * g).collect();
    let at = |k: isize| -> Option<f64> {
        if periodic {
            Some(flux[k.rem_euclid(n as isize) as usize])
        } else if k >= 0 && (k as usize) < n {
            Some(flux[k as usize])
        } else {
            None
        }
    };
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        if !mask[k] {
            continue;
        }
        let i = k as isize;
        let (Some(m2), Some(m1), Some(p1), Some(p2)) = (at(i - 2), at(i - 1), at(i + 1), at(i + 2)) else {
            continue;
        };
        let div = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let r = next[k] - prev[k] + span * div;
        num += r * r;
        den += cur[k] * cur[k];
    }
    if den == 0.0 {
        return Err(Error::InsufficientData("no bin reached the occupancy threshold".into()));
    }
    Ok((num / den).sqrt())
}

/// The incident particle of a two-particle run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncidentSide {
    Diffusion(DiffusionConfig),
    /// No motion and no diffusion; contributes a fixed potential energy.
    Frozen { potential_value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoParticlePoint {
    pub t: f64,
    pub main: Estimate,
    pub incident: Estimate,
    pub total: Estimate,
    /// Correlation of per-particle energies paired by index (`NaN` when frozen).
    pub correlation: f64,
    pub correlation_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoParticleReport {
    pub points: Vec<TwoParticlePoint>,
    /// Quadrature energy of each particle, constants included.
    pub main_quadrature: f64,
    pub incident_quadrature: f64,
    pub expected_total: f64,
}

/// Evolve two independent ensembles and add their energies snapshot by snapshot.
pub fn two_particle_energy(main: &DiffusionConfig, incident: &IncidentSide) -> Result<TwoParticleReport> {
    let snaps = evolve_ensemble_in(main, 0)?;
    let main_q = energy_quadrature(
        &main.wave,
        &main.potential,
        &QuadGrid::for_wave(&main.wave, main.t0),
        main.t0,
        main.tau_bar,
    )?
    .rs_form;
    let main_const = main.collision_constant();
    let main_e: Vec<Vec<f64>> = snaps
        .iter()
        .map(|s| particle_energies(&s.positions, &main.wave, &main.potential, s.t))
        .collect::<Result<_>>()?;

    let (inc_e, inc_q): (Option<Vec<Vec<f64>>>, f64) = match incident {
        IncidentSide::Frozen { potential_value } => {
            if !potential_value.is_finite() {
                return Err(invalid("frozen potential value must be finite"));
            }
            (None, *potential_value)
        }
        IncidentSide::Diffusion(cfg) => {
            if cfg.n_snapshots != main.n_snapshots {
                return Err(invalid("both ensembles need the same number of snapshots"));
            }
            let s = evolve_ensemble_in(cfg, domain::INCIDENT_OFFSET)?;
            let q = energy_quadrature(
                &cfg.wave,
                &cfg.potential,
                &QuadGrid::for_wave(&cfg.wave, cfg.t0),
                cfg.t0,
                cfg.tau_bar,
            )?
            .rs_form;
            let e = s
                .iter()
                .map(|snap| particle_energies(&snap.positions, &cfg.wave, &cfg.potential, snap.t))
                .collect::<Result<_>>()?;
            (Some(e), q)
        }
    };
    let inc_const = match incident {
        IncidentSide::Diffusion(cfg) => cfg.collision_constant(),
        IncidentSide::Frozen { .. } => 0.0,
    };

    let points = snaps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let me = iid_estimate(&main_e[k]);
            let main_est = Estimate { mean: me.mean + main_const, se: finite_or_zero(me.se) };
            let (inc_est, corr, corr_se) = match &inc_e {
                None => (Estimate { mean: inc_q, se: 0.0 }, f64::NAN, f64::NAN),
                Some(e) => {
                    let ie = iid_estimate(&e[k]);
                    let n = main_e[k].len().min(e[k].len());
                    (
                        Estimate { mean: ie.mean + inc_const, se: finite_or_zero(ie.se) },
                        correlation(&main_e[k][..n], &e[k][..n]),
                        1.0 / (n as f64).sqrt(),
                    )
                }
            };
            TwoParticlePoint {
                t: s.t,
                main: main_est,
                incident: inc_est,
                total: Estimate {
                    mean: main_est.mean + inc_est.mean,
                    se: main_est.se.hypot(inc_est.se),
                },
                correlation: corr,
                correlation_se: corr_se,
            }
        })
        .collect();
    Ok(TwoParticleReport {
        points,
        main_quadrature: main_q,
        incident_quadrature: inc_q,
        expected_total: main_q + inc_q,
    })
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<WaveModel> {
        vec![
            WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap(),
            WaveModel::harmonic(2, 0.5, 1.0, 2.0).unwrap(),
            WaveModel::harmonic(3, 1.0, 1.0, 1.0).unwrap(),
            WaveModel::free_packet(1.0, 1.0, 1.0, 0.5, 0.3).unwrap(),
            WaveModel::plane_wave(2, 1.0, 1.0, [0.4, -0.3, 0.0], 3.0).unwrap(),
        ]
    }

    #[test]
    fn madelung_vanishes_with_natural_potential() {
        for w in catalog() {
            let v = w.natural_potential();
            let grid = QuadGrid::for_wave(&w, 0.0);
            let mut worst: f64 = 0.0;
            for t in [0.0, 0.9, 2.5] {
                for k in 0..41 {
                    let mut x = [0.0; 3];
                    for (i, &(a, b, _)) in grid.axes.iter().enumerate() {
                        x[i] = a + (b - a) * ((k * (i + 3)) % 41) as f64 / 41.0;
                    }
                    worst = worst.max(madelung_residual(&w, &v, &x, t).unwrap().abs());
                }
            }
            assert!(worst < 1e-8, "{w:?} {worst}");
        }
    }

    #[test]
    fn madelung_negative_control() {
        let w = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        for x in [-1.5, 0.5, 2.0] {
            let r = madelung_residual(&w, &Potential::Zero, &[x, 0.0, 0.0], 0.3).unwrap();
            assert!((r + 0.5 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_forms_agree_and_match_closed_form() {
        for w in catalog() {
            let v = w.natural_potential();
            let q = energy_quadrature(&w, &v, &QuadGrid::for_wave(&w, 0.7), 0.7, None).unwrap();
            assert!((q.rs_form - q.psi_form).abs() < 1e-8, "{w:?} {q:?}");
            assert!((q.mass - 1.0).abs() < 1e-8, "{w:?} {q:?}");
            assert!((q.rs_form - w.exact_energy()).abs() < 1e-6, "{w:?} {q:?}");
        }
    }

    #[test]
    fn plane_wave_energy_with_collision_constant() {
        let w = WaveModel::plane_wave(1, 2.0, 1.5, [0.7, 0.0, 0.0], 2.0).unwrap();
        let q = energy_quadrature(&w, &Potential::Zero, &QuadGrid::for_wave(&w, 0.0), 0.0, Some(3.0)).unwrap();
        assert!((q.rs_form - (0.5 * 2.0 * 0.49 + 1.5)).abs() < 1e-12);
        assert!((q.psi_form - q.rs_form).abs() < 1e-12);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let w = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        let grid = QuadGrid { axes: vec![(-1.0, 1.0, 201)] };
        let err = energy_quadrature(&w, &Potential::Zero, &grid, 0.0, None).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(ref m) if m.contains("deficit")));
    }

    #[test]
    fn analytic_continuity_is_discretization_only() {
        let w = WaveModel::free_packet(1.0, 1.0, 1.0, 0.0, 0.5).unwrap();
        let r = continuity_residual_analytic(&w, 1.0, 1e-3, (-7.0, 8.0), 2000).unwrap();
        assert!(r < 1e-6, "{r}");
        let h = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        assert!(continuity_residual_analytic(&h, 1.0, 1e-3, (-5.0, 5.0), 1000).unwrap() < 1e-12);
        let h3 = WaveModel::harmonic(3, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            continuity_residual_analytic(&h3, 1.0, 1e-3, (-5.0, 5.0), 1000),
            Err(Error::Unsupported(_))
        ));
    }
}

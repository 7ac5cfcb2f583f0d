//! The identity suite behind `selftest`: one function per acceptance criterion.

use std::fmt::Write as _;

use nelsonbath_core::collision::forms;
use nelsonbath_core::eigenframe::{
    apply_collision_matrix, minkowski_frame_residual, minkowski_statistical_residual,
    relativistic_mass_ratio, time_dilation_ratio,
};
use nelsonbath_core::heatbath::{
    correlation_for_constant_speed, replica_events, run_bath, sample_phi, simulate,
    single_step_drift, tau_moments, BathConfig, Mode, SpeedSweep,
};
use nelsonbath_core::nelson::{
    continuity_residual, energy_mc, energy_quadrature, evolve_ensemble, madelung_residual,
    osmotic_residual, two_particle_energy, DiffusionConfig, IncidentSide, QuadGrid, WaveModel,
};
use nelsonbath_core::rng::{domain, stream};
use nelsonbath_core::stats::{ks_critical_1pct, ks_statistic, normal_cdf};
use nelsonbath_core::{
    collide, decompose, nelson_energy_ledger, CollisionEvent, MassPair, Projector, Result, Vec3,
};
use rand::Rng;

use crate::config::Scale;
use crate::output::{render, Format, Metadata, Table, Value};

pub const IDENTITY_TOL: f64 = 1e-12;

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "conservation"),
    (2, "energy-ledger"),
    (3, "phi-and-eigenframe"),
    (4, "minkowski-statistics"),
    (5, "heat-bath-equilibration"),
    (6, "speed-correlation-law"),
    (7, "gamma-collision-times"),
    (8, "nelson-stationarity"),
    (9, "energy-dual-form"),
    (10, "two-particle-additivity"),
    (11, "relativity-evaluators"),
    (12, "determinism"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    /// The checked statistic (a residual, a deviation, or a z-score).
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<24} {}  value={:.3e} threshold={:.3e}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.value,
            self.threshold,
            self.detail
        )
    }
}

struct Outcome {
    passed: bool,
    value: f64,
    threshold: f64,
    detail: String,
}

fn name_of(id: u32) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

/// Run one criterion. Library errors become a failed result.
pub fn run_criterion(id: u32, seed: u64, scale: Scale) -> CriterionResult {
    let outcome = match id {
        1 => conservation(seed),
        2 => energy_ledger(seed),
        3 => eigenframe_identities(seed),
        4 => minkowski_statistics(seed, scale),
        5 => equilibration(seed, scale),
        6 => speed_correlation(seed, scale),
        7 => gamma_times(seed, scale),
        8 => nelson_stationarity(seed, scale),
        9 => dual_form(),
        10 => two_particle(seed, scale),
        11 => relativity(),
        12 => determinism(seed),
        _ => Ok(Outcome { passed: false, value: f64::NAN, threshold: f64::NAN, detail: format!("no criterion {id}") }),
    };
    let o = outcome.unwrap_or_else(|e| Outcome {
        passed: false,
        value: f64::NAN,
        threshold: f64::NAN,
        detail: format!("error: {e}"),
    });
    CriterionResult {
        id,
        name: name_of(id),
        passed: o.passed && !o.value.is_nan(),
        value: o.value,
        threshold: o.threshold,
        detail: o.detail,
    }
}

/// Run the listed criteria in order, reporting each as it finishes.
pub fn run_suite(
    ids: &[u32],
    seed: u64,
    scale: Scale,
    mut on_result: impl FnMut(&CriterionResult),
) -> Vec<CriterionResult> {
    ids.iter()
        .map(|&id| {
            let r = run_criterion(id, seed, scale);
            on_result(&r);
            r
        })
        .collect()
}

pub fn all_ids() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.0).collect()
}

pub fn suite_table(results: &[CriterionResult]) -> Table {
    let mut t = Table::new(["id", "name", "passed", "value", "threshold", "detail"]);
    for r in results {
        t.push(vec![
            Value::from(r.id as u64),
            Value::from(r.name),
            Value::from(r.passed),
            Value::from(r.value),
            Value::from(r.threshold),
            Value::from(r.detail.as_str()),
        ]);
    }
    t
}

const RANDOM_EVENTS: usize = 10_000;

/// The shared random event set: `γ²` log-uniform on `[1e−4, 1]`, uniform axes,
/// velocity components uniform on `[−10, 10]`.
pub fn random_events(seed: u64, n: usize) -> Result<Vec<CollisionEvent>> {
    let mut rng = stream(seed, domain::SELFTEST, 1);
    let vec = |rng: &mut nelsonbath_core::rng::StreamRng| {
        Vec3::new(rng.gen_range(-10.0..=10.0), rng.gen_range(-10.0..=10.0), rng.gen_range(-10.0..=10.0))
    };
    (0..n)
        .map(|_| {
            let g2 = 10f64.powf(rng.gen_range(-4.0..=0.0));
            let main = rng.gen_range(0.1..10.0);
            let masses = MassPair::from_ratio(main, g2)?;
            let phi = Projector::new(sample_phi(&mut rng))?;
            let v1 = vec(&mut rng);
            let w1 = vec(&mut rng);
            collide(v1, w1, &phi, &masses)
        })
        .collect()
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn event_scale(e: &CollisionEvent) -> f64 {
    e.v1.max_abs().max(e.w1.max_abs()).max(e.v2.max_abs()).max(e.w2.max_abs())
}

fn conservation(seed: u64) -> Result<Outcome> {
    let events = random_events(seed, RANDOM_EVENTS)?;
    let (mut mom, mut energy, mut forms_gap) = (0.0f64, 0.0f64, 0.0f64);
    for e in &events {
        let r = e.residuals();
        mom = mom.max(r.momentum);
        energy = energy.max(r.energy);
        let scale = event_scale(e);
        for (v2, w2) in [
            forms::block_form(e.v1, e.w1, &e.exchange, &e.masses),
            forms::rotation_form(e.v1, e.w1, &e.exchange, &e.masses),
        ] {
            forms_gap = forms_gap.max(rel((v2 - e.v2).max_abs().max((w2 - e.w2).max_abs()), scale));
        }
    }
    let value = mom.max(energy).max(forms_gap);
    Ok(Outcome {
        passed: value <= IDENTITY_TOL,
        value,
        threshold: IDENTITY_TOL,
        detail: format!("{RANDOM_EVENTS} events: momentum {mom:.2e}, energy {energy:.2e}, forms {forms_gap:.2e}"),
    })
}

fn energy_ledger(seed: u64) -> Result<Outcome> {
    let events = random_events(seed, RANDOM_EVENTS)?;
    let mut worst = 0.0f64;
    for e in &events {
        let expected = e.v1.norm2() + e.masses.gamma2() * e.w1.norm2();
        worst = worst.max(rel((nelson_energy_ledger(e).total() - expected).abs(), expected));
    }
    let head_on = collide(Vec3::X, -Vec3::X, &Projector::new(Vec3::X)?, &MassPair::new(4.0, 1.0)?)?;
    let l = nelson_energy_ledger(&head_on);
    let hand = (l.total() - 1.25).abs();
    let parts = (l.sym_main - 0.36).abs().max((l.osm_main - 0.16).abs()).max((l.incident_part() - 0.73).abs());
    let value = worst.max(hand / 1.25).max(parts);
    Ok(Outcome {
        passed: worst <= IDENTITY_TOL && hand <= 4.0 * f64::EPSILON && parts <= 4.0 * f64::EPSILON,
        value,
        threshold: IDENTITY_TOL,
        detail: format!("random max {worst:.2e}; head-on total {} (|Δ| {hand:.1e})", l.total()),
    })
}

fn eigenframe_identities(seed: u64) -> Result<Outcome> {
    let events = random_events(seed, RANDOM_EVENTS)?;
    let mut worst = [0.0f64; 6];
    for e in &events {
        let f = decompose(e);
        let g = e.masses.gamma();
        let dv = e.v2 - e.v1;
        let phi = e.phi_term;
        let scale = event_scale(e);
        // dv is a difference of velocities, so its rounding error scales with |v|.
        worst[0] = worst[0].max(rel(phi.dot(dv).abs(), phi.norm() * (e.v1.norm() + e.v2.norm())));
        worst[1] = worst[1].max(rel((f.g.norm() - f.g_perp.norm()).abs(), f.g.norm()));
        worst[2] = worst[2].max(rel((f.g + phi / g - f.g_perp).max_abs(), f.g.max_abs() + phi.max_abs() / g));
        let (t, b) = apply_collision_matrix(&e.masses, f.a, f.a);
        worst[3] = worst[3].max(rel((t - f.a).max_abs().max((b - f.a).max_abs()), scale));
        let g2 = e.masses.gamma2();
        let (t, b) = apply_collision_matrix(&e.masses, -g2 * f.g, f.g);
        worst[4] = worst[4].max(rel((t - g2 * f.g).max_abs().max((b + f.g).max_abs()), scale));
        worst[5] = worst[5].max(minkowski_frame_residual(e).relative());
    }
    let value = worst.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome {
        passed: value <= IDENTITY_TOL,
        value,
        threshold: IDENTITY_TOL,
        detail: format!(
            "phi⊥dv {:.1e}, |g|=|g⊥| {:.1e}, g⊥=g+Φ/γ {:.1e}, (a,a) {:.1e}, (−γ²g,g) {:.1e}, frame {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    })
}

fn bath(seed: u64, gamma2: f64, mode: Mode) -> Result<BathConfig> {
    let mut c = BathConfig::new(MassPair::from_ratio(1.0, gamma2)?, 1.0, 1.0);
    c.mode = mode;
    c.seed = seed;
    Ok(c)
}

fn minkowski_statistics(seed: u64, scale: Scale) -> Result<Outcome> {
    let n = match scale {
        Scale::Full => 100_000,
        Scale::Quick => 20_000,
    };
    let mut c = bath(seed, 0.01, Mode::Physical)?;
    let burn = n / 10;
    c.n_collisions = (n + burn) as u64;
    let events = simulate(&c)?;
    let independent = minkowski_statistical_residual(&events[burn..])?;
    let z_ind = independent.statistical_residual.z_score(0.0);

    c.target_correlation = Some(0.9);
    c.initial_velocity = Vec3::new(0.2, 0.0, 0.0);
    let corr = minkowski_statistical_residual(&replica_events(&c, n as u64)?)?;
    let (lhs, rhs) = (corr.statistical_residual, corr.correlation_term);
    let z_corr = (lhs.mean - rhs.mean).abs() / lhs.se.hypot(rhs.se);
    let value = z_ind.max(z_corr);
    Ok(Outcome {
        passed: value <= 3.0 && independent.frame_residual <= IDENTITY_TOL,
        value,
        threshold: 3.0,
        detail: format!(
            "independent {:.3e} ± {:.1e}; correlated {:.4e} vs −2(1+γ²)E[aᵀ(g+g⊥)] = {:.4e}",
            independent.statistical_residual.mean, independent.statistical_residual.se, lhs.mean, rhs.mean
        ),
    })
}

fn equilibration(seed: u64, scale: Scale) -> Result<Outcome> {
    let n = match scale {
        Scale::Full => 100_000,
        Scale::Quick => 50_000,
    };
    let mut c = bath(seed, 0.01, Mode::Paper)?;
    c.n_collisions = n;
    let s = run_bath(&c, 1, false)?.summary;
    let ratio = s.energy_ratio.mean;

    c.bath_mean = Vec3::new(0.5, -0.2, 0.0);
    let d = single_step_drift(&c, n)?;
    let expected = d.coefficient * (c.bath_mean - c.initial_velocity);
    let z = (0..3).map(|i| d.mean_dv[i].z_score(expected[i])).fold(0.0, f64::max);
    Ok(Outcome {
        passed: (0.95..=1.05).contains(&ratio) && z <= 3.0 && s.invariant_violations == 0,
        value: z,
        threshold: 3.0,
        detail: format!(
            "M E|v|²/(m c²) = {ratio:.4} (window [0.95, 1.05]); drift coefficient {:.6}, max z {z:.2}",
            d.coefficient
        ),
    })
}

fn speed_correlation(seed: u64, scale: Scale) -> Result<Outcome> {
    let samples = match scale {
        Scale::Full => 20_000,
        Scale::Quick => 4_000,
    };
    let mut worst = 0.0f64;
    let mut converged = true;
    let mut detail = String::new();
    for mode in [Mode::Paper, Mode::Physical] {
        let mut sweep = SpeedSweep::new(MassPair::from_ratio(1.0, 1e-4)?, 1.0, vec![0.25, 0.5, 0.75, 0.9]);
        sweep.mode = mode;
        sweep.samples = samples;
        sweep.seed = seed;
        let rows = correlation_for_constant_speed(&sweep)?;
        let _ = write!(detail, "{mode:?}:");
        for r in rows {
            converged &= r.converged;
            worst = worst.max((r.required_rho - r.speed_ratio).abs());
            let _ = write!(detail, " {:.3}", r.required_rho);
        }
        detail.push(' ');
    }
    Ok(Outcome { passed: converged && worst <= 0.02, value: worst, threshold: 0.02, detail: detail.trim_end().into() })
}

fn gamma_times(seed: u64, scale: Scale) -> Result<Outcome> {
    let n = match scale {
        Scale::Full => 1_000_000,
        Scale::Quick => 100_000,
    };
    let tau_bar = 1.0;
    let m = tau_moments(tau_bar, n, seed)?;
    let z = m.mean_tau.z_score(tau_bar).max(m.mean_inv_tau.z_score(2.0 / tau_bar));
    Ok(Outcome {
        passed: z <= 3.0,
        value: z,
        threshold: 3.0,
        detail: format!(
            "E[τ] = {:.5} ± {:.1e}, E[1/τ] = {:.5} ± {:.1e} (τ̄ = 1)",
            m.mean_tau.mean, m.mean_tau.se, m.mean_inv_tau.mean, m.mean_inv_tau.se
        ),
    })
}

fn nelson_stationarity(seed: u64, scale: Scale) -> Result<Outcome> {
    let (n, t1, dt) = match scale {
        Scale::Full => (100_000, 5.0, 1e-3),
        Scale::Quick => (20_000, 1.0, 2e-3),
    };
    let wave = WaveModel::harmonic(1, 1.0, 1.0, 1.0)?;
    let mut cfg = DiffusionConfig::new(wave, n, t1, dt);
    cfg.seed = seed;
    let snaps = evolve_ensemble(&cfg)?;
    let last = snaps.last().expect("at least one snapshot");
    let xs: Vec<f64> = last.positions.iter().map(|p| p[0]).collect();
    let sd = wave.spread(last.t).1[0];
    let ks = ks_statistic(&xs, |x| normal_cdf(x / sd));
    let ks_crit = ks_critical_1pct(xs.len());

    let mut madelung = 0.0f64;
    for s in &snaps {
        for k in 0..=240 {
            let x = [-6.0 * sd + k as f64 * 0.05 * sd, 0.0, 0.0];
            madelung = madelung.max(madelung_residual(&wave, &cfg.potential, &x, s.t)?.abs());
        }
    }
    let energies = energy_mc(&snaps, &wave, &cfg.potential, cfg.tau_bar)?;
    let z_energy = energies.iter().map(|e| e.energy.z_score(0.5)).fold(0.0, f64::max);
    let osm = osmotic_residual(&snaps, &wave)?;
    let cont = continuity_residual(&snaps, &wave)?;
    let passed = ks < ks_crit && madelung < 1e-8 && z_energy <= 3.0 && osm.norm < 0.05;
    Ok(Outcome {
        passed,
        value: osm.norm,
        threshold: 0.05,
        detail: format!(
            "KS {ks:.4} < {ks_crit:.4}; Madelung {madelung:.1e}; energy max z {z_energy:.2} over {} snapshots; osmotic {:.4}; continuity {:.4}",
            energies.len(),
            osm.norm,
            cont.max
        ),
    })
}

/// Every catalog model at a representative time.
pub fn catalog() -> Result<Vec<(String, WaveModel, f64)>> {
    let mut models = Vec::new();
    for d in 1..=3 {
        models.push((format!("harmonic-{d}d"), WaveModel::harmonic(d, 1.0, 1.0, 1.0)?, 0.0));
        models.push((format!("harmonic-{d}d-b"), WaveModel::harmonic(d, 2.0, 0.5, 1.5)?, 0.7));
        let v = [0.8, -0.3, 0.5];
        let mut vel = [0.0; 3];
        vel[..d].copy_from_slice(&v[..d]);
        models.push((format!("plane-{d}d"), WaveModel::plane_wave(d, 1.0, 1.0, vel, 4.0)?, 0.3));
    }
    let packet = WaveModel::free_packet(1.0, 1.0, 1.0, -1.0, 0.6)?;
    models.push(("packet-t0".into(), packet, 0.0));
    models.push(("packet-t2".into(), packet, 2.0));
    Ok(models)
}

fn dual_form() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let models = catalog()?;
    for (name, wave, t) in &models {
        let q = energy_quadrature(wave, &wave.natural_potential(), &QuadGrid::for_wave(wave, *t), *t, None)?;
        let gap = (q.rs_form - q.psi_form).abs() / q.rs_form.abs().max(1.0);
        worst = worst.max(gap);
        if gap > 1e-8 {
            let _ = write!(detail, "{name} {gap:.1e}; ");
        }
    }
    if detail.is_empty() {
        detail = format!("{} models", models.len());
    }
    Ok(Outcome { passed: worst <= 1e-8, value: worst, threshold: 1e-8, detail })
}

fn two_particle(seed: u64, scale: Scale) -> Result<Outcome> {
    let (n, t1, dt) = match scale {
        Scale::Full => (100_000, 1.0, 1e-3),
        Scale::Quick => (10_000, 0.5, 5e-3),
    };
    let main_wave = WaveModel::harmonic(1, 1.0, 1.0, 1.0)?;
    let inc_wave = WaveModel::harmonic(1, 0.25, 1.0, 2.0)?;
    let mut main = DiffusionConfig::new(main_wave, n, t1, dt);
    main.n_snapshots = 5;
    main.seed = seed;
    let mut inc = DiffusionConfig::new(inc_wave, n, t1, dt);
    inc.n_snapshots = 5;
    inc.seed = seed;
    let r = two_particle_energy(&main, &IncidentSide::Diffusion(inc))?;
    let mut z = 0.0f64;
    for p in &r.points {
        z = z.max(p.total.z_score(r.expected_total));
        z = z.max(p.correlation.abs() / p.correlation_se);
    }
    let spread = r.points.iter().map(|p| p.total.mean).fold(f64::NEG_INFINITY, f64::max)
        - r.points.iter().map(|p| p.total.mean).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: z <= 3.0,
        value: z,
        threshold: 3.0,
        detail: format!(
            "expected {:.6} = {:.6} + {:.6}; {} snapshots, total spread {spread:.2e}",
            r.expected_total,
            r.main_quadrature,
            r.incident_quadrature,
            r.points.len()
        ),
    })
}

fn relativity() -> Result<Outcome> {
    let c = 1.0;
    let v = Vec3::new(0.6 * c, 0.0, 0.0);
    let td = time_dilation_ratio(Vec3::ZERO, v, c)?;
    let mr = relativistic_mass_ratio(v, c)?;
    let value = (td - 1.25).abs().max((mr - 1.25).abs());
    Ok(Outcome {
        passed: value <= 1e-15,
        value,
        threshold: 1e-15,
        detail: format!("time dilation {td}, mass ratio {mr}"),
    })
}

/// Quick-scale criteria 1–11 rendered as CSV.
pub fn quick_suite_bytes(seed: u64) -> String {
    let ids: Vec<u32> = (1..=11).collect();
    let results = run_suite(&ids, seed, Scale::Quick, |_| {});
    let mut meta = Metadata::default();
    meta.push("seed", seed.to_string());
    render(&suite_table(&results), &meta, Format::Csv).expect("suite tables are rectangular")
}

fn determinism(seed: u64) -> Result<Outcome> {
    let pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| nelsonbath_core::Error::Unsupported(e.to_string()))
    };
    let a = pool(1)?.install(|| quick_suite_bytes(seed));
    let b = pool(1)?.install(|| quick_suite_bytes(seed));
    let c = pool(4)?.install(|| quick_suite_bytes(seed));
    let differing = [&b, &c].iter().filter(|x| x.as_str() != a).count();
    Ok(Outcome {
        passed: differing == 0,
        value: differing as f64,
        threshold: 0.0,
        detail: format!("quick suite, 3 runs at 1/1/4 threads, {} bytes each", a.len()),
    })
}

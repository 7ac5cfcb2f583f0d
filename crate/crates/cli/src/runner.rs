//! Executes a validated [`RunConfig`] and writes its tables.

use std::fs;
use std::path::{Path, PathBuf};

use nelsonbath_core::eigenframe::minkowski_statistical_residual;
use nelsonbath_core::heatbath::{replica_events, run_bath, simulate, BathConfig, StatSummary};
use nelsonbath_core::nelson::{
    continuity_residual, energy_mc, energy_quadrature, evolve_ensemble, madelung_residual,
    osmotic_residual, DiffusionConfig, Potential, QuadGrid,
};
use nelsonbath_core::{
    collide_with, decompose, nelson_energy_ledger, Exchange, MassPair, Projector, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    BathParams, CollideRow, ConfigError, MinkowskiParams, MinkowskiSample, NelsonParams, RunConfig,
    Scale, Subcommand, Violation,
};
use crate::output::{emit, sha256_hex, Metadata, OutputError, Table, Value};
use crate::selftest;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Simulation(#[from] nelsonbath_core::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("cannot read {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{} of {} criteria failed: {}", .failed.len(), .total, list(.failed))]
    SelftestFailed { failed: Vec<u32>, total: usize },
}

fn list(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(e) => e.kind(),
            RunError::Simulation(nelsonbath_core::Error::InvalidArgument(_)) => "invalid-argument",
            RunError::Simulation(nelsonbath_core::Error::Domain(_)) => "domain",
            RunError::Simulation(nelsonbath_core::Error::Sampling(_)) => "sampling",
            RunError::Simulation(nelsonbath_core::Error::InsufficientData(_)) => "insufficient-data",
            RunError::Simulation(nelsonbath_core::Error::Unsupported(_)) => "unsupported",
            RunError::Output(_) => "io",
            RunError::Input { .. } => "input",
            RunError::Usage(_) => "usage",
            RunError::SelftestFailed { .. } => "selftest-failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable error object.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), self.kind().into());
        obj.insert("message".into(), self.to_string().into());
        match self {
            RunError::Config(ConfigError::Syntax { line, column, .. })
            | RunError::Config(ConfigError::Schema { line, column, .. }) => {
                obj.insert("line".into(), (*line).into());
                obj.insert("column".into(), (*column).into());
            }
            RunError::Config(ConfigError::UnknownKey { key, line, column }) => {
                obj.insert("key".into(), key.as_str().into());
                obj.insert("line".into(), (*line).into());
                obj.insert("column".into(), (*column).into());
            }
            RunError::Config(ConfigError::Range(v)) => {
                obj.insert("violations".into(), serde_json::to_value(v).unwrap_or_default());
            }
            RunError::SelftestFailed { failed, .. } => {
                obj.insert("failed".into(), failed.clone().into());
            }
            _ => {}
        }
        serde_json::json!({ "error": obj })
    }
}

/// A table plus the file-name suffix it is written under (`None` for the main output).
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub suffix: Option<&'static str>,
    pub table: Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub metadata: Metadata,
    pub artifacts: Vec<Artifact>,
    /// Failed selftest criteria.
    pub failed: Vec<u32>,
    pub total: usize,
}

impl Report {
    pub fn main_table(&self) -> &Table {
        &self.artifacts[0].table
    }
}

fn base_metadata(cfg: &RunConfig, extra_hash: Option<String>) -> Metadata {
    let mut m = Metadata::default();
    m.push("tool", "nelsonbath");
    m.push("version", env!("CARGO_PKG_VERSION"));
    m.push("subcommand", cfg.subcommand.name());
    m.push("seed", cfg.seed.to_string());
    m.push("config_sha256", sha256_hex(cfg.canonical_json().as_bytes()));
    if let Some(h) = extra_hash {
        m.push("input_sha256", h);
    }
    m
}

fn vec_cols(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|c| format!("{prefix}_{c}"))
}

fn push_vec(row: &mut Vec<Value>, v: Vec3) {
    row.extend([v.x, v.y, v.z].map(Value::from));
}

/// Execute the subcommand; `on_line` receives progress lines (selftest).
pub fn execute(cfg: &RunConfig, on_line: &mut dyn FnMut(&str)) -> Result<Report, RunError> {
    cfg.validate()?;
    match cfg.subcommand {
        Subcommand::Collide => run_collide(cfg),
        Subcommand::Bath => run_bath_cmd(cfg, cfg.bath.as_ref().expect("validated")),
        Subcommand::Nelson => run_nelson(cfg, cfg.nelson.as_ref().expect("validated")),
        Subcommand::Minkowski => run_minkowski(cfg, cfg.minkowski.as_ref().expect("validated")),
        Subcommand::Selftest => run_selftest(cfg, on_line),
    }
}

/// Flat CSV layout of collide input rows; empty `phi` cells mean full exchange.
#[derive(Debug, Deserialize, Serialize)]
struct InputRecord {
    #[serde(rename = "M")]
    main_mass: f64,
    m: f64,
    v1_x: f64,
    v1_y: f64,
    v1_z: f64,
    w1_x: f64,
    w1_y: f64,
    w1_z: f64,
    phi_x: Option<f64>,
    phi_y: Option<f64>,
    phi_z: Option<f64>,
}

fn read_input(path: &Path) -> Result<(Vec<CollideRow>, String), RunError> {
    let err = |message: String| RunError::Input { path: path.to_path_buf(), message };
    let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<InputRecord>().enumerate() {
        let r = rec.map_err(|e| err(format!("record {i}: {e}")))?;
        let phi = match (r.phi_x, r.phi_y, r.phi_z) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            (None, None, None) => None,
            _ => return Err(err(format!("record {i}: phi must have all three components or none"))),
        };
        rows.push(CollideRow {
            main_mass: r.main_mass,
            m: r.m,
            v1: [r.v1_x, r.v1_y, r.v1_z],
            w1: [r.w1_x, r.w1_y, r.w1_z],
            phi,
        });
    }
    Ok((rows, sha256_hex(&bytes)))
}

pub fn collide_columns() -> Vec<String> {
    let mut c: Vec<String> = vec!["row".into(), "M".into(), "m".into()];
    for p in ["v1", "w1", "phi", "v2", "w2", "phi_term"] {
        c.extend(vec_cols(p));
    }
    c.extend(["sym_main", "osm_main", "sym_inc", "osm_inc", "ledger_total"].map(String::from));
    for p in ["a", "g", "g_perp"] {
        c.extend(vec_cols(p));
    }
    c.extend(["momentum_residual", "energy_residual", "frame_residual"].map(String::from));
    c
}

fn run_collide(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut rows: Vec<CollideRow> = cfg.collide.as_ref().map(|c| c.rows.clone()).unwrap_or_default();
    let mut input_hash = None;
    if let Some(path) = &cfg.input {
        let path = match &cfg.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.clone(),
        };
        let (more, hash) = read_input(&path)?;
        // Input rows get the same checks as inline ones.
        let mut probe = RunConfig::bare(Subcommand::Collide);
        probe.collide = Some(crate::config::CollideParams { rows: more.clone() });
        probe.validate().map_err(|e| match e {
            ConfigError::Range(v) => ConfigError::Range(
                v.into_iter()
                    .map(|x| Violation { field: x.field.replacen("collide.rows", "input", 1), message: x.message })
                    .collect(),
            ),
            other => other,
        })?;
        rows.extend(more);
        input_hash = Some(hash);
    }
    let mut table = Table::new(collide_columns());
    for (i, r) in rows.iter().enumerate() {
        let masses = MassPair::new(r.main_mass, r.m)?;
        let exchange = match r.phi {
            Some(phi) => Exchange::Axis(Projector::new(Vec3::from(phi))?),
            None => Exchange::Full,
        };
        let e = collide_with(Vec3::from(r.v1), Vec3::from(r.w1), exchange, &masses)?;
        let l = nelson_energy_ledger(&e);
        let f = decompose(&e);
        let res = e.residuals();
        let mut row = vec![Value::from(i), Value::from(r.main_mass), Value::from(r.m)];
        push_vec(&mut row, e.v1);
        push_vec(&mut row, e.w1);
        push_vec(&mut row, e.axis().unwrap_or(Vec3::splat(f64::NAN)));
        push_vec(&mut row, e.v2);
        push_vec(&mut row, e.w2);
        push_vec(&mut row, e.phi_term);
        row.extend([l.sym_main, l.osm_main, l.sym_inc, l.osm_inc, l.total()].map(Value::from));
        push_vec(&mut row, f.a);
        push_vec(&mut row, f.g);
        push_vec(&mut row, f.g_perp);
        let frame = nelsonbath_core::eigenframe::minkowski_frame_residual(&e).relative();
        row.extend([res.momentum, res.energy, frame].map(Value::from));
        table.push(row);
    }
    Ok(Report {
        metadata: base_metadata(cfg, input_hash),
        artifacts: vec![Artifact { suffix: None, table }],
        failed: Vec::new(),
        total: 0,
    })
}

fn bath_config(seed: u64, b: &BathParams) -> Result<BathConfig, RunError> {
    let mut c = BathConfig::new(MassPair::from_ratio(b.main_mass, b.gamma2)?, b.c_w, b.tau_bar);
    c.n_collisions = b.n_collisions;
    c.mode = b.mode;
    c.bath_kind = b.bath_kind;
    c.target_correlation = b.target_correlation;
    c.initial_velocity = Vec3::from(b.initial_velocity);
    c.bath_mean = Vec3::from(b.bath_mean);
    c.burn_in_fraction = b.burn_in_fraction;
    c.seed = seed;
    c.validate()?;
    Ok(c)
}

pub fn bath_columns() -> Vec<String> {
    let mut c: Vec<String> = ["checkpoint", "n", "n_stationary"].map(String::from).to_vec();
    c.extend(vec_cols("mean_v"));
    c.extend(
        ["mean_v2", "mean_v2_se", "mean_w2", "mean_w2_se", "cross_vw", "cross_vw_se", "rho", "rho_se"]
            .map(String::from),
    );
    c.extend(["energy_ratio", "energy_ratio_se"].map(String::from));
    c.extend(vec_cols("mean_dv"));
    c.extend(vec_cols("final_v"));
    c.extend(["invariant_checks", "invariant_violations"].map(String::from));
    c
}

fn summary_row(k: usize, s: &StatSummary) -> Vec<Value> {
    let mut row = vec![Value::from(k), Value::from(s.n), Value::from(s.n_stationary)];
    push_vec(&mut row, s.mean_v);
    row.extend(
        [
            s.mean_v2.mean,
            s.mean_v2.se,
            s.mean_w2.mean,
            s.mean_w2.se,
            s.cross_vw.mean,
            s.cross_vw.se,
            s.rho,
            s.rho_se,
            s.energy_ratio.mean,
            s.energy_ratio.se,
        ]
        .map(Value::from),
    );
    push_vec(&mut row, s.mean_dv);
    push_vec(&mut row, s.final_v);
    row.extend([Value::from(s.invariant_checks), Value::from(s.invariant_violations)]);
    row
}

fn run_bath_cmd(cfg: &RunConfig, b: &BathParams) -> Result<Report, RunError> {
    let c = bath_config(cfg.seed, b)?;
    let run = run_bath(&c, b.checkpoints, b.trajectory)?;
    let mut table = Table::new(bath_columns());
    for (k, s) in run.series.iter().enumerate() {
        table.push(summary_row(k + 1, s));
    }
    let mut metadata = base_metadata(cfg, None);
    metadata.push("final_energy_ratio", run.summary.energy_ratio.mean);
    metadata.push("final_energy_ratio_se", run.summary.energy_ratio.se);
    let mut artifacts = vec![Artifact { suffix: None, table }];
    if let Some(traj) = run.trajectory {
        let mut cols = vec!["index".to_string()];
        for p in ["v1", "w1", "v2"] {
            cols.extend(vec_cols(p));
        }
        let mut t = Table::new(cols);
        for r in traj {
            let mut row = vec![Value::from(r.index)];
            push_vec(&mut row, r.v1);
            push_vec(&mut row, r.w1);
            push_vec(&mut row, r.v2);
            t.push(row);
        }
        artifacts.push(Artifact { suffix: Some("trajectory"), table: t });
    }
    Ok(Report { metadata, artifacts, failed: Vec::new(), total: 0 })
}

fn diffusion_config(seed: u64, n: &NelsonParams) -> Result<DiffusionConfig, RunError> {
    let wave = n.wave_model()?;
    let mut c = DiffusionConfig::new(wave, n.n_particles, n.t1, n.dt);
    if let Some(p) = &n.potential {
        c.potential = Potential::from(p);
    }
    c.t0 = n.t0;
    c.seed = seed;
    c.tau_bar = n.tau_bar;
    c.direction = n.direction;
    c.n_snapshots = n.n_snapshots;
    c.histogram_bins = n.histogram_bins;
    c.drift_bins = n.drift_bins;
    c.envelope = n.envelope;
    c.validate()?;
    Ok(c)
}

pub fn nelson_columns() -> Vec<String> {
    ["t", "n", "energy", "energy_se", "quadrature_rs", "quadrature_psi", "collision_constant", "madelung_max"]
        .map(String::from)
        .to_vec()
}

fn run_nelson(cfg: &RunConfig, n: &NelsonParams) -> Result<Report, RunError> {
    let c = diffusion_config(cfg.seed, n)?;
    let wave = c.wave;
    let snaps = evolve_ensemble(&c)?;
    let energies = energy_mc(&snaps, &wave, &c.potential, c.tau_bar)?;
    let mut table = Table::new(nelson_columns());
    for (s, e) in snaps.iter().zip(&energies) {
        let q = energy_quadrature(&wave, &c.potential, &QuadGrid::for_wave(&wave, s.t), s.t, c.tau_bar)?;
        let mut madelung = 0.0f64;
        for axis in 0..wave.dim() {
            for x in s.histogram.centers(axis) {
                let mut p = wave.mean_position(s.t);
                p[axis] = x;
                madelung = madelung.max(madelung_residual(&wave, &c.potential, &p, s.t)?.abs());
            }
        }
        table.push(vec![
            Value::from(s.t),
            Value::from(e.n),
            Value::from(e.energy.mean),
            Value::from(e.energy.se),
            Value::from(q.rs_form),
            Value::from(q.psi_form),
            Value::from(q.constant),
            Value::from(madelung),
        ]);
    }
    let mut metadata = base_metadata(cfg, None);
    metadata.push("exact_energy", wave.exact_energy() + c.collision_constant());
    match osmotic_residual(&snaps, &wave) {
        Ok(o) => {
            metadata.push("osmotic_residual", o.norm);
            metadata.push("osmotic_excluded_bins", o.excluded_bins);
        }
        Err(e) => metadata.push("osmotic_residual", format!("unavailable: {e}")),
    }
    match continuity_residual(&snaps, &wave) {
        Ok(r) => {
            metadata.push("continuity_residual_max", r.max);
            metadata.push("continuity_residual_rms", r.rms);
        }
        Err(e) => metadata.push("continuity_residual_max", format!("unavailable: {e}")),
    }
    let mut hist = Table::new(["t", "axis", "center", "count", "density"]);
    for s in &snaps {
        for axis in 0..wave.dim() {
            let dens = s.histogram.density(axis);
            for ((x, count), d) in s.histogram.centers(axis).into_iter().zip(&s.histogram.counts[axis]).zip(dens) {
                hist.push(vec![Value::from(s.t), Value::from(axis), Value::from(x), Value::from(*count), Value::from(d)]);
            }
        }
    }
    Ok(Report {
        metadata,
        artifacts: vec![Artifact { suffix: None, table }, Artifact { suffix: Some("histograms"), table: hist }],
        failed: Vec::new(),
        total: 0,
    })
}

pub fn minkowski_columns() -> Vec<String> {
    [
        "n",
        "gamma2",
        "frame_residual",
        "statistical_residual",
        "statistical_residual_se",
        "correlation_term",
        "correlation_term_se",
        "identity_gap",
        "identity_gap_se",
        "delta_e",
        "delta_e_se",
        "correlation_rho",
        "mean_a2",
        "mean_gsum2",
    ]
    .map(String::from)
    .to_vec()
}

fn run_minkowski(cfg: &RunConfig, p: &MinkowskiParams) -> Result<Report, RunError> {
    let mut c = BathConfig::new(MassPair::from_ratio(p.main_mass, p.gamma2)?, p.c_w, p.tau_bar);
    c.mode = p.mode;
    c.bath_kind = p.bath_kind;
    c.target_correlation = p.target_correlation;
    c.initial_velocity = Vec3::from(p.initial_velocity);
    c.burn_in_fraction = p.burn_in_fraction;
    c.seed = cfg.seed;
    c.validate()?;
    let events = match p.sample {
        MinkowskiSample::Trajectory => {
            let burn = (p.burn_in_fraction / (1.0 - p.burn_in_fraction) * p.n_events as f64).round() as u64;
            c.n_collisions = p.n_events + burn;
            let mut all = simulate(&c)?;
            all.drain(..burn as usize);
            all
        }
        MinkowskiSample::Replicas => replica_events(&c, p.n_events)?,
    };
    let r = minkowski_statistical_residual(&events)?;
    let mut table = Table::new(minkowski_columns());
    table.push(
        [
            Value::from(r.n),
            Value::from(r.gamma2),
            Value::from(r.frame_residual),
            Value::from(r.statistical_residual.mean),
            Value::from(r.statistical_residual.se),
            Value::from(r.correlation_term.mean),
            Value::from(r.correlation_term.se),
            Value::from(r.identity_gap.mean),
            Value::from(r.identity_gap.se),
            Value::from(r.delta_e.mean),
            Value::from(r.delta_e.se),
            Value::from(r.correlation_rho),
            Value::from(r.mean_a2),
            Value::from(r.mean_gsum2),
        ]
        .to_vec(),
    );
    Ok(Report {
        metadata: base_metadata(cfg, None),
        artifacts: vec![Artifact { suffix: None, table }],
        failed: Vec::new(),
        total: 0,
    })
}

fn run_selftest(cfg: &RunConfig, on_line: &mut dyn FnMut(&str)) -> Result<Report, RunError> {
    let scale = cfg.selftest.as_ref().map_or(Scale::Full, |s| s.scale);
    let results = selftest::run_suite(&selftest::all_ids(), cfg.seed, scale, |r| on_line(&r.line()));
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let mut metadata = base_metadata(cfg, None);
    metadata.push("scale", if scale == Scale::Full { "full" } else { "quick" });
    metadata.push("passed", (results.len() - failed.len()) as u64);
    metadata.push("failed", failed.len() as u64);
    Ok(Report {
        metadata,
        artifacts: vec![Artifact { suffix: None, table: selftest::suite_table(&results) }],
        failed,
        total: results.len(),
    })
}

/// `out.csv` with suffix `histograms` becomes `out.histograms.csv`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

/// Write every artifact; returns the paths written (stdout counts as none).
pub fn write_report(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>, RunError> {
    let mut written = Vec::new();
    for a in &report.artifacts {
        match (&cfg.output, a.suffix) {
            (Some(path), None) => {
                emit(&a.table, &report.metadata, cfg.format, Some(path))?;
                written.push(path.clone());
            }
            (Some(path), Some(suffix)) => {
                let p = sibling_path(path, suffix);
                emit(&a.table, &report.metadata, cfg.format, Some(&p))?;
                written.push(p);
            }
            (None, None) => emit(&a.table, &report.metadata, cfg.format, None)?,
            (None, Some(suffix)) => {
                eprintln!("note: {suffix} table not written; pass --output to keep it");
            }
        }
    }
    Ok(written)
}

/// Execute and write; a failed selftest is reported after its table is written.
pub fn run(cfg: &RunConfig, on_line: &mut dyn FnMut(&str)) -> Result<Report, RunError> {
    let report = execute(cfg, on_line)?;
    write_report(cfg, &report)?;
    if !report.failed.is_empty() {
        return Err(RunError::SelftestFailed { failed: report.failed.clone(), total: report.total });
    }
    Ok(report)
}

/// Usage error for a selftest config that was not asked for.
pub fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

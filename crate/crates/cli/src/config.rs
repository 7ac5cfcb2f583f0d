//! Run configuration: strict JSON parsing and range validation.

use std::path::PathBuf;

use nelsonbath_core::heatbath::{BathKind, Mode};
use nelsonbath_core::nelson::{Direction, Envelope, Potential, WaveModel};
use nelsonbath_core::Projector;
use nelsonbath_core::Vec3;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::output::Format;

/// Seed used when neither the config nor the command line gives one.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Collide,
    Bath,
    Nelson,
    Minkowski,
    Selftest,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Collide => "collide",
            Subcommand::Bath => "bath",
            Subcommand::Nelson => "nelson",
            Subcommand::Minkowski => "minkowski",
            Subcommand::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    /// Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    /// Relative paths are taken from `base_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Directory of the config file; not part of the config hash.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collide: Option<CollideParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nelson: Option<NelsonParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minkowski: Option<MinkowskiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestParams>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_paper() -> Mode {
    Mode::Paper
}

fn default_fixed_speed() -> BathKind {
    BathKind::IsotropicFixedSpeed
}

fn default_forward() -> Direction {
    Direction::Forward
}

fn default_gaussian() -> Envelope {
    Envelope::Gaussian
}

fn default_burn_in() -> f64 {
    0.1
}

fn default_collisions() -> u64 {
    100_000
}

fn default_checkpoints() -> usize {
    10
}

fn default_snapshots() -> usize {
    11
}

fn default_histogram_bins() -> usize {
    200
}

fn default_drift_bins() -> usize {
    50
}

/// A field that must be present but may be `null`.
fn required_nullable<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<f64>::deserialize(d)
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollideParams {
    #[serde(default)]
    pub rows: Vec<CollideRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollideRow {
    #[serde(rename = "M")]
    pub main_mass: f64,
    pub m: f64,
    pub v1: [f64; 3],
    pub w1: [f64; 3],
    /// Collision axis; `None` exchanges the full relative velocity.
    #[serde(default)]
    pub phi: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    #[serde(rename = "M")]
    pub main_mass: f64,
    /// `m/M`.
    pub gamma2: f64,
    pub c_w: f64,
    pub tau_bar: f64,
    #[serde(default = "default_collisions")]
    pub n_collisions: u64,
    #[serde(default = "default_paper")]
    pub mode: Mode,
    #[serde(default = "default_fixed_speed")]
    pub bath_kind: BathKind,
    #[serde(default)]
    pub target_correlation: Option<f64>,
    #[serde(default)]
    pub initial_velocity: [f64; 3],
    #[serde(default)]
    pub bath_mean: [f64; 3],
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    /// Running summaries written as rows.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Also dump every collision.
    #[serde(default)]
    pub trajectory: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinkowskiSample {
    /// Consecutive collisions of one trajectory.
    #[default]
    Trajectory,
    /// Independent single collisions from the initial velocity.
    Replicas,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinkowskiParams {
    #[serde(rename = "M")]
    pub main_mass: f64,
    pub gamma2: f64,
    pub c_w: f64,
    pub tau_bar: f64,
    #[serde(default = "default_collisions")]
    pub n_events: u64,
    #[serde(default = "default_paper")]
    pub mode: Mode,
    #[serde(default = "default_fixed_speed")]
    pub bath_kind: BathKind,
    #[serde(default)]
    pub target_correlation: Option<f64>,
    #[serde(default)]
    pub initial_velocity: [f64; 3],
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    #[serde(default)]
    pub sample: MinkowskiSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WaveSpec {
    HarmonicGround { dim: usize, omega: f64 },
    FreePacket { width: f64, center: f64, velocity: f64 },
    PlaneWave { dim: usize, velocity: Vec<f64>, box_length: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Harmonic { omega: f64 },
    Constant { value: f64 },
}

impl From<&PotentialSpec> for Potential {
    fn from(p: &PotentialSpec) -> Self {
        match *p {
            PotentialSpec::Zero => Potential::Zero,
            PotentialSpec::Harmonic { omega } => Potential::Harmonic { omega },
            PotentialSpec::Constant { value } => Potential::Constant { value },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelsonParams {
    pub wave: WaveSpec,
    #[serde(rename = "M")]
    pub main_mass: f64,
    pub eta: f64,
    /// Defaults to the potential the wave solves.
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    pub n_particles: usize,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    /// Required; `null` means no collision constant.
    #[serde(deserialize_with = "required_nullable")]
    pub tau_bar: Option<f64>,
    #[serde(default = "default_forward")]
    pub direction: Direction,
    #[serde(default = "default_snapshots")]
    pub n_snapshots: usize,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_drift_bins")]
    pub drift_bins: usize,
    #[serde(default = "default_gaussian")]
    pub envelope: Envelope,
}

impl NelsonParams {
    pub fn wave_model(&self) -> nelsonbath_core::Result<WaveModel> {
        match &self.wave {
            WaveSpec::HarmonicGround { dim, omega } => WaveModel::harmonic(*dim, self.main_mass, self.eta, *omega),
            WaveSpec::FreePacket { width, center, velocity } => {
                WaveModel::free_packet(self.main_mass, self.eta, *width, *center, *velocity)
            }
            WaveSpec::PlaneWave { dim, velocity, box_length } => {
                let mut v = [0.0; 3];
                if velocity.len() != *dim {
                    return Err(nelsonbath_core::Error::InvalidArgument(format!(
                        "velocity has {} components for dimension {dim}",
                        velocity.len()
                    )));
                }
                v[..*dim].copy_from_slice(velocity);
                WaveModel::plane_wave(*dim, self.main_mass, self.eta, v, *box_length)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Sample sizes of the acceptance criteria.
    #[default]
    Full,
    /// Reduced sample sizes for smoke runs.
    Quick,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestParams {
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown key `{key}` at line {line}, column {column}")]
    UnknownKey { key: String, line: usize, column: usize },
    #[error("invalid config at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("{}", describe(.0))]
    Range(Vec<Violation>),
}

fn describe(v: &[Violation]) -> String {
    let list: Vec<String> = v.iter().map(|x| format!("{}: {}", x.field, x.message)).collect();
    format!("{} invalid value(s): {}", v.len(), list.join("; "))
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "syntax",
            ConfigError::UnknownKey { .. } => "unknown-key",
            ConfigError::Schema { .. } => "schema",
            ConfigError::Range(_) => "range",
        }
    }
}

#[derive(Default)]
struct Checks(Vec<Violation>);

impl Checks {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Violation { field: field.to_string(), message: message.into() });
    }

    fn positive(&mut self, field: &str, x: f64) {
        if !(x.is_finite() && x > 0.0) {
            self.fail(field, format!("must be positive and finite, got {x}"));
        }
    }

    fn finite_vec(&mut self, field: &str, v: &[f64]) {
        if v.iter().any(|x| !x.is_finite()) {
            self.fail(field, "components must be finite");
        }
    }

    fn correlation(&mut self, field: &str, r: Option<f64>) {
        if let Some(r) = r {
            if !(r.is_finite() && (-1.0..=1.0).contains(&r)) {
                self.fail(field, format!("must lie in [-1, 1], got {r}"));
            }
        }
    }

    fn burn_in(&mut self, field: &str, f: f64) {
        if !(0.0..1.0).contains(&f) {
            self.fail(field, format!("must lie in [0, 1), got {f}"));
        }
    }
}

fn locate(e: &serde_json::Error) -> ConfigError {
    let (line, column) = (e.line(), e.column());
    let text = e.to_string();
    // serde_json appends " at line L column C"; keep only the message.
    let message = text.split(" at line ").next().unwrap_or(&text).to_string();
    match e.classify() {
        serde_json::error::Category::Data => match message.strip_prefix("unknown field `") {
            Some(rest) => {
                let key = rest.split('`').next().unwrap_or(rest).to_string();
                ConfigError::UnknownKey { key, line, column }
            }
            None => ConfigError::Schema { line, column, message },
        },
        _ => ConfigError::Syntax { line, column, message },
    }
}

/// Parse and fully validate a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| locate(&e))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Configuration for a subcommand that needs no parameter block.
    pub fn bare(subcommand: Subcommand) -> Self {
        RunConfig {
            subcommand,
            seed: DEFAULT_SEED,
            format: Format::Csv,
            output: None,
            input: None,
            base_dir: None,
            collide: None,
            bath: None,
            nelson: None,
            minkowski: None,
            selftest: None,
        }
    }

    /// Every range violation, with dotted field names.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checks::default();
        let given = [
            ("collide", self.collide.is_some()),
            ("bath", self.bath.is_some()),
            ("nelson", self.nelson.is_some()),
            ("minkowski", self.minkowski.is_some()),
            ("selftest", self.selftest.is_some()),
        ];
        let own = self.subcommand.name();
        for (name, present) in given {
            if present && name != own {
                c.fail(name, format!("block does not apply to subcommand {own}"));
            }
        }
        let needs_block = matches!(self.subcommand, Subcommand::Bath | Subcommand::Nelson | Subcommand::Minkowski);
        if needs_block && !given.iter().any(|&(n, p)| p && n == own) {
            c.fail(own, "parameter block is required");
        }
        if self.input.is_some() && self.subcommand != Subcommand::Collide {
            c.fail("input", "only the collide subcommand reads an input file");
        }
        if let Some(p) = &self.collide {
            for (i, r) in p.rows.iter().enumerate() {
                let f = |name: &str| format!("collide.rows[{i}].{name}");
                c.positive(&f("M"), r.main_mass);
                c.positive(&f("m"), r.m);
                c.finite_vec(&f("v1"), &r.v1);
                c.finite_vec(&f("w1"), &r.w1);
                if let Some(phi) = r.phi {
                    if Projector::new(Vec3::from(phi)).is_err() {
                        c.fail(&f("phi"), "must be a finite unit vector");
                    }
                }
            }
        }
        if let Some(b) = &self.bath {
            c.positive("bath.M", b.main_mass);
            c.positive("bath.gamma2", b.gamma2);
            c.positive("bath.c_w", b.c_w);
            c.positive("bath.tau_bar", b.tau_bar);
            c.correlation("bath.target_correlation", b.target_correlation);
            c.finite_vec("bath.initial_velocity", &b.initial_velocity);
            c.finite_vec("bath.bath_mean", &b.bath_mean);
            c.burn_in("bath.burn_in_fraction", b.burn_in_fraction);
            if b.checkpoints == 0 {
                c.fail("bath.checkpoints", "must be at least 1");
            }
        }
        if let Some(m) = &self.minkowski {
            c.positive("minkowski.M", m.main_mass);
            c.positive("minkowski.gamma2", m.gamma2);
            c.positive("minkowski.c_w", m.c_w);
            c.positive("minkowski.tau_bar", m.tau_bar);
            c.correlation("minkowski.target_correlation", m.target_correlation);
            c.finite_vec("minkowski.initial_velocity", &m.initial_velocity);
            c.burn_in("minkowski.burn_in_fraction", m.burn_in_fraction);
            if m.n_events < 2 {
                c.fail("minkowski.n_events", "must be at least 2");
            }
        }
        if let Some(n) = &self.nelson {
            c.positive("nelson.M", n.main_mass);
            c.positive("nelson.eta", n.eta);
            if n.main_mass > 0.0 && n.eta > 0.0 {
                if let Err(e) = n.wave_model() {
                    c.fail("nelson.wave", e.to_string());
                }
            }
            if n.n_particles == 0 {
                c.fail("nelson.n_particles", "must be at least 1");
            }
            if !n.t0.is_finite() {
                c.fail("nelson.t0", "must be finite");
            }
            if !(n.t1.is_finite() && n.t1 >= n.t0) {
                c.fail("nelson.t1", format!("must be finite and at least t0 = {}", n.t0));
            }
            c.positive("nelson.dt", n.dt);
            if let Some(tau) = n.tau_bar {
                c.positive("nelson.tau_bar", tau);
            }
            if n.n_snapshots < 2 {
                c.fail("nelson.n_snapshots", "must be at least 2");
            }
            if n.histogram_bins < 5 {
                c.fail("nelson.histogram_bins", "must be at least 5");
            }
            if n.drift_bins < 5 {
                c.fail("nelson.drift_bins", "must be at least 5");
            }
            if let Some(PotentialSpec::Harmonic { omega }) = n.potential {
                c.positive("nelson.potential.omega", omega);
            }
            if let Some(PotentialSpec::Constant { value }) = n.potential {
                if !value.is_finite() {
                    c.fail("nelson.potential.value", "must be finite");
                }
            }
        }
        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Range(c.0))
        }
    }

    /// Canonical JSON of everything that determines the results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }
}

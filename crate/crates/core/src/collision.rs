//! Elastic two-particle collision operator.
//!
//! A main particle of mass `M` and an incident particle of mass `m` exchange
//! momentum only along the collision axis `phi`. Along that axis the exchange
//! is the 2×2 collision matrix
//!
//! ```text
//! [[cos θ,      γ sin θ],
//!  [sin θ / γ, −cos θ  ]]     γ² = m/M, sin θ = 2γ/(1+γ²), cos θ = (1−γ²)/(1+γ²)
//! ```
//!
//! and the components orthogonal to `phi` pass through unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vec3::{Mat3, Vec3};

/// Tolerance used for every exact identity (relative, double precision).
pub const IDENTITY_TOL: f64 = 1e-12;

/// Axes whose norm is within this distance of one are renormalized; others are rejected.
pub const AXIS_RENORM_TOL: f64 = 1e-9;

/// 2×2 real matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Masses of the main (`M`) and incident (`m`) particle together with the
/// derived collision-angle quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassPair {
    main: f64,
    incident: f64,
    gamma2: f64,
    gamma: f64,
    sin_theta: f64,
    cos_theta: f64,
}

impl MassPair {
    pub fn new(main: f64, incident: f64) -> Result<Self> {
        if !(main.is_finite() && main > 0.0) {
            return Err(invalid(format!("main mass must be finite and positive, got {main}")));
        }
        if !(incident.is_finite() && incident > 0.0) {
            return Err(invalid(format!(
                "incident mass must be finite and positive, got {incident}"
            )));
        }
        let gamma2 = incident / main;
        if !(gamma2.is_finite() && gamma2 > 0.0) {
            return Err(invalid(format!("mass ratio m/M = {gamma2} is not representable")));
        }
        Ok(Self::with_ratio(main, incident, gamma2))
    }

    /// Build from the main mass and the ratio `gamma2 = m/M`.
    pub fn from_ratio(main: f64, gamma2: f64) -> Result<Self> {
        if !(gamma2.is_finite() && gamma2 > 0.0) {
            return Err(invalid(format!("gamma2 must be finite and positive, got {gamma2}")));
        }
        let pair = MassPair::new(main, gamma2 * main)?;
        Ok(Self::with_ratio(main, pair.incident, gamma2))
    }

    fn with_ratio(main: f64, incident: f64, gamma2: f64) -> Self {
        let gamma = gamma2.sqrt();
        let denom = 1.0 + gamma2;
        MassPair {
            main,
            incident,
            gamma2,
            gamma,
            sin_theta: 2.0 * gamma / denom,
            cos_theta: (1.0 - gamma2) / denom,
        }
    }

    pub fn main(&self) -> f64 {
        self.main
    }

    pub fn incident(&self) -> f64 {
        self.incident
    }

    /// `m/M`.
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sin_theta(&self) -> f64 {
        self.sin_theta
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos_theta
    }

    /// `γ sin θ = 2γ²/(1+γ²)`, the main particle's share of the exchange.
    pub fn gamma_sin(&self) -> f64 {
        2.0 * self.gamma2 / (1.0 + self.gamma2)
    }

    /// `sin θ / γ = 2/(1+γ²)`, written without the quotient so that it stays
    /// finite as `γ → 0`.
    pub fn sin_over_gamma(&self) -> f64 {
        2.0 / (1.0 + self.gamma2)
    }
}

/// Rank-one projection `P = φφᵀ` onto a unit collision axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    phi: Vec3,
}

impl Projector {
    /// Accepts axes within [`AXIS_RENORM_TOL`] of unit length (renormalizing them).
    pub fn new(phi: Vec3) -> Result<Self> {
        if !phi.is_finite() {
            return Err(invalid(format!("collision axis {phi} is not finite")));
        }
        let n = phi.norm();
        if (n - 1.0).abs() > AXIS_RENORM_TOL {
            return Err(invalid(format!("collision axis {phi} has norm {n}, expected 1")));
        }
        Ok(Projector { phi: phi / n })
    }

    /// Normalizes any non-zero finite direction.
    pub fn from_direction(dir: Vec3) -> Result<Self> {
        let phi = dir
            .normalized()
            .ok_or_else(|| invalid(format!("cannot build a collision axis from {dir}")))?;
        Ok(Projector { phi })
    }

    pub fn axis(&self) -> Vec3 {
        self.phi
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.phi * self.phi.dot(v)
    }

    /// `(I − P) v`.
    #[inline]
    pub fn complement(&self, v: Vec3) -> Vec3 {
        v - self.apply(v)
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::outer(self.phi, self.phi)
    }
}

/// How the exchange is applied to full 3-vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exchange {
    /// Exchange along a single collision axis.
    Axis(Projector),
    /// `P(φ)` replaced by the identity: the 1D collision matrix acts on every component.
    Full,
}

impl Exchange {
    #[inline]
    fn apply(&self, v: Vec3) -> Vec3 {
        match self {
            Exchange::Axis(p) => p.apply(v),
            Exchange::Full => v,
        }
    }

    #[inline]
    fn complement(&self, v: Vec3) -> Vec3 {
        match self {
            Exchange::Axis(p) => p.complement(v),
            Exchange::Full => Vec3::ZERO,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        match self {
            Exchange::Axis(p) => p.matrix(),
            Exchange::Full => Mat3::IDENTITY,
        }
    }
}

/// One elastic collision: inputs, outputs and the off-axis correction term `Φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub masses: MassPair,
    pub exchange: Exchange,
    pub v1: Vec3,
    pub w1: Vec3,
    pub v2: Vec3,
    pub w2: Vec3,
    /// `sin θ (I − P)(v1 − w1)`.
    pub phi_term: Vec3,
}

/// Pre- or post-collision side of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Pre,
    Post,
}

/// Relative residuals of the conservation identities of one event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventResiduals {
    pub momentum: f64,
    pub energy: f64,
    pub phi_orthogonality: f64,
    pub momentum_transfer: f64,
}

impl EventResiduals {
    pub fn max(&self) -> f64 {
        self.momentum
            .max(self.energy)
            .max(self.phi_orthogonality)
            .max(self.momentum_transfer)
    }
}

impl CollisionEvent {
    pub fn axis(&self) -> Option<Vec3> {
        match self.exchange {
            Exchange::Axis(p) => Some(p.axis()),
            Exchange::Full => None,
        }
    }

    pub fn residuals(&self) -> EventResiduals {
        let (big_m, m) = (self.masses.main, self.masses.incident);
        let p1 = big_m * self.v1 + m * self.w1;
        let p2 = big_m * self.v2 + m * self.w2;
        let p_scale = big_m * (self.v1.max_abs() + self.v2.max_abs())
            + m * (self.w1.max_abs() + self.w2.max_abs());
        let e1 = big_m * self.v1.norm2() + m * self.w1.norm2();
        let e2 = big_m * self.v2.norm2() + m * self.w2.norm2();
        let dv = self.v2 - self.v1;
        let phi_scale = self.masses.sin_theta * (self.v1 - self.w1).norm() * dv.norm();
        let dw = self.w2 - self.w1;
        let transfer = self.masses.gamma2 * dw + dv;
        let transfer_scale = dv.max_abs() + self.masses.gamma2 * dw.max_abs();
        EventResiduals {
            momentum: rel((p2 - p1).max_abs(), p_scale),
            energy: rel((e2 - e1).abs(), e1.max(e2)),
            phi_orthogonality: rel(self.phi_term.dot(dv).abs(), phi_scale),
            momentum_transfer: rel(transfer.max_abs(), transfer_scale),
        }
    }

    pub fn satisfies_invariants(&self, tol: f64) -> bool {
        self.residuals().max() <= tol
    }
}

/// `|err| / scale`, treating a zero scale as exact.
#[inline]
pub(crate) fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Per-mass energy split into symmetric and osmotic (anti-symmetric) terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub gamma2: f64,
    /// `|(v2+v1)/2|²`
    pub sym_main: f64,
    /// `|(v2−v1)/2|²`
    pub osm_main: f64,
    /// `|(w2+w1)/2|²`
    pub sym_inc: f64,
    /// `|(w2−w1)/2|²`
    pub osm_inc: f64,
}

impl EnergyLedger {
    pub fn main_part(&self) -> f64 {
        self.sym_main + self.osm_main
    }

    /// Incident contribution, already weighted by `γ²`.
    pub fn incident_part(&self) -> f64 {
        self.gamma2 * (self.sym_inc + self.osm_inc)
    }

    /// Equals `2H/M`.
    pub fn total(&self) -> f64 {
        self.main_part() + self.incident_part()
    }
}

/// The collision matrix for the given masses.
pub fn collision_matrix(masses: &MassPair) -> Mat2 {
    let c = masses.cos_theta;
    [[c, masses.gamma_sin()], [masses.sin_over_gamma(), -c]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// One-dimensional collision of scalar velocities `(u1, s1)` along the axis.
pub fn collide_1d(u1: f64, s1: f64, masses: &MassPair) -> Result<(f64, f64)> {
    if !(u1.is_finite() && s1.is_finite()) {
        return Err(invalid(format!("velocities must be finite, got ({u1}, {s1})")));
    }
    let g = collision_matrix(masses);
    Ok((g[0][0] * u1 + g[0][1] * s1, g[1][0] * u1 + g[1][1] * s1))
}

fn check_velocities(v1: Vec3, w1: Vec3) -> Result<()> {
    if !v1.is_finite() || !w1.is_finite() {
        return Err(invalid(format!("velocities must be finite, got v1={v1}, w1={w1}")));
    }
    Ok(())
}

/// Collide along the axis `phi` using the block-projection form
///
/// ```text
/// v2 = (I − γ sinθ P) v1 + γ sinθ P w1
/// w2 = (sinθ/γ) P v1 + (I − (sinθ/γ) P) w1
/// ```
pub fn collide(v1: Vec3, w1: Vec3, phi: &Projector, masses: &MassPair) -> Result<CollisionEvent> {
    collide_with(v1, w1, Exchange::Axis(*phi), masses)
}

/// Collision with `P(φ)` replaced by the identity.
pub fn collide_full(v1: Vec3, w1: Vec3, masses: &MassPair) -> Result<CollisionEvent> {
    collide_with(v1, w1, Exchange::Full, masses)
}

pub fn collide_with(
    v1: Vec3,
    w1: Vec3,
    exchange: Exchange,
    masses: &MassPair,
) -> Result<CollisionEvent> {
    check_velocities(v1, w1)?;
    let gs = masses.gamma_sin();
    let sg = masses.sin_over_gamma();
    // Applying P to the difference keeps v1 == w1 an exact fixed point.
    let d = exchange.apply(w1 - v1);
    let v2 = v1 + gs * d;
    let w2 = w1 - sg * d;
    let phi_term = masses.sin_theta * exchange.complement(v1 - w1);
    Ok(CollisionEvent { masses: *masses, exchange, v1, w1, v2, w2, phi_term })
}

/// Alternate algebraic routes to the same collision, kept for cross-checking.
pub mod forms {
    use super::*;

    /// Block matrix form: `[[I − γs P, γs P], [(s/γ) P, I − (s/γ) P]]` acting on `(v1, w1)`.
    pub fn block_form(v1: Vec3, w1: Vec3, exchange: &Exchange, masses: &MassPair) -> (Vec3, Vec3) {
        let (gs, sg) = (masses.gamma_sin(), masses.sin_over_gamma());
        let (pv, pw) = (exchange.apply(v1), exchange.apply(w1));
        (v1 - gs * pv + gs * pw, sg * pv + w1 - sg * pw)
    }

    /// `v2 = v1 + γ sinθ P(w1−v1)`, `w2 = w1 − (sinθ/γ) P(w1−v1)`.
    pub fn update_form(v1: Vec3, w1: Vec3, exchange: &Exchange, masses: &MassPair) -> (Vec3, Vec3) {
        let d = exchange.apply(w1 - v1);
        (v1 + masses.gamma_sin() * d, w1 - masses.sin_over_gamma() * d)
    }

    /// Collision matrix applied to the full vectors plus the correction `(γΦ, −Φ/γ)`.
    pub fn rotation_form(v1: Vec3, w1: Vec3, exchange: &Exchange, masses: &MassPair) -> (Vec3, Vec3) {
        let g = collision_matrix(masses);
        let phi_term = masses.sin_theta() * exchange.complement(v1 - w1);
        let v2 = g[0][0] * v1 + g[0][1] * w1 + masses.gamma() * phi_term;
        // Φ/γ = (sinθ/γ)(I−P)(v1−w1), kept finite as γ → 0.
        let w2 = g[1][0] * v1 + g[1][1] * w1 - masses.sin_over_gamma() * exchange.complement(v1 - w1);
        (v2, w2)
    }
}

pub fn nelson_energy_ledger(event: &CollisionEvent) -> EnergyLedger {
    let half = |a: Vec3| (a * 0.5).norm2();
    EnergyLedger {
        gamma2: event.masses.gamma2,
        sym_main: half(event.v2 + event.v1),
        osm_main: half(event.v2 - event.v1),
        sym_inc: half(event.w2 + event.w1),
        osm_inc: half(event.w2 - event.w1),
    }
}

/// `M v + m w` on the chosen side.
pub fn total_momentum(side: Side, event: &CollisionEvent) -> Vec3 {
    let (v, w) = event.side(side);
    event.masses.main * v + event.masses.incident * w
}

/// `(M|v|² + m|w|²)/2` on the chosen side.
pub fn total_energy(side: Side, event: &CollisionEvent) -> f64 {
    let (v, w) = event.side(side);
    0.5 * (event.masses.main * v.norm2() + event.masses.incident * w.norm2())
}

impl CollisionEvent {
    pub fn side(&self, side: Side) -> (Vec3, Vec3) {
        match side {
            Side::Pre => (self.v1, self.w1),
            Side::Post => (self.v2, self.w2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn head_on() -> CollisionEvent {
        let masses = MassPair::new(4.0, 1.0).unwrap();
        let phi = Projector::new(Vec3::X).unwrap();
        collide(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), &phi, &masses).unwrap()
    }

    #[test]
    fn mass_pair_angles() {
        let m = MassPair::new(4.0, 1.0).unwrap();
        assert_eq!(m.gamma2(), 0.25);
        assert!(close(m.sin_theta(), 0.8, 1e-15));
        assert!(close(m.cos_theta(), 0.6, 1e-15));
        assert!((m.sin_theta().powi(2) + m.cos_theta().powi(2) - 1.0).abs() < 1e-15);
        let r = MassPair::from_ratio(2.0, 0.01).unwrap();
        assert!(close(r.incident(), 0.02, 1e-15));
    }

    #[test]
    fn mass_pair_rejects_bad_masses() {
        assert!(MassPair::new(0.0, 1.0).is_err());
        assert!(MassPair::new(1.0, -1.0).is_err());
        assert!(MassPair::new(f64::NAN, 1.0).is_err());
        assert!(MassPair::new(1.0, f64::INFINITY).is_err());
        assert!(MassPair::from_ratio(1.0, -1.0).is_err());
    }

    #[test]
    fn collision_matrix_examples() {
        let eq = collision_matrix(&MassPair::new(1.0, 1.0).unwrap());
        assert_eq!(eq, [[0.0, 1.0], [1.0, 0.0]]);

        let q = collision_matrix(&MassPair::new(4.0, 1.0).unwrap());
        let want = [[0.6, 0.4], [1.6, -0.6]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(q[i][j], want[i][j], 1e-15), "{q:?}");
            }
        }

        let tiny = collision_matrix(&MassPair::from_ratio(1.0, 1e-12).unwrap());
        let want = [[1.0, 0.0], [2.0, -1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((tiny[i][j] - want[i][j]).abs() < 1e-11, "{tiny:?}");
            }
        }
    }

    #[test]
    fn collision_matrix_is_involution_preserving_form() {
        for g2 in [1e-4, 0.01, 0.25, 0.7, 1.0, 3.0] {
            let m = MassPair::from_ratio(1.0, g2).unwrap();
            let g = collision_matrix(&m);
            let sq = mat2_mul(&g, &g);
            assert!((sq[0][0] - 1.0).abs() < 1e-14 && sq[0][1].abs() < 1e-14);
            assert!(sq[1][0].abs() < 1e-14 && (sq[1][1] - 1.0).abs() < 1e-14);
            assert!((mat2_det(&g) + 1.0).abs() < 1e-14);
            let d = [[1.0, 0.0], [0.0, g2]];
            let gt = [[g[0][0], g[1][0]], [g[0][1], g[1][1]]];
            let q = mat2_mul(&gt, &mat2_mul(&d, &g));
            assert!((q[0][0] - 1.0).abs() < 1e-14 && q[0][1].abs() < 1e-14);
            assert!(q[1][0].abs() < 1e-14 && (q[1][1] - g2).abs() < 1e-14 * (1.0 + g2));
        }
    }

    #[test]
    fn collide_1d_examples() {
        let m = MassPair::new(4.0, 1.0).unwrap();
        let (u2, s2) = collide_1d(1.0, -1.0, &m).unwrap();
        assert!(close(u2, 0.2, 1e-15) && close(s2, 2.2, 1e-15));
        // momentum 3 = 3, energy 5 = 5 in units of M (scalar form u + γ²s, u² + γ²s²·4).
        assert!(close(4.0 * u2 + s2, 3.0, 1e-15));
        assert!(close(4.0 * u2 * u2 + s2 * s2, 5.0, 1e-15));

        let eq = MassPair::new(2.0, 2.0).unwrap();
        assert_eq!(collide_1d(3.5, -0.25, &eq).unwrap(), (-0.25, 3.5));

        for g2 in [1e-4, 0.3, 1.0, 5.0] {
            let m = MassPair::from_ratio(1.0, g2).unwrap();
            let (u, s) = collide_1d(0.7, 0.7, &m).unwrap();
            assert!(close(u, 0.7, 1e-15) && close(s, 0.7, 1e-15));
        }
        assert!(collide_1d(f64::NAN, 0.0, &m).is_err());
    }

    #[test]
    fn head_on_example_values() {
        let e = head_on();
        assert!((e.v2 - Vec3::new(0.2, 0.0, 0.0)).max_abs() < 1e-15);
        assert!((e.w2 - Vec3::new(2.2, 0.0, 0.0)).max_abs() < 1e-15);
        assert_eq!(e.phi_term, Vec3::ZERO);
        let p = total_momentum(Side::Pre, &e);
        assert!((p - Vec3::new(3.0, 0.0, 0.0)).max_abs() < 1e-15);
        assert!((total_energy(Side::Pre, &e) - 2.5).abs() < 1e-15);
        assert!((total_momentum(Side::Post, &e) - p).max_abs() < 1e-14);
        assert!((total_energy(Side::Post, &e) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn head_on_ledger_terms() {
        let l = nelson_energy_ledger(&head_on());
        assert!(close(l.sym_main, 0.36, 1e-14));
        assert!(close(l.osm_main, 0.16, 1e-14));
        assert!(close(l.incident_part(), 0.73, 1e-14));
        assert!(close(l.total(), 1.25, 1e-15));
    }

    #[test]
    fn zero_velocities_have_zero_totals() {
        let m = MassPair::new(3.0, 0.5).unwrap();
        let e = collide(Vec3::ZERO, Vec3::ZERO, &Projector::new(Vec3::Y).unwrap(), &m).unwrap();
        assert_eq!(total_momentum(Side::Pre, &e), Vec3::ZERO);
        assert_eq!(total_energy(Side::Post, &e), 0.0);
    }

    #[test]
    fn perpendicular_axis_is_noop() {
        let m = MassPair::new(2.0, 1.0).unwrap();
        let v1 = Vec3::new(1.0, 0.0, 0.0);
        let w1 = Vec3::new(-1.0, 0.0, 0.0);
        let e = collide(v1, w1, &Projector::new(Vec3::Z).unwrap(), &m).unwrap();
        assert_eq!(e.v2, v1);
        assert_eq!(e.w2, w1);
        let l = nelson_energy_ledger(&e);
        assert_eq!(l.osm_main, 0.0);
        assert_eq!(l.osm_inc, 0.0);
        assert!(close(l.total(), v1.norm2() + m.gamma2() * w1.norm2(), 1e-15));
    }

    #[test]
    fn equal_velocities_are_identity() {
        let m = MassPair::new(2.0, 1.0).unwrap();
        let c = Vec3::new(0.3, -2.0, 1.0);
        let phi = Projector::from_direction(Vec3::new(1.0, 1.0, 0.0)).unwrap();
        let e = collide(c, c, &phi, &m).unwrap();
        assert_eq!(e.v2, c);
        assert_eq!(e.w2, c);
    }

    #[test]
    fn head_on_reduces_to_1d_with_untouched_orthogonal_parts() {
        let m = MassPair::new(3.0, 0.7).unwrap();
        let v1 = Vec3::new(1.0, 2.0, -0.5);
        let w1 = Vec3::new(-0.4, 0.1, 2.0);
        let phi = Projector::from_direction(v1 - w1).unwrap();
        let e = collide(v1, w1, &phi, &m).unwrap();
        let n = phi.axis();
        let (u2, s2) = collide_1d(n.dot(v1), n.dot(w1), &m).unwrap();
        assert!(close(n.dot(e.v2), u2, 1e-13));
        assert!(close(n.dot(e.w2), s2, 1e-13));
        assert!((phi.complement(e.v2) - phi.complement(v1)).max_abs() < 1e-14);
        assert!((phi.complement(e.w2) - phi.complement(w1)).max_abs() < 1e-14);
    }

    #[test]
    fn projector_validation() {
        assert!(Projector::new(Vec3::new(1.0 + 5e-10, 0.0, 0.0)).is_ok());
        let p = Projector::new(Vec3::new(1.0 + 5e-10, 0.0, 0.0)).unwrap();
        assert_eq!(p.axis().norm(), 1.0);
        assert!(Projector::new(Vec3::new(1.1, 0.0, 0.0)).is_err());
        assert!(Projector::new(Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(Projector::from_direction(Vec3::ZERO).is_err());

        let p = Projector::from_direction(Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let pm = p.matrix();
        assert!(pm.mul_mat(&pm).sub(&pm).max_abs() < 1e-15);
        assert!(pm.mul_mat(&Mat3::IDENTITY.sub(&pm)).max_abs() < 1e-15);
    }

    #[test]
    fn forms_agree_on_fixed_case() {
        let m = MassPair::new(1.0, 0.3).unwrap();
        let v1 = Vec3::new(0.5, -1.0, 2.0);
        let w1 = Vec3::new(3.0, 0.2, -1.0);
        let ex = Exchange::Axis(Projector::from_direction(Vec3::new(0.2, 0.9, -0.4)).unwrap());
        let e = collide_with(v1, w1, ex, &m).unwrap();
        let (uv, uw) = forms::update_form(v1, w1, &ex, &m);
        let (rv, rw) = forms::rotation_form(v1, w1, &ex, &m);
        let (bv, bw) = forms::block_form(v1, w1, &ex, &m);
        assert!((e.v2 - bv).max_abs() < 1e-14 && (e.w2 - bw).max_abs() < 1e-14);
        assert!((e.v2 - uv).max_abs() < 1e-14 && (e.w2 - uw).max_abs() < 1e-14);
        assert!((e.v2 - rv).max_abs() < 1e-14 && (e.w2 - rw).max_abs() < 1e-14);
        assert!(e.satisfies_invariants(IDENTITY_TOL));
    }

    #[test]
    fn full_exchange_is_componentwise_1d() {
        let m = MassPair::new(4.0, 1.0).unwrap();
        let v1 = Vec3::new(1.0, 0.5, -2.0);
        let w1 = Vec3::new(-1.0, 2.0, 0.0);
        let e = collide_full(v1, w1, &m).unwrap();
        for i in 0..3 {
            let (u2, s2) = collide_1d(v1[i], w1[i], &m).unwrap();
            assert!(close(e.v2[i], u2, 1e-15) && close(e.w2[i], s2, 1e-15));
        }
        assert_eq!(e.phi_term, Vec3::ZERO);
        assert!(e.satisfies_invariants(IDENTITY_TOL));
    }

    #[test]
    fn rejects_non_finite_velocity() {
        let m = MassPair::new(1.0, 1.0).unwrap();
        let p = Projector::new(Vec3::X).unwrap();
        assert!(collide(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::ZERO, &p, &m).is_err());
    }
}

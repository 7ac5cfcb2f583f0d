//! Eigenvector decomposition of a collision and the Minkowski frame identity.
//!
//! The collision matrix has eigenvalues `+1` and `−1` with eigenvectors
//! `(a, a)` and `(−γ² g, g)`. Every collision therefore reads
//!
//! ```text
//! v1 = a − γ² g      v2 = a + γ² g⊥
//! w1 = a + g         w2 = a − g⊥
//! ```
//!
//! with `a` the mass-weighted mean velocity, `g = (w1 − v1)/(1+γ²)` and
//! `g⊥ = (v2 − w2)/(1+γ²)`, and energy conservation forces `|g| = |g⊥|`.

use serde::{Deserialize, Serialize};

use crate::collision::{collision_matrix, rel, CollisionEvent, MassPair};
use crate::error::{invalid, Error, Result};
use crate::stats::{batch_estimate, Estimate, DEFAULT_BATCHES};
use crate::vec3::Vec3;

/// `(a, g, g⊥)` of one collision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenFrame {
    pub gamma2: f64,
    /// Mean system velocity `(M v + m w)/(M + m)`.
    pub a: Vec3,
    /// Pre-collision interaction vector.
    pub g: Vec3,
    /// Post-collision interaction vector.
    pub g_perp: Vec3,
}

impl EigenFrame {
    /// Rebuild `(v1, w1, v2, w2)`.
    pub fn reconstruct(&self) -> (Vec3, Vec3, Vec3, Vec3) {
        let g2 = self.gamma2;
        (
            self.a - g2 * self.g,
            self.a + self.g,
            self.a + g2 * self.g_perp,
            self.a - self.g_perp,
        )
    }
}

pub fn decompose(event: &CollisionEvent) -> EigenFrame {
    let g2 = event.masses.gamma2();
    let denom = 1.0 + g2;
    EigenFrame {
        gamma2: g2,
        a: (event.v1 + g2 * event.w1) / denom,
        g: (event.w1 - event.v1) / denom,
        g_perp: (event.v2 - event.w2) / denom,
    }
}

/// Apply the collision matrix to a pair of 3-vectors, block by block.
pub fn apply_collision_matrix(masses: &MassPair, top: Vec3, bottom: Vec3) -> (Vec3, Vec3) {
    let m = collision_matrix(masses);
    (m[0][0] * top + m[0][1] * bottom, m[1][0] * top + m[1][1] * bottom)
}

/// Both sides of the per-event frame identity
/// `|w2−a|² − |v2−a|² = |w1−a|² − |v1−a|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResidual {
    pub post: f64,
    pub pre: f64,
    /// `post − pre`.
    pub residual: f64,
    /// `(1 − γ⁴)(|g⊥|² − |g|²)`, the same quantity evaluated through the eigenframe.
    pub analytic: f64,
    /// Magnitude used to judge `residual` relatively.
    pub scale: f64,
}

impl FrameResidual {
    pub fn relative(&self) -> f64 {
        rel(self.residual.abs(), self.scale)
    }
}

pub fn minkowski_frame_residual(event: &CollisionEvent) -> FrameResidual {
    let f = decompose(event);
    let a = f.a;
    let post_w = (event.w2 - a).norm2();
    let post_v = (event.v2 - a).norm2();
    let pre_w = (event.w1 - a).norm2();
    let pre_v = (event.v1 - a).norm2();
    let post = post_w - post_v;
    let pre = pre_w - pre_v;
    let g4 = f.gamma2 * f.gamma2;
    FrameResidual {
        post,
        pre,
        residual: post - pre,
        analytic: (1.0 - g4) * (f.g_perp.norm2() - f.g.norm2()),
        scale: post_w + post_v + pre_w + pre_v,
    }
}

/// Statistical form of the frame identity over a sample of collisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiReport {
    pub n: usize,
    pub gamma2: f64,
    /// Largest relative per-event frame residual.
    pub frame_residual: f64,
    /// `E|w2|² − E|v2|² − (E|w1|² − E|v1|²)`.
    pub statistical_residual: Estimate,
    /// `ρ = E[aᵀ(g+g⊥)] / sqrt(E|a|² E|g+g⊥|²)`.
    pub correlation_rho: f64,
    /// `γ² E[aᵀ(g+g⊥)]`, which equals `E[(|v2|² − |v1|²)/2]`.
    pub delta_e: Estimate,
    /// `−2(1+γ²) E[aᵀ(g+g⊥)]`, the exact value of `statistical_residual`.
    pub correlation_term: Estimate,
    /// `statistical_residual − correlation_term`, zero up to rounding.
    pub identity_gap: Estimate,
    pub mean_a2: f64,
    pub mean_gsum2: f64,
}

/// Estimate the statistical Minkowski residual and its decomposition.
///
/// Standard errors are batch means over [`DEFAULT_BATCHES`] contiguous batches,
/// so correlated samples (consecutive collisions of one trajectory) are fine.
pub fn minkowski_statistical_residual(events: &[CollisionEvent]) -> Result<MinkowskiReport> {
    if events.len() < 2 {
        return Err(invalid(format!(
            "statistical residual needs at least 2 events, got {}",
            events.len()
        )));
    }
    let gamma2 = events[0].masses.gamma2();
    if let Some(e) = events.iter().find(|e| e.masses.gamma2() != gamma2) {
        return Err(Error::InvalidArgument(format!(
            "events mix mass ratios {gamma2} and {}",
            e.masses.gamma2()
        )));
    }
    let k = -2.0 * (1.0 + gamma2);
    let n = events.len();
    let mut resid = Vec::with_capacity(n);
    let mut proj = Vec::with_capacity(n);
    let mut gap = Vec::with_capacity(n);
    let mut a2 = 0.0;
    let mut s2 = 0.0;
    let mut frame: f64 = 0.0;
    for e in events {
        let f = decompose(e);
        let s = f.g + f.g_perp;
        let q = f.a.dot(s);
        let r = e.w2.norm2() - e.v2.norm2() - (e.w1.norm2() - e.v1.norm2());
        resid.push(r);
        proj.push(q);
        gap.push(r - k * q);
        a2 += f.a.norm2();
        s2 += s.norm2();
        frame = frame.max(minkowski_frame_residual(e).relative());
    }
    let mean_a2 = a2 / n as f64;
    let mean_gsum2 = s2 / n as f64;
    let q = batch_estimate(&proj, DEFAULT_BATCHES);
    let denom = (mean_a2 * mean_gsum2).sqrt();
    let scaled = |factor: f64| Estimate { mean: factor * q.mean, se: factor.abs() * q.se };
    Ok(MinkowskiReport {
        n,
        gamma2,
        frame_residual: frame,
        statistical_residual: batch_estimate(&resid, DEFAULT_BATCHES),
        correlation_rho: if denom > 0.0 { q.mean / denom } else { 0.0 },
        delta_e: scaled(gamma2),
        correlation_term: scaled(k),
        identity_gap: batch_estimate(&gap, DEFAULT_BATCHES),
        mean_a2,
        mean_gsum2,
    })
}

fn check_speed_scale(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid(format!("speed scale c must be finite and positive, got {c}")));
    }
    Ok(())
}

fn lorentz_root(v: Vec3, c: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(invalid(format!("velocity {v} is not finite")));
    }
    let beta2 = v.norm2() / (c * c);
    if beta2 >= 1.0 {
        return Err(Error::Domain(format!("speed {} is not below c = {c}", v.norm())));
    }
    Ok((1.0 - beta2).sqrt())
}

/// `τ2/τ1 = sqrt(1 − |v1|²/c²) / sqrt(1 − |v2|²/c²)`.
pub fn time_dilation_ratio(v1: Vec3, v2: Vec3, c: f64) -> Result<f64> {
    check_speed_scale(c)?;
    Ok(lorentz_root(v1, c)? / lorentz_root(v2, c)?)
}

/// `M2/M1 = 1 / sqrt(1 − |v2|²/c²)`.
pub fn relativistic_mass_ratio(v2: Vec3, c: f64) -> Result<f64> {
    check_speed_scale(c)?;
    Ok(1.0 / lorentz_root(v2, c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{collide, Projector};

    fn head_on() -> CollisionEvent {
        let masses = MassPair::new(4.0, 1.0).unwrap();
        collide(Vec3::X, -Vec3::X, &Projector::new(Vec3::X).unwrap(), &masses).unwrap()
    }

    #[test]
    fn head_on_frame() {
        let f = decompose(&head_on());
        assert!((f.a - Vec3::new(0.6, 0.0, 0.0)).max_abs() < 1e-15);
        assert!((f.g - Vec3::new(-1.6, 0.0, 0.0)).max_abs() < 1e-15);
        assert!((f.g_perp - Vec3::new(-1.6, 0.0, 0.0)).max_abs() < 1e-15);
        let (v1, w1, v2, w2) = f.reconstruct();
        let e = head_on();
        for (x, y) in [(v1, e.v1), (w1, e.w1), (v2, e.v2), (w2, e.w2)] {
            assert!((x - y).max_abs() < 1e-15);
        }
    }

    #[test]
    fn head_on_frame_residual_sides() {
        let r = minkowski_frame_residual(&head_on());
        assert!((r.post - 2.4).abs() < 1e-14);
        assert!((r.pre - 2.4).abs() < 1e-14);
        assert!(r.relative() < 1e-15);
        assert!(r.analytic.abs() < 1e-14);
    }

    #[test]
    fn no_interaction_frame() {
        let m = MassPair::new(2.0, 0.5).unwrap();
        let c = Vec3::new(0.4, -1.0, 2.0);
        let e = collide(c, c, &Projector::new(Vec3::Y).unwrap(), &m).unwrap();
        let f = decompose(&e);
        assert_eq!(f.g, Vec3::ZERO);
        assert_eq!(f.g_perp, Vec3::ZERO);
        assert!((f.a - c).max_abs() < 1e-15);
        assert_eq!(minkowski_frame_residual(&e).residual, 0.0);
    }

    #[test]
    fn eigenvectors_of_collision_matrix() {
        let m = MassPair::new(1.0, 0.3).unwrap();
        let a = Vec3::new(0.1, 2.0, -1.0);
        let g = Vec3::new(-0.5, 0.3, 0.8);
        let (t, b) = apply_collision_matrix(&m, a, a);
        assert!((t - a).max_abs() < 1e-15 && (b - a).max_abs() < 1e-15);
        let (t, b) = apply_collision_matrix(&m, -m.gamma2() * g, g);
        assert!((t - m.gamma2() * g).max_abs() < 1e-15);
        assert!((b + g).max_abs() < 1e-15);
    }

    #[test]
    fn statistical_report_rejects_short_or_mixed_samples() {
        assert!(minkowski_statistical_residual(&[]).is_err());
        assert!(minkowski_statistical_residual(&[head_on()]).is_err());
        let other = collide(
            Vec3::X,
            Vec3::ZERO,
            &Projector::new(Vec3::X).unwrap(),
            &MassPair::new(1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(minkowski_statistical_residual(&[head_on(), other]).is_err());
    }

    #[test]
    fn identical_noop_sample_has_zero_residual() {
        let m = MassPair::from_ratio(1.0, 0.01).unwrap();
        let e = collide(Vec3::X, Vec3::Y, &Projector::new(Vec3::Z).unwrap(), &m).unwrap();
        let r = minkowski_statistical_residual(&vec![e; 64]).unwrap();
        assert_eq!(r.statistical_residual.mean, 0.0);
        assert_eq!(r.statistical_residual.se, 0.0);
        assert_eq!(r.frame_residual, 0.0);
    }

    #[test]
    fn relativity_examples() {
        let c = 3.0;
        let v06 = Vec3::new(0.6 * c, 0.0, 0.0);
        assert!((time_dilation_ratio(Vec3::ZERO, v06, c).unwrap() - 1.25).abs() < 1e-15);
        assert!((relativistic_mass_ratio(v06, c).unwrap() - 1.25).abs() < 1e-15);
        let v08 = Vec3::new(0.0, 0.8 * c, 0.0);
        assert!((time_dilation_ratio(Vec3::ZERO, v08, c).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        let v = Vec3::new(0.3, 0.2, -0.1);
        assert_eq!(time_dilation_ratio(v, v, 1.0).unwrap(), 1.0);
        assert_eq!(relativistic_mass_ratio(Vec3::ZERO, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn relativity_domain_errors() {
        assert!(matches!(
            relativistic_mass_ratio(Vec3::new(1.0, 0.0, 0.0), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            time_dilation_ratio(Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(relativistic_mass_ratio(Vec3::ZERO, 0.0).is_err());
        assert!(relativistic_mass_ratio(Vec3::ZERO, f64::NAN).is_err());
    }

    #[test]
    fn mass_ratio_increases_towards_c() {
        let mut last = 1.0;
        for k in 1..1000 {
            let s = 1.0 - 1.0 / (k as f64 + 1.0).powi(2);
            let r = relativistic_mass_ratio(Vec3::new(s, 0.0, 0.0), 1.0).unwrap();
            assert!(r > last);
            last = r;
        }
        assert!(last > 500.0);
    }
}

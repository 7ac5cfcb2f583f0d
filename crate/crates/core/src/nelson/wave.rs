//! Closed-form wave densities `ψ = exp[(R + iS)/σ²]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A position; only the first `dim` components are used.
pub type Point = [f64; 3];

/// Number of standard deviations covered by default quadrature grids.
pub const QUADRATURE_EXTENT: f64 = 8.0;
/// Number of standard deviations covered by histogram grids.
pub const HISTOGRAM_EXTENT: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaveKind {
    /// Stationary ground state of `V = ½ M ω² |x|²`.
    HarmonicGround { omega: f64 },
    /// Free Gaussian packet of initial width `width`, centre `center`, velocity `velocity` (1D).
    FreePacket { width: f64, center: f64, velocity: f64 },
    /// Uniform density on the periodic box `[0, box_length)^d` with `∇S = velocity`.
    PlaneWave { velocity: Point, box_length: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    Zero,
    /// `½ M ω² |x|²`.
    Harmonic { omega: f64 },
    Constant { value: f64 },
}

impl Potential {
    pub fn value(&self, x: &Point, dim: usize, mass: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Harmonic { omega } => 0.5 * mass * omega * omega * norm2(x, dim),
            Potential::Constant { value } => value,
        }
    }
}

/// Analytic wave model. `σ² = η/M` is derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveModel {
    dim: usize,
    mass: f64,
    eta: f64,
    kind: WaveKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn norm2(x: &Point, dim: usize) -> f64 {
    x[..dim].iter().map(|c| c * c).sum()
}

impl WaveModel {
    pub fn harmonic(dim: usize, mass: f64, eta: f64, omega: f64) -> Result<Self> {
        positive("omega", omega)?;
        Self::build(dim, mass, eta, WaveKind::HarmonicGround { omega })
    }

    pub fn free_packet(mass: f64, eta: f64, width: f64, center: f64, velocity: f64) -> Result<Self> {
        positive("width", width)?;
        if !(center.is_finite() && velocity.is_finite()) {
            return Err(invalid("packet centre and velocity must be finite"));
        }
        Self::build(1, mass, eta, WaveKind::FreePacket { width, center, velocity })
    }

    pub fn plane_wave(dim: usize, mass: f64, eta: f64, velocity: Point, box_length: f64) -> Result<Self> {
        positive("box_length", box_length)?;
        if velocity.iter().any(|v| !v.is_finite()) {
            return Err(invalid("plane wave velocity must be finite"));
        }
        let mut u = [0.0; 3];
        u[..dim.min(3)].copy_from_slice(&velocity[..dim.min(3)]);
        Self::build(dim, mass, eta, WaveKind::PlaneWave { velocity: u, box_length })
    }

    fn build(dim: usize, mass: f64, eta: f64, kind: WaveKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        positive("mass", mass)?;
        positive("eta", eta)?;
        Ok(WaveModel { dim, mass, eta, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn kind(&self) -> &WaveKind {
        &self.kind
    }
    pub fn sigma2(&self) -> f64 {
        self.eta / self.mass
    }
    pub fn sigma(&self) -> f64 {
        self.sigma2().sqrt()
    }

    /// The potential this wave solves the Madelung equations for.
    pub fn natural_potential(&self) -> Potential {
        match self.kind {
            WaveKind::HarmonicGround { omega } => Potential::Harmonic { omega },
            _ => Potential::Zero,
        }
    }

    /// Periodic box length, if any.
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            WaveKind::PlaneWave { box_length, .. } => Some(box_length),
            _ => None,
        }
    }

    pub fn check_domain(&self, x: &Point) -> Result<()> {
        let xs = &x[..self.dim];
        if xs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite position {xs:?}")));
        }
        if let Some(l) = self.period() {
            if xs.iter().any(|&c| !(0.0..l).contains(&c)) {
                return Err(Error::Domain(format!("position {xs:?} outside [0, {l})")));
            }
        }
        Ok(())
    }

    /// Map a position back into the periodic box (identity for non-periodic models).
    pub fn wrap(&self, x: &mut Point) {
        if let Some(l) = self.period() {
            for c in &mut x[..self.dim] {
                *c = c.rem_euclid(l);
                if *c >= l {
                    *c = 0.0;
                }
            }
        }
    }

    fn packet(&self, t: f64) -> Packet {
        match self.kind {
            WaveKind::FreePacket { width, center, velocity } => {
                Packet::new(self.sigma2(), width, center, velocity, t)
            }
            _ => unreachable!("packet helper on a non-packet model"),
        }
    }

    pub fn r(&self, x: &Point, t: f64) -> f64 {
        let s2 = self.sigma2();
        let d = self.dim as f64;
        match self.kind {
            WaveKind::HarmonicGround { omega } => {
                s2 * 0.25 * d * (omega / (std::f64::consts::PI * s2)).ln()
                    - 0.5 * omega * norm2(x, self.dim)
            }
            WaveKind::FreePacket { width, .. } => {
                let p = self.packet(t);
                s2 * (-0.25 * (2.0 * std::f64::consts::PI * width * width).ln()
                    - 0.25 * p.k.ln()
                    - p.xi(x[0]).powi(2) / (4.0 * p.st2))
            }
            WaveKind::PlaneWave { box_length, .. } => -0.5 * d * s2 * box_length.ln(),
        }
    }

    pub fn s(&self, x: &Point, t: f64) -> f64 {
        let s2 = self.sigma2();
        match self.kind {
            WaveKind::HarmonicGround { omega } => -0.5 * self.dim as f64 * s2 * omega * t,
            WaveKind::FreePacket { velocity: u, .. } => {
                let p = self.packet(t);
                s2 * (-0.5 * (p.beta * t).atan() + p.xi(x[0]).powi(2) * p.beta * t / (4.0 * p.st2))
                    + u * x[0]
                    - 0.5 * u * u * t
            }
            WaveKind::PlaneWave { velocity, .. } => {
                let u2 = norm2(&velocity, self.dim);
                (0..self.dim).map(|i| velocity[i] * x[i]).sum::<f64>() - 0.5 * u2 * t
            }
        }
    }

    pub fn grad_r(&self, x: &Point, t: f64) -> Point {
        let mut g = [0.0; 3];
        match self.kind {
            WaveKind::HarmonicGround { omega } => {
                for i in 0..self.dim {
                    g[i] = -omega * x[i];
                }
            }
            WaveKind::FreePacket { .. } => {
                let p = self.packet(t);
                g[0] = -self.sigma2() * p.xi(x[0]) / (2.0 * p.st2);
            }
            WaveKind::PlaneWave { .. } => {}
        }
        g
    }

    pub fn grad_s(&self, x: &Point, t: f64) -> Point {
        let mut g = [0.0; 3];
        match self.kind {
            WaveKind::HarmonicGround { .. } => {}
            WaveKind::FreePacket { velocity: u, .. } => {
                let p = self.packet(t);
                g[0] = self.sigma2() * p.xi(x[0]) * p.beta * t / (2.0 * p.st2) + u;
            }
            WaveKind::PlaneWave { velocity, .. } => {
                g[..self.dim].copy_from_slice(&velocity[..self.dim]);
            }
        }
        g
    }

    pub fn lap_r(&self, _x: &Point, t: f64) -> f64 {
        match self.kind {
            WaveKind::HarmonicGround { omega } => -(self.dim as f64) * omega,
            WaveKind::FreePacket { .. } => -self.sigma2() / (2.0 * self.packet(t).st2),
            WaveKind::PlaneWave { .. } => 0.0,
        }
    }

    pub fn lap_s(&self, _x: &Point, t: f64) -> f64 {
        match self.kind {
            WaveKind::FreePacket { .. } => {
                let p = self.packet(t);
                self.sigma2() * p.beta * t / (2.0 * p.st2)
            }
            _ => 0.0,
        }
    }

    pub fn s_t(&self, x: &Point, t: f64) -> f64 {
        let s2 = self.sigma2();
        match self.kind {
            WaveKind::HarmonicGround { omega } => -0.5 * self.dim as f64 * s2 * omega,
            WaveKind::FreePacket { width, velocity: u, .. } => {
                let p = self.packet(t);
                let xi = p.xi(x[0]);
                let w2 = width * width;
                let f = p.beta * t / (4.0 * w2 * p.k);
                let df = p.beta * (1.0 - (p.beta * t).powi(2)) / (4.0 * w2 * p.k * p.k);
                s2 * (-p.beta / (2.0 * p.k) - 2.0 * u * xi * f + xi * xi * df) - 0.5 * u * u
            }
            WaveKind::PlaneWave { velocity, .. } => -0.5 * norm2(&velocity, self.dim),
        }
    }

    pub fn r_t(&self, x: &Point, t: f64) -> f64 {
        match self.kind {
            WaveKind::FreePacket { width, velocity: u, .. } => {
                let p = self.packet(t);
                let xi = p.xi(x[0]);
                let b2 = p.beta * p.beta;
                self.sigma2()
                    * (-b2 * t / (2.0 * p.k) + u * xi / (2.0 * p.st2)
                        + xi * xi * b2 * t / (2.0 * width * width * p.k * p.k))
            }
            _ => 0.0,
        }
    }

    pub fn rho(&self, x: &Point, t: f64) -> f64 {
        (2.0 * self.r(x, t) / self.sigma2()).exp()
    }

    /// `ψ` in its standard complex form, computed independently of `R` and `S`.
    pub fn psi(&self, x: &Point, t: f64) -> Complex64 {
        let s2 = self.sigma2();
        let i = Complex64::i();
        match self.kind {
            WaveKind::HarmonicGround { omega } => {
                let d = self.dim as f64;
                let amp = (omega / (std::f64::consts::PI * s2)).powf(0.25 * d)
                    * (-omega * norm2(x, self.dim) / (2.0 * s2)).exp();
                amp * (-i * (0.5 * d * omega * t)).exp()
            }
            WaveKind::FreePacket { width, center, velocity: u } => {
                let beta = s2 / (2.0 * width * width);
                let z = Complex64::new(1.0, beta * t);
                let xi = x[0] - center - u * t;
                let norm = (2.0 * std::f64::consts::PI * width * width).powf(-0.25);
                let arg = -xi * xi / (4.0 * width * width * z) + i * ((u * x[0] - 0.5 * u * u * t) / s2);
                norm / z.sqrt() * arg.exp()
            }
            WaveKind::PlaneWave { velocity, box_length } => {
                let phase = ((0..self.dim).map(|k| velocity[k] * x[k]).sum::<f64>()
                    - 0.5 * norm2(&velocity, self.dim) * t)
                    / s2;
                box_length.powf(-0.5 * self.dim as f64) * (i * phase).exp()
            }
        }
    }

    /// `∇ψ` from the complex form.
    pub fn grad_psi(&self, x: &Point, t: f64) -> [Complex64; 3] {
        let s2 = self.sigma2();
        let psi = self.psi(x, t);
        let i = Complex64::i();
        let mut g = [Complex64::new(0.0, 0.0); 3];
        match self.kind {
            WaveKind::HarmonicGround { omega } => {
                for k in 0..self.dim {
                    g[k] = psi * (-omega * x[k] / s2);
                }
            }
            WaveKind::FreePacket { width, center, velocity: u } => {
                let beta = s2 / (2.0 * width * width);
                let z = Complex64::new(1.0, beta * t);
                let xi = x[0] - center - u * t;
                g[0] = psi * (-xi / (2.0 * width * width * z) + i * (u / s2));
            }
            WaveKind::PlaneWave { velocity, .. } => {
                for k in 0..self.dim {
                    g[k] = psi * i * (velocity[k] / s2);
                }
            }
        }
        g
    }

    /// Per-axis (centre, standard deviation) of `ρ(·, t)`; for the box, its midpoint and half-length.
    pub fn spread(&self, t: f64) -> (Point, Point) {
        let mut c = [0.0; 3];
        let mut s = [0.0; 3];
        match self.kind {
            WaveKind::HarmonicGround { omega } => {
                let sd = (self.sigma2() / (2.0 * omega)).sqrt();
                s[..self.dim].fill(sd);
            }
            WaveKind::FreePacket { center, velocity, .. } => {
                let p = self.packet(t);
                c[0] = center + velocity * t;
                s[0] = p.st2.sqrt();
            }
            WaveKind::PlaneWave { box_length, .. } => {
                c[..self.dim].fill(0.5 * box_length);
                s[..self.dim].fill(0.5 * box_length);
            }
        }
        (c, s)
    }

    /// Per-axis interval covering `extent` standard deviations (the whole box when periodic).
    pub fn extent(&self, t: f64, extent: f64) -> Vec<(f64, f64)> {
        if let Some(l) = self.period() {
            return vec![(0.0, l); self.dim];
        }
        let (c, s) = self.spread(t);
        (0..self.dim).map(|i| (c[i] - extent * s[i], c[i] + extent * s[i])).collect()
    }

    /// Exact expectation of the position at time `t`.
    pub fn mean_position(&self, t: f64) -> Point {
        self.spread(t).0
    }

    /// `E = (M/2) ∫ ρ (|∇S|² + |∇R|²) + ∫ ρ V` for the natural potential, in closed form.
    pub fn exact_energy(&self) -> f64 {
        let m = self.mass;
        match self.kind {
            WaveKind::HarmonicGround { omega } => 0.5 * self.dim as f64 * self.eta * omega,
            WaveKind::FreePacket { width, velocity, .. } => {
                0.5 * m * (velocity * velocity + self.sigma2().powi(2) / (4.0 * width * width))
            }
            WaveKind::PlaneWave { velocity, .. } => 0.5 * m * norm2(&velocity, self.dim),
        }
    }
}

/// Time-dependent packet quantities.
struct Packet {
    beta: f64,
    /// `1 + β²t²`.
    k: f64,
    /// `s_t²`.
    st2: f64,
    center_t: f64,
}

impl Packet {
    fn new(s2: f64, width: f64, center: f64, u: f64, t: f64) -> Self {
        let beta = s2 / (2.0 * width * width);
        let k = 1.0 + beta * beta * t * t;
        Packet { beta, k, st2: width * width * k, center_t: center + u * t }
    }

    fn xi(&self, x: f64) -> f64 {
        x - self.center_t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<WaveModel> {
        vec![
            WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap(),
            WaveModel::harmonic(3, 2.0, 0.5, 1.5).unwrap(),
            WaveModel::free_packet(1.0, 1.0, 0.8, 0.3, 0.7).unwrap(),
            WaveModel::free_packet(2.0, 1.3, 1.2, -1.0, -0.4).unwrap(),
            WaveModel::plane_wave(2, 1.0, 1.0, [0.5, -0.25, 0.0], 4.0).unwrap(),
        ]
    }

    fn probe(m: &WaveModel) -> Vec<Point> {
        let (c, s) = m.spread(0.7);
        let mut pts = Vec::new();
        for a in [-1.7, -0.4, 0.3, 1.1] {
            let mut x = [0.0; 3];
            for i in 0..m.dim() {
                x[i] = c[i] + a * s[i] * (1.0 + 0.1 * i as f64);
            }
            pts.push(x);
        }
        pts
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for m in models() {
            for x in probe(&m) {
                let t = 0.7;
                let gr = m.grad_r(&x, t);
                let gs = m.grad_s(&x, t);
                let mut lap_r = 0.0;
                let mut lap_s = 0.0;
                for i in 0..m.dim() {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    let fd_r = (m.r(&xp, t) - m.r(&xm, t)) / (2.0 * h);
                    let fd_s = (m.s(&xp, t) - m.s(&xm, t)) / (2.0 * h);
                    assert!(close(gr[i], fd_r, 1e-6), "{m:?} {i} {} {}", gr[i], fd_r);
                    assert!(close(gs[i], fd_s, 1e-6), "{m:?} {i} {} {}", gs[i], fd_s);
                    let hh = 1e-4;
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += hh;
                    xm[i] -= hh;
                    lap_r += (m.r(&xp, t) - 2.0 * m.r(&x, t) + m.r(&xm, t)) / (hh * hh);
                    lap_s += (m.s(&xp, t) - 2.0 * m.s(&x, t) + m.s(&xm, t)) / (hh * hh);
                }
                assert!(close(m.lap_r(&x, t), lap_r, 1e-5));
                assert!(close(m.lap_s(&x, t), lap_s, 1e-5));
                let dt = 1e-5;
                let fd_st = (m.s(&x, t + dt) - m.s(&x, t - dt)) / (2.0 * dt);
                let fd_rt = (m.r(&x, t + dt) - m.r(&x, t - dt)) / (2.0 * dt);
                assert!(close(m.s_t(&x, t), fd_st, 1e-6), "{m:?} {} {}", m.s_t(&x, t), fd_st);
                assert!(close(m.r_t(&x, t), fd_rt, 1e-6), "{m:?} {} {}", m.r_t(&x, t), fd_rt);
            }
        }
    }

    #[test]
    fn complex_form_matches_r_and_s() {
        for m in models() {
            for x in probe(&m) {
                let t = 0.7;
                let s2 = m.sigma2();
                let psi = m.psi(&x, t);
                let expected = Complex64::new(m.r(&x, t) / s2, m.s(&x, t) / s2).exp();
                assert!((psi - expected).norm() < 1e-12 * (1.0 + psi.norm()), "{m:?}");
                assert!(close(psi.norm_sqr(), m.rho(&x, t), 1e-12));
                let gp = m.grad_psi(&x, t);
                let (gr, gs) = (m.grad_r(&x, t), m.grad_s(&x, t));
                for i in 0..m.dim() {
                    let via_rs = psi * Complex64::new(gr[i], gs[i]) / s2;
                    assert!((gp[i] - via_rs).norm() < 1e-12 * (1.0 + gp[i].norm()));
                }
            }
        }
    }

    #[test]
    fn harmonic_drifts_and_density() {
        let m = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        let x = [0.8, 0.0, 0.0];
        assert!((m.grad_r(&x, 0.0)[0] + 0.8).abs() < 1e-15);
        assert_eq!(m.grad_s(&x, 3.0)[0], 0.0);
        let expected = (-0.64f64).exp() / std::f64::consts::PI.sqrt();
        assert!(close(m.rho(&x, 0.0), expected, 1e-14));
        assert_eq!(m.exact_energy(), 0.5);
    }

    #[test]
    fn plane_wave_domain() {
        let m = WaveModel::plane_wave(1, 1.0, 1.0, [1.0, 0.0, 0.0], 2.0).unwrap();
        assert!(m.check_domain(&[1.0, 0.0, 0.0]).is_ok());
        assert!(matches!(m.check_domain(&[2.5, 0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(m.check_domain(&[-0.1, 0.0, 0.0]), Err(Error::Domain(_))));
        let mut x = [-0.5, 0.0, 0.0];
        m.wrap(&mut x);
        assert!((x[0] - 1.5).abs() < 1e-15);
        assert!(close(m.rho(&x, 0.0), 0.5, 1e-15));
    }

    #[test]
    fn constructor_validation() {
        assert!(WaveModel::harmonic(0, 1.0, 1.0, 1.0).is_err());
        assert!(WaveModel::harmonic(4, 1.0, 1.0, 1.0).is_err());
        assert!(WaveModel::harmonic(1, -1.0, 1.0, 1.0).is_err());
        assert!(WaveModel::harmonic(1, 1.0, 0.0, 1.0).is_err());
        assert!(WaveModel::free_packet(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(WaveModel::plane_wave(1, 1.0, 1.0, [0.0; 3], -1.0).is_err());
        let m = WaveModel::harmonic(2, 4.0, 2.0, 1.0).unwrap();
        assert_eq!(m.sigma2(), 0.5);
    }
}

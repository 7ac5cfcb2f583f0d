//! Initial sampling, ensemble evolution and snapshot bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wave::{Point, WaveModel, HISTOGRAM_EXTENT, QUADRATURE_EXTENT};
use super::{raw_step, DiffusionConfig, Direction};
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, stream, StreamRng};

/// Rejection-sampling attempts allowed per particle.
pub const SAMPLE_RETRY_CAP: usize = 100;

/// Particles per work unit. Fixed so that reductions do not depend on the thread count.
const CHUNK: usize = 1024;

/// Knots of the tabulated 1D inverse CDF.
const CDF_KNOTS: usize = 1 << 15;

/// Lattice points per axis used to bound the rejection ratio.
const BOUND_LATTICE: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    /// Per-axis normal with 1.25 times the model's spread.
    Gaussian,
    /// Uniform on the model's quadrature box; efficient only for compact densities.
    UniformBox,
}

/// Per-axis marginal histograms on a fixed grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: usize,
    /// `counts[axis][bin]`.
    pub counts: Vec<Vec<u64>>,
    /// Samples per axis that fell outside the grid.
    pub outside: Vec<u64>,
}

impl Histogram {
    pub fn new(extent: &[(f64, f64)], bins: usize) -> Self {
        let d = extent.len();
        Histogram {
            lo: extent.iter().map(|e| e.0).collect(),
            hi: extent.iter().map(|e| e.1).collect(),
            bins,
            counts: vec![vec![0; bins]; d],
            outside: vec![0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.bins as f64
    }

    pub fn bin(&self, axis: usize, x: f64) -> Option<usize> {
        let k = ((x - self.lo[axis]) / self.width(axis)).floor();
        (k >= 0.0 && k < self.bins as f64).then_some(k as usize)
    }

    pub fn centers(&self, axis: usize) -> Vec<f64> {
        let h = self.width(axis);
        (0..self.bins).map(|k| self.lo[axis] + (k as f64 + 0.5) * h).collect()
    }

    pub fn add(&mut self, x: &Point) {
        for axis in 0..self.dim() {
            match self.bin(axis, x[axis]) {
                Some(k) => self.counts[axis][k] += 1,
                None => self.outside[axis] += 1,
            }
        }
    }

    pub fn in_range(&self, axis: usize) -> u64 {
        self.counts[axis].iter().sum()
    }

    /// Density normalized over the in-range samples.
    pub fn density(&self, axis: usize) -> Vec<f64> {
        let n = self.in_range(axis) as f64;
        let h = self.width(axis);
        self.counts[axis].iter().map(|&c| if n > 0.0 { c as f64 / (n * h) } else { 0.0 }).collect()
    }

    /// `Σ ρ̂ h`, equal to one whenever any sample landed on the grid.
    pub fn mass(&self, axis: usize) -> f64 {
        self.density(axis).iter().sum::<f64>() * self.width(axis)
    }

    /// Merge groups of `factor` adjacent bins.
    pub fn coarsen(&self, factor: usize) -> Result<Histogram> {
        if factor == 0 || !self.bins.is_multiple_of(factor) {
            return Err(invalid(format!("cannot coarsen {} bins by {factor}", self.bins)));
        }
        let mut out = self.clone();
        out.bins = self.bins / factor;
        out.counts = self
            .counts
            .iter()
            .map(|c| c.chunks(factor).map(|g| g.iter().sum()).collect())
            .collect();
        Ok(out)
    }
}

/// Increments pooled over the steps leading up to a snapshot, binned per axis.
///
/// For each step between `t` and `t + dt` (in physical time) the increment
/// `x(t+dt) − x(t)` is added to the forward sums in the bin of `x(t)` and to the
/// backward sums in the bin of `x(t+dt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftAccumulator {
    pub grid: Histogram,
    pub fwd_sum: Vec<Vec<f64>>,
    pub fwd_count: Vec<Vec<u64>>,
    pub bwd_sum: Vec<Vec<f64>>,
    pub bwd_count: Vec<Vec<u64>>,
    /// `Σ dt` over the pooled steps, counted once per particle-step.
    pub dt_sum_fwd: Vec<Vec<f64>>,
    pub dt_sum_bwd: Vec<Vec<f64>>,
    pub steps: u64,
}

impl DriftAccumulator {
    pub fn new(extent: &[(f64, f64)], bins: usize) -> Self {
        let d = extent.len();
        let zf = vec![vec![0.0; bins]; d];
        let zc = vec![vec![0; bins]; d];
        DriftAccumulator {
            grid: Histogram::new(extent, bins),
            fwd_sum: zf.clone(),
            fwd_count: zc.clone(),
            bwd_sum: zf.clone(),
            bwd_count: zc,
            dt_sum_fwd: zf.clone(),
            dt_sum_bwd: zf,
            steps: 0,
        }
    }

    fn record(&mut self, early: &Point, late: &Point, delta: &Point, dt: f64) {
        for axis in 0..self.grid.dim() {
            if let Some(k) = self.grid.bin(axis, early[axis]) {
                self.fwd_sum[axis][k] += delta[axis];
                self.fwd_count[axis][k] += 1;
                self.dt_sum_fwd[axis][k] += dt;
            }
            if let Some(k) = self.grid.bin(axis, late[axis]) {
                self.bwd_sum[axis][k] += delta[axis];
                self.bwd_count[axis][k] += 1;
                self.dt_sum_bwd[axis][k] += dt;
            }
        }
    }

    pub fn merge(&mut self, other: &DriftAccumulator) {
        for axis in 0..self.grid.dim() {
            for k in 0..self.grid.bins {
                self.fwd_sum[axis][k] += other.fwd_sum[axis][k];
                self.fwd_count[axis][k] += other.fwd_count[axis][k];
                self.bwd_sum[axis][k] += other.bwd_sum[axis][k];
                self.bwd_count[axis][k] += other.bwd_count[axis][k];
                self.dt_sum_fwd[axis][k] += other.dt_sum_fwd[axis][k];
                self.dt_sum_bwd[axis][k] += other.dt_sum_bwd[axis][k];
            }
        }
        self.steps = self.steps.max(other.steps);
    }

    /// Empirical `b⁺` per bin (`NaN` where empty).
    pub fn forward_drift(&self, axis: usize) -> Vec<f64> {
        ratio(&self.fwd_sum[axis], &self.dt_sum_fwd[axis])
    }

    /// Empirical `b⁻` per bin (`NaN` where empty).
    pub fn backward_drift(&self, axis: usize) -> Vec<f64> {
        ratio(&self.bwd_sum[axis], &self.dt_sum_bwd[axis])
    }
}

fn ratio(num: &[f64], den: &[f64]) -> Vec<f64> {
    num.iter().zip(den).map(|(n, d)| if *d > 0.0 { n / d } else { f64::NAN }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub t: f64,
    pub positions: Vec<Point>,
    pub histogram: Histogram,
    /// Increments since the previous snapshot (empty for the first one).
    pub drift: DriftAccumulator,
}

/// Tabulated inverse CDF of a 1D density.
struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(wave: &WaveModel, t: f64) -> Result<Self> {
        let (lo, hi) = wave.extent(t, QUADRATURE_EXTENT + 2.0)[0];
        let h = (hi - lo) / (CDF_KNOTS - 1) as f64;
        let xs: Vec<f64> = (0..CDF_KNOTS).map(|k| lo + k as f64 * h).collect();
        let mut cdf = Vec::with_capacity(CDF_KNOTS);
        let mut acc = 0.0;
        let mut prev = wave.rho(&[lo, 0.0, 0.0], t);
        cdf.push(0.0);
        for &x in &xs[1..] {
            let cur = wave.rho(&[x, 0.0, 0.0], t);
            acc += 0.5 * h * (prev + cur);
            cdf.push(acc);
            prev = cur;
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::Sampling(format!("density integrates to {acc} on the sampling grid")));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(InverseCdf { xs, cdf })
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[k - 1] + frac * (self.xs[k] - self.xs[k - 1])
    }
}

/// Rejection sampler for `d ≥ 2`.
struct Rejection {
    dim: usize,
    kind: Envelope,
    center: Point,
    scale: Point,
    box_lo: Point,
    box_hi: Point,
    bound: f64,
}

impl Rejection {
    fn new(wave: &WaveModel, t: f64, kind: Envelope) -> Result<Self> {
        let dim = wave.dim();
        let (c, s) = wave.spread(t);
        let ext = wave.extent(t, QUADRATURE_EXTENT);
        let mut r = Rejection {
            dim,
            kind,
            center: c,
            scale: s.map(|v| 1.25 * v),
            box_lo: [0.0; 3],
            box_hi: [0.0; 3],
            bound: 1.0,
        };
        for i in 0..dim {
            r.box_lo[i] = ext[i].0;
            r.box_hi[i] = ext[i].1;
        }
        // Bound the ratio on a lattice that contains the centre and the box corners.
        let mut max_ratio: f64 = 0.0;
        let n = BOUND_LATTICE;
        let total = n.pow(dim as u32);
        for idx in 0..total {
            let mut x = [0.0; 3];
            let mut rem = idx;
            for i in 0..dim {
                let k = rem % n;
                rem /= n;
                let f = k as f64 / (n - 1) as f64;
                x[i] = r.box_lo[i] + f * (r.box_hi[i] - r.box_lo[i]);
            }
            let g = r.envelope_density(&x);
            if g > 0.0 {
                max_ratio = max_ratio.max(target(wave, &x, t) / g);
            }
        }
        if !(max_ratio.is_finite() && max_ratio > 0.0) {
            return Err(Error::Sampling("could not bound the rejection ratio".to_string()));
        }
        r.bound = 1.05 * max_ratio;
        Ok(r)
    }

    fn envelope_density(&self, x: &Point) -> f64 {
        match self.kind {
            Envelope::Gaussian => (0..self.dim)
                .map(|i| {
                    let z = (x[i] - self.center[i]) / self.scale[i];
                    (-0.5 * z * z).exp() / (self.scale[i] * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product(),
            Envelope::UniformBox => {
                let inside = (0..self.dim).all(|i| (self.box_lo[i]..self.box_hi[i]).contains(&x[i]));
                if inside {
                    1.0 / (0..self.dim).map(|i| self.box_hi[i] - self.box_lo[i]).product::<f64>()
                } else {
                    0.0
                }
            }
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> Point {
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = match self.kind {
                Envelope::Gaussian => Normal::new(self.center[i], self.scale[i])
                    .expect("positive spread")
                    .sample(rng),
                Envelope::UniformBox => rng.gen_range(self.box_lo[i]..self.box_hi[i]),
            };
        }
        x
    }

    fn sample(&self, wave: &WaveModel, t: f64, rng: &mut impl Rng) -> Result<Point> {
        for _ in 0..SAMPLE_RETRY_CAP {
            let x = self.draw(rng);
            let g = self.envelope_density(&x);
            let u: f64 = rng.gen();
            if g > 0.0 && u * self.bound * g < target(wave, &x, t) {
                return Ok(x);
            }
        }
        Err(Error::Sampling(format!(
            "rejection sampler failed {SAMPLE_RETRY_CAP} times in a row"
        )))
    }
}

fn target(wave: &WaveModel, x: &Point, t: f64) -> f64 {
    if wave.check_domain(x).is_ok() {
        wave.rho(x, t)
    } else {
        0.0
    }
}

enum Sampler {
    Cdf(InverseCdf),
    Reject(Rejection),
}

impl Sampler {
    fn new(wave: &WaveModel, t: f64, envelope: Envelope) -> Result<Self> {
        if wave.dim() == 1 {
            Ok(Sampler::Cdf(InverseCdf::new(wave, t)?))
        } else {
            Ok(Sampler::Reject(Rejection::new(wave, t, envelope)?))
        }
    }

    fn sample(&self, wave: &WaveModel, t: f64, rng: &mut impl Rng) -> Result<Point> {
        match self {
            Sampler::Cdf(c) => {
                let mut x = [c.sample(rng.gen()), 0.0, 0.0];
                wave.wrap(&mut x);
                Ok(x)
            }
            Sampler::Reject(r) => r.sample(wave, t, rng),
        }
    }
}

/// `n` independent draws from `ρ(·, t)`; draw `i` uses its own stream.
pub fn sample_initial(
    wave: &WaveModel,
    t: f64,
    n: usize,
    seed: u64,
    envelope: Envelope,
) -> Result<Vec<Point>> {
    let sampler = Sampler::new(wave, t, envelope)?;
    (0..n)
        .into_par_iter()
        .map(|i| sampler.sample(wave, t, &mut stream(seed, domain::NELSON_INITIAL, i as u64)))
        .collect()
}

/// Evolve an ensemble and return its snapshots in time order of the run.
pub fn evolve_ensemble(config: &DiffusionConfig) -> Result<Vec<EnsembleSnapshot>> {
    evolve_ensemble_in(config, 0)
}

/// As [`evolve_ensemble`], drawing from streams shifted by `domain_offset` so that
/// two ensembles with the same seed stay independent.
pub fn evolve_ensemble_in(config: &DiffusionConfig, domain_offset: u64) -> Result<Vec<EnsembleSnapshot>> {
    config.validate()?;
    let wave = config.wave;
    let n_steps = config.n_steps();
    let forward = config.direction == Direction::Forward;
    let time_at = |j: usize| {
        let offset = (j as f64 * config.dt).min(config.t1 - config.t0);
        if forward {
            config.t0 + offset
        } else {
            config.t1 - offset
        }
    };
    let k = config.n_snapshots;
    let snap_steps: Vec<usize> = if k == 1 {
        vec![n_steps]
    } else {
        (0..k).map(|i| (i * n_steps + (k - 1) / 2) / (k - 1)).collect()
    };
    let mut extent = wave.extent(time_at(0), HISTOGRAM_EXTENT);
    for &s in &snap_steps {
        for (e, n) in extent.iter_mut().zip(wave.extent(time_at(s), HISTOGRAM_EXTENT)) {
            e.0 = e.0.min(n.0);
            e.1 = e.1.max(n.1);
        }
    }
    let start = time_at(0);
    let sampler = Sampler::new(&wave, start, config.envelope)?;
    let n = config.n_particles;
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|a| (a, (a + CHUNK).min(n))).collect();

    let results: Vec<Result<ChunkResult>> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut out = ChunkResult {
                positions: vec![Vec::with_capacity(b - a); k],
                drift: vec![DriftAccumulator::new(&extent, config.drift_bins); k],
            };
            for i in a..b {
                let mut init_rng = stream(config.seed, domain::NELSON_INITIAL + domain_offset, i as u64);
                let mut path_rng: StreamRng = stream(config.seed, domain::NELSON_PATH + domain_offset, i as u64);
                let mut x = sampler.sample(&wave, start, &mut init_rng)?;
                let mut next_snap = 0;
                while next_snap < k && snap_steps[next_snap] == 0 {
                    out.positions[next_snap].push(x);
                    next_snap += 1;
                }
                for j in 0..n_steps {
                    let (t, t_next) = (time_at(j), time_at(j + 1));
                    let h = (t_next - t).abs();
                    let dir = config.direction;
                    let raw = raw_step(&x, t, h, &wave, dir, &mut path_rng)?;
                    let mut y = raw;
                    wave.wrap(&mut y);
                    let mut delta = [0.0; 3];
                    for c in 0..wave.dim() {
                        delta[c] = if forward { raw[c] - x[c] } else { x[c] - raw[c] };
                    }
                    let acc = &mut out.drift[next_snap.min(k - 1)];
                    if forward {
                        acc.record(&x, &y, &delta, h);
                    } else {
                        acc.record(&y, &x, &delta, h);
                    }
                    x = y;
                    while next_snap < k && snap_steps[next_snap] == j + 1 {
                        out.positions[next_snap].push(x);
                        next_snap += 1;
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut positions: Vec<Vec<Point>> = vec![Vec::with_capacity(n); k];
    let mut drift = vec![DriftAccumulator::new(&extent, config.drift_bins); k];
    for r in results {
        let r = r?;
        for s in 0..k {
            positions[s].extend_from_slice(&r.positions[s]);
            drift[s].merge(&r.drift[s]);
        }
    }
    Ok(positions
        .into_iter()
        .zip(drift)
        .enumerate()
        .map(|(s, (pos, mut acc))| {
            let prev = if s == 0 { 0 } else { snap_steps[s - 1] };
            acc.steps = (snap_steps[s] - prev.min(snap_steps[s])) as u64;
            let mut hist = Histogram::new(&extent, config.histogram_bins);
            for x in &pos {
                hist.add(x);
            }
            EnsembleSnapshot { t: time_at(snap_steps[s]), positions: pos, histogram: hist, drift: acc }
        })
        .collect())
}

struct ChunkResult {
    positions: Vec<Vec<Point>>,
    drift: Vec<DriftAccumulator>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical_1pct, ks_statistic, normal_cdf};

    #[test]
    fn inverse_cdf_sampling_matches_gaussian() {
        let w = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        let xs = sample_initial(&w, 0.0, 20_000, 3, Envelope::Gaussian).unwrap();
        let sd = 0.5f64.sqrt();
        let v: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let d = ks_statistic(&v, |x| normal_cdf(x / sd));
        assert!(d < ks_critical_1pct(v.len()), "{d}");
    }

    #[test]
    fn rejection_sampling_matches_gaussian_in_3d() {
        let w = WaveModel::harmonic(3, 1.0, 1.0, 2.0).unwrap();
        let sd = 0.25f64.sqrt();
        let xs = sample_initial(&w, 0.0, 200_000, 4, Envelope::Gaussian).unwrap();
        for axis in 0..3 {
            let v: Vec<f64> = xs.iter().map(|x| x[axis]).collect();
            let d = ks_statistic(&v, |x| normal_cdf(x / sd));
            assert!(d < ks_critical_1pct(v.len()), "{axis} {d}");
        }
    }

    #[test]
    fn plane_wave_samples_stay_in_box() {
        let w = WaveModel::plane_wave(2, 1.0, 1.0, [1.0, 0.0, 0.0], 3.0).unwrap();
        let xs = sample_initial(&w, 0.0, 5000, 1, Envelope::UniformBox).unwrap();
        assert!(xs.iter().all(|x| w.check_domain(x).is_ok()));
        let w1 = WaveModel::plane_wave(1, 1.0, 1.0, [1.0, 0.0, 0.0], 3.0).unwrap();
        let xs = sample_initial(&w1, 0.0, 5000, 1, Envelope::Gaussian).unwrap();
        assert!(xs.iter().all(|x| w1.check_domain(x).is_ok()));
    }

    #[test]
    fn histogram_mass_and_coarsen() {
        let mut h = Histogram::new(&[(-1.0, 1.0)], 10);
        for k in 0..100 {
            h.add(&[-1.2 + k as f64 * 0.025, 0.0, 0.0]);
        }
        assert!((h.mass(0) - 1.0).abs() < 1e-12);
        assert!(h.outside[0] > 0);
        let c = h.coarsen(5).unwrap();
        assert_eq!(c.bins, 2);
        assert_eq!(c.in_range(0), h.in_range(0));
        assert!(h.coarsen(3).is_err());
    }

    #[test]
    fn snapshots_are_deterministic_and_well_formed() {
        let w = WaveModel::harmonic(2, 1.0, 1.0, 1.0).unwrap();
        let mut c = DiffusionConfig::new(w, 3000, 0.5, 0.01);
        c.n_snapshots = 6;
        c.seed = 9;
        let a = evolve_ensemble(&c).unwrap();
        let b = evolve_ensemble(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!((a[0].t - 0.0).abs() < 1e-15 && (a[5].t - 0.5).abs() < 1e-12);
        for s in &a {
            assert_eq!(s.positions.len(), 3000);
            for axis in 0..2 {
                assert!((s.histogram.mass(axis) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(a[0].drift.steps, 0);
        assert_eq!(a[1].drift.steps, 10);
        let other = evolve_ensemble_in(&c, 17).unwrap();
        assert_ne!(other[5].positions, a[5].positions);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let w = WaveModel::free_packet(1.0, 1.0, 1.0, 0.0, 0.5).unwrap();
        let mut c = DiffusionConfig::new(w, 5000, 0.2, 0.01);
        c.n_snapshots = 3;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| evolve_ensemble(&c)).unwrap();
        let b = four.install(|| evolve_ensemble(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_particle_characteristic() {
        // With σ → 0 the path follows dx/dt = b⁺ = u exactly.
        let w = WaveModel::plane_wave(1, 1.0, 1e-20, [0.5, 0.0, 0.0], 1e6).unwrap();
        let mut c = DiffusionConfig::new(w, 1, 1.0, 0.1);
        c.n_snapshots = 2;
        let s = evolve_ensemble(&c).unwrap();
        let x0 = s[0].positions[0][0];
        assert!((s[1].positions[0][0] - (x0 + 0.5)).abs() < 1e-9);
    }

    #[test]
    fn backward_runs_from_t1() {
        let w = WaveModel::harmonic(1, 1.0, 1.0, 1.0).unwrap();
        let mut c = DiffusionConfig::new(w, 2000, 1.0, 0.01);
        c.direction = Direction::Backward;
        c.n_snapshots = 3;
        let s = evolve_ensemble(&c).unwrap();
        assert!((s[0].t - 1.0).abs() < 1e-15);
        assert!(s[2].t.abs() < 1e-12);
    }
}

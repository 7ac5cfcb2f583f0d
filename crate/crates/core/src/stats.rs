//! Sample statistics: means with i.i.d. or batch-means standard errors,
//! correlations and the Kolmogorov–Smirnov distance.

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 16;

/// A sample mean together with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean − target|` measured in standard errors (infinite if `se == 0` and they differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else if self.se > 0.0 {
            d / self.se
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target) <= n_se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean and i.i.d. standard error.
pub fn iid_estimate(xs: &[f64]) -> Estimate {
    Estimate { mean: mean(xs), se: (variance(xs) / xs.len().max(1) as f64).sqrt() }
}

/// Mean and batch-means standard error with `batches` contiguous batches.
///
/// Falls back to fewer batches when the sample is shorter than `batches`.
pub fn batch_estimate(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN };
    }
    let k = batches.min(n).max(1);
    if k < 2 {
        return Estimate { mean: mean(xs), se: 0.0 };
    }
    let means: Vec<f64> = (0..k)
        .map(|b| {
            let lo = b * n / k;
            let hi = (b + 1) * n / k;
            mean(&xs[lo..hi])
        })
        .collect();
    Estimate { mean: mean(xs), se: (variance(&means) / k as f64).sqrt() }
}

/// Pearson correlation of paired samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample KS critical value at the 1% level (Stephens' large-sample form).
pub fn ks_critical_1pct(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    1.628 / (sn + 0.12 + 0.11 / sn)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

//! Estimators, distances and rate fits.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::sim::PathSample;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (rational approximation refined by one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return if p <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let low = 0.02425;
    let x = if p < low {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Two-sided normal critical value for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * level)
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.count as f64)
        }
    }
}

/// Sample mean and normal-approximation CI half-width at confidence `level`.
pub fn mc_mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain("confidence level must lie in (0, 1)"));
    }
    let mut acc = MeanAccumulator::default();
    for &x in samples {
        acc.push(x);
    }
    Ok((acc.mean(), z_value(level) * acc.std_error()))
}

/// Reference distribution for [`ks_statistic`].
pub enum KsReference<'a> {
    Sample(&'a [f64]),
    Cdf(&'a dyn Fn(f64) -> f64),
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `sample` and `reference`.
pub fn ks_statistic(sample: &[f64], reference: KsReference<'_>) -> Result<f64> {
    match reference {
        KsReference::Sample(other) => ks_two_sample(sample, other),
        KsReference::Cdf(cdf) => ks_against_cdf(sample, cdf),
    }
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("KS sample"));
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(v)
}

pub fn ks_against_cdf(sample: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let xs = sorted(sample)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample statistic by a merged scan of both sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let xa = sorted(a)?;
    let xb = sorted(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let v = if xa[i] <= xb[j] { xa[i] } else { xb[j] };
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Least-squares fit of `log error = slope · log ε + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: points.len() });
    }
    if points.iter().any(|&(e, err)| !(e > 0.0) || !(err > 0.0) || !err.is_finite()) {
        return Err(Error::Domain("rate fit needs positive epsilons and errors"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ly: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs distinct epsilons"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit { slope, intercept, residual: libm::sqrt(ss / n), points: points.to_vec() })
}

/// Weighted least-squares slope of `y = c·x` with weights `1/se²`; returns `(c, se(c))`.
pub fn slope_through_origin(xs: &[f64], ys: &[f64], se: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() != se.len() || xs.is_empty() {
        return Err(Error::Domain("slope fit needs equal, non-empty inputs"));
    }
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), s) in xs.iter().zip(ys).zip(se) {
        let w = if *s > 0.0 { 1.0 / (s * s) } else { 1.0 };
        sxx += w * x * x;
        sxy += w * x * y;
    }
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs a nonzero abscissa"));
    }
    Ok((sxy / sxx, libm::sqrt(1.0 / sxx)))
}

/// Number of membrane arrivals up to time `horizon`.
pub fn crossing_count(path: &PathSample, horizon: f64) -> usize {
    path.events.iter().take_while(|e| e.time <= horizon).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub value: f64,
    /// False when some step exceeds `δ² / (10 Σ⁰⁰_max)`.
    pub resolved: bool,
}

/// Occupation estimate `(1/2δ) Σ I(|X_t − a| ≤ δ) Σ⁰⁰ Δt` of the symmetric local time at `a`.
pub fn local_time_estimate(
    path: &PathSample,
    field: &CoefficientField,
    a: f64,
    delta: f64,
) -> Result<LocalTimeEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Domain("delta must be positive"));
    }
    let mut acc = 0.0;
    let mut s_max: f64 = 0.0;
    let mut dt_max: f64 = 0.0;
    for j in 0..path.times.len().saturating_sub(1) {
        let p = &path.states[j];
        let dt = path.times[j + 1] - path.times[j];
        let s00 = field.gram(p)[0][0];
        s_max = s_max.max(s00);
        dt_max = dt_max.max(dt);
        if (p[0] - a).abs() <= delta {
            acc += s00 * dt;
        }
    }
    let resolved = s_max == 0.0 || dt_max <= delta * delta / (10.0 * s_max);
    Ok(LocalTimeEstimate { value: acc / (2.0 * delta), resolved })
}

/// Tanaka residual `|X_T − a| − |X_0 − a| − Σ sgn(X_j − a)(X_{j+1} − X_j)`.
pub fn tanaka_local_time(path: &PathSample, a: f64) -> f64 {
    let xs = &path.states;
    if xs.len() < 2 {
        return 0.0;
    }
    let mut integral = 0.0;
    for w in xs.windows(2) {
        let d = w[0][0] - a;
        let sgn = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        integral += sgn * (w[1][0] - w[0][0]);
    }
    (xs[xs.len() - 1][0] - a).abs() - (xs[0][0] - a).abs() - integral
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    /// Total signed angle swept around the origin, radians.
    pub angle: f64,
    /// Fraction of segments skipped for passing within `min_radius` of the origin.
    pub skipped_fraction: f64,
}

pub const WINDING_MIN_RADIUS: f64 = 1e-3;

/// Sum of `atan2` increments of the first two coordinates along the polyline.
pub fn winding_angle(path: &PathSample, min_radius: f64) -> Result<Winding> {
    let xs = &path.states;
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let r2min = min_radius * min_radius;
    let mut angle = 0.0;
    let mut skipped = 0usize;
    for w in xs.windows(2) {
        let (x0, y0, x1, y1) = (w[0][0], w[0][1], w[1][0], w[1][1]);
        if x0 * x0 + y0 * y0 < r2min || x1 * x1 + y1 * y1 < r2min {
            skipped += 1;
            continue;
        }
        angle += libm::atan2(x0 * y1 - y0 * x1, x0 * x1 + y0 * y1);
    }
    let total = xs.len() - 1;
    if skipped == total {
        return Err(Error::Domain("every segment lies within the minimum radius"));
    }
    Ok(Winding { angle, skipped_fraction: skipped as f64 / total as f64 })
}

/// Two-sided exact sign-test p-value for `successes` out of `trials` under `p = ½`.
pub fn sign_test_p_value(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let k = successes.min(trials - successes);
    let ln_half = libm::log(0.5) * trials as f64;
    let ln_fact = |n: usize| libm::lgamma(n as f64 + 1.0);
    let mut tail = 0.0;
    for i in 0..=k {
        tail += libm::exp(ln_fact(trials) - ln_fact(i) - ln_fact(trials - i) + ln_half);
    }
    (2.0 * tail).min(1.0)
}

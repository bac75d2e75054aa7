//! Reference values: the exit law of Brownian motion with drift, leading-order
//! strip-exit moments, and the Monte Carlo pseudo-generator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::limit::TestFunction;
use crate::linalg::{solve, Matrix, Vector, MAX_DIM, ZERO, ZERO_MATRIX};
use crate::membranes::MembraneLayout;
use crate::sim::{sample_exit, ExitRecord, SimConfig};
use crate::stats::MeanAccumulator;

/// Below this `|κ(a₋ + a₊)|` the exit law is evaluated by its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-8;

/// Largest `ε|β|` accepted by [`asymptotic_exit_moments`].
pub const ASYMPTOTIC_SMALLNESS: f64 = 0.25;

fn check_strip(a_minus: f64, a_plus: f64, drift: f64, variance: f64) -> Result<()> {
    if !(a_minus > 0.0 && a_plus > 0.0 && a_minus.is_finite() && a_plus.is_finite()) {
        return Err(Error::Domain("strip half-widths must be positive and finite"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Domain("variance must be positive and finite"));
    }
    if !drift.is_finite() {
        return Err(Error::NonFinite("drift"));
    }
    Ok(())
}

/// `(1 − e^{−z}) / z` to fourth order.
fn exit_series(z: f64) -> f64 {
    1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z * z * z * z / 120.0
}

/// Exit law of `drift·t + √variance·W` from `(−a₋, a₊)`, returned as `(p₋, p₊)`.
pub fn bm_exit_prob(a_minus: f64, a_plus: f64, drift: f64, variance: f64) -> Result<(f64, f64)> {
    check_strip(a_minus, a_plus, drift, variance)?;
    let kappa = 2.0 * drift / variance;
    let width = a_minus + a_plus;
    let p_plus = if (kappa * width).abs() < SERIES_THRESHOLD {
        a_minus / width * exit_series(kappa * a_minus) / exit_series(kappa * width)
    } else if kappa > 0.0 {
        libm::expm1(-kappa * a_minus) / libm::expm1(-kappa * width)
    } else {
        libm::exp(kappa * a_plus) * libm::expm1(kappa * a_minus) / libm::expm1(kappa * width)
    };
    Ok((1.0 - p_plus, p_plus))
}

/// Mean exit time of `drift·t + √variance·W` from `(−a₋, a₊)`.
pub fn bm_exit_time(a_minus: f64, a_plus: f64, drift: f64, variance: f64) -> Result<f64> {
    check_strip(a_minus, a_plus, drift, variance)?;
    let kappa = 2.0 * drift / variance;
    let base = a_minus * a_plus / variance;
    if drift == 0.0 {
        return Ok(base);
    }
    if (kappa * (a_minus + a_plus)).abs() < SERIES_THRESHOLD {
        return Ok(base * (1.0 + kappa * (a_plus - a_minus) / 6.0));
    }
    let (p_minus, p_plus) = bm_exit_prob(a_minus, a_plus, drift, variance)?;
    Ok((a_plus * p_plus - a_minus * p_minus) / drift)
}

/// Strip-exit moments started from a membrane `(a_k, y)`.
///
/// `mean_x`, `mean_x2` and `cross_xy` use `X_τ − a_k`; `cov_yy` is the raw
/// second moment `E (Y_τ − y)(Y_τ − y)ᵀ`. Only entries `1..=n` of the vectors
/// and matrices are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitMoments {
    pub n: usize,
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
    pub mean_tau: f64,
    pub mean_dy: Vector,
    pub cov_yy: Matrix,
    pub cross_xy: Vector,
}

impl ExitMoments {
    fn zeroed(n: usize) -> Self {
        ExitMoments {
            n,
            p_plus: 0.0,
            p_minus: 0.0,
            mean_x: 0.0,
            mean_x2: 0.0,
            mean_tau: 0.0,
            mean_dy: ZERO,
            cov_yy: ZERO_MATRIX,
            cross_xy: ZERO,
        }
    }
}

/// Monte Carlo moments and their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McExitMoments {
    pub count: usize,
    pub mean: ExitMoments,
    pub se: ExitMoments,
}

impl McExitMoments {
    pub fn from_records(records: &[ExitRecord], n: usize) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: records.len() });
        }
        let mut plus = MeanAccumulator::default();
        let mut x = MeanAccumulator::default();
        let mut x2 = MeanAccumulator::default();
        let mut tau = MeanAccumulator::default();
        let mut dy = [MeanAccumulator::default(); MAX_DIM];
        let mut yy = [[MeanAccumulator::default(); MAX_DIM]; MAX_DIM];
        let mut xy = [MeanAccumulator::default(); MAX_DIM];
        for r in records {
            let off = r.exit_offset();
            plus.push(if r.exit_side > 0 { 1.0 } else { 0.0 });
            x.push(off);
            x2.push(off * off);
            tau.push(r.tau);
            for i in 1..=n {
                let di = r.exit_state[i] - r.start_y[i];
                dy[i].push(di);
                xy[i].push(off * di);
                for j in 1..=n {
                    yy[i][j].push(di * (r.exit_state[j] - r.start_y[j]));
                }
            }
        }
        let mut mean = ExitMoments::zeroed(n);
        let mut se = ExitMoments::zeroed(n);
        mean.p_plus = plus.mean();
        mean.p_minus = 1.0 - plus.mean();
        se.p_plus = plus.std_error();
        se.p_minus = plus.std_error();
        (mean.mean_x, se.mean_x) = (x.mean(), x.std_error());
        (mean.mean_x2, se.mean_x2) = (x2.mean(), x2.std_error());
        (mean.mean_tau, se.mean_tau) = (tau.mean(), tau.std_error());
        for i in 1..=n {
            (mean.mean_dy[i], se.mean_dy[i]) = (dy[i].mean(), dy[i].std_error());
            (mean.cross_xy[i], se.cross_xy[i]) = (xy[i].mean(), xy[i].std_error());
            for j in 1..=n {
                (mean.cov_yy[i][j], se.cov_yy[i][j]) = (yy[i][j].mean(), yy[i][j].std_error());
            }
        }
        Ok(McExitMoments { count: records.len(), mean, se })
    }
}

/// Leading-order exit moments from membrane `k` at transversal position `y`.
///
/// Coefficients are frozen at `(a_k, y)`. The density and its slope are taken
/// at `εk`, the abscissa whose image under `∫₀ d` is `a_k`.
pub fn asymptotic_exit_moments(
    field: &CoefficientField,
    layout: &MembraneLayout,
    k: i64,
    y: &Vector,
) -> Result<ExitMoments> {
    let eps = layout.epsilon();
    let n = field.dims().n;
    let mut p = *y;
    p[0] = layout.membrane_position(k)?;
    let beta = field.beta(&p);
    if eps * beta.abs() > ASYMPTOTIC_SMALLNESS {
        return Err(Error::Smallness { product: eps * beta.abs(), limit: ASYMPTOTIC_SMALLNESS });
    }
    let density = layout.density();
    let s = eps * k as f64;
    let d = density.value(s);
    let d1 = density.slope(s);
    if !(d > 0.0) {
        return Err(Error::Domain("membrane density must be positive"));
    }
    let gram = field.gram(&p);
    let s00 = gram[0][0];
    if !(s00 > 0.0) {
        return Err(Error::Domain("normal variance must be positive"));
    }
    let b = field.drift(&p);
    let theta = field.theta(&p);

    let mut m = ExitMoments::zeroed(n);
    let tilt = 0.5 * (b[0] * d / s00 + beta - d1 / (2.0 * d)) * eps;
    m.p_plus = 0.5 + tilt;
    m.p_minus = 0.5 - tilt;
    m.mean_x = (beta * d + b[0] * d * d / s00) * eps * eps;
    m.mean_x2 = d * d * eps * eps;
    m.mean_tau = m.mean_x2 / s00;
    for i in 1..=n {
        m.mean_dy[i] = (b[i] + theta[i] * beta * s00 / d) * m.mean_tau;
        m.cross_xy[i] = gram[0][i] * m.mean_tau;
        for j in 1..=n {
            m.cov_yy[i][j] = gram[i][j] * m.mean_tau;
        }
    }
    Ok(m)
}

/// Ratio estimate `(E f(exit) − f(start)) / E τ` with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEstimate {
    pub value: f64,
    pub se: f64,
    /// CI half-width at the requested level.
    pub half_width: f64,
    pub count: usize,
}

/// Whether the numerator is adjusted by the recorded noise martingale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlVariate {
    None,
    /// Regress the increment `f(exit) − f(start)` on the mean-zero noise sum
    /// and subtract the fitted part.
    Martingale,
}

/// Pseudo-generator from precomputed exit records.
pub fn pseudo_generator_from_records(
    records: &[ExitRecord],
    f: &TestFunction,
    dim: usize,
    cv: ControlVariate,
    level: f64,
) -> Result<GeneratorEstimate> {
    let count = records.len();
    if count < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: count });
    }
    let start = |r: &ExitRecord| {
        let mut p = r.start_y;
        p[0] = r.start_x;
        p
    };
    let mut g: alloc::vec::Vec<f64> = records.iter().map(|r| f.value(&r.exit_state) - f.value(&start(r))).collect();
    if cv == ControlVariate::Martingale {
        let coef = regress_on_martingale(records, &g, dim)?;
        for (gi, r) in g.iter_mut().zip(records) {
            for a in 0..dim {
                *gi -= coef[a] * r.martingale[a];
            }
        }
    }
    let nf = count as f64;
    let mg = g.iter().sum::<f64>() / nf;
    let mt = records.iter().map(|r| r.tau).sum::<f64>() / nf;
    if !(mt > 0.0) {
        return Err(Error::Domain("mean exit time must be positive"));
    }
    let value = mg / mt;
    let mut var = 0.0;
    for (gi, r) in g.iter().zip(records) {
        let resid = (gi - mg) - value * (r.tau - mt);
        var += resid * resid;
    }
    var /= nf - 1.0;
    let se = libm::sqrt(var / nf) / mt;
    Ok(GeneratorEstimate { value, se, half_width: crate::stats::z_value(level) * se, count })
}

fn regress_on_martingale(records: &[ExitRecord], g: &[f64], dim: usize) -> Result<Vector> {
    let nf = records.len() as f64;
    let mut mean_m = ZERO;
    let mut mean_g = 0.0;
    for (r, gi) in records.iter().zip(g) {
        for a in 0..dim {
            mean_m[a] += r.martingale[a] / nf;
        }
        mean_g += gi / nf;
    }
    let mut cov = ZERO_MATRIX;
    let mut rhs = ZERO;
    for (r, gi) in records.iter().zip(g) {
        for a in 0..dim {
            let da = r.martingale[a] - mean_m[a];
            rhs[a] += da * (gi - mean_g);
            for b in 0..dim {
                cov[a][b] += da * (r.martingale[b] - mean_m[b]);
            }
        }
    }
    // Directions without noise get a unit diagonal so the solve stays regular.
    for a in 0..dim {
        if cov[a][a] <= 1e-300 {
            cov[a] = ZERO;
            for row in cov.iter_mut().take(dim) {
                row[a] = 0.0;
            }
            cov[a][a] = 1.0;
            rhs[a] = 0.0;
        }
    }
    solve(&cov, &rhs, dim).ok_or(Error::Domain("singular martingale covariance"))
}

/// Monte Carlo pseudo-generator at `(a_k, y)` from `count` strip exits.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_generator_estimate<R: Rng + ?Sized>(
    field: &CoefficientField,
    layout: &MembraneLayout,
    f: &TestFunction,
    k: i64,
    y: &Vector,
    count: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<GeneratorEstimate> {
    let mut records = alloc::vec::Vec::with_capacity(count);
    for _ in 0..count {
        records.push(sample_exit(field, layout, k, y, cfg, rng)?);
    }
    pseudo_generator_from_records(&records, f, field.dims().dim(), ControlVariate::None, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_scenario, Density, ScenarioSpec};
    use crate::rng::{path_rng, standard_normal};
    use alloc::vec;
    use proptest::prelude::*;

    /// `p₊ = sinh(μa₋/σ²)·e^{μa₊/σ²} / sinh(μL/σ²)`, the hyperbolic form of the scale-function law.
    fn sinh_form(a_minus: f64, a_plus: f64, drift: f64, variance: f64) -> f64 {
        let c = drift / variance;
        libm::sinh(c * a_minus) * libm::exp(c * a_plus) / libm::sinh(c * (a_minus + a_plus))
    }

    #[test]
    fn exit_prob_examples() {
        assert_eq!(bm_exit_prob(1.0, 1.0, 0.0, 1.0).unwrap(), (0.5, 0.5));
        let (_, p) = bm_exit_prob(1.0, 3.0, 0.0, 1.0).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        let (m, p) = bm_exit_prob(1.0, 1.0, 1.0, 1.0).unwrap();
        let e2 = libm::exp(2.0);
        assert!((p - (e2 - 1.0) / (e2 - 1.0 / e2)).abs() < 1e-15);
        assert!((p - 0.880797).abs() < 1e-6);
        assert!((m + p - 1.0).abs() < 1e-15);
        assert!(bm_exit_prob(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(bm_exit_prob(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn exit_prob_matches_sinh_form() {
        for &(am, ap, mu, v) in &[(1.0, 1.0, 1.0, 1.0), (0.3, 2.0, -0.7, 0.5), (2.0, 0.1, 3.0, 2.0), (0.5, 0.5, 1e-3, 1.0)] {
            let (_, p) = bm_exit_prob(am, ap, mu, v).unwrap();
            assert!((p - sinh_form(am, ap, mu, v)).abs() < 1e-12, "{am} {ap} {mu} {v}");
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        for &mu in &[1e-9, -1e-9, 2e-9, -2e-9] {
            let (_, p) = bm_exit_prob(1.0, 1.0, mu, 1.0).unwrap();
            let exact = 0.5 + mu / 2.0;
            assert!((p - exact).abs() < 1e-15);
            let t = bm_exit_time(0.7, 1.3, mu, 1.0).unwrap();
            let (pm, pp) = bm_exit_prob(0.7, 1.3, 2e-4, 1.0).unwrap();
            let wald = (1.3 * pp - 0.7 * pm) / 2e-4;
            let series = 0.7 * 1.3 * (1.0 + 4e-4 * 0.6 / 6.0);
            assert!((wald - series).abs() < 1e-6);
            assert!((t - 0.91).abs() < 1e-8);
        }
    }

    #[test]
    fn exit_time_examples() {
        assert_eq!(bm_exit_time(1.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(bm_exit_time(1.0, 3.0, 0.0, 2.0).unwrap(), 1.5);
        let t = bm_exit_time(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((t - libm::tanh(1.0)).abs() < 1e-14);
        assert!((t - 0.761594).abs() < 1e-6);
    }

    #[test]
    fn exit_law_agrees_with_direct_simulation() {
        // Fine Euler walk of drifted BM from 0 in (-1, 1).
        let (mu, h) = (1.0, 1e-4);
        let mut rng = path_rng(11, 0);
        let n = 4000;
        let mut plus = 0usize;
        for _ in 0..n {
            let mut x: f64 = 0.0;
            while x.abs() < 1.0 {
                x += mu * h + libm::sqrt(h) * standard_normal(&mut rng);
            }
            if x > 0.0 {
                plus += 1;
            }
        }
        let phat = plus as f64 / n as f64;
        let (_, p) = bm_exit_prob(1.0, 1.0, mu, 1.0).unwrap();
        let se = libm::sqrt(p * (1.0 - p) / n as f64);
        assert!((phat - p).abs() < 4.0 * se + 0.01, "{phat} vs {p}");
    }

    fn oned(beta: f64, b: f64, density: Density) -> CoefficientField {
        build_scenario(&ScenarioSpec::Constant {
            n: 0,
            m: 1,
            b: vec![b],
            sigma: vec![vec![1.0]],
            beta,
            theta: vec![],
            density,
        })
        .unwrap()
    }

    #[test]
    fn asymptotic_examples() {
        let f = oned(0.5, 0.0, Density::default());
        let l = MembraneLayout::new(0.1, Density::default(), 100).unwrap();
        let m = asymptotic_exit_moments(&f, &l, 0, &ZERO).unwrap();
        assert!((m.p_plus - 0.525).abs() < 1e-15);
        assert!((m.mean_x - 0.005).abs() < 1e-15);
        assert!((m.mean_tau - 0.01).abs() < 1e-15);

        let f = oned(0.0, 0.0, Density::default());
        let m = asymptotic_exit_moments(&f, &l, 3, &ZERO).unwrap();
        assert_eq!((m.p_plus, m.p_minus, m.mean_x), (0.5, 0.5, 0.0));
        assert_eq!(m.mean_x2, m.mean_tau);

        let sine = Density::Sine { base: 2.0, amp: 1.0 };
        let f = oned(0.0, 0.0, sine.clone());
        let l = MembraneLayout::new(0.1, sine, 100).unwrap();
        let m = asymptotic_exit_moments(&f, &l, 0, &ZERO).unwrap();
        assert!((m.p_plus - 0.4875).abs() < 1e-15);
        // Frozen-coefficient exit law on the true asymmetric strip.
        let (lo, hi) = l.strip(0).unwrap();
        let (_, p) = bm_exit_prob(-lo, hi, 0.0, 1.0).unwrap();
        assert!((p - m.p_plus).abs() < 0.1 * 0.1 * 0.1);
    }

    #[test]
    fn asymptotic_smallness_is_enforced() {
        let f = oned(3.0, 0.0, Density::default());
        let l = MembraneLayout::new(0.1, Density::default(), 100).unwrap();
        assert!(matches!(asymptotic_exit_moments(&f, &l, 0, &ZERO), Err(Error::Smallness { .. })));
    }

    #[test]
    fn transversal_moments() {
        let f = build_scenario(&ScenarioSpec::Constant {
            n: 1,
            m: 2,
            b: vec![1.0, 0.5],
            sigma: vec![vec![1.0, 0.0], vec![0.5, 1.0]],
            beta: 1.5,
            theta: vec![0.5],
            density: Density::default(),
        })
        .unwrap();
        let l = MembraneLayout::new(0.05, Density::default(), 100).unwrap();
        let m = asymptotic_exit_moments(&f, &l, 0, &ZERO).unwrap();
        let tau = 0.0025;
        assert!((m.mean_tau - tau).abs() < 1e-16);
        assert!((m.mean_dy[1] - (0.5 + 0.5 * 1.5) * tau).abs() < 1e-16);
        assert!((m.cov_yy[1][1] - 1.25 * tau).abs() < 1e-16);
        assert!((m.cross_xy[1] - 0.5 * tau).abs() < 1e-16);
        assert!((m.p_plus - (0.5 + 0.5 * 2.5 * 0.05)).abs() < 1e-15);
    }

    #[test]
    fn constant_test_function_has_zero_generator() {
        let f = oned(0.5, 0.0, Density::default());
        let l = MembraneLayout::new(0.1, Density::default(), 1000).unwrap();
        let cfg = SimConfig { epsilon: 0.1, ..SimConfig::default() };
        let mut rng = path_rng(3, 0);
        let c = TestFunction::Constant { value: 2.0 };
        let est = pseudo_generator_estimate(&f, &l, &c, 0, &ZERO, 50, &cfg, &mut rng).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn moments_from_records() {
        let mk = |side: i8, off: f64, tau: f64| ExitRecord {
            start_k: 0,
            start_x: 0.0,
            start_y: ZERO,
            exit_side: side,
            tau,
            exit_state: [off, 0.0, 0.0, 0.0],
            sup_dy2: 0.0,
            x_integral: 0.0,
            martingale: ZERO,
            steps: 1,
        };
        let recs = [mk(1, 0.1, 1.0), mk(-1, -0.1, 3.0)];
        let m = McExitMoments::from_records(&recs, 0).unwrap();
        assert_eq!(m.mean.p_plus, 0.5);
        assert_eq!(m.mean.mean_x, 0.0);
        assert!((m.mean.mean_x2 - 0.01).abs() < 1e-17);
        assert_eq!(m.mean.mean_tau, 2.0);
        assert_eq!(m.se.mean_tau, 1.0);
        let g = pseudo_generator_from_records(&recs, &TestFunction::x2(), 1, ControlVariate::None, 0.95).unwrap();
        assert!((g.value - 0.005).abs() < 1e-17);
    }

    proptest! {
        #[test]
        fn exit_prob_increases_with_drift(am in 0.01f64..5.0, ap in 0.01f64..5.0, mu in -3.0f64..3.0, v in 0.1f64..4.0, dmu in 0.01f64..1.0) {
            let (_, p0) = bm_exit_prob(am, ap, mu, v).unwrap();
            let (_, p1) = bm_exit_prob(am, ap, mu + dmu, v).unwrap();
            prop_assert!(p1 > p0 || (p0 > 1.0 - 1e-12));
            prop_assert!((0.0..=1.0).contains(&p0));
        }

        #[test]
        fn exit_prob_mirror_symmetry(am in 0.01f64..5.0, ap in 0.01f64..5.0, mu in -3.0f64..3.0, v in 0.1f64..4.0) {
            let (pm, pp) = bm_exit_prob(am, ap, mu, v).unwrap();
            let (qm, qp) = bm_exit_prob(ap, am, -mu, v).unwrap();
            prop_assert!((pp - qm).abs() < 1e-12);
            prop_assert!((pm - qp).abs() < 1e-12);
        }

        #[test]
        fn wald_identity(am in 0.01f64..5.0, ap in 0.01f64..5.0, mu in -3.0f64..3.0, v in 0.1f64..4.0) {
            prop_assume!(mu != 0.0);
            let (pm, pp) = bm_exit_prob(am, ap, mu, v).unwrap();
            let t = bm_exit_time(am, ap, mu, v).unwrap();
            prop_assert!((mu * t - (ap * pp - am * pm)).abs() <= 1e-12);
            prop_assert!(t > 0.0);
        }
    }
}

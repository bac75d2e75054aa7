//! The homogenized diffusion and its generator.
//!
//! In the limit the membranes disappear and leave the extra drift
//! `β Σ⁰⁰ / d · (1, θ)`, where `d` is the local membrane density.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector, MAX_DIM, MAX_NOISE, ZERO, ZERO_MATRIX};
use crate::rng::fill_normals;
use crate::sim::PathSample;

/// Base drift and interface-induced drift at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitDrift {
    pub base: Vector,
    pub induced: Vector,
}

impl LimitDrift {
    pub fn total(&self) -> Vector {
        let mut out = self.base;
        for (o, v) in out.iter_mut().zip(&self.induced) {
            *o += v;
        }
        out
    }
}

/// `β(p) Σ⁰⁰(p) / d · (1, θ(p))`.
pub fn interface_drift(field: &CoefficientField, p: &Vector) -> Result<Vector> {
    let n = field.dims().n;
    let beta = field.beta(p);
    if beta == 0.0 {
        return Ok(ZERO);
    }
    let d = field.density_fn().local_value(p[0])?;
    if !(d > 0.0) {
        return Err(Error::Domain("membrane density must be positive"));
    }
    let scale = beta * field.gram(p)[0][0] / d;
    let theta = field.theta(p);
    let mut out = ZERO;
    out[0] = scale;
    for i in 1..=n {
        out[i] = scale * theta[i];
    }
    Ok(out)
}

pub fn limit_drift(field: &CoefficientField, p: &Vector) -> Result<LimitDrift> {
    Ok(LimitDrift { base: field.drift(p), induced: interface_drift(field, p)? })
}

/// Which drift an Euler-Maruyama path uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    /// `b` only: the diffusion without membranes.
    Free,
    /// `b` plus the interface-induced drift.
    Homogenized,
}

/// Euler-Maruyama path of the membrane-free or homogenized diffusion.
pub fn simulate_em_path<R: Rng + ?Sized>(
    field: &CoefficientField,
    start: &Vector,
    horizon: f64,
    dt: f64,
    mode: DriftMode,
    record_stride: usize,
    rng: &mut R,
) -> Result<PathSample> {
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::Domain("dt must be positive and horizon non-negative"));
    }
    let dims = field.dims();
    let (n, m) = (dims.n, dims.m);
    let stride = record_stride.max(1);
    let mut sample = PathSample { dim: dims.dim(), ..PathSample::default() };
    let mut p = *start;
    let mut t = 0.0;
    sample.times.push(t);
    sample.states.push(p);
    let mut noise = [0.0; MAX_NOISE];
    let mut counter = 0;
    while t < horizon {
        let h = if t + dt > horizon { horizon - t } else { dt };
        fill_normals(rng, &mut noise[..m], h);
        let mut drift = field.drift(&p);
        if mode == DriftMode::Homogenized {
            let extra = interface_drift(field, &p)?;
            for i in 0..=n {
                drift[i] += extra[i];
            }
        }
        let sigma = field.sigma(&p);
        for i in 0..=n {
            let mut acc = drift[i] * h;
            for l in 0..m {
                acc += sigma[i][l] * noise[l];
            }
            p[i] += acc;
        }
        if !p[..=n].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("limit path state"));
        }
        t += h;
        sample.steps += 1;
        counter += 1;
        if counter >= stride || t >= horizon {
            counter = 0;
            sample.times.push(t);
            sample.states.push(p);
        }
    }
    Ok(sample)
}

/// Path of the homogenized diffusion.
pub fn simulate_limit_path<R: Rng + ?Sized>(
    field: &CoefficientField,
    start: &Vector,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<PathSample> {
    simulate_em_path(field, start, horizon, dt, DriftMode::Homogenized, 1, rng)
}

/// Smooth test function with closed-form gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `∏ p_i^{powers[i]}` with total degree at most 3.
    Monomial { powers: [u8; MAX_DIM] },
    /// `exp(−1/(1 − |p − c|²/r²))` inside the ball, zero outside.
    Bump { center: Vector, radius: f64 },
}

impl TestFunction {
    pub fn monomial(powers: [u8; MAX_DIM]) -> Result<Self> {
        if powers.iter().map(|&k| k as u32).sum::<u32>() > 3 {
            return Err(Error::Domain("monomial degree exceeds 3"));
        }
        Ok(TestFunction::Monomial { powers })
    }

    /// `x`.
    pub fn x() -> Self {
        TestFunction::Monomial { powers: [1, 0, 0, 0] }
    }

    /// `x²`.
    pub fn x2() -> Self {
        TestFunction::Monomial { powers: [2, 0, 0, 0] }
    }

    /// `y^i` for `i ≥ 1`.
    pub fn y(i: usize) -> Self {
        let mut powers = [0; MAX_DIM];
        powers[i] = 1;
        TestFunction::Monomial { powers }
    }

    /// `(y^i)²`.
    pub fn y2(i: usize) -> Self {
        let mut powers = [0; MAX_DIM];
        powers[i] = 2;
        TestFunction::Monomial { powers }
    }

    /// `x · y^i`.
    pub fn xy(i: usize) -> Self {
        let mut powers = [0; MAX_DIM];
        powers[0] = 1;
        powers[i] = 1;
        TestFunction::Monomial { powers }
    }

    pub fn value(&self, p: &Vector) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Monomial { powers } => {
                let mut acc = 1.0;
                for (x, &k) in p.iter().zip(powers) {
                    for _ in 0..k {
                        acc *= x;
                    }
                }
                acc
            }
            TestFunction::Bump { center, radius } => {
                let q = bump_q(p, center, *radius);
                if q > 0.0 {
                    libm::exp(-1.0 / q)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn gradient(&self, p: &Vector) -> Vector {
        match self {
            TestFunction::Constant { .. } => ZERO,
            TestFunction::Monomial { powers } => {
                let mut g = ZERO;
                for i in 0..MAX_DIM {
                    if powers[i] == 0 {
                        continue;
                    }
                    let mut reduced = *powers;
                    reduced[i] -= 1;
                    g[i] = powers[i] as f64 * TestFunction::Monomial { powers: reduced }.value(p);
                }
                g
            }
            TestFunction::Bump { center, radius } => {
                let q = bump_q(p, center, *radius);
                let mut g = ZERO;
                if q > 0.0 {
                    let f = libm::exp(-1.0 / q);
                    let r2 = radius * radius;
                    for i in 0..MAX_DIM {
                        let qi = -2.0 * (p[i] - center[i]) / r2;
                        g[i] = f * qi / (q * q);
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, p: &Vector) -> Matrix {
        match self {
            TestFunction::Constant { .. } => ZERO_MATRIX,
            TestFunction::Monomial { powers } => {
                let mut h = ZERO_MATRIX;
                for i in 0..MAX_DIM {
                    if powers[i] == 0 {
                        continue;
                    }
                    let mut once = *powers;
                    once[i] -= 1;
                    for j in 0..MAX_DIM {
                        if once[j] == 0 {
                            continue;
                        }
                        let mut twice = once;
                        twice[j] -= 1;
                        h[i][j] = powers[i] as f64
                            * once[j] as f64
                            * TestFunction::Monomial { powers: twice }.value(p);
                    }
                }
                h
            }
            TestFunction::Bump { center, radius } => {
                let q = bump_q(p, center, *radius);
                let mut h = ZERO_MATRIX;
                if q > 0.0 {
                    let f = libm::exp(-1.0 / q);
                    let r2 = radius * radius;
                    let mut qd = ZERO;
                    for i in 0..MAX_DIM {
                        qd[i] = -2.0 * (p[i] - center[i]) / r2;
                    }
                    let q2 = q * q;
                    for i in 0..MAX_DIM {
                        for j in 0..MAX_DIM {
                            let qij = if i == j { -2.0 / r2 } else { 0.0 };
                            h[i][j] = f * (qd[i] * qd[j] / (q2 * q2) - 2.0 * qd[i] * qd[j] / (q2 * q) + qij / q2);
                        }
                    }
                }
                h
            }
        }
    }
}

fn bump_q(p: &Vector, center: &Vector, radius: f64) -> f64 {
    let mut r2 = 0.0;
    for i in 0..MAX_DIM {
        let d = p[i] - center[i];
        r2 += d * d;
    }
    1.0 - r2 / (radius * radius)
}

/// Limit generator `L f = (b + induced)·∇f + ½ tr(Σ D²f)` at `p`.
pub fn apply_generator(field: &CoefficientField, f: &TestFunction, p: &Vector) -> Result<f64> {
    let dim = field.dims().dim();
    let drift = limit_drift(field, p)?.total();
    let gram = field.gram(p);
    let g = f.gradient(p);
    let h = f.hessian(p);
    let mut acc = 0.0;
    for i in 0..dim {
        acc += drift[i] * g[i];
        for j in 0..dim {
            acc += 0.5 * gram[i][j] * h[i][j];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_scenario, Density, ScenarioSpec};
    use crate::rng::path_rng;

    fn fig2() -> CoefficientField {
        build_scenario(&ScenarioSpec::named("fig2").unwrap()).unwrap()
    }

    fn oned() -> CoefficientField {
        build_scenario(&ScenarioSpec::named("oned-skew").unwrap()).unwrap()
    }

    #[test]
    fn interface_drift_examples() {
        let d = interface_drift(&fig2(), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((d[0] - 2.0 / 1.01).abs() < 1e-14);
        assert_eq!(d[1], 0.0);
        assert_eq!(interface_drift(&oned(), &ZERO).unwrap()[0], 0.5);
        let inert = build_scenario(&ScenarioSpec::named("constant").unwrap()).unwrap();
        assert_eq!(interface_drift(&inert, &[0.4, 0.0, 0.0, 0.0]).unwrap(), ZERO);
    }

    #[test]
    fn interface_drift_uses_local_spacing() {
        let f = build_scenario(&ScenarioSpec::OnedSkew {
            b: 0.0,
            sigma: 1.0,
            beta: 0.5,
            density: Density::Sine { base: 2.0, amp: 1.0 },
        })
        .unwrap();
        let s: f64 = 0.7;
        let x = 2.0 * s + 1.0 - libm::cos(s);
        let got = interface_drift(&f, &[x, 0.0, 0.0, 0.0]).unwrap()[0];
        assert!((got - 0.5 / (2.0 + libm::sin(s))).abs() < 1e-12);
    }

    #[test]
    fn generator_examples() {
        assert_eq!(apply_generator(&oned(), &TestFunction::x(), &ZERO).unwrap(), 0.5);
        let inert = build_scenario(&ScenarioSpec::named("constant").unwrap()).unwrap();
        assert_eq!(apply_generator(&inert, &TestFunction::x2(), &ZERO).unwrap(), 1.0);
        let v = apply_generator(&fig2(), &TestFunction::x(), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((v - (-1.0 + 2.0 / 1.01)).abs() < 1e-14);
        assert_eq!(apply_generator(&fig2(), &TestFunction::Constant { value: 3.0 }, &[0.3, 0.2, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn test_function_derivatives_match_differences() {
        let fns = [
            TestFunction::monomial([1, 1, 1, 0]).unwrap(),
            TestFunction::monomial([0, 3, 0, 0]).unwrap(),
            TestFunction::xy(1),
            TestFunction::Bump { center: [0.1, -0.2, 0.0, 0.0], radius: 1.5 },
        ];
        let p = [0.3, 0.4, -0.5, 0.0];
        let h = 1e-5;
        for f in &fns {
            let g = f.gradient(&p);
            let hs = f.hessian(&p);
            for i in 0..3 {
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fd = (f.value(&a) - f.value(&b)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8, "{f:?} grad {i}");
                let ga = f.gradient(&a);
                let gb = f.gradient(&b);
                for j in 0..3 {
                    let fd2 = (ga[j] - gb[j]) / (2.0 * h);
                    assert!((fd2 - hs[i][j]).abs() < 1e-7, "{f:?} hess {i}{j}");
                }
            }
        }
        assert!(TestFunction::monomial([2, 2, 0, 0]).is_err());
    }

    #[test]
    fn inert_limit_path_equals_free_path() {
        let f = build_scenario(&ScenarioSpec::named("constant").unwrap()).unwrap();
        let a = simulate_em_path(&f, &ZERO, 1.0, 1e-3, DriftMode::Free, 1, &mut path_rng(5, 2)).unwrap();
        let b = simulate_limit_path(&f, &ZERO, 1.0, 1e-3, &mut path_rng(5, 2)).unwrap();
        assert_eq!(a, b);
        assert!((a.end_time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oned_skew_limit_marginal_mean() {
        let f = oned();
        let n = 4000;
        let mut sum = 0.0;
        for i in 0..n {
            let p = simulate_em_path(&f, &ZERO, 1.0, 0.01, DriftMode::Homogenized, 1000, &mut path_rng(11, i)).unwrap();
            sum += p.last_state().unwrap()[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 / (n as f64).sqrt());
    }
}

//! Strip-local change of coordinates that removes the local-time terms.
//!
//! Within the strip around membrane `a_k` the state is written as an offset
//! `x = X − a_k` and tangential part `y`. The map
//! `F(x, y) = x + x⁺(B(y) − 1)`, `G(x, y) = y − xθ(y)` with
//! `B = (1 − εβ)/(1 + εβ)` turns the skew dynamics into an SDE with
//! discontinuous coefficients and no local time. `β` and `θ` are frozen at
//! the membrane abscissa. State vectors carry `x` (or `u`) at index 0 and
//! `y` (or `v`) at indices `1..=n`.


use crate::coefficients::{CoefficientField, ScalarJet, VectorJet};
use crate::error::{Error, Result};
use crate::linalg::{self, NoiseMatrix, Vector, ZERO, ZERO_MATRIX, ZERO_NOISE};
use crate::membranes::MembraneLayout;

/// Newton tolerance on the residual, relative to `1 + |v|`.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

/// Chart centered on membrane `center_k` at abscissa `center`.
#[derive(Debug, Clone, Copy)]
pub struct StripChart<'a> {
    field: &'a CoefficientField,
    pub center_k: i64,
    pub center: f64,
    pub epsilon: f64,
    frozen: Option<LocalJets>,
}

/// `B` and `θ` with their tangential derivatives at one `y`.
#[derive(Debug, Clone, Copy)]
pub struct LocalJets {
    pub b: ScalarJet,
    pub theta: VectorJet,
}

/// Coefficients of the transformed SDE for `(U, V)`.
///
/// `drift[0]`, `diffusion[0][l]` belong to `U`; indices `1..=n` to `V`.
/// The correction terms are kept separately for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedCoeffs {
    pub drift: Vector,
    pub diffusion: NoiseMatrix,
    pub phi: f64,
    pub phi_l: [f64; linalg::MAX_NOISE],
    pub psi: Vector,
    pub psi_l: NoiseMatrix,
}

impl<'a> StripChart<'a> {
    pub fn new(field: &'a CoefficientField, layout: &MembraneLayout, k: i64) -> Result<Self> {
        let center = layout.membrane_position(k)?;
        Self::with_center(field, k, center, layout.epsilon())
    }

    pub fn with_center(field: &'a CoefficientField, center_k: i64, center: f64, epsilon: f64) -> Result<Self> {
        let mut chart = StripChart { field, center_k, center, epsilon, frozen: None };
        if field.dims().n == 0 {
            chart.frozen = Some(chart.compute_jets(&ZERO)?);
        }
        Ok(chart)
    }

    pub fn field(&self) -> &'a CoefficientField {
        self.field
    }

    fn membrane_point(&self, y: &Vector) -> Vector {
        let mut p = *y;
        p[0] = self.center;
        p
    }

    /// `β(a_k, y)`.
    pub fn beta(&self, y: &Vector) -> f64 {
        self.field.beta(&self.membrane_point(y))
    }

    /// `θ(a_k, y)` at indices `1..=n`.
    pub fn theta(&self, y: &Vector) -> Vector {
        self.field.theta(&self.membrane_point(y))
    }

    /// `B^ε(y) = (1 − εβ)/(1 + εβ)`.
    pub fn b_factor(&self, y: &Vector) -> Result<f64> {
        let beta = self.beta(y);
        let product = self.epsilon * beta.abs();
        if !(product < 1.0) {
            return Err(Error::Smallness { product, limit: 1.0 });
        }
        Ok((1.0 - self.epsilon * beta) / (1.0 + self.epsilon * beta))
    }

    fn compute_jets(&self, y: &Vector) -> Result<LocalJets> {
        let p = self.membrane_point(y);
        let n = self.field.dims().n;
        let bj = self.field.beta_jet(&p);
        let eps = self.epsilon;
        let product = eps * bj.value.abs();
        if !(product < 1.0) {
            return Err(Error::Smallness { product, limit: 1.0 });
        }
        let den = 1.0 + eps * bj.value;
        let d1 = -2.0 * eps / (den * den);
        let d2 = 4.0 * eps * eps / (den * den * den);
        let mut grad = ZERO;
        let mut hess = ZERO_MATRIX;
        for j in 1..=n {
            grad[j] = d1 * bj.grad[j];
            for k in 1..=n {
                hess[j][k] = d2 * bj.grad[j] * bj.grad[k] + d1 * bj.hess[j][k];
            }
        }
        Ok(LocalJets {
            b: ScalarJet { value: (1.0 - eps * bj.value) / den, grad, hess },
            theta: self.field.theta_jet(&p),
        })
    }

    /// `B` and `θ` jets at `y`; cached when there is no tangential variable.
    pub fn jets(&self, y: &Vector) -> Result<LocalJets> {
        match self.frozen {
            Some(j) => Ok(j),
            None => self.compute_jets(y),
        }
    }

    /// `(u, v) = (F(x, y), G(x, y))`.
    pub fn forward(&self, s: &Vector) -> Result<Vector> {
        let jets = self.jets(s)?;
        Ok(self.forward_with(&jets, s))
    }

    /// [`forward`](Self::forward) with jets already evaluated at `s`'s `y`.
    pub fn forward_with(&self, jets: &LocalJets, s: &Vector) -> Vector {
        let n = self.field.dims().n;
        let x = s[0];
        let mut out = *s;
        out[0] = if x > 0.0 { x * jets.b.value } else { x };
        for i in 1..=n {
            out[i] = s[i] - x * jets.theta.value[i];
        }
        out
    }

    /// `(x, y) = (Φ(u, v), Ψ(u, v))` by damped Newton iteration on `Ψ`.
    pub fn inverse(&self, w: &Vector) -> Result<Vector> {
        let n = self.field.dims().n;
        let u = w[0];
        if n == 0 {
            let mut out = *w;
            if u > 0.0 {
                out[0] = u / self.jets(w)?.b.value;
            }
            return Ok(out);
        }
        let v = *w;
        let scale = 1.0 + v[1..=n].iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let tol = NEWTON_TOL * scale;

        let residual = |psi: &Vector| -> Result<(Vector, LocalJets)> {
            let jets = self.compute_jets(psi)?;
            let c = if u > 0.0 { u / jets.b.value } else { u };
            let mut r = ZERO;
            for i in 1..=n {
                r[i - 1] = psi[i] - c * jets.theta.value[i] - v[i];
            }
            Ok((r, jets))
        };

        let theta_v = self.theta(&v);
        let mut psi = v;
        for i in 1..=n {
            psi[i] = v[i] + theta_v[i] * u;
        }
        let (mut r, mut jets) = residual(&psi)?;
        let mut rnorm = linalg::max_abs(&r, n);
        for _ in 0..NEWTON_MAX_ITER {
            if rnorm <= tol {
                let mut out = psi;
                out[0] = if u > 0.0 { u / jets.b.value } else { u };
                return Ok(out);
            }
            let mut jac = ZERO_MATRIX;
            let b = jets.b.value;
            for i in 1..=n {
                for j in 1..=n {
                    let dtheta = jets.theta.grad[i][j];
                    let term = if u > 0.0 {
                        u * (dtheta / b - jets.theta.value[i] * jets.b.grad[j] / (b * b))
                    } else {
                        u * dtheta
                    };
                    jac[i - 1][j - 1] = if i == j { 1.0 - term } else { -term };
                }
            }
            let mut rhs = ZERO;
            for i in 0..n {
                rhs[i] = -r[i];
            }
            let delta = linalg::solve(&jac, &rhs, n).ok_or(Error::NewtonNonConvergence { u, residual: rnorm })?;
            let mut lambda = 1.0;
            loop {
                let mut trial = psi;
                for i in 1..=n {
                    trial[i] = psi[i] + lambda * delta[i - 1];
                }
                let accepted = match residual(&trial) {
                    Ok((rt, jt)) => {
                        let tn = linalg::max_abs(&rt, n);
                        if tn < rnorm || lambda < 1e-6 {
                            psi = trial;
                            r = rt;
                            jets = jt;
                            rnorm = tn;
                            true
                        } else {
                            false
                        }
                    }
                    Err(e) if lambda < 1e-6 => return Err(e),
                    Err(_) => false,
                };
                if accepted {
                    break;
                }
                lambda *= 0.5;
            }
        }
        if rnorm <= tol {
            let mut out = psi;
            out[0] = if u > 0.0 { u / jets.b.value } else { u };
            return Ok(out);
        }
        Err(Error::NewtonNonConvergence { u, residual: rnorm })
    }

    /// Drift and diffusion of `(U, V)` at offset state `s`.
    pub fn transformed_coeffs(&self, s: &Vector) -> Result<TransformedCoeffs> {
        let jets = self.jets(s)?;
        let p = self.physical(s);
        Ok(self.coeffs_with(&jets, s, &self.field.drift(&p), &self.field.sigma(&p)))
    }

    /// Physical point `(a_k + x, y)`.
    pub fn physical(&self, s: &Vector) -> Vector {
        let mut p = *s;
        p[0] = self.center + s[0];
        p
    }

    /// [`transformed_coeffs`](Self::transformed_coeffs) with precomputed jets and
    /// physical coefficients `b(p)`, `σ(p)`.
    pub fn coeffs_with(&self, jets: &LocalJets, s: &Vector, b: &Vector, sigma: &NoiseMatrix) -> TransformedCoeffs {
        let dims = self.field.dims();
        let (n, m) = (dims.n, dims.m);
        let gram = linalg::gram(sigma, n + 1, m);
        let x = s[0];
        let right = x > 0.0;
        let ind = if right { 1.0 } else { 0.0 };
        let xp = if right { x } else { 0.0 };
        let bf = &jets.b;
        let th = &jets.theta;

        let mut phi = (bf.value - 1.0) * b[0] * ind;
        for i in 1..=n {
            phi += bf.grad[i] * (xp * b[i] + gram[0][i] * ind);
            for j in 1..=n {
                phi += 0.5 * xp * bf.hess[i][j] * gram[i][j];
            }
        }
        let mut phi_l = [0.0; linalg::MAX_NOISE];
        for l in 0..m {
            let mut acc = (bf.value - 1.0) * ind * sigma[0][l];
            for i in 1..=n {
                acc += xp * bf.grad[i] * sigma[i][l];
            }
            phi_l[l] = acc;
        }

        let mut psi = ZERO;
        let mut psi_l = ZERO_NOISE;
        let mut drift = ZERO;
        let mut diffusion = ZERO_NOISE;
        drift[0] = b[0] + phi;
        for l in 0..m {
            diffusion[0][l] = sigma[0][l] + phi_l[l];
        }
        for i in 1..=n {
            let mut ps = 0.0;
            let mut ito = 0.0;
            for j in 1..=n {
                ps -= x * th.grad[i][j] * b[j];
                ito += th.grad[i][j] * gram[0][j];
                for k in 1..=n {
                    ps -= 0.5 * x * th.hess[i][j][k] * gram[j][k];
                }
            }
            psi[i] = ps;
            drift[i] = b[i] - th.value[i] * b[0] - ito + ps;
            for l in 0..m {
                let mut pl = 0.0;
                for j in 1..=n {
                    pl -= x * th.grad[i][j] * sigma[j][l];
                }
                psi_l[i][l] = pl;
                diffusion[i][l] = sigma[i][l] - th.value[i] * sigma[0][l] + pl;
            }
        }
        TransformedCoeffs { drift, diffusion, phi, phi_l, psi, psi_l }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_scenario, Density, ScenarioSpec};
    use alloc::vec;

    fn constant_2d(beta: f64, theta: f64) -> CoefficientField {
        build_scenario(&ScenarioSpec::Constant {
            n: 1,
            m: 2,
            b: vec![0.4, -0.2],
            sigma: vec![vec![1.0, 0.0], vec![0.3, 0.8]],
            beta,
            theta: vec![theta],
            density: Density::default(),
        })
        .unwrap()
    }

    fn skew(beta: f64) -> CoefficientField {
        build_scenario(&ScenarioSpec::OnedSkew { b: 0.0, sigma: 1.0, beta, density: Density::default() }).unwrap()
    }

    #[test]
    fn b_factor_values() {
        let y = ZERO;
        let f = skew(0.0);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        assert_eq!(c.b_factor(&y).unwrap(), 1.0);
        let f = skew(0.5);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        assert!((c.b_factor(&y).unwrap() - 0.95 / 1.05).abs() < 1e-15);
        let f = skew(-0.5);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        assert!((c.b_factor(&y).unwrap() - 1.05 / 0.95).abs() < 1e-15);
        let f = skew(20.0);
        assert!(matches!(
            StripChart::with_center(&f, 0, 0.0, 0.1),
            Err(Error::Smallness { .. })
        ));
    }

    #[test]
    fn forward_examples() {
        let f = constant_2d(0.5, 0.2);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        let w = c.forward(&[-0.3, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w[0], -0.3);
        assert!((w[1] - (1.0 + 0.3 * 0.2)).abs() < 1e-15);
        let w = c.forward(&[0.05, 1.0, 0.0, 0.0]).unwrap();
        assert!((w[0] - 0.05 * 0.95 / 1.05).abs() < 1e-15);
        assert!((w[1] - 0.99).abs() < 1e-15);
        let w = c.forward(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!((w[0], w[1]), (0.0, 1.0));
    }

    #[test]
    fn inverse_constant_theta_is_linear() {
        let f = constant_2d(0.5, 0.2);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        let s = c.inverse(&[-0.3, 0.99, 0.0, 0.0]).unwrap();
        assert_eq!(s[0], -0.3);
        assert!((s[1] - (0.99 - 0.3 * 0.2)).abs() < 1e-14);
        let s = c.inverse(&[0.0, 0.7, 0.0, 0.0]).unwrap();
        assert_eq!((s[0], s[1]), (0.0, 0.7));
    }

    #[test]
    fn inert_membranes_leave_coefficients_unchanged() {
        let f = constant_2d(0.0, 0.0);
        let c = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        for &x in &[-0.05, 0.0, 0.07] {
            let t = c.transformed_coeffs(&[x, 0.3, 0.0, 0.0]).unwrap();
            assert_eq!(t.phi, 0.0);
            assert!(t.phi_l.iter().all(|&v| v == 0.0));
            assert_eq!(t.psi[1], 0.0);
            assert_eq!(t.drift[0], 0.4);
            assert_eq!(t.drift[1], -0.2);
            assert_eq!(t.diffusion[1][1], 0.8);
        }
    }

    #[test]
    fn membrane_point_has_no_corrections() {
        let f = build_scenario(&ScenarioSpec::named("fig2").unwrap()).unwrap();
        let c = StripChart::with_center(&f, 20, 1.0, 0.05).unwrap();
        let t = c.transformed_coeffs(&[0.0, 0.4, 0.0, 0.0]).unwrap();
        assert_eq!(t.phi, 0.0);
        assert_eq!(t.psi[1], 0.0);
        assert_eq!(t.psi_l[1][0], 0.0);
    }

    #[test]
    fn right_side_scalar_coefficients_scale_by_b() {
        let f = build_scenario(&ScenarioSpec::OnedSkew { b: 0.3, sigma: 1.0, beta: 0.4, density: Density::default() })
            .unwrap();
        let c = StripChart::with_center(&f, 0, 0.0, 0.2).unwrap();
        let b = c.b_factor(&ZERO).unwrap();
        let t = c.transformed_coeffs(&[0.05, 0.0, 0.0, 0.0]).unwrap();
        assert!((t.drift[0] - 0.3 * b).abs() < 1e-15);
        assert!((t.diffusion[0][0] - b).abs() < 1e-15);
        let t = c.transformed_coeffs(&[-0.05, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.drift[0], 0.3);
        assert_eq!(t.diffusion[0][0], 1.0);
    }

    #[test]
    fn fig2_round_trip() {
        let f = build_scenario(&ScenarioSpec::named("fig2").unwrap()).unwrap();
        let layout = MembraneLayout::new(0.05, Density::default(), 1000).unwrap();
        for k in [-40i64, -7, 3, 25] {
            let c = StripChart::new(&f, &layout, k).unwrap();
            for &y in &[-1.5, -0.6, 0.5, 0.9, 2.0] {
                for &x in &[-0.05, -0.02, 0.0, 0.01, 0.049] {
                    let s = [x, y, 0.0, 0.0];
                    let w = c.forward(&s).unwrap();
                    let back = c.inverse(&w).unwrap();
                    let again = c.forward(&back).unwrap();
                    assert!((again[0] - w[0]).abs() <= 1e-10 && (again[1] - w[1]).abs() <= 1e-10);
                    assert!((back[0] - x).abs() < 1e-10 && (back[1] - y).abs() < 1e-10);
                }
            }
        }
    }
}

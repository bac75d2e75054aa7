//! Scenario coefficient fields and assumption checks.
//!
//! A field bundles the drift `b`, diffusion `σ`, membrane skewness `β`,
//! penetration direction `θ` and membrane density `d`. Points are
//! [`Vector`]s with the normal coordinate at index 0; `θ` is stored at
//! indices `1..=n` so that the exit direction reads `(1, θ)` directly.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, NoiseMatrix, Vector, MAX_DIM, MAX_NOISE, ZERO, ZERO_MATRIX, ZERO_NOISE};

/// Tangential dimension `n` and number of drivers `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

impl Dims {
    /// State dimension `1 + n`.
    pub fn dim(&self) -> usize {
        1 + self.n
    }
}

/// Value, gradient and Hessian of a scalar in the tangential variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: Vector,
    pub hess: Matrix,
}

/// Jet of a vector field in the tangential variables: `grad[i][j] = ∂_j v^i`,
/// `hess[i][j][k] = ∂_j ∂_k v^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorJet {
    pub value: Vector,
    pub grad: Matrix,
    pub hess: [Matrix; MAX_DIM],
}

const JET_STEP: f64 = 1e-5;
const SLOPE_STEP: f64 = 1e-6;

/// Membrane density `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Density {
    Constant { value: f64 },
    /// `base + amp · sin x`.
    Sine { base: f64, amp: f64 },
    /// `max(x, 0)`; violates the uniform positivity requirement.
    PositivePart,
    /// Piecewise linear through `(xs[i], values[i])`, constant beyond the ends.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

impl Default for Density {
    fn default() -> Self {
        Density::Constant { value: 1.0 }
    }
}

impl Density {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Density::Constant { value } => *value,
            Density::Sine { base, amp } => base + amp * libm::sin(x),
            Density::PositivePart => x.max(0.0),
            Density::Table { xs, values } => interp1(xs, values, x),
        }
    }

    /// `d'(x)`, closed form where available and a central difference otherwise.
    pub fn slope(&self, x: f64) -> f64 {
        match self {
            Density::Constant { .. } => 0.0,
            Density::Sine { amp, .. } => amp * libm::cos(x),
            _ => (self.value(x + SLOPE_STEP) - self.value(x - SLOPE_STEP)) / (2.0 * SLOPE_STEP),
        }
    }

    /// `A(x) = ∫₀^x d(s) ds`.
    pub fn primitive(&self, x: f64) -> Result<f64> {
        match self {
            Density::Constant { value } => Ok(value * x),
            Density::Sine { base, amp } => Ok(base * x + amp * (1.0 - libm::cos(x))),
            Density::PositivePart => Ok(0.5 * x.max(0.0) * x.max(0.0)),
            Density::Table { .. } => {
                crate::quadrature::adaptive_simpson(|s| self.value(s), 0.0, x, crate::membranes::QUAD_TOL)
            }
        }
    }

    /// `A⁻¹(x)`: the abscissa `s` with `∫₀^s d = x`.
    ///
    /// Membranes sit at `A(εk)`, so the local spacing near `x` is `ε·d(A⁻¹(x))`.
    pub fn preimage(&self, x: f64) -> Result<f64> {
        if let Density::Constant { value } = self {
            return Ok(x / value);
        }
        let target = |s: f64| -> Result<f64> { Ok(self.primitive(s)? - x) };
        let tol = 1e-13 * (1.0 + x.abs());
        let mut step = 1.0 + x.abs();
        let (mut lo, mut hi) = (-step, step);
        while target(lo)? > 0.0 {
            lo -= step;
            step *= 2.0;
            if !lo.is_finite() || step > 1e300 {
                return Err(Error::Domain("density primitive is bounded"));
            }
        }
        step = 1.0 + x.abs();
        while target(hi)? < 0.0 {
            hi += step;
            step *= 2.0;
            if !hi.is_finite() || step > 1e300 {
                return Err(Error::Domain("density primitive is bounded"));
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = target(s)?;
            if r.abs() <= tol {
                return Ok(s);
            }
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.value(s);
            let newton = s - r / d;
            s = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * (1.0 + s.abs()) {
                return Ok(s);
            }
        }
        Err(Error::Domain("density preimage did not converge"))
    }

    /// Local membrane density `d(A⁻¹(x))` at physical abscissa `x`.
    pub fn local_value(&self, x: f64) -> Result<f64> {
        match self {
            Density::Constant { value } => Ok(*value),
            _ => Ok(self.value(self.preimage(x)?)),
        }
    }

    fn check(&self) -> Result<()> {
        if let Density::Table { xs, values } = self {
            if xs.len() != values.len() || xs.is_empty() {
                return Err(Error::DimensionMismatch(format!(
                    "density table has {} abscissas and {} values",
                    xs.len(),
                    values.len()
                )));
            }
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain("density table abscissas must increase"));
            }
        }
        Ok(())
    }
}

fn interp1(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[last] {
        return values[last];
    }
    let i = xs.partition_point(|&p| p <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + t * (values[i + 1] - values[i])
}

/// Spatially constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField {
    pub dims: Dims,
    pub b: Vector,
    pub sigma: NoiseMatrix,
    pub beta: f64,
    pub theta: Vector,
    pub density: Density,
}

/// The rotating example: `b = (−y, x)`, `σ = I`, `d ≡ 1`,
/// `β = 2y³/(γ+y²)` and `θ = −x³y/((γ²+x²)(γ+y²))`, with `β` and `θ`
/// smoothly cut off between radius `r_trunc` and `r_trunc + width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Field {
    pub gamma: f64,
    pub r_trunc: f64,
    pub width: f64,
}

/// Coefficients sampled on a tensor grid, multilinearly interpolated and
/// clamped outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableField {
    pub dims: Dims,
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    stride: usize,
    pub density: Density,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientField {
    Constant(ConstantField),
    Fig2(Fig2Field),
    Table(TableField),
}

/// One node of a tabulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableNode {
    pub b: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(default)]
    pub theta: Vec<f64>,
}

fn default_gamma() -> f64 {
    1e-2
}
fn default_r_trunc() -> f64 {
    10.0
}
fn default_width() -> f64 {
    2.0
}
fn default_one() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}

/// Serializable scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    Constant {
        n: usize,
        m: usize,
        b: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        beta: f64,
        #[serde(default)]
        theta: Vec<f64>,
        #[serde(default)]
        density: Density,
    },
    Fig2 {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_r_trunc")]
        r_trunc: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    OnedSkew {
        #[serde(default)]
        b: f64,
        #[serde(default = "default_one")]
        sigma: f64,
        #[serde(default = "default_half")]
        beta: f64,
        #[serde(default)]
        density: Density,
    },
    Table {
        n: usize,
        m: usize,
        axes: Vec<Vec<f64>>,
        nodes: Vec<TableNode>,
        #[serde(default)]
        density: Density,
    },
}

impl ScenarioSpec {
    /// Built-in scenario with default parameters.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "fig2" => Ok(ScenarioSpec::Fig2 {
                gamma: default_gamma(),
                r_trunc: default_r_trunc(),
                width: default_width(),
            }),
            "oned-skew" => Ok(ScenarioSpec::OnedSkew {
                b: 0.0,
                sigma: 1.0,
                beta: 0.5,
                density: Density::default(),
            }),
            "constant" => Ok(ScenarioSpec::Constant {
                n: 0,
                m: 1,
                b: vec![0.0],
                sigma: vec![vec![1.0]],
                beta: 0.0,
                theta: Vec::new(),
                density: Density::default(),
            }),
            other => Err(Error::UnknownScenario(String::from(other))),
        }
    }
}

fn check_dims(n: usize, m: usize) -> Result<Dims> {
    if 1 + n > MAX_DIM || m > MAX_NOISE || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "n = {n}, m = {m} outside supported range n <= {}, 1 <= m <= {MAX_NOISE}",
            MAX_DIM - 1
        )));
    }
    Ok(Dims { n, m })
}

fn fill_vector(name: &str, src: &[f64], len: usize, offset: usize) -> Result<Vector> {
    if src.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} entries, expected {len}",
            src.len()
        )));
    }
    let mut out = ZERO;
    out[offset..offset + len].copy_from_slice(src);
    Ok(out)
}

fn fill_sigma(src: &[Vec<f64>], dims: Dims) -> Result<NoiseMatrix> {
    if src.len() != dims.dim() || src.iter().any(|row| row.len() != dims.m) {
        return Err(Error::DimensionMismatch(format!(
            "sigma must be {} x {}",
            dims.dim(),
            dims.m
        )));
    }
    let mut out = ZERO_NOISE;
    for (i, row) in src.iter().enumerate() {
        out[i][..dims.m].copy_from_slice(row);
    }
    Ok(out)
}

/// Builds a coefficient field from its description.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<CoefficientField> {
    match spec {
        ScenarioSpec::Constant { n, m, b, sigma, beta, theta, density } => {
            let dims = check_dims(*n, *m)?;
            density.check()?;
            Ok(CoefficientField::Constant(ConstantField {
                dims,
                b: fill_vector("b", b, dims.dim(), 0)?,
                sigma: fill_sigma(sigma, dims)?,
                beta: *beta,
                theta: fill_vector("theta", theta, dims.n, 1)?,
                density: density.clone(),
            }))
        }
        ScenarioSpec::Fig2 { gamma, r_trunc, width } => {
            if !(*gamma > 0.0 && *r_trunc > 0.0 && *width > 0.0) {
                return Err(Error::Domain("fig2 parameters must be positive"));
            }
            Ok(CoefficientField::Fig2(Fig2Field { gamma: *gamma, r_trunc: *r_trunc, width: *width }))
        }
        ScenarioSpec::OnedSkew { b, sigma, beta, density } => {
            density.check()?;
            let mut s = ZERO_NOISE;
            s[0][0] = *sigma;
            let mut drift = ZERO;
            drift[0] = *b;
            Ok(CoefficientField::Constant(ConstantField {
                dims: Dims { n: 0, m: 1 },
                b: drift,
                sigma: s,
                beta: *beta,
                theta: ZERO,
                density: density.clone(),
            }))
        }
        ScenarioSpec::Table { n, m, axes, nodes, density } => {
            let dims = check_dims(*n, *m)?;
            density.check()?;
            if axes.len() != dims.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "{} axes supplied for state dimension {}",
                    axes.len(),
                    dims.dim()
                )));
            }
            for axis in axes {
                if axis.len() < 2 || axis.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Domain("table axes need at least two increasing nodes"));
                }
            }
            let count: usize = axes.iter().map(Vec::len).product();
            if nodes.len() != count {
                return Err(Error::DimensionMismatch(format!(
                    "{} nodes supplied, grid has {count}",
                    nodes.len()
                )));
            }
            let dim = dims.dim();
            let stride = dim + dim * dims.m + 1 + dims.n;
            let mut values = Vec::with_capacity(count * stride);
            for node in nodes {
                let b = fill_vector("b", &node.b, dim, 0)?;
                let s = fill_sigma(&node.sigma, dims)?;
                let th = fill_vector("theta", &node.theta, dims.n, 1)?;
                values.extend_from_slice(&b[..dim]);
                for row in s.iter().take(dim) {
                    values.extend_from_slice(&row[..dims.m]);
                }
                values.push(node.beta);
                values.extend_from_slice(&th[1..=dims.n]);
            }
            Ok(CoefficientField::Table(TableField {
                dims,
                axes: axes.clone(),
                values,
                stride,
                density: density.clone(),
            }))
        }
    }
}

fn smootherstep_cutoff(r: f64, r0: f64, w: f64) -> (f64, f64, f64) {
    let t = (r - r0) / w;
    if t <= 0.0 {
        (1.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        let dds = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
        (1.0 - s, -ds / w, -dds / (w * w))
    }
}

impl Fig2Field {
    /// Cut-off multiplier and its first two `y`-derivatives.
    fn cutoff(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let r = libm::sqrt(x * x + y * y);
        let (c, cr, crr) = smootherstep_cutoff(r, self.r_trunc, self.width);
        if r == 0.0 || (cr == 0.0 && crr == 0.0) {
            return (c, 0.0, 0.0);
        }
        let ry = y / r;
        let ryy = x * x / (r * r * r);
        (c, cr * ry, crr * ry * ry + cr * ryy)
    }

    fn beta_raw(&self, y: f64) -> (f64, f64, f64) {
        let g = self.gamma;
        let q = g + y * y;
        let v = 2.0 * y * y * y / q;
        let d1 = 2.0 * y * y * (3.0 * g + y * y) / (q * q);
        let d2 = 4.0 * g * y * (3.0 * g - y * y) / (q * q * q);
        (v, d1, d2)
    }

    fn theta_raw(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let g = self.gamma;
        let c = -x * x * x / (g * g + x * x);
        let q = g + y * y;
        let h = y / q;
        let h1 = (g - y * y) / (q * q);
        let h2 = 2.0 * y * (y * y - 3.0 * g) / (q * q * q);
        (c * h, c * h1, c * h2)
    }

    fn truncate(raw: (f64, f64, f64), cut: (f64, f64, f64)) -> (f64, f64, f64) {
        let (f, f1, f2) = raw;
        let (c, c1, c2) = cut;
        (f * c, f1 * c + f * c1, f2 * c + 2.0 * f1 * c1 + f * c2)
    }

    fn beta_y(&self, x: f64, y: f64) -> (f64, f64, f64) {
        Self::truncate(self.beta_raw(y), self.cutoff(x, y))
    }

    fn theta_y(&self, x: f64, y: f64) -> (f64, f64, f64) {
        Self::truncate(self.theta_raw(x, y), self.cutoff(x, y))
    }
}

impl TableField {
    /// Interpolated node payload at `p`.
    fn payload(&self, p: &Vector, out: &mut [f64]) {
        let dim = self.dims.dim();
        let mut cell = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..dim {
            let axis = &self.axes[a];
            let last = axis.len() - 1;
            let q = p[a];
            if q <= axis[0] {
                cell[a] = 0;
                frac[a] = 0.0;
            } else if q >= axis[last] {
                cell[a] = last - 1;
                frac[a] = 1.0;
            } else {
                let i = axis.partition_point(|&v| v <= q) - 1;
                cell[a] = i;
                frac[a] = (q - axis[i]) / (axis[i + 1] - axis[i]);
            }
        }
        out[..self.stride].iter_mut().for_each(|v| *v = 0.0);
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for a in 0..dim {
                let up = (corner >> a) & 1;
                weight *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.axes[a].len() + cell[a] + up;
            }
            if weight == 0.0 {
                continue;
            }
            let base = flat * self.stride;
            for (o, v) in out[..self.stride].iter_mut().zip(&self.values[base..base + self.stride]) {
                *o += weight * v;
            }
        }
    }
}

const MAX_PAYLOAD: usize = MAX_DIM + MAX_DIM * MAX_NOISE + 1 + MAX_DIM;

impl CoefficientField {
    pub fn dims(&self) -> Dims {
        match self {
            CoefficientField::Constant(c) => c.dims,
            CoefficientField::Fig2(_) => Dims { n: 1, m: 2 },
            CoefficientField::Table(t) => t.dims,
        }
    }

    pub fn drift(&self, p: &Vector) -> Vector {
        match self {
            CoefficientField::Constant(c) => c.b,
            CoefficientField::Fig2(_) => [-p[1], p[0], 0.0, 0.0],
            CoefficientField::Table(t) => {
                let mut buf = [0.0; MAX_PAYLOAD];
                t.payload(p, &mut buf);
                let mut out = ZERO;
                out[..t.dims.dim()].copy_from_slice(&buf[..t.dims.dim()]);
                out
            }
        }
    }

    pub fn sigma(&self, p: &Vector) -> NoiseMatrix {
        match self {
            CoefficientField::Constant(c) => c.sigma,
            CoefficientField::Fig2(_) => {
                let mut s = ZERO_NOISE;
                s[0][0] = 1.0;
                s[1][1] = 1.0;
                s
            }
            CoefficientField::Table(t) => {
                let mut buf = [0.0; MAX_PAYLOAD];
                t.payload(p, &mut buf);
                let (dim, m) = (t.dims.dim(), t.dims.m);
                let mut s = ZERO_NOISE;
                for (i, row) in s.iter_mut().take(dim).enumerate() {
                    row[..m].copy_from_slice(&buf[dim + i * m..dim + (i + 1) * m]);
                }
                s
            }
        }
    }

    pub fn beta(&self, p: &Vector) -> f64 {
        match self {
            CoefficientField::Constant(c) => c.beta,
            CoefficientField::Fig2(f) => f.beta_y(p[0], p[1]).0,
            CoefficientField::Table(t) => {
                let mut buf = [0.0; MAX_PAYLOAD];
                t.payload(p, &mut buf);
                let dim = t.dims.dim();
                buf[dim + dim * t.dims.m]
            }
        }
    }

    /// `θ` at indices `1..=n`; index 0 is zero.
    pub fn theta(&self, p: &Vector) -> Vector {
        match self {
            CoefficientField::Constant(c) => c.theta,
            CoefficientField::Fig2(f) => [0.0, f.theta_y(p[0], p[1]).0, 0.0, 0.0],
            CoefficientField::Table(t) => {
                let mut buf = [0.0; MAX_PAYLOAD];
                t.payload(p, &mut buf);
                let dim = t.dims.dim();
                let start = dim + dim * t.dims.m + 1;
                let mut out = ZERO;
                out[1..=t.dims.n].copy_from_slice(&buf[start..start + t.dims.n]);
                out
            }
        }
    }

    pub fn density_fn(&self) -> Density {
        match self {
            CoefficientField::Constant(c) => c.density.clone(),
            CoefficientField::Fig2(_) => Density::default(),
            CoefficientField::Table(t) => t.density.clone(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            CoefficientField::Constant(c) => c.density.value(x),
            CoefficientField::Fig2(_) => 1.0,
            CoefficientField::Table(t) => t.density.value(x),
        }
    }

    pub fn density_slope(&self, x: f64) -> f64 {
        match self {
            CoefficientField::Constant(c) => c.density.slope(x),
            CoefficientField::Fig2(_) => 0.0,
            CoefficientField::Table(t) => t.density.slope(x),
        }
    }

    /// `Σ = σσᵀ` at `p`.
    pub fn gram(&self, p: &Vector) -> Matrix {
        let d = self.dims();
        linalg::gram(&self.sigma(p), d.dim(), d.m)
    }

    /// `β` and its derivatives in `y` at fixed `x = p[0]`.
    pub fn beta_jet(&self, p: &Vector) -> ScalarJet {
        match self {
            CoefficientField::Constant(c) => ScalarJet { value: c.beta, grad: ZERO, hess: ZERO_MATRIX },
            CoefficientField::Fig2(f) => {
                let (v, d1, d2) = f.beta_y(p[0], p[1]);
                let mut grad = ZERO;
                let mut hess = ZERO_MATRIX;
                grad[1] = d1;
                hess[1][1] = d2;
                ScalarJet { value: v, grad, hess }
            }
            CoefficientField::Table(_) => {
                let n = self.dims().n;
                let f = |q: &Vector| self.beta(q);
                let (value, grad, hess) = fd_jet(&f, p, n);
                ScalarJet { value, grad, hess }
            }
        }
    }

    /// `θ` and its derivatives in `y` at fixed `x = p[0]`.
    pub fn theta_jet(&self, p: &Vector) -> VectorJet {
        match self {
            CoefficientField::Constant(c) => VectorJet {
                value: c.theta,
                grad: ZERO_MATRIX,
                hess: [ZERO_MATRIX; MAX_DIM],
            },
            CoefficientField::Fig2(f) => {
                let (v, d1, d2) = f.theta_y(p[0], p[1]);
                let mut jet = VectorJet { value: ZERO, grad: ZERO_MATRIX, hess: [ZERO_MATRIX; MAX_DIM] };
                jet.value[1] = v;
                jet.grad[1][1] = d1;
                jet.hess[1][1][1] = d2;
                jet
            }
            CoefficientField::Table(_) => {
                let n = self.dims().n;
                let mut jet = VectorJet {
                    value: self.theta(p),
                    grad: ZERO_MATRIX,
                    hess: [ZERO_MATRIX; MAX_DIM],
                };
                for i in 1..=n {
                    let f = |q: &Vector| self.theta(q)[i];
                    let (_, g, h) = fd_jet(&f, p, n);
                    jet.grad[i] = g;
                    jet.hess[i] = h;
                }
                jet
            }
        }
    }
}

/// Central-difference jet of `f` in coordinates `1..=n`.
fn fd_jet<F: Fn(&Vector) -> f64>(f: &F, p: &Vector, n: usize) -> (f64, Vector, Matrix) {
    let h = JET_STEP;
    let f0 = f(p);
    let mut grad = ZERO;
    let mut hess = ZERO_MATRIX;
    for j in 1..=n {
        let mut a = *p;
        let mut b = *p;
        a[j] += h;
        b[j] -= h;
        let (fa, fb) = (f(&a), f(&b));
        grad[j] = (fa - fb) / (2.0 * h);
        hess[j][j] = (fa - 2.0 * f0 + fb) / (h * h);
        for k in j + 1..=n {
            let mut pp = *p;
            let mut pm = *p;
            let mut mp = *p;
            let mut mm = *p;
            pp[j] += h;
            pp[k] += h;
            pm[j] += h;
            pm[k] -= h;
            mp[j] -= h;
            mp[k] += h;
            mm[j] -= h;
            mm[k] -= h;
            let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
            hess[j][k] = v;
            hess[k][j] = v;
        }
    }
    (f0, grad, hess)
}

/// `Σ(p) = σ(p)σ(p)ᵀ`.
pub fn sigma_gram(field: &CoefficientField, p: &Vector) -> Result<Matrix> {
    if !linalg::all_finite(p, field.dims().dim()) {
        return Err(Error::NonFinite("sigma_gram point"));
    }
    Ok(field.gram(p))
}

/// Regular tensor grid on which assumptions are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl SamplingGrid {
    /// Cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, points_per_axis: usize) -> Self {
        SamplingGrid { lo: vec![lo; dim], hi: vec![hi; dim], points_per_axis }
    }

    pub fn describe(&self) -> String {
        let ranges: Vec<String> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        format!("{} x {} points per axis", ranges.join(" x "), self.points_per_axis)
    }

    fn points(&self) -> Vec<Vector> {
        let dim = self.lo.len();
        let k = self.points_per_axis;
        let total = k.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut p = ZERO;
            let mut rest = flat;
            for a in (0..dim).rev() {
                let idx = rest % k;
                rest /= k;
                p[a] = if k == 1 {
                    0.5 * (self.lo[a] + self.hi[a])
                } else {
                    self.lo[a] + (self.hi[a] - self.lo[a]) * idx as f64 / (k - 1) as f64
                };
            }
            out.push(p);
        }
        out
    }
}

/// Pass thresholds for [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationThresholds {
    /// `d` must exceed this everywhere on the grid.
    pub min_density: f64,
    /// The smallest eigenvalue of `Σ` must exceed this everywhere on the grid.
    pub min_eigenvalue: f64,
    /// Finite-difference derivative sup-norms must stay below this.
    pub max_derivative: f64,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        ValidationThresholds { min_density: 0.0, min_eigenvalue: 0.0, max_derivative: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub witnesses: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid: String,
    pub checks: Vec<AssumptionCheck>,
    pub d_min: f64,
    pub d_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma00_max: f64,
    pub first_derivative_sup: f64,
    pub second_derivative_sup: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "grid: {}", self.grid)?;
        writeln!(f, "d in [{:.6e}, {:.6e}]", self.d_min, self.d_max)?;
        writeln!(f, "eig(Sigma) in [{:.6e}, {:.6e}]", self.lambda_min, self.lambda_max)?;
        writeln!(f, "max Sigma00 = {:.6e}", self.sigma00_max)?;
        writeln!(
            f,
            "derivative sup-norms: first {:.6e}, second {:.6e}",
            self.first_derivative_sup, self.second_derivative_sup
        )?;
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            write!(f, "{status} {}: measured {:.6e}, threshold {:.6e}", c.name, c.measured, c.threshold)?;
            if let Some(w) = c.witnesses.first() {
                write!(f, ", witness {w:?}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

const MAX_WITNESSES: usize = 8;

fn components(field: &CoefficientField, p: &Vector, out: &mut [f64; MAX_PAYLOAD]) -> usize {
    let d = field.dims();
    let dim = d.dim();
    let mut k = 0;
    let b = field.drift(p);
    let s = field.sigma(p);
    let th = field.theta(p);
    for v in &b[..dim] {
        out[k] = *v;
        k += 1;
    }
    for row in s.iter().take(dim) {
        for v in &row[..d.m] {
            out[k] = *v;
            k += 1;
        }
    }
    out[k] = field.beta(p);
    k += 1;
    for v in &th[1..=d.n] {
        out[k] = *v;
        k += 1;
    }
    k
}

/// Checks uniform density positivity, uniform ellipticity and bounded
/// finite-difference derivatives on every grid point.
pub fn validate_assumptions(
    field: &CoefficientField,
    grid: &SamplingGrid,
    thresholds: &ValidationThresholds,
) -> Result<ValidationReport> {
    let dims = field.dims();
    let dim = dims.dim();
    if grid.lo.len() != dim || grid.hi.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "grid has dimension {}, field has {dim}",
            grid.lo.len()
        )));
    }
    if grid.points_per_axis == 0 || grid.lo.iter().chain(&grid.hi).any(|v| !v.is_finite()) {
        return Err(Error::Domain("grid must be non-empty and finite"));
    }

    let mut d_min = f64::INFINITY;
    let mut d_max = f64::NEG_INFINITY;
    let mut lam_min = f64::INFINITY;
    let mut lam_max = f64::NEG_INFINITY;
    let mut s00_max: f64 = 0.0;
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    let mut w_density = Vec::new();
    let mut w_sigma = Vec::new();
    let mut w_coeff = Vec::new();

    let witness = |p: &Vector| p[..dim].to_vec();
    let mut base = [0.0; MAX_PAYLOAD];
    let mut plus = [0.0; MAX_PAYLOAD];
    let mut minus = [0.0; MAX_PAYLOAD];

    for p in grid.points() {
        let d = field.density(p[0]);
        d_min = d_min.min(d);
        d_max = d_max.max(d);
        if !(d > thresholds.min_density) && w_density.len() < MAX_WITNESSES {
            w_density.push(witness(&p));
        }

        let g = field.gram(&p);
        let ev = linalg::symmetric_eigenvalues(&g, dim);
        let (lo, hi) = ev[..dim]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        lam_min = lam_min.min(lo);
        lam_max = lam_max.max(hi);
        s00_max = s00_max.max(g[0][0]);
        if !(lo > thresholds.min_eigenvalue) && w_sigma.len() < MAX_WITNESSES {
            w_sigma.push(witness(&p));
        }

        let count = components(field, &p, &mut base);
        let mut local_first: f64 = 0.0;
        let mut local_second: f64 = 0.0;
        let mut finite = true;
        for a in 0..dim {
            let h = 1e-4 * (1.0 + p[a].abs());
            let mut pp = p;
            let mut pm = p;
            pp[a] += h;
            pm[a] -= h;
            components(field, &pp, &mut plus);
            components(field, &pm, &mut minus);
            for c in 0..count {
                let d1 = (plus[c] - minus[c]) / (2.0 * h);
                let d2 = (plus[c] - 2.0 * base[c] + minus[c]) / (h * h);
                finite &= d1.is_finite() && d2.is_finite();
                local_first = local_first.max(d1.abs());
                local_second = local_second.max(d2.abs());
            }
        }
        if !finite {
            local_first = f64::INFINITY;
            local_second = f64::INFINITY;
        }
        first = first.max(local_first);
        second = second.max(local_second);
        if !(local_first.max(local_second) <= thresholds.max_derivative) && w_coeff.len() < MAX_WITNESSES {
            w_coeff.push(witness(&p));
        }
    }

    let checks = vec![
        AssumptionCheck {
            name: String::from("A_a"),
            passed: w_density.is_empty(),
            measured: d_min,
            threshold: thresholds.min_density,
            witnesses: w_density,
        },
        AssumptionCheck {
            name: String::from("A_Sigma"),
            passed: w_sigma.is_empty(),
            measured: lam_min,
            threshold: thresholds.min_eigenvalue,
            witnesses: w_sigma,
        },
        AssumptionCheck {
            name: String::from("A_coeff"),
            passed: w_coeff.is_empty(),
            measured: first.max(second),
            threshold: thresholds.max_derivative,
            witnesses: w_coeff,
        },
    ];
    Ok(ValidationReport {
        grid: grid.describe(),
        checks,
        d_min,
        d_max,
        lambda_min: lam_min,
        lambda_max: lam_max,
        sigma00_max: s00_max,
        first_derivative_sup: first,
        second_derivative_sup: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> CoefficientField {
        build_scenario(&ScenarioSpec::named("fig2").unwrap()).unwrap()
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert_eq!(
            ScenarioSpec::named("nope"),
            Err(Error::UnknownScenario(String::from("nope")))
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = ScenarioSpec::Constant {
            n: 1,
            m: 2,
            b: vec![0.0],
            sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            beta: 0.0,
            theta: vec![0.0],
            density: Density::default(),
        };
        assert!(matches!(build_scenario(&spec), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn fig2_values_near_origin() {
        let f = fig2();
        let p = [0.0, 1.0, 0.0, 0.0];
        assert!((f.beta(&p) - 2.0 / 1.01).abs() < 1e-15);
        assert_eq!(f.theta(&p)[1], 0.0);
        assert_eq!(f.drift(&p)[0], -1.0);
        assert_eq!(f.density(3.7), 1.0);
    }

    #[test]
    fn fig2_is_cut_off_far_away() {
        let f = fig2();
        let p = [9.0, 9.0, 0.0, 0.0];
        assert_eq!(f.beta(&p), 0.0);
        assert_eq!(f.theta(&p)[1], 0.0);
    }

    #[test]
    fn fig2_closed_form_jets_match_differences() {
        let f = fig2();
        let h = 1e-6;
        for &(x, y) in &[(0.3, 0.2), (-1.0, 0.05), (2.0, -1.5), (8.0, 4.5), (1.0, 10.5)] {
            let p = [x, y, 0.0, 0.0];
            let up = [x, y + h, 0.0, 0.0];
            let dn = [x, y - h, 0.0, 0.0];
            let bj = f.beta_jet(&p);
            let fd1 = (f.beta(&up) - f.beta(&dn)) / (2.0 * h);
            assert!((bj.grad[1] - fd1).abs() < 1e-5 * (1.0 + fd1.abs()), "beta' at {p:?}");
            let g_up = f.beta_jet(&up).grad[1];
            let g_dn = f.beta_jet(&dn).grad[1];
            let fd2 = (g_up - g_dn) / (2.0 * h);
            assert!((bj.hess[1][1] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()), "beta'' at {p:?}");

            let tj = f.theta_jet(&p);
            let fd1 = (f.theta(&up)[1] - f.theta(&dn)[1]) / (2.0 * h);
            assert!((tj.grad[1][1] - fd1).abs() < 1e-5 * (1.0 + fd1.abs()), "theta' at {p:?}");
            let g_up = f.theta_jet(&up).grad[1][1];
            let g_dn = f.theta_jet(&dn).grad[1][1];
            let fd2 = (g_up - g_dn) / (2.0 * h);
            assert!((tj.hess[1][1][1] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()), "theta'' at {p:?}");
        }
    }

    #[test]
    fn table_reproduces_linear_field() {
        let axes = vec![vec![-1.0, 0.0, 2.0], vec![-1.0, 1.0]];
        let mut nodes = Vec::new();
        for &x in &axes[0] {
            for &y in &axes[1] {
                nodes.push(TableNode {
                    b: vec![x + y, 2.0 * x],
                    sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0 + 0.5 * y]],
                    beta: 0.3 * y,
                    theta: vec![x - y],
                });
            }
        }
        let spec = ScenarioSpec::Table { n: 1, m: 2, axes, nodes, density: Density::default() };
        let f = build_scenario(&spec).unwrap();
        let p = [0.7, 0.2, 0.0, 0.0];
        assert!((f.drift(&p)[0] - 0.9).abs() < 1e-14);
        assert!((f.drift(&p)[1] - 1.4).abs() < 1e-14);
        assert!((f.sigma(&p)[1][1] - 1.1).abs() < 1e-14);
        assert!((f.beta(&p) - 0.06).abs() < 1e-14);
        assert!((f.theta(&p)[1] - 0.5).abs() < 1e-14);
        let jet = f.beta_jet(&p);
        assert!((jet.grad[1] - 0.3).abs() < 1e-8);
        let tj = f.theta_jet(&p);
        assert!((tj.grad[1][1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn fig2_gram_is_identity() {
        let f = fig2();
        let g = sigma_gram(&f, &[1.3, -0.4, 0.0, 0.0]).unwrap();
        assert_eq!(g[0][0], 1.0);
        assert_eq!(g[1][1], 1.0);
        assert_eq!(g[0][1], 0.0);
    }

    #[test]
    fn fig2_validates_on_default_box() {
        let f = fig2();
        let grid = SamplingGrid::cube(2, -5.0, 5.0, 41);
        let report = validate_assumptions(&f, &grid, &ValidationThresholds::default()).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.d_min, 1.0);
        assert!((report.lambda_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_fails_ellipticity_with_witness() {
        let spec = ScenarioSpec::Constant {
            n: 0,
            m: 1,
            b: vec![0.0],
            sigma: vec![vec![0.0]],
            beta: 0.0,
            theta: Vec::new(),
            density: Density::default(),
        };
        let f = build_scenario(&spec).unwrap();
        let grid = SamplingGrid::cube(1, -1.0, 1.0, 5);
        let r = validate_assumptions(&f, &grid, &ValidationThresholds::default()).unwrap();
        let c = r.check("A_Sigma").unwrap();
        assert!(!c.passed);
        assert!(!c.witnesses.is_empty());
        assert!(r.check("A_a").unwrap().passed);
    }

    #[test]
    fn positive_part_density_fails_positivity() {
        let spec = ScenarioSpec::OnedSkew { b: 0.0, sigma: 1.0, beta: 0.5, density: Density::PositivePart };
        let f = build_scenario(&spec).unwrap();
        let grid = SamplingGrid::cube(1, -1.0, 1.0, 5);
        let r = validate_assumptions(&f, &grid, &ValidationThresholds::default()).unwrap();
        let c = r.check("A_a").unwrap();
        assert!(!c.passed);
        assert_eq!(r.d_min, 0.0);
        assert!(c.witnesses.iter().all(|w| w[0] <= 0.0));
    }

    #[test]
    fn sine_primitive_and_preimage() {
        let d = Density::Sine { base: 2.0, amp: 1.0 };
        for &s in &[-3.0, -0.1, 0.0, 0.1, 0.7, 5.0] {
            let a = d.primitive(s).unwrap();
            assert!((a - (2.0 * s + 1.0 - libm::cos(s))).abs() < 1e-15);
            assert!((d.preimage(a).unwrap() - s).abs() < 1e-12);
        }
        let table = Density::Table { xs: vec![-1.0, 1.0], values: vec![1.0, 3.0] };
        let a = table.primitive(0.5).unwrap();
        assert!((a - (2.0 * 0.5 + 0.5 * 0.25)).abs() < 1e-12);
        assert!((table.preimage(a).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn constant_inert_scenario() {
        let f = build_scenario(&ScenarioSpec::named("constant").unwrap()).unwrap();
        assert_eq!(f.beta(&[0.3, 0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn spec_round_trips_through_serde_names() {
        let spec = ScenarioSpec::named("oned-skew").unwrap();
        match build_scenario(&spec).unwrap() {
            CoefficientField::Constant(c) => {
                assert_eq!(c.dims, Dims { n: 0, m: 1 });
                assert_eq!(c.beta, 0.5);
            }
            _ => panic!("wrong variant"),
        }
    }
}

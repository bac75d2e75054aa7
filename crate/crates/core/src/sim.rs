//! Path simulation of the membrane system.
//!
//! A path is a sequence of strip episodes. An episode starts at (or near)
//! membrane `a_k`, runs in offset coordinates `x = X − a_k` and ends when
//! `X` reaches `a_{k−1}` or `a_{k+1}`; the next episode is centered on the
//! membrane that was hit. Boundary crossings between grid times are caught
//! with a Brownian-bridge test.
//!
//! Two step rules are available. [`Scheme::Transformed`] maps to the chart
//! coordinates, takes an Euler-Maruyama step of the local-time-free SDE and
//! maps back. [`Scheme::Bernoulli`] takes a plain Euler-Maruyama step of the
//! membrane-free diffusion and, whenever the step touches the membrane,
//! redraws the side with probabilities `½(1 ± εβ)` and shifts `y` along `θ`.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{NoiseMatrix, Vector, MAX_NOISE, ZERO};
use crate::membranes::MembraneLayout;
use crate::rng::{fill_normals, uniform};
use crate::transform::StripChart;

/// Step rule used inside a strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Transformed,
    Bernoulli,
}

/// Bridge crossing probabilities below `exp(−BRIDGE_CUTOFF)` are treated as zero.
const BRIDGE_CUTOFF: f64 = 36.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub epsilon: f64,
    /// Step size at `ε = 1`; the actual step is `dt_base · ε²`.
    pub dt_base: f64,
    pub scheme: Scheme,
    pub horizon: f64,
    /// Paths are stopped once any coordinate leaves `[−box, box]`.
    pub box_half_width: f64,
    pub seed: u64,
    pub path_count: usize,
    /// Upper bound on `ε|β|` at each chart center for the transformed scheme.
    pub smallness: f64,
    /// Keep every `record_stride`-th grid state in a [`PathSample`].
    pub record_stride: usize,
    /// A single strip exit taking longer than this multiple of `ε²` is an error.
    pub exit_horizon_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epsilon: 0.1,
            dt_base: 0.01,
            scheme: Scheme::Transformed,
            horizon: 1.0,
            box_half_width: 50.0,
            seed: 0,
            path_count: 1000,
            smallness: 0.25,
            record_stride: 1,
            exit_horizon_factor: 1e6,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        self.dt_base * self.epsilon * self.epsilon
    }

    fn smallness_limit(&self) -> f64 {
        match self.scheme {
            Scheme::Transformed => self.smallness,
            Scheme::Bernoulli => 1.0,
        }
    }

    /// Index capacity needed for the configured box.
    pub fn window_capacity(&self, d_min: f64) -> i64 {
        let strips = self.box_half_width / (self.epsilon * d_min.max(1e-12));
        strips.ceil().min(1e15) as i64 + 2 * crate::membranes::MARGIN_STRIPS + 2
    }
}

/// One arrival at a membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    /// Index of the membrane reached.
    pub k: i64,
    pub y: Vector,
    /// `+1` when the membrane reached lies to the right of the previous one.
    pub side: i8,
    /// Duration of the strip episode that ended here.
    pub sojourn: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSample {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub events: Vec<CrossingEvent>,
    /// Set when the path left the spatial box and was cut short.
    pub truncated: bool,
    /// Number of Euler-Maruyama steps taken.
    pub steps: u64,
}

impl PathSample {
    pub fn last_state(&self) -> Option<&Vector> {
        self.states.last()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Outcome of one strip crossing started on a membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub start_k: i64,
    /// `a_k`.
    pub start_x: f64,
    pub start_y: Vector,
    pub exit_side: i8,
    pub tau: f64,
    /// Physical exit point; `exit_state[0]` is `a_{k±1}`.
    pub exit_state: Vector,
    /// `sup_t |Y_t − y|²` over grid times and the exit point.
    pub sup_dy2: f64,
    /// Trapezoidal `∫₀^τ (X_t − a_k) dt`.
    pub x_integral: f64,
    /// Accumulated `Σ σ(p_j) ΔW_j` over the steps taken; mean zero.
    pub martingale: Vector,
    pub steps: u64,
}

impl ExitRecord {
    /// `X_τ − a_k`.
    pub fn exit_offset(&self) -> f64 {
        self.exit_state[0] - self.start_x
    }
}

/// Running diagnostics of an episode.
#[derive(Debug, Clone, Copy)]
struct Tally {
    y0: Vector,
    sup_dy2: f64,
    x_integral: f64,
    martingale: Vector,
    steps: u64,
}

impl Tally {
    fn new(y0: Vector) -> Self {
        Tally { y0, sup_dy2: 0.0, x_integral: 0.0, martingale: ZERO, steps: 0 }
    }

    fn observe_y(&mut self, s: &Vector, n: usize) {
        let mut acc = 0.0;
        for i in 1..=n {
            let d = s[i] - self.y0[i];
            acc += d * d;
        }
        if acc > self.sup_dy2 {
            self.sup_dy2 = acc;
        }
    }
}

struct Recorder {
    stride: usize,
    counter: usize,
    sample: PathSample,
}

impl Recorder {
    fn push(&mut self, t: f64, p: Vector) {
        self.sample.times.push(t);
        self.sample.states.push(p);
    }

    fn on_step(&mut self, t: f64, p: Vector) {
        self.counter += 1;
        if self.counter >= self.stride {
            self.counter = 0;
            self.push(t, p);
        }
    }
}

enum EpisodeEnd {
    Exit { side: i8, time: f64, state: Vector },
    Timeout { time: f64, state: Vector },
    OutOfBox { time: f64, state: Vector },
}

/// Strip geometry and step rule for one episode.
struct Episode<'f> {
    field: &'f CoefficientField,
    chart: StripChart<'f>,
    scheme: Scheme,
    a_minus: f64,
    a_plus: f64,
}

impl<'f> Episode<'f> {
    fn new(field: &'f CoefficientField, layout: &MembraneLayout, k: i64, cfg: &SimConfig, y: &Vector) -> Result<Self> {
        let chart = StripChart::new(field, layout, k)?;
        let product = cfg.epsilon * chart.beta(y).abs();
        let limit = cfg.smallness_limit();
        if product > limit {
            return Err(Error::Smallness { product, limit });
        }
        let (lo, hi) = layout.strip(k)?;
        Ok(Episode { field, chart, scheme: cfg.scheme, a_minus: chart.center - lo, a_plus: hi - chart.center })
    }

    /// Advances offset state `s` by `h`; returns the new state and `Σ⁰⁰` at the start point.
    fn step<R: Rng + ?Sized>(
        &self,
        s: &Vector,
        h: f64,
        noise: &[f64; MAX_NOISE],
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<(Vector, f64)> {
        let dims = self.field.dims();
        let (n, m) = (dims.n, dims.m);
        let p = self.chart.physical(s);
        let b = self.field.drift(&p);
        let sigma = self.field.sigma(&p);
        let mut s00 = 0.0;
        for l in 0..m {
            s00 += sigma[0][l] * sigma[0][l];
        }
        for i in 0..=n {
            let mut acc = 0.0;
            for l in 0..m {
                acc += sigma[i][l] * noise[l];
            }
            tally.martingale[i] += acc;
        }
        let next = match self.scheme {
            Scheme::Transformed => transformed_step(&self.chart, s, h, noise, &b, &sigma)?,
            Scheme::Bernoulli => self.bernoulli_step(s, h, noise, &b, &sigma, s00, rng),
        };
        Ok((next, s00))
    }

    #[allow(clippy::too_many_arguments)]
    fn bernoulli_step<R: Rng + ?Sized>(
        &self,
        s: &Vector,
        h: f64,
        noise: &[f64; MAX_NOISE],
        b: &Vector,
        sigma: &NoiseMatrix,
        s00: f64,
        rng: &mut R,
    ) -> Vector {
        let dims = self.field.dims();
        let mut next = euler_step(s, h, noise, b, sigma, dims.n, dims.m);
        let (x1, x2) = (s[0], next[0]);
        let touched = if x1 == 0.0 || (x1 > 0.0) != (x2 > 0.0) || x2 == 0.0 {
            true
        } else {
            let expo = -2.0 * x1.abs() * x2.abs() / (s00 * h);
            expo > -BRIDGE_CUTOFF && uniform(rng) < libm::exp(expo)
        };
        if touched {
            let beta = self.chart.beta(&next);
            let up = uniform(rng) < 0.5 * (1.0 + self.chart.epsilon * beta);
            let x_new = if up { x2.abs() } else { -x2.abs() };
            let theta = self.chart.theta(&next);
            for i in 1..=dims.n {
                next[i] += theta[i] * (x_new - x2);
            }
            next[0] = x_new;
        }
        next
    }

    #[allow(clippy::too_many_arguments)]
    fn run<R: Rng + ?Sized>(
        &self,
        s0: Vector,
        t0: f64,
        t_end: f64,
        dt: f64,
        box_half_width: f64,
        rng: &mut R,
        tally: &mut Tally,
        mut rec: Option<&mut Recorder>,
    ) -> Result<EpisodeEnd> {
        let dims = self.field.dims();
        let (n, m) = (dims.n, dims.m);
        let mut s = s0;
        let mut t = t0;
        let mut noise = [0.0; MAX_NOISE];
        tally.observe_y(&s, n);
        loop {
            if t >= t_end {
                return Ok(EpisodeEnd::Timeout { time: t, state: s });
            }
            let h = if t + dt > t_end { t_end - t } else { dt };
            fill_normals(rng, &mut noise[..m], h);
            let (next, s00) = self.step(&s, h, &noise, rng, tally)?;
            tally.steps += 1;
            if !next[..=n].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("simulated state"));
            }
            let (x1, x2) = (s[0], next[0]);
            let exit = if x2 >= self.a_plus {
                Some((1i8, ((self.a_plus - x1) / (x2 - x1)).clamp(0.0, 1.0)))
            } else if x2 <= -self.a_minus {
                Some((-1i8, ((-self.a_minus - x1) / (x2 - x1)).clamp(0.0, 1.0)))
            } else {
                self.bridge_exit(x1, x2, s00, h, rng)
            };
            if let Some((side, frac)) = exit {
                let mut state = s;
                for i in 1..=n {
                    state[i] = s[i] + frac * (next[i] - s[i]);
                }
                state[0] = if side > 0 { self.a_plus } else { -self.a_minus };
                let dt_part = frac * h;
                tally.x_integral += 0.5 * (x1 + state[0]) * dt_part;
                tally.observe_y(&state, n);
                return Ok(EpisodeEnd::Exit { side, time: t + dt_part, state });
            }
            tally.x_integral += 0.5 * (x1 + x2) * h;
            tally.observe_y(&next, n);
            s = next;
            t += h;
            let p = self.chart.physical(&s);
            if p[..=n].iter().any(|v| v.abs() > box_half_width) {
                return Ok(EpisodeEnd::OutOfBox { time: t, state: s });
            }
            if let Some(r) = rec.as_deref_mut() {
                r.on_step(t, p);
            }
        }
    }

    /// Bridge test against both strip boundaries for a step that stayed inside.
    fn bridge_exit<R: Rng + ?Sized>(&self, x1: f64, x2: f64, s00: f64, h: f64, rng: &mut R) -> Option<(i8, f64)> {
        if !(s00 > 0.0) {
            return None;
        }
        let scale = -2.0 / (s00 * h);
        let ex_r = scale * (self.a_plus - x1) * (self.a_plus - x2);
        let ex_l = scale * (x1 + self.a_minus) * (x2 + self.a_minus);
        if ex_r <= -BRIDGE_CUTOFF && ex_l <= -BRIDGE_CUTOFF {
            return None;
        }
        let pr = if ex_r > -BRIDGE_CUTOFF { libm::exp(ex_r) } else { 0.0 };
        let pl = if ex_l > -BRIDGE_CUTOFF { libm::exp(ex_l) } else { 0.0 };
        let u = uniform(rng);
        let side = if u < pr {
            1
        } else if u < pr + pl {
            -1
        } else {
            return None;
        };
        Some((side, uniform(rng)))
    }
}

fn euler_step(s: &Vector, h: f64, noise: &[f64; MAX_NOISE], b: &Vector, sigma: &NoiseMatrix, n: usize, m: usize) -> Vector {
    let mut out = *s;
    for i in 0..=n {
        let mut acc = b[i] * h;
        for l in 0..m {
            acc += sigma[i][l] * noise[l];
        }
        out[i] += acc;
    }
    out
}

fn transformed_step(
    chart: &StripChart<'_>,
    s: &Vector,
    h: f64,
    noise: &[f64; MAX_NOISE],
    b: &Vector,
    sigma: &NoiseMatrix,
) -> Result<Vector> {
    let dims = chart.field().dims();
    let jets = chart.jets(s)?;
    let w = chart.forward_with(&jets, s);
    let tc = chart.coeffs_with(&jets, s, b, sigma);
    let w_next = euler_step(&w, h, noise, &tc.drift, &tc.diffusion, dims.n, dims.m);
    chart.inverse(&w_next)
}

/// One Euler-Maruyama step of the transformed SDE from offset state `state`.
///
/// `noise[l]` are the Brownian increments over `dt`.
pub fn em_step_strip(chart: &StripChart<'_>, state: &Vector, dt: f64, noise: &[f64]) -> Result<Vector> {
    let m = chart.field().dims().m;
    if noise.len() < m {
        return Err(Error::DimensionMismatch(alloc::format!("{} noise values for {m} drivers", noise.len())));
    }
    let mut buf = [0.0; MAX_NOISE];
    buf[..m].copy_from_slice(&noise[..m]);
    let p = chart.physical(state);
    let field = chart.field();
    transformed_step(chart, state, dt, &buf, &field.drift(&p), &field.sigma(&p))
}

fn exit_from<R: Rng + ?Sized>(
    field: &CoefficientField,
    layout: &MembraneLayout,
    k: i64,
    y: &Vector,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ExitRecord> {
    let mut y = *y;
    y[0] = 0.0;
    let ep = Episode::new(field, layout, k, cfg, &y)?;
    let mut tally = Tally::new(y);
    let limit = cfg.exit_horizon_factor * cfg.epsilon * cfg.epsilon;
    match ep.run(y, 0.0, limit, cfg.dt(), f64::INFINITY, rng, &mut tally, None)? {
        EpisodeEnd::Exit { side, time, state } => {
            let start_x = ep.chart.center;
            let mut exit_state = state;
            exit_state[0] = if side > 0 {
                layout.membrane_position(k + 1)?
            } else {
                layout.membrane_position(k - 1)?
            };
            let mut start_y = y;
            start_y[0] = 0.0;
            Ok(ExitRecord {
                start_k: k,
                start_x,
                start_y,
                exit_side: side,
                tau: time,
                exit_state,
                sup_dy2: tally.sup_dy2,
                x_integral: tally.x_integral,
                martingale: tally.martingale,
                steps: tally.steps,
            })
        }
        EpisodeEnd::Timeout { time, .. } | EpisodeEnd::OutOfBox { time, .. } => {
            Err(Error::HorizonExhausted { elapsed: time })
        }
    }
}

/// Simulates from `(a_k, y)` until the first hit of `a_{k−1}` or `a_{k+1}`
/// with the scheme selected in `cfg`. Entries `1..=n` of `y` are used.
pub fn sample_exit<R: Rng + ?Sized>(
    field: &CoefficientField,
    layout: &MembraneLayout,
    k: i64,
    y: &Vector,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ExitRecord> {
    exit_from(field, layout, k, y, cfg, rng)
}

/// [`sample_exit`] with the Bernoulli side-selection scheme.
pub fn bernoulli_crossing_step<R: Rng + ?Sized>(
    field: &CoefficientField,
    layout: &MembraneLayout,
    k: i64,
    y: &Vector,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ExitRecord> {
    let cfg = SimConfig { scheme: Scheme::Bernoulli, ..cfg.clone() };
    exit_from(field, layout, k, y, &cfg, rng)
}

/// Simulates the membrane system from physical point `start` on `[0, horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    field: &CoefficientField,
    layout: &MembraneLayout,
    start: &Vector,
    horizon: f64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<PathSample> {
    let dims = field.dims();
    let n = dims.n;
    if !start[..=n].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("path start"));
    }
    if start[..=n].iter().any(|v| v.abs() > cfg.box_half_width) {
        return Err(Error::SpatialBoxExit { time: 0.0 });
    }
    layout.ensure_covering(-cfg.box_half_width, cfg.box_half_width)?;
    let mut rec = Recorder {
        stride: cfg.record_stride.max(1),
        counter: 0,
        sample: PathSample { dim: dims.dim(), ..PathSample::default() },
    };
    rec.push(0.0, *start);

    let mut k = layout.bracketing(start[0])?.nearest;
    let mut s = *start;
    s[0] -= layout.membrane_position(k)?;
    let mut t = 0.0;
    let dt = cfg.dt();
    let mut steps = 0u64;
    loop {
        let ep = Episode::new(field, layout, k, cfg, &s)?;
        let mut tally = Tally::new(s);
        let end = ep.run(s, t, horizon, dt, cfg.box_half_width, rng, &mut tally, Some(&mut rec))?;
        steps += tally.steps;
        match end {
            EpisodeEnd::Exit { side, time, state } => {
                let sojourn = time - t;
                k += side as i64;
                s = state;
                s[0] = 0.0;
                t = time;
                let mut p = s;
                p[0] = layout.membrane_position(k)?;
                rec.sample.events.push(CrossingEvent { time, k, y: s, side, sojourn });
                rec.push(t, p);
                rec.counter = 0;
            }
            EpisodeEnd::Timeout { time, state } => {
                let p = ep.chart.physical(&state);
                if rec.sample.times.last() != Some(&time) {
                    rec.push(time, p);
                }
                break;
            }
            EpisodeEnd::OutOfBox { time, state } => {
                let p = ep.chart.physical(&state);
                if rec.sample.times.last() != Some(&time) {
                    rec.push(time, p);
                }
                rec.sample.truncated = true;
                break;
            }
        }
    }
    rec.sample.steps = steps;
    Ok(rec.sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_scenario, Density, ScenarioSpec};
    use crate::rng::path_rng;
    use alloc::vec;

    fn oned(b: f64, beta: f64) -> CoefficientField {
        build_scenario(&ScenarioSpec::OnedSkew { b, sigma: 1.0, beta, density: Density::default() }).unwrap()
    }

    fn layout(eps: f64) -> MembraneLayout {
        MembraneLayout::new(eps, Density::default(), 100_000).unwrap()
    }

    #[test]
    fn inert_transformed_step_is_plain_euler() {
        let f = build_scenario(&ScenarioSpec::Constant {
            n: 1,
            m: 2,
            b: vec![0.3, -0.1],
            sigma: vec![vec![1.0, 0.2], vec![0.0, 0.7]],
            beta: 0.0,
            theta: vec![0.0],
            density: Density::default(),
        })
        .unwrap();
        let chart = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        let s = [0.02, 0.5, 0.0, 0.0];
        let noise = [0.01, -0.02];
        let out = em_step_strip(&chart, &s, 1e-4, &noise).unwrap();
        let want0 = 0.02 + (0.3 * 1e-4 + 1.0 * 0.01 + 0.2 * -0.02);
        let want1 = 0.5 + (-0.1 * 1e-4 + 0.0 * 0.01 + 0.7 * -0.02);
        assert_eq!(out[0], want0);
        assert_eq!(out[1], want1);
    }

    #[test]
    fn zero_noise_zero_drift_is_stationary() {
        let f = oned(0.0, 0.5);
        let chart = StripChart::with_center(&f, 0, 0.0, 0.1).unwrap();
        let s = [0.03, 0.0, 0.0, 0.0];
        assert_eq!(em_step_strip(&chart, &s, 1e-3, &[0.0]).unwrap(), s);
    }

    #[test]
    fn exit_lands_on_neighbour() {
        let f = oned(0.0, 0.5);
        let l = layout(0.1);
        let cfg = SimConfig { epsilon: 0.1, ..SimConfig::default() };
        let mut rng = path_rng(3, 0);
        for _ in 0..200 {
            let r = sample_exit(&f, &l, 2, &ZERO, &cfg, &mut rng).unwrap();
            assert!(r.tau > 0.0);
            let want = if r.exit_side > 0 { 0.3 } else { 0.1 };
            assert!((r.exit_state[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_drift_crosses_three_membranes() {
        let f = build_scenario(&ScenarioSpec::Constant {
            n: 0,
            m: 1,
            b: vec![1.0],
            sigma: vec![vec![0.0]],
            beta: 0.0,
            theta: vec![],
            density: Density::default(),
        })
        .unwrap();
        let l = layout(0.1);
        let cfg = SimConfig { epsilon: 0.1, dt_base: 1.0, box_half_width: 10.0, ..SimConfig::default() };
        let mut rng = path_rng(0, 0);
        let path = simulate_path(&f, &l, &[0.05, 0.0, 0.0, 0.0], 0.3, &cfg, &mut rng).unwrap();
        assert_eq!(path.events.len(), 3);
        assert!((path.last_state().unwrap()[0] - 0.35).abs() < 1e-12);
        for w in path.events.windows(2) {
            assert_eq!((w[1].k - w[0].k).abs(), 1);
        }
        let xs: Vec<f64> = path.states.iter().map(|p| p[0]).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn paths_are_reproducible() {
        let f = build_scenario(&ScenarioSpec::named("fig2").unwrap()).unwrap();
        let l = layout(0.1);
        let cfg = SimConfig { epsilon: 0.1, scheme: Scheme::Bernoulli, ..SimConfig::default() };
        let a = simulate_path(&f, &l, &[2.0, 2.0, 0.0, 0.0], 0.2, &cfg, &mut path_rng(9, 1)).unwrap();
        let b = simulate_path(&f, &l, &[2.0, 2.0, 0.0, 0.0], 0.2, &cfg, &mut path_rng(9, 1)).unwrap();
        assert_eq!(a, b);
        assert!((a.end_time() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn box_exit_truncates() {
        let f = oned(50.0, 0.0);
        let l = layout(0.1);
        let cfg = SimConfig { epsilon: 0.1, box_half_width: 1.0, ..SimConfig::default() };
        let p = simulate_path(&f, &l, &[0.0; 4], 10.0, &cfg, &mut path_rng(1, 1)).unwrap();
        assert!(p.truncated);
        assert!(p.end_time() < 1.0);
    }

    #[test]
    fn smallness_is_enforced() {
        let f = oned(0.0, 3.0);
        let l = layout(0.1);
        let cfg = SimConfig { epsilon: 0.1, ..SimConfig::default() };
        let r = sample_exit(&f, &l, 0, &ZERO, &cfg, &mut path_rng(0, 0));
        assert!(matches!(r, Err(Error::Smallness { .. })));
        assert!(bernoulli_crossing_step(&f, &l, 0, &ZERO, &cfg, &mut path_rng(0, 0)).is_ok());
    }
}

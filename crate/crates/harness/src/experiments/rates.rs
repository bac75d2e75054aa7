//! Numerical self-consistency: chart exactness and expansion rates, the
//! drifted Brownian motion oracle, and local-time reconstruction.

use std::collections::HashMap;

use membrane_core::coefficients::CoefficientField;
use membrane_core::limit::{simulate_em_path, DriftMode};
use membrane_core::linalg::{Vector, ZERO};
use membrane_core::membranes::MembraneLayout;
use membrane_core::oracles::{bm_exit_prob, bm_exit_time};
use membrane_core::rng::{path_rng, standard_normal, uniform};
use membrane_core::stats::{fit_rate, local_time_estimate, tanaka_local_time, MeanAccumulator};
use membrane_core::transform::StripChart;

use super::{par_paths, stream, tag};
use crate::config::{CheckKind, ExperimentConfig};
use crate::error::HarnessError;
use crate::report::{num, Check, Report, Table};
use crate::svg::{Plot, Series};

const DEFAULT_CHECKS: [CheckKind; 3] = [CheckKind::Transform, CheckKind::Oracles, CheckKind::LocalTime];

/// Largest bound on the tangential Jacobian perturbation at which a chart point is used.
const INJECTIVITY_MARGIN: f64 = 0.5;

/// Extra tangential range over which chart bounds are taken.
const SEARCH_PAD: f64 = 0.5;

/// Largest `ε |β|` at which a chart is used.
const CHART_SMALLNESS: f64 = 0.25;

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Report, HarnessError> {
    let mut report = Report { table: Table::new(&["suite", "scenario", "epsilon", "quantity", "value"]), ..Report::default() };
    if cfg.wants(CheckKind::Transform, &DEFAULT_CHECKS) {
        let opts = &cfg.transform;
        let mut scenarios = vec![(cfg.scenario.clone(), true)];
        scenarios.extend(opts.scenarios.iter().map(|s| (s.clone(), true)));
        scenarios.extend(opts.round_trip_scenarios.iter().map(|s| (s.clone(), false)));
        for (idx, (sc, rates)) in scenarios.iter().enumerate() {
            let f = if idx == 0 { field.clone() } else { sc.build()? };
            let name = format!("{} #{idx}", sc.label());
            round_trip(cfg, idx, &name, &f, &mut report)?;
            if *rates {
                expansion_rates(cfg, idx, &name, &f, &mut report)?;
            }
        }
    }
    if cfg.wants(CheckKind::Oracles, &DEFAULT_CHECKS) {
        oracle_suite(cfg, &mut report)?;
    }
    if cfg.wants(CheckKind::LocalTime, &DEFAULT_CHECKS) {
        local_time_suite(cfg, field, &mut report)?;
    }
    Ok(report)
}

fn row(report: &mut Report, suite: &str, scenario: &str, eps: f64, quantity: &str, value: f64) {
    report.table.push(vec![suite.into(), scenario.into(), num(eps), quantity.into(), num(value)]);
}

/// Bounds of one chart over a box of tangential points.
struct ChartMargin {
    b_ratio: f64,
    /// `sup ‖∇θ‖` for the left half.
    grad_left: f64,
    /// `sup ‖∇θ − θ ⊗ ∇B / B‖` for the right half.
    grad_right: f64,
}

impl ChartMargin {
    /// Samples `y` on a grid of about 4000 points in `[−reach, reach]^n`.
    fn new(chart: &StripChart<'_>, n: usize, reach: f64) -> Option<Self> {
        let per_axis = if n == 0 { 1 } else { (4000f64.powf(1.0 / n as f64) as usize).max(2) };
        let total = per_axis.pow(n as u32);
        let mut m = ChartMargin { b_ratio: 1.0, grad_left: 0.0, grad_right: 0.0 };
        let (mut b_min, mut b_max) = (f64::INFINITY, 0.0f64);
        for idx in 0..total {
            let mut y = ZERO;
            let mut rest = idx;
            for a in 1..=n {
                y[a] = -reach + 2.0 * reach * (rest % per_axis) as f64 / (per_axis - 1) as f64;
                rest /= per_axis;
            }
            let jets = chart.jets(&y).ok()?;
            let b = jets.b.value;
            b_min = b_min.min(b);
            b_max = b_max.max(b);
            let (mut left, mut right) = (0.0, 0.0);
            for i in 1..=n {
                for j in 1..=n {
                    let g = jets.theta.grad[i][j];
                    let h = g - jets.theta.value[i] * jets.b.grad[j] / b;
                    left += g * g;
                    right += h * h;
                }
            }
            m.grad_left = m.grad_left.max(f64::sqrt(left));
            m.grad_right = m.grad_right.max(f64::sqrt(right));
        }
        m.b_ratio = b_max / b_min;
        Some(m)
    }

    /// The chart is small at `s` and its tangential part is a perturbation of the identity.
    fn admits(&self, chart: &StripChart<'_>, epsilon: f64, s: &Vector) -> bool {
        if epsilon * chart.beta(s).abs() > CHART_SMALLNESS {
            return false;
        }
        let x = s[0];
        let bound = if x > 0.0 { x * self.b_ratio * self.grad_right } else { -x * self.grad_left };
        bound <= INJECTIVITY_MARGIN
    }
}

fn max_diff(a: &Vector, b: &Vector, dim: usize) -> f64 {
    (0..dim).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// `F ∘ Φ,Ψ` on random points of random strips.
fn round_trip(
    cfg: &ExperimentConfig,
    idx: usize,
    name: &str,
    field: &CoefficientField,
    report: &mut Report,
) -> Result<(), HarnessError> {
    let opts = &cfg.transform;
    let dims = field.dims();
    let (n, dim) = (dims.n, dims.dim());
    let density = field.density_fn();
    let y_reach = opts.y_range + SEARCH_PAD;
    let eps = opts.round_trip_epsilon;
    let layout = MembraneLayout::new(eps, density.clone(), 1_000_000)?;
    let mut rng = path_rng(cfg.seed, stream(tag::TRANSFORM, idx, 0));
    let reach = (2.0 / eps).floor() as i64;
    let mut margins: HashMap<i64, Option<ChartMargin>> = HashMap::new();
    let (mut worst, mut worst_x, mut skipped, mut failures) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..opts.round_trip_points {
        let k = -reach + (uniform(&mut rng) * (2 * reach + 1) as f64).floor() as i64;
        let chart = StripChart::new(field, &layout, k)?;
        let (lo, hi) = layout.strip(k)?;
        let t = 2.0 * uniform(&mut rng) - 1.0;
        let mut s = ZERO;
        s[0] = if t > 0.0 { t * (hi - chart.center) } else { t * (chart.center - lo) };
        for v in s.iter_mut().take(dim).skip(1) {
            *v = opts.y_range * (2.0 * uniform(&mut rng) - 1.0);
        }
        let margin = margins.entry(k).or_insert_with(|| ChartMargin::new(&chart, n, y_reach));
        if !margin.as_ref().is_some_and(|m| m.admits(&chart, eps, &s)) {
            skipped += 1;
            continue;
        }
        let w = chart.forward(&s)?;
        match chart.inverse(&w) {
            Ok(back) => {
                let again = chart.forward(&back)?;
                worst = worst.max(max_diff(&again, &w, dim));
                worst_x = worst_x.max(max_diff(&back, &s, dim));
            }
            Err(_) => failures += 1,
        }
    }
    let used = opts.round_trip_points - skipped;
    row(report, "transform", name, eps, "round_trip_max", worst);
    row(report, "transform", name, eps, "inverse_error_max", worst_x);
    row(report, "transform", name, eps, "skipped_fraction", skipped as f64 / opts.round_trip_points.max(1) as f64);
    report.checks.push(
        Check::new(
            format!("round trip, {name}"),
            failures == 0 && used > 0 && worst <= cfg.tolerances.round_trip,
            worst,
            format!("<= {}", cfg.tolerances.round_trip),
        )
        .with_detail(format!("{used} points, {skipped} outside the chart margin, {failures} Newton failures")),
    );

    Ok(())
}

/// Sup residuals of the first-order expansions of `Φ` and `Ψ` over the `ε` grid.
fn expansion_rates(
    cfg: &ExperimentConfig,
    idx: usize,
    name: &str,
    field: &CoefficientField,
    report: &mut Report,
) -> Result<(), HarnessError> {
    let opts = &cfg.transform;
    let n = field.dims().n;
    let density = field.density_fn();
    let y_reach = opts.y_range + SEARCH_PAD;
    let eps_max = cfg.epsilons[0];
    let y_axis: Vec<f64> = (0..9).map(|i| -opts.y_range + 2.0 * opts.y_range * i as f64 / 8.0).collect();
    let mut ys: Vec<Vector> = vec![ZERO];
    for a in 1..=n {
        ys = ys
            .into_iter()
            .flat_map(|base| {
                y_axis.iter().map(move |&v| {
                    let mut p = base;
                    p[a] = v;
                    p
                })
            })
            .collect();
    }
    // Points fixed by relative position; kept only if admissible at the largest epsilon.
    let mut grid: Vec<(f64, usize, f64)> = Vec::new();
    let coarse = MembraneLayout::new(eps_max, density.clone(), 1_000_000)?;
    for &c in &opts.centers {
        let k = coarse.bracketing(c)?.nearest;
        let chart = StripChart::new(field, &coarse, k)?;
        let (lo, hi) = coarse.strip(k)?;
        let Some(margin) = ChartMargin::new(&chart, n, y_reach) else { continue };
        for (yi, y) in ys.iter().enumerate() {
            for &t in &opts.offsets {
                let mut s = *y;
                s[0] = if t > 0.0 { t * (hi - chart.center) } else { t * (chart.center - lo) };
                if margin.admits(&chart, eps_max, &s) {
                    grid.push((c, yi, t));
                }
            }
        }
    }
    let mut psi_pts = Vec::new();
    let mut phi_pts = Vec::new();
    for &e in &cfg.epsilons {
        let layout = MembraneLayout::new(e, density.clone(), 1_000_000)?;
        let (mut psi_sup, mut phi_sup) = (0.0f64, 0.0f64);
        for &(c, yi, t) in &grid {
            let k = layout.bracketing(c)?.nearest;
            let chart = StripChart::new(field, &layout, k)?;
            let (lo, hi) = layout.strip(k)?;
            let v = ys[yi];
            let mut w = v;
            w[0] = if t > 0.0 { t * (hi - chart.center) } else { t * (chart.center - lo) };
            let u = w[0];
            let back = chart.inverse(&w)?;
            let theta = chart.theta(&v);
            for i in 1..=n {
                psi_sup = psi_sup.max((back[i] - v[i] - theta[i] * u).abs());
            }
            if u > 0.0 {
                phi_sup = phi_sup.max((back[0] - u * (1.0 + 2.0 * e * chart.beta(&v))).abs());
            }
        }
        row(report, "transform", name, e, "psi_residual_sup", psi_sup);
        row(report, "transform", name, e, "phi_residual_sup", phi_sup);
        psi_pts.push((e, psi_sup));
        phi_pts.push((e, phi_sup));
    }
    if grid.is_empty() {
        report.checks.push(Check::new(format!("residual rates, {name}"), false, 0.0, "> 0 admissible grid points"));
        return Ok(());
    }
    let detail = format!("{} grid points", grid.len());
    let rate_check = |label: &str, pts: &[(f64, f64)], min: f64, report: &mut Report| {
        if pts.iter().all(|p| p.1 == 0.0) {
            report.notes.push(format!("{label} residual vanishes identically for {name}; no rate to fit"));
            return;
        }
        let check = match fit_rate(pts) {
            Ok(fit) => Check::at_least(format!("{label} residual rate, {name}"), fit.slope, min)
                .with_detail(format!("{detail}, log-log residual {}", num(fit.residual))),
            Err(e) => Check::new(format!("{label} residual rate, {name}"), false, f64::NAN, format!(">= {min}"))
                .with_detail(e.to_string()),
        };
        report.checks.push(check);
    };
    if n > 0 {
        rate_check("Psi", &psi_pts, cfg.tolerances.psi_rate_min, report);
    }
    rate_check("Phi", &phi_pts, cfg.tolerances.phi_rate_min, report);

    let mut plot = Plot::new(&format!("inverse expansion residuals, {name}"), "epsilon", "sup residual");
    plot.log_x = true;
    plot.log_y = true;
    if n > 0 {
        plot.series.push(Series::line("Psi - v - theta u", psi_pts));
    }
    plot.series.push(Series::line("Phi - u (1 + 2 eps beta)", phi_pts));
    report.plots.push((format!("transform_rates_{idx}"), plot.render(&format!("config_sha256={}", cfg.hash()))));
    Ok(())
}

fn oracle_suite(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), HarnessError> {
    let halves = [0.1, 0.5, 1.0, 2.0, 5.0];
    let drifts = [-3.0, -1.0, -0.1, -1e-6, 1e-6, 0.1, 1.0, 3.0];
    let variances = [0.5, 1.0, 2.0];
    let (mut wald, mut zero_p, mut zero_t) = (0.0f64, 0.0f64, 0.0f64);
    for &am in &halves {
        for &ap in &halves {
            for &v in &variances {
                for &mu in &drifts {
                    let (pm, pp) = bm_exit_prob(am, ap, mu, v)?;
                    let t = bm_exit_time(am, ap, mu, v)?;
                    wald = wald.max((mu * t - (ap * pp - am * pm)).abs());
                }
                let (_, p0) = bm_exit_prob(am, ap, 0.0, v)?;
                zero_p = zero_p.max((p0 - am / (am + ap)).abs());
                zero_t = zero_t.max((bm_exit_time(am, ap, 0.0, v)? - am * ap / v).abs());
            }
        }
    }
    row(report, "oracles", "drifted-bm", 0.0, "wald_residual_max", wald);
    report.checks.push(Check::at_most("Wald identity", wald, cfg.tolerances.wald));
    report.checks.push(Check::new("zero-drift exit law exact", zero_p == 0.0, zero_p, "== 0"));
    report.checks.push(Check::new("zero-drift exit time exact", zero_t == 0.0, zero_t, "== 0"));

    // Direct Euler walk with a Brownian-bridge boundary test.
    let o = &cfg.oracle;
    let (am, ap, mu, var, dt) = (o.a_minus, o.a_plus, o.drift, o.variance, o.dt);
    let sd = (var * dt).sqrt();
    let exits = par_paths(cfg.seed, tag::ORACLE, 0, o.paths, |_, rng| {
        let (mut x, mut t) = (0.0f64, 0.0f64);
        loop {
            let next = x + mu * dt + sd * standard_normal(rng);
            if next >= ap {
                return Ok((1.0, t + dt * (ap - x) / (next - x)));
            }
            if next <= -am {
                return Ok((0.0, t + dt * (x + am) / (x - next)));
            }
            let up = (-2.0 * (ap - x) * (ap - next) / (var * dt)).exp();
            let down = (-2.0 * (x + am) * (next + am) / (var * dt)).exp();
            let u = uniform(rng);
            if u < up {
                return Ok((1.0, t + dt * uniform(rng)));
            }
            if u < up + down {
                return Ok((0.0, t + dt * uniform(rng)));
            }
            x = next;
            t += dt;
        }
    })?;
    let mut p = MeanAccumulator::default();
    let mut tau = MeanAccumulator::default();
    for (side, t) in &exits {
        p.push(*side);
        tau.push(*t);
    }
    let (_, p_exact) = bm_exit_prob(am, ap, mu, var)?;
    let t_exact = bm_exit_time(am, ap, mu, var)?;
    let diff = (p.mean() - p_exact).abs();
    let allowed = cfg.tolerances.z * p.std_error();
    row(report, "oracles", "drifted-bm", 0.0, "mc_p_plus", p.mean());
    row(report, "oracles", "drifted-bm", 0.0, "exact_p_plus", p_exact);
    row(report, "oracles", "drifted-bm", 0.0, "mc_exit_time", tau.mean());
    row(report, "oracles", "drifted-bm", 0.0, "exact_exit_time", t_exact);
    report.checks.push(
        Check::new("Monte Carlo exit law", diff <= allowed, diff, format!("<= {} SE = {}", cfg.tolerances.z, num(allowed)))
            .with_detail(format!("mc {} exact {} over {} paths", num(p.mean()), num(p_exact), exits.len())),
    );
    report.notes.push(format!(
        "Monte Carlo exit time {} (se {}) against {} (step {})",
        num(tau.mean()),
        num(tau.std_error()),
        num(t_exact),
        num(dt)
    ));
    Ok(())
}

fn local_time_suite(cfg: &ExperimentConfig, field: &CoefficientField, report: &mut Report) -> Result<(), HarnessError> {
    let o = &cfg.local_time;
    let mut start = cfg.start_vector();
    if cfg.start.is_empty() {
        start[0] = o.level;
    }
    let pairs = par_paths(cfg.seed, tag::LOCAL_TIME, 0, o.paths, |_, rng| {
        let path = simulate_em_path(field, &start, o.horizon, o.dt, DriftMode::Free, 1, rng)?;
        let occ = local_time_estimate(&path, field, o.level, o.delta)?;
        Ok((occ.value, occ.resolved, tanaka_local_time(&path, o.level)))
    })?;
    let occupation: f64 = pairs.iter().map(|p| p.0).sum();
    let tanaka: f64 = pairs.iter().map(|p| p.2).sum();
    let resolved = pairs.iter().all(|p| p.1);
    let rel = (occupation - tanaka).abs() / tanaka.abs();
    let count = pairs.len() as f64;
    row(report, "local-time", &cfg.scenario.label(), 0.0, "occupation_mean", occupation / count);
    row(report, "local-time", &cfg.scenario.label(), 0.0, "tanaka_mean", tanaka / count);
    report.checks.push(
        Check::new(
            "local time occupation vs Tanaka",
            resolved && rel <= cfg.tolerances.local_time_relative,
            rel,
            format!("<= {} relative", cfg.tolerances.local_time_relative),
        )
        .with_detail(format!(
            "means {} and {} over {} paths, resolved {resolved}",
            num(occupation / count),
            num(tanaka / count),
            pairs.len()
        )),
    );
    Ok(())
}

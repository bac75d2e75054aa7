//! Strip-exit statistics against the leading-order asymptotics.

use membrane_core::coefficients::CoefficientField;
use membrane_core::membranes::MembraneLayout;
use membrane_core::oracles::{asymptotic_exit_moments, ExitMoments, McExitMoments};
use membrane_core::sim::{sample_exit, simulate_path, ExitRecord, Scheme, SimConfig};
use membrane_core::stats::{crossing_count, fit_rate, slope_through_origin, MeanAccumulator};

use super::{layout_for, par_paths, tag};
use crate::config::{CheckKind, ExperimentConfig, Moment};
use crate::error::HarnessError;
use crate::formats::{exit_table, membrane_table};
use crate::report::{num, Check, Report, Table};
use crate::svg::{Plot, Series};

const DEFAULT_CHECKS: [CheckKind; 2] = [CheckKind::MomentsZ, CheckKind::MomentsRelative];

/// Index pairs of a moment's meaningful entries.
fn entries(moment: Moment, n: usize) -> Vec<(usize, usize)> {
    match moment {
        Moment::MeanDy | Moment::CrossXy => (1..=n).map(|i| (i, 0)).collect(),
        Moment::CovYy => (1..=n).flat_map(|i| (i..=n).map(move |j| (i, j))).collect(),
        _ => vec![(0, 0)],
    }
}

fn get(m: &ExitMoments, moment: Moment, i: usize, j: usize) -> f64 {
    match moment {
        Moment::PPlus => m.p_plus,
        Moment::MeanX => m.mean_x,
        Moment::MeanX2 => m.mean_x2,
        Moment::MeanTau => m.mean_tau,
        Moment::MeanDy => m.mean_dy[i],
        Moment::CovYy => m.cov_yy[i][j],
        Moment::CrossXy => m.cross_xy[i],
    }
}

/// Scale-free version: `(p₊ − ½)/ε`, `·/ε²` for `X` and `τ` moments, `·/E τ` for `Y` moments.
fn normalized(value: f64, moment: Moment, eps: f64, tau: f64) -> f64 {
    match moment {
        Moment::PPlus => (value - 0.5) / eps,
        Moment::MeanX | Moment::MeanX2 | Moment::MeanTau => value / (eps * eps),
        Moment::MeanDy | Moment::CovYy | Moment::CrossXy => value / tau,
    }
}

fn label(moment: Moment, i: usize, j: usize) -> String {
    match moment {
        Moment::MeanDy | Moment::CrossXy => format!("{}[{i}]", moment.name()),
        Moment::CovYy => format!("{}[{i}{j}]", moment.name()),
        _ => moment.name().to_string(),
    }
}

struct Level {
    eps: f64,
    mc: McExitMoments,
    asym: ExitMoments,
    /// Dynkin estimate of `E τ` and its standard error, for spatially constant coefficients.
    tau_dynkin: Option<(f64, f64)>,
    records: Vec<ExitRecord>,
    layout: MembraneLayout,
}

fn exits(
    cfg: &ExperimentConfig,
    field: &CoefficientField,
    index: usize,
    eps: f64,
    sim: &SimConfig,
    stream_tag: u64,
) -> Result<Vec<ExitRecord>, HarnessError> {
    let layout = layout_for(field, cfg, eps)?;
    let y = cfg.y_vector();
    par_paths(cfg.seed, stream_tag, index, cfg.paths, |_, rng| {
        sample_exit(field, &layout, cfg.membrane, &y, sim, rng)
    })
}

/// `τ = ((X_τ − a_k)² − 2 b⁰ ∫ (X − a_k) dt) / Σ⁰⁰`, valid when `b⁰` and `Σ⁰⁰` are constant.
fn dynkin_tau(field: &CoefficientField, records: &[ExitRecord]) -> Option<(f64, f64)> {
    let CoefficientField::Constant(c) = field else { return None };
    let p = records.first()?.exit_state;
    let b0 = c.b[0];
    let s00 = field.gram(&p)[0][0];
    let mut acc = MeanAccumulator::default();
    for r in records {
        let dx = r.exit_offset();
        acc.push((dx * dx - 2.0 * b0 * r.x_integral) / s00);
    }
    Some((acc.mean(), acc.std_error()))
}

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Report, HarnessError> {
    let n = field.dims().n;
    let y = cfg.y_vector();
    let tol = &cfg.tolerances;
    let mut levels = Vec::new();
    for (index, &eps) in cfg.epsilons.iter().enumerate() {
        let sim = cfg.sim_config(eps);
        let records = exits(cfg, field, index, eps, &sim, tag::EXITS)?;
        let layout = layout_for(field, cfg, eps)?;
        let asym = asymptotic_exit_moments(field, &layout, cfg.membrane, &y)?;
        let mc = McExitMoments::from_records(&records, n)?;
        let tau_dynkin = dynkin_tau(field, &records);
        levels.push(Level { eps, mc, asym, tau_dynkin, records, layout });
    }

    let mut table = Table::new(&[
        "epsilon",
        "moment",
        "mc",
        "se",
        "asymptotic",
        "z",
        "normalized_mc",
        "normalized_asymptotic",
    ]);
    let moments = cfg.moment_list();
    for lv in &levels {
        for &m in &moments {
            for (i, j) in entries(m, n) {
                let (v, se, a) = (get(&lv.mc.mean, m, i, j), get(&lv.mc.se, m, i, j), get(&lv.asym, m, i, j));
                let z = if se > 0.0 { (v - a) / se } else { 0.0 };
                table.push(vec![
                    num(lv.eps),
                    label(m, i, j),
                    num(v),
                    num(se),
                    num(a),
                    num(z),
                    num(normalized(v, m, lv.eps, lv.mc.mean.mean_tau)),
                    num(normalized(a, m, lv.eps, lv.asym.mean_tau)),
                ]);
            }
        }
        if let Some((t, se)) = lv.tau_dynkin {
            let z = if se > 0.0 { (t - lv.asym.mean_tau) / se } else { 0.0 };
            table.push(vec![
                num(lv.eps),
                "mean_tau_dynkin".into(),
                num(t),
                num(se),
                num(lv.asym.mean_tau),
                num(z),
                num(t / (lv.eps * lv.eps)),
                num(lv.asym.mean_tau / (lv.eps * lv.eps)),
            ]);
        }
    }

    let mut report = Report { table, ..Report::default() };
    let checks = &mut report.checks;

    if cfg.wants(CheckKind::MomentsZ, &DEFAULT_CHECKS) {
        for lv in &levels {
            for &m in &moments {
                for (i, j) in entries(m, n) {
                    let (v, se, a) = (get(&lv.mc.mean, m, i, j), get(&lv.mc.se, m, i, j), get(&lv.asym, m, i, j));
                    let allowed = tol.z * se + 1e-9 * a.abs();
                    let diff = (v - a).abs();
                    checks.push(
                        Check::new(
                            format!("{} eps={}", label(m, i, j), lv.eps),
                            diff <= allowed,
                            diff,
                            format!("<= {} SE = {}", tol.z, num(allowed)),
                        )
                        .with_detail(format!("mc {} asymptotic {}", num(v), num(a))),
                    );
                }
            }
        }
    }

    if cfg.wants(CheckKind::MomentsRelative, &DEFAULT_CHECKS) {
        let lv = levels.last().expect("non-empty epsilon list");
        for &m in &cfg.relative_moments {
            for (i, j) in entries(m, n) {
                let v = normalized(get(&lv.mc.mean, m, i, j), m, lv.eps, lv.mc.mean.mean_tau);
                let a = normalized(get(&lv.asym, m, i, j), m, lv.eps, lv.asym.mean_tau);
                let rel = if a != 0.0 { (v - a).abs() / a.abs() } else { (v - a).abs() };
                checks.push(
                    Check::at_most(format!("normalized {} eps={}", label(m, i, j), lv.eps), rel, tol.relative)
                        .with_detail(format!("mc {} predicted {}", num(v), num(a))),
                );
            }
        }
    }

    if cfg.wants(CheckKind::PPlusSlope, &DEFAULT_CHECKS) {
        let xs: Vec<f64> = levels.iter().map(|l| l.eps).collect();
        let ys: Vec<f64> = levels.iter().map(|l| l.mc.mean.p_plus - 0.5).collect();
        let se: Vec<f64> = levels.iter().map(|l| l.mc.se.p_plus).collect();
        let (c, c_se) = slope_through_origin(&xs, &ys, &se)?;
        let predicted = levels.iter().map(|l| (l.asym.p_plus - 0.5) / l.eps).sum::<f64>() / levels.len() as f64;
        let rel = (c - predicted).abs() / predicted.abs();
        checks.push(
            Check::at_most("p_plus slope relative error", rel, tol.slope_relative)
                .with_detail(format!("fitted {} (se {}) predicted {}", num(c), num(c_se), num(predicted))),
        );
        let mut plot = Plot::new("p+ - 1/2 against epsilon", "epsilon", "p+ - 1/2");
        plot.series.push(Series::scatter("Monte Carlo", xs.iter().copied().zip(ys.iter().copied()).collect()));
        plot.series.push(Series::line("fitted slope", vec![(0.0, 0.0), (xs[0], c * xs[0])]));
        plot.series.push(Series::line("prediction", vec![(0.0, 0.0), (xs[0], predicted * xs[0])]));
        report.plots.push(("p_plus".into(), plot.render(&format!("config_sha256={}", cfg.hash()))));
    }

    let checks = &mut report.checks;
    if cfg.wants(CheckKind::TauRate, &DEFAULT_CHECKS) {
        let lv = levels.last().expect("non-empty epsilon list");
        let ratio = lv.mc.mean.mean_tau / lv.asym.mean_tau;
        checks.push(
            Check::at_most(format!("E tau / predicted eps={}", lv.eps), (ratio - 1.0).abs(), tol.tau_relative)
                .with_detail(format!("E tau / eps^2 = {}", num(lv.mc.mean.mean_tau / (lv.eps * lv.eps)))),
        );
        let use_dynkin = levels.iter().all(|l| l.tau_dynkin.is_some());
        let points: Vec<(f64, f64)> = levels
            .iter()
            .map(|l| {
                let t = if use_dynkin { l.tau_dynkin.expect("checked").0 } else { l.mc.mean.mean_tau };
                (l.eps, (t - l.asym.mean_tau).abs())
            })
            .collect();
        let estimator = if use_dynkin { "Dynkin estimator" } else { "plain mean" };
        match fit_rate(&points) {
            Ok(fit) => checks.push(
                Check::at_least("E tau residual rate", fit.slope, tol.tau_rate_min)
                    .with_detail(format!("{estimator}, log-log residual {}", num(fit.residual))),
            ),
            Err(e) => checks.push(
                Check::new("E tau residual rate", false, f64::NAN, format!(">= {}", tol.tau_rate_min))
                    .with_detail(format!("{estimator}: {e}")),
            ),
        }
        if use_dynkin {
            let plain: Vec<(f64, f64)> =
                levels.iter().map(|l| (l.eps, (l.mc.mean.mean_tau - l.asym.mean_tau).abs())).collect();
            if let Ok(fit) = fit_rate(&plain) {
                report.notes.push(format!("plain-mean E tau residual slope {}", num(fit.slope)));
            }
        }
    }

    let checks = &mut report.checks;
    if cfg.wants(CheckKind::SchemeAgreement, &DEFAULT_CHECKS) {
        let other = match cfg.scheme {
            Scheme::Transformed => Scheme::Bernoulli,
            Scheme::Bernoulli => Scheme::Transformed,
        };
        for (index, lv) in levels.iter().enumerate() {
            let sim = SimConfig { scheme: other, ..cfg.sim_config(lv.eps) };
            let records = exits(cfg, field, index, lv.eps, &sim, tag::OTHER_SCHEME)?;
            let b = McExitMoments::from_records(&records, n)?;
            for m in [Moment::PPlus, Moment::MeanTau, Moment::MeanX] {
                let (va, sa) = (get(&lv.mc.mean, m, 0, 0), get(&lv.mc.se, m, 0, 0));
                let (vb, sb) = (get(&b.mean, m, 0, 0), get(&b.se, m, 0, 0));
                let combined = (sa * sa + sb * sb).sqrt();
                let diff = (va - vb).abs();
                checks.push(
                    Check::new(
                        format!("schemes agree on {} eps={}", m.name(), lv.eps),
                        diff <= tol.z * combined,
                        diff,
                        format!("<= {} combined SE = {}", tol.z, num(tol.z * combined)),
                    )
                    .with_detail(format!("{:?} {} vs {:?} {}", cfg.scheme, num(va), other, num(vb))),
                );
            }
        }
    }

    if cfg.write_records {
        let meta = [("config_sha256".to_string(), cfg.hash())];
        for (index, lv) in levels.iter().enumerate() {
            report.blobs.push((format!("exits_{index}.csv"), exit_table(&lv.records, n).to_csv(&meta)?.into_bytes()));
            report.blobs.push((format!("membranes_{index}.csv"), membrane_table(&lv.layout).to_csv(&meta)?.into_bytes()));
        }
    }

    if cfg.wants(CheckKind::Stability, &DEFAULT_CHECKS) {
        stability(cfg, field, &levels, &mut report)?;
    }
    Ok(report)
}

/// Scale-free exit statistics that must stay bounded along the `ε` grid.
fn stability(
    cfg: &ExperimentConfig,
    field: &CoefficientField,
    levels: &[Level],
    report: &mut Report,
) -> Result<(), HarnessError> {
    let n = field.dims().n;
    let mut stats: Vec<(String, Vec<f64>)> = vec![
        ("E (tau/eps^2)^1".into(), Vec::new()),
        ("E (tau/eps^2)^2".into(), Vec::new()),
        ("E (tau/eps^2)^3".into(), Vec::new()),
        ("E exp(0.1 tau/eps^2)".into(), Vec::new()),
    ];
    if n > 0 {
        stats.push(("E sup|Y-y|^2/eps^2".into(), Vec::new()));
    }
    stats.push(("eps^2 E nu_T".into(), Vec::new()));
    let mut table = Table::new(&["epsilon", "statistic", "value"]);
    for (index, lv) in levels.iter().enumerate() {
        let e2 = lv.eps * lv.eps;
        let count = lv.records.len() as f64;
        let mean = |f: &dyn Fn(&ExitRecord) -> f64| lv.records.iter().map(f).sum::<f64>() / count;
        let mut values = vec![
            mean(&|r| r.tau / e2),
            mean(&|r| (r.tau / e2).powi(2)),
            mean(&|r| (r.tau / e2).powi(3)),
            mean(&|r| (0.1 * r.tau / e2).exp()),
        ];
        if n > 0 {
            values.push(mean(&|r| r.sup_dy2 / e2));
        }
        let layout = &lv.layout;
        let mut start = cfg.y_vector();
        start[0] = layout.membrane_position(cfg.membrane)?;
        let sim = SimConfig { record_stride: usize::MAX, ..cfg.sim_config(lv.eps) };
        let counts = par_paths(cfg.seed, tag::CROSSINGS, index, cfg.crossing_paths, |_, rng| {
            let path = simulate_path(field, layout, &start, cfg.horizon, &sim, rng)?;
            Ok(crossing_count(&path, cfg.horizon) as f64)
        })?;
        values.push(e2 * counts.iter().sum::<f64>() / counts.len().max(1) as f64);
        for ((name, series), v) in stats.iter_mut().zip(values) {
            table.push(vec![num(lv.eps), name.clone(), num(v)]);
            series.push(v);
        }
    }
    for (name, series) in &stats {
        let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = series.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
        report.checks.push(
            Check::at_most(format!("{name} max/min"), ratio, cfg.tolerances.stability_ratio).with_detail(format!(
                "values {}",
                series.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
            )),
        );
    }
    report.blobs.push(("stability.csv".into(), table.to_csv(&[("config_sha256".into(), cfg.hash())])?.into_bytes()));
    Ok(())
}

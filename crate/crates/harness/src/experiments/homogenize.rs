//! Marginal law of `X_T` for the membrane system against its homogenized limit.

use membrane_core::coefficients::{CoefficientField, Density};
use membrane_core::limit::{simulate_em_path, DriftMode};
use membrane_core::sim::{simulate_path, SimConfig};
use membrane_core::stats::{ks_statistic, normal_cdf, KsReference};

use super::{layout_for, par_paths, tag};
use crate::config::{CheckKind, ExperimentConfig};
use crate::error::HarnessError;
use crate::formats::write_frames;
use crate::report::{num, Check, Report, Table};
use crate::svg::{thin, Plot, Series};

const DEFAULT_CHECKS: [CheckKind; 1] = [CheckKind::Ks];

/// `(mean, sd)` of the Gaussian limit law of `X_T` for one-dimensional constant coefficients.
pub fn exact_limit_law(field: &CoefficientField, x0: f64, horizon: f64) -> Option<(f64, f64)> {
    let CoefficientField::Constant(c) = field else { return None };
    if field.dims().n != 0 {
        return None;
    }
    let Density::Constant { value: d } = c.density else { return None };
    let p = [x0, 0.0, 0.0, 0.0];
    let s00 = field.gram(&p)[0][0];
    let drift = c.b[0] + c.beta * s00 / d;
    Some((x0 + drift * horizon, (s00 * horizon).sqrt()))
}

fn ecdf(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, x)| (*x, (i + 1) as f64 / n)).collect()
}

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Report, HarnessError> {
    let start = cfg.start_vector();
    let exact = exact_limit_law(field, start[0], cfg.horizon);
    let reference: Option<Vec<f64>> = match exact {
        Some(_) => None,
        None => Some(par_paths(cfg.seed, tag::LIMIT_PATHS, 0, cfg.reference_paths, |_, rng| {
            let path = simulate_em_path(field, &start, cfg.horizon, cfg.limit_dt, DriftMode::Homogenized, usize::MAX, rng)?;
            Ok(path.last_state().expect("path has a state")[0])
        })?),
    };

    let mut table = Table::new(&["epsilon", "ks", "mean_x_t", "var_x_t", "truncated", "mean_crossings_eps2"]);
    let mut ks_values = Vec::new();
    let mut plot = Plot::new("empirical CDF of X_T", "x", "F(x)");
    let mut frames = Vec::new();
    for (index, &eps) in cfg.epsilons.iter().enumerate() {
        let layout = layout_for(field, cfg, eps)?;
        let sim = SimConfig { record_stride: usize::MAX, ..cfg.sim_config(eps) };
        let keep = cfg.write_frames;
        let outcomes = par_paths(cfg.seed, tag::MEMBRANE_PATHS, index, cfg.paths, |j, rng| {
            let path = simulate_path(field, &layout, &start, cfg.horizon, &sim, rng)?;
            let x = path.last_state().expect("path has a state")[0];
            let stored = (keep && j < 10).then(|| path.clone());
            Ok((x, path.truncated, path.events.len(), stored))
        })?;
        let xs: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let truncated = outcomes.iter().filter(|o| o.1).count();
        let crossings = outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / xs.len() as f64 * eps * eps;
        frames.extend(outcomes.into_iter().filter_map(|o| o.3));
        let ks = match (&exact, &reference) {
            (Some((m, s)), _) => {
                let (m, s) = (*m, *s);
                ks_statistic(&xs, KsReference::Cdf(&move |x| normal_cdf((x - m) / s)))?
            }
            (None, Some(r)) => ks_statistic(&xs, KsReference::Sample(r))?,
            (None, None) => unreachable!("a reference law is always available"),
        };
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0).max(1.0);
        table.push(vec![num(eps), num(ks), num(mean), num(var), truncated.to_string(), num(crossings)]);
        ks_values.push((eps, ks));
        plot.series.push(Series::line(format!("eps = {eps}"), thin(&ecdf(&xs), 400)));
    }
    match (&exact, &reference) {
        (Some((m, s)), _) => {
            let pts = (0..=200).map(|i| {
                let x = m - 4.0 * s + 8.0 * s * i as f64 / 200.0;
                (x, normal_cdf((x - m) / s))
            });
            plot.series.push(Series::line("limit law", pts.collect()));
        }
        (None, Some(r)) => plot.series.push(Series::line("limit SDE", thin(&ecdf(r), 400))),
        _ => {}
    }

    let mut report = Report { table, ..Report::default() };
    report.notes.push(match exact {
        Some((m, s)) => format!("reference: exact limit law Normal({}, {})", num(m), num(s * s)),
        None => format!("reference: {} limit-SDE paths with dt {}", cfg.reference_paths, num(cfg.limit_dt)),
    });
    if cfg.wants(CheckKind::Ks, &DEFAULT_CHECKS) {
        let tol = &cfg.tolerances;
        let inversions = ks_values.windows(2).filter(|w| w[1].1 > w[0].1).count();
        let listing = ks_values.iter().map(|(e, k)| format!("{}@{}", num(*k), num(*e))).collect::<Vec<_>>().join(" ");
        report.checks.push(
            Check::new(
                "KS monotone in epsilon",
                inversions <= tol.ks_inversions,
                inversions as f64,
                format!("<= {} inversions", tol.ks_inversions),
            )
            .with_detail(listing),
        );
        let &(eps, ks) = ks_values.last().expect("non-empty epsilon list");
        report.checks.push(Check::at_most(format!("KS at eps={eps}"), ks, tol.ks_max));
    }
    let hash = cfg.hash();
    report.plots.push(("ecdf".into(), plot.render(&format!("config_sha256={hash}"))));
    if cfg.write_frames {
        report.blobs.push(("paths.frames".into(), write_frames(&hash, &frames)?));
    }
    Ok(report)
}

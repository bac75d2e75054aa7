//! Winding of the rotating example: membrane-free, membrane and homogenized systems.

use membrane_core::coefficients::CoefficientField;
use membrane_core::limit::{simulate_em_path, DriftMode};
use membrane_core::sim::{simulate_path, PathSample};
use membrane_core::stats::{sign_test_p_value, winding_angle, WINDING_MIN_RADIUS};

use super::{layout_for, par_paths, tag};
use crate::config::{CheckKind, ExperimentConfig};
use crate::error::HarnessError;
use crate::formats::{path_table, write_frames};
use crate::report::{num, Check, Report, Table};
use crate::svg::{thin, Plot, Series};

const DEFAULT_CHECKS: [CheckKind; 1] = [CheckKind::Winding];

struct System {
    name: String,
    /// Expected sign of the mean winding angle.
    expected: f64,
    angles: Vec<f64>,
    skipped: f64,
    example: PathSample,
}

fn xy(path: &PathSample) -> Vec<(f64, f64)> {
    path.states.iter().map(|s| (s[0], s[1])).collect()
}

fn summarize(
    name: String,
    expected: f64,
    outcomes: Vec<(f64, f64, Option<PathSample>)>,
) -> System {
    let count = outcomes.len().max(1) as f64;
    let skipped = outcomes.iter().map(|o| o.1).sum::<f64>() / count;
    let mut example = None;
    let mut angles = Vec::with_capacity(outcomes.len());
    for (a, _, p) in outcomes {
        angles.push(a);
        if example.is_none() {
            example = p;
        }
    }
    System { name, expected, angles, skipped, example: example.unwrap_or_default() }
}

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Report, HarnessError> {
    if field.dims().dim() != 2 {
        return Err(HarnessError::Config("fig2 needs a two-dimensional scenario".into()));
    }
    let start = if cfg.start.is_empty() { [2.0, 2.0, 0.0, 0.0] } else { cfg.start_vector() };
    let t = cfg.horizon;
    let mut systems = Vec::new();

    let free = par_paths(cfg.seed, tag::FREE_PATHS, 0, cfg.paths, |j, rng| {
        let p = simulate_em_path(field, &start, t, cfg.limit_dt, DriftMode::Free, 1, rng)?;
        let w = winding_angle(&p, WINDING_MIN_RADIUS)?;
        Ok((w.angle, w.skipped_fraction, (j == 0).then_some(p)))
    })?;
    systems.push(summarize("membrane-free".into(), 1.0, free));

    for (index, &eps) in cfg.epsilons.iter().enumerate() {
        let layout = layout_for(field, cfg, eps)?;
        let sim = cfg.sim_config(eps);
        let out = par_paths(cfg.seed, tag::MEMBRANE_PATHS, index, cfg.paths, |j, rng| {
            let p = simulate_path(field, &layout, &start, t, &sim, rng)?;
            if p.truncated {
                return Err(membrane_core::Error::SpatialBoxExit { time: p.end_time() });
            }
            let w = winding_angle(&p, WINDING_MIN_RADIUS)?;
            Ok((w.angle, w.skipped_fraction, (j == 0).then_some(p)))
        })?;
        systems.push(summarize(format!("membranes eps={eps}"), -1.0, out));
    }

    let limit = par_paths(cfg.seed, tag::LIMIT_PATHS, 0, cfg.paths, |j, rng| {
        let p = simulate_em_path(field, &start, t, cfg.limit_dt, DriftMode::Homogenized, 1, rng)?;
        let w = winding_angle(&p, WINDING_MIN_RADIUS)?;
        Ok((w.angle, w.skipped_fraction, (j == 0).then_some(p)))
    })?;
    systems.push(summarize("homogenized".into(), -1.0, limit));

    let mut table = Table::new(&["system", "path", "winding_angle"]);
    for s in &systems {
        for (j, a) in s.angles.iter().enumerate() {
            table.push(vec![s.name.clone(), j.to_string(), num(*a)]);
        }
    }
    let mut report = Report { table, ..Report::default() };
    let hash = cfg.hash();
    let comment = format!("config_sha256={hash}");
    for s in &systems {
        let n = s.angles.len();
        let mean = s.angles.iter().sum::<f64>() / n.max(1) as f64;
        let positive = s.angles.iter().filter(|a| **a > 0.0).count();
        let nonzero = s.angles.iter().filter(|a| **a != 0.0).count();
        let p_value = sign_test_p_value(positive, nonzero);
        report.notes.push(format!(
            "{}: mean angle {}, {positive}/{nonzero} positive, sign-test p {}, skipped fraction {}",
            s.name,
            num(mean),
            num(p_value),
            num(s.skipped)
        ));
        if cfg.wants(CheckKind::Winding, &DEFAULT_CHECKS) {
            let direction = if s.expected > 0.0 { "> 0" } else { "< 0" };
            report.checks.push(Check::new(
                format!("mean winding angle, {}", s.name),
                mean * s.expected > 0.0,
                mean,
                direction,
            ));
            let majority_ok = (positive as f64 - nonzero as f64 / 2.0) * s.expected > 0.0;
            report.checks.push(
                Check::new(
                    format!("sign test, {}", s.name),
                    majority_ok && p_value < cfg.tolerances.sign_alpha,
                    p_value,
                    format!("< {} in direction {direction}", cfg.tolerances.sign_alpha),
                )
                .with_detail(format!("{positive}/{nonzero} positive")),
            );
        }
        let mut plot = Plot::new(&format!("{} path from ({}, {})", s.name, start[0], start[1]), "x", "y");
        plot.equal_aspect = true;
        plot.series.push(Series::line(s.name.clone(), thin(&xy(&s.example), 20_000)));
        plot.series.push(Series::scatter("start", vec![(start[0], start[1])]));
        let slug: String = s.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
        if cfg.write_records {
            let csv = path_table(&s.example).to_csv(&[("config_sha256".to_string(), hash.clone())])?;
            report.blobs.push((format!("path_{slug}.csv"), csv.into_bytes()));
        }
        report.plots.push((slug, plot.render(&comment)));
    }
    if cfg.write_frames {
        let examples: Vec<PathSample> = systems.iter().map(|s| s.example.clone()).collect();
        report.blobs.push(("paths.frames".into(), write_frames(&hash, &examples)?));
    }
    Ok(report)
}

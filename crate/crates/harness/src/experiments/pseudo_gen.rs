//! Monte Carlo pseudo-generator against the limit generator.

use membrane_core::coefficients::CoefficientField;
use membrane_core::limit::{apply_generator, TestFunction};
use membrane_core::sim::sample_exit;
use membrane_core::oracles::pseudo_generator_from_records;

use super::{layout_for, par_paths, tag};
use crate::config::{CheckKind, ExperimentConfig};
use crate::error::HarnessError;
use crate::report::{num, Check, Report, Table};
use crate::svg::{Plot, Series};

const DEFAULT_CHECKS: [CheckKind; 1] = [CheckKind::Convergence];

pub fn function_label(f: &TestFunction) -> String {
    match f {
        TestFunction::Constant { value } => format!("const {value}"),
        TestFunction::Monomial { powers } => {
            let names = ["x", "y1", "y2", "y3"];
            let parts: Vec<String> = powers
                .iter()
                .zip(names)
                .filter(|(p, _)| **p > 0)
                .map(|(p, n)| if *p == 1 { n.to_string() } else { format!("{n}^{p}") })
                .collect();
            if parts.is_empty() {
                "1".into()
            } else {
                parts.join("*")
            }
        }
        TestFunction::Bump { radius, .. } => format!("bump r={radius}"),
    }
}

fn default_functions(n: usize) -> Vec<TestFunction> {
    let mut fs = vec![TestFunction::x(), TestFunction::x2()];
    if n > 0 {
        fs.extend([TestFunction::y(1), TestFunction::y2(1), TestFunction::xy(1)]);
    }
    fs
}

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Report, HarnessError> {
    let dims = field.dims();
    let functions =
        if cfg.test_functions.is_empty() { default_functions(dims.n) } else { cfg.test_functions.clone() };
    let y = cfg.y_vector();
    let mut table = Table::new(&["epsilon", "function", "estimate", "se", "half_width", "generator", "error"]);
    // errors[f][eps]
    let mut errors: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); functions.len()];
    let mut exact = vec![0.0; functions.len()];
    for (index, &eps) in cfg.epsilons.iter().enumerate() {
        let layout = layout_for(field, cfg, eps)?;
        let sim = cfg.sim_config(eps);
        let records = par_paths(cfg.seed, tag::EXITS, index, cfg.paths, |_, rng| {
            sample_exit(field, &layout, cfg.membrane, &y, &sim, rng)
        })?;
        let mut p = y;
        p[0] = layout.membrane_position(cfg.membrane)?;
        for (fi, f) in functions.iter().enumerate() {
            let est = pseudo_generator_from_records(&records, f, dims.dim(), cfg.control_variate, cfg.confidence)?;
            let lf = apply_generator(field, f, &p)?;
            exact[fi] = lf;
            let err = (est.value - lf).abs();
            errors[fi].push((eps, err, est.se));
            table.push(vec![
                num(eps),
                function_label(f),
                num(est.value),
                num(est.se),
                num(est.half_width),
                num(lf),
                num(err),
            ]);
        }
    }

    let mut report = Report { table, ..Report::default() };
    report.notes.push(format!("control variate: {:?}", cfg.control_variate));
    if cfg.wants(CheckKind::Convergence, &DEFAULT_CHECKS) {
        let tol = &cfg.tolerances;
        for (fi, f) in functions.iter().enumerate() {
            let series = &errors[fi];
            let label = function_label(f);
            let increases = series.windows(2).filter(|w| w[1].1 >= w[0].1).count();
            report.checks.push(
                Check::new(format!("|L^eps f - L f| decreasing, f = {label}"), increases == 0, increases as f64, "0 increases")
                    .with_detail(format!(
                        "errors {}",
                        series
                            .iter()
                            .map(|(e, v, se)| format!("{} (SE {})@{}", num(*v), num(*se), num(*e)))
                            .collect::<Vec<_>>()
                            .join(" ")
                    )),
            );
            let &(eps, err, se) = series.last().expect("non-empty epsilon list");
            let allowed = (tol.z * se).max(tol.generator_relative * exact[fi].abs() + tol.generator_absolute);
            report.checks.push(Check::at_most(format!("|L^eps f - L f| at eps={eps}, f = {label}"), err, allowed));
        }
        let mut plot = Plot::new("pseudo-generator error", "epsilon", "|L^eps f - L f|");
        plot.log_x = true;
        plot.log_y = true;
        for (fi, f) in functions.iter().enumerate() {
            plot.series.push(Series::line(function_label(f), errors[fi].iter().map(|(e, v, _)| (*e, *v)).collect()));
        }
        report.plots.push(("generator_error".into(), plot.render(&format!("config_sha256={}", cfg.hash()))));
    }
    Ok(report)
}

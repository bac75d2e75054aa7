use membrane_core::coefficients::{validate_assumptions, CoefficientField, SamplingGrid, ValidationReport};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::report::{num, Check, Report, Table};

pub fn validation_report(v: &ValidationReport) -> Report {
    let mut table = Table::new(&["check", "passed", "measured", "threshold", "witnesses", "first_witness"]);
    let mut checks = Vec::new();
    for c in &v.checks {
        let first = c
            .witnesses
            .first()
            .map(|w| w.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        table.push(vec![
            c.name.clone(),
            c.passed.to_string(),
            num(c.measured),
            num(c.threshold),
            c.witnesses.len().to_string(),
            first.clone(),
        ]);
        let mut check = Check::new(c.name.clone(), c.passed, c.measured, format!("threshold {}", num(c.threshold)));
        if !first.is_empty() {
            check = check.with_detail(format!("witness ({first})"));
        }
        checks.push(check);
    }
    Report { table, checks, notes: vec![format!("grid {}", v.grid)], ..Report::default() }
}

pub fn run(cfg: &ExperimentConfig, field: &CoefficientField, grid: &SamplingGrid) -> Result<Report, HarnessError> {
    let v = validate_assumptions(field, grid, &cfg.thresholds)?;
    let mut report = validation_report(&v);
    report.notes.push(format!(
        "d in [{}, {}], eig(Sigma) in [{}, {}]",
        num(v.d_min),
        num(v.d_max),
        num(v.lambda_min),
        num(v.lambda_max)
    ));
    Ok(report)
}

//! Named experiments. Each returns a [`Report`] without touching the disk.

mod exit_stats;
mod fig2;
mod homogenize;
mod pseudo_gen;
mod rates;
mod validate;

use membrane_core::coefficients::{validate_assumptions, CoefficientField, SamplingGrid};
use membrane_core::membranes::MembraneLayout;
use membrane_core::rng::{path_rng, PathRng};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::HarnessError;
use crate::report::Report;

pub use validate::validation_report;

/// Stream tags separating independent random streams of one run.
pub(crate) mod tag {
    pub const EXITS: u64 = 0;
    pub const OTHER_SCHEME: u64 = 1;
    pub const CROSSINGS: u64 = 2;
    pub const MEMBRANE_PATHS: u64 = 3;
    pub const LIMIT_PATHS: u64 = 4;
    pub const FREE_PATHS: u64 = 5;
    pub const ORACLE: u64 = 6;
    pub const LOCAL_TIME: u64 = 7;
    pub const TRANSFORM: u64 = 8;
}

/// Stream id of path `path` in sweep position `index` of stream family `tag`.
pub(crate) fn stream(tag: u64, index: usize, path: usize) -> u64 {
    (tag << 56) | ((index as u64) << 36) | path as u64
}

/// Runs `count` independent jobs in parallel; results keep index order.
pub(crate) fn par_paths<T, F>(seed: u64, tag: u64, index: usize, count: usize, job: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(usize, &mut PathRng) -> Result<T, membrane_core::Error> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, stream(tag, index, j));
            job(j, &mut rng).map_err(HarnessError::from)
        })
        .collect()
}

/// Default assumption grid: `[−5, 5]^{1+n}` with 11 points per axis.
pub(crate) fn default_grid(field: &CoefficientField) -> SamplingGrid {
    SamplingGrid::cube(field.dims().dim(), -5.0, 5.0, 11)
}

/// Membrane layout whose window covers the configured box.
pub(crate) fn layout_for(
    field: &CoefficientField,
    cfg: &ExperimentConfig,
    epsilon: f64,
) -> Result<MembraneLayout, HarnessError> {
    let density = field.density_fn();
    let w = cfg.box_half_width;
    let d_min = (0..=1000)
        .map(|i| density.value(-w + 2.0 * w * i as f64 / 1000.0))
        .fold(f64::INFINITY, f64::min)
        .max(1e-3);
    let capacity = cfg.sim_config(epsilon).window_capacity(d_min);
    Ok(MembraneLayout::new(epsilon, density, capacity)?)
}

/// Computes the report of `cfg.experiment`.
///
/// Unless `force` is set, experiments other than `validate` refuse scenarios
/// that fail the assumption checks.
pub fn execute(cfg: &ExperimentConfig, force: bool) -> Result<Report, HarnessError> {
    cfg.check()?;
    let field = cfg.scenario.build()?;
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(&field));
    if cfg.experiment != ExperimentKind::Validate && !force {
        let v = validate_assumptions(&field, &grid, &cfg.thresholds)?;
        if !v.passed() {
            return Err(HarnessError::Assumption(v.to_string().trim_end().replace('\n', "; ")));
        }
    }
    let mut report = match cfg.experiment {
        ExperimentKind::Validate => validate::run(cfg, &field, &grid)?,
        ExperimentKind::ExitStats => exit_stats::run(cfg, &field)?,
        ExperimentKind::PseudoGen => pseudo_gen::run(cfg, &field)?,
        ExperimentKind::Homogenize => homogenize::run(cfg, &field)?,
        ExperimentKind::Fig2 => fig2::run(cfg, &field)?,
        ExperimentKind::Rates => rates::run(cfg, &field)?,
    };
    report.experiment = cfg.experiment.name().to_string();
    report.scenario = cfg.scenario.label();
    report.config_hash = cfg.hash();
    Ok(report)
}

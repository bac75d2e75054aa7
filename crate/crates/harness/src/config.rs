//! Experiment configuration and its content hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use membrane_core::coefficients::{
    build_scenario, CoefficientField, SamplingGrid, ScenarioSpec, ValidationThresholds,
};
use membrane_core::limit::TestFunction;
use membrane_core::linalg::{Vector, MAX_DIM, ZERO};
use membrane_core::oracles::ControlVariate;
use membrane_core::sim::{Scheme, SimConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Validate,
    ExitStats,
    PseudoGen,
    Homogenize,
    Fig2,
    Rates,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Validate,
        ExperimentKind::ExitStats,
        ExperimentKind::PseudoGen,
        ExperimentKind::Homogenize,
        ExperimentKind::Fig2,
        ExperimentKind::Rates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::ExitStats => "exit-stats",
            ExperimentKind::PseudoGen => "pseudo-gen",
            ExperimentKind::Homogenize => "homogenize",
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Rates => "rates",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

/// A built-in scenario name or a full description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Named(String),
    Spec(ScenarioSpec),
}

impl Default for ScenarioRef {
    fn default() -> Self {
        ScenarioRef::Named("constant".into())
    }
}

impl ScenarioRef {
    pub fn spec(&self) -> Result<ScenarioSpec, HarnessError> {
        match self {
            ScenarioRef::Named(name) => Ok(ScenarioSpec::named(name)?),
            ScenarioRef::Spec(spec) => Ok(spec.clone()),
        }
    }

    pub fn build(&self) -> Result<CoefficientField, HarnessError> {
        Ok(build_scenario(&self.spec()?)?)
    }

    pub fn label(&self) -> String {
        match self {
            ScenarioRef::Named(name) => name.clone(),
            ScenarioRef::Spec(spec) => match spec {
                ScenarioSpec::Constant { .. } => "constant".into(),
                ScenarioSpec::Fig2 { .. } => "fig2".into(),
                ScenarioSpec::OnedSkew { .. } => "oned-skew".into(),
                ScenarioSpec::Table { .. } => "table".into(),
            },
        }
    }
}

/// Named checks an experiment can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Assumptions,
    MomentsZ,
    MomentsRelative,
    PPlusSlope,
    TauRate,
    SchemeAgreement,
    Stability,
    Convergence,
    Ks,
    Winding,
    Transform,
    Oracles,
    LocalTime,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Assumptions => "assumptions",
            CheckKind::MomentsZ => "moments-z",
            CheckKind::MomentsRelative => "moments-relative",
            CheckKind::PPlusSlope => "p-plus-slope",
            CheckKind::TauRate => "tau-rate",
            CheckKind::SchemeAgreement => "scheme-agreement",
            CheckKind::Stability => "stability",
            CheckKind::Convergence => "convergence",
            CheckKind::Ks => "ks",
            CheckKind::Winding => "winding",
            CheckKind::Transform => "transform",
            CheckKind::Oracles => "oracles",
            CheckKind::LocalTime => "local-time",
        }
    }
}

/// Exit moments addressable in moment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Moment {
    PPlus,
    MeanX,
    MeanX2,
    MeanTau,
    MeanDy,
    CovYy,
    CrossXy,
}

impl Moment {
    pub const ALL: [Moment; 7] = [
        Moment::PPlus,
        Moment::MeanX,
        Moment::MeanX2,
        Moment::MeanTau,
        Moment::MeanDy,
        Moment::CovYy,
        Moment::CrossXy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Moment::PPlus => "p_plus",
            Moment::MeanX => "mean_x",
            Moment::MeanX2 => "mean_x2",
            Moment::MeanTau => "mean_tau",
            Moment::MeanDy => "mean_dy",
            Moment::CovYy => "cov_yy",
            Moment::CrossXy => "cross_xy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Multiples of the standard error allowed between estimate and prediction.
    pub z: f64,
    /// Relative tolerance of normalized moments.
    pub relative: f64,
    /// Relative tolerance of the fitted `p₊ − ½` slope.
    pub slope_relative: f64,
    /// Relative tolerance of `E τ / ε²` at the smallest `ε`.
    pub tau_relative: f64,
    pub tau_rate_min: f64,
    pub ks_max: f64,
    /// Allowed increases of the KS distance along the decreasing `ε` list.
    pub ks_inversions: usize,
    /// Largest admissible max/min ratio of a stability statistic.
    pub stability_ratio: f64,
    pub sign_alpha: f64,
    pub round_trip: f64,
    pub psi_rate_min: f64,
    pub phi_rate_min: f64,
    pub wald: f64,
    pub local_time_relative: f64,
    /// Generator error floor: `relative · |L f| + absolute`.
    pub generator_relative: f64,
    pub generator_absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            z: 3.0,
            relative: 0.1,
            slope_relative: 0.1,
            tau_relative: 0.05,
            tau_rate_min: 2.5,
            ks_max: 0.05,
            ks_inversions: 1,
            stability_ratio: 2.0,
            sign_alpha: 0.01,
            round_trip: 1e-10,
            psi_rate_min: 2.0,
            phi_rate_min: 3.0,
            wald: 1e-12,
            local_time_relative: 0.05,
            generator_relative: 0.15,
            generator_absolute: 0.1,
        }
    }
}

/// Drifted Brownian motion used by the oracle self-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    pub a_minus: f64,
    pub a_plus: f64,
    pub drift: f64,
    pub variance: f64,
    pub paths: usize,
    pub dt: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { a_minus: 1.0, a_plus: 1.0, drift: 1.0, variance: 1.0, paths: 1_000_000, dt: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalTimeOptions {
    pub level: f64,
    pub delta: f64,
    pub dt: f64,
    pub paths: usize,
    pub horizon: f64,
}

impl Default for LocalTimeOptions {
    fn default() -> Self {
        LocalTimeOptions { level: 0.0, delta: 0.01, dt: 1e-6, paths: 100, horizon: 1.0 }
    }
}

/// Chart-exactness test settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformOptions {
    /// Extra scenarios examined alongside the main one.
    pub scenarios: Vec<ScenarioRef>,
    /// Extra scenarios that only take part in the round trip.
    pub round_trip_scenarios: Vec<ScenarioRef>,
    pub round_trip_points: usize,
    /// `ε` used for the round trip.
    pub round_trip_epsilon: f64,
    /// Transversal sampling range `[−r, r]` for random points and rate grids.
    pub y_range: f64,
    /// Abscissas whose nearest membranes center the charts of rate fits.
    pub centers: Vec<f64>,
    /// Offsets `u / a₊` (or `u / a₋`) sampled in rate fits.
    pub offsets: Vec<f64>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            scenarios: Vec::new(),
            round_trip_scenarios: Vec::new(),
            round_trip_points: 10_000,
            round_trip_epsilon: 0.05,
            y_range: 2.0,
            centers: vec![0.0, 1.0, -1.5],
            offsets: vec![-1.0, -0.5, 0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scenario: ScenarioRef,
    /// Strictly decreasing membrane spacings.
    pub epsilons: Vec<f64>,
    pub paths: usize,
    pub horizon: f64,
    pub dt_base: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub scheme: Scheme,
    pub box_half_width: f64,
    /// Membrane index for strip-exit experiments.
    pub membrane: i64,
    /// Transversal start `y` for strip-exit experiments.
    pub y: Vec<f64>,
    /// Physical start point for path experiments.
    pub start: Vec<f64>,
    /// Keep every `record_stride`-th step of stored paths.
    pub record_stride: usize,
    /// Step of membrane-free and homogenized Euler-Maruyama paths.
    pub limit_dt: f64,
    /// Paths used for counting crossings in the stability check.
    pub crossing_paths: usize,
    /// Limit-SDE sample size when no closed-form limit law exists.
    pub reference_paths: usize,
    /// Empty selects the experiment's default checks.
    pub checks: Vec<CheckKind>,
    /// Moments compared in moment checks; empty means all.
    pub moments: Vec<Moment>,
    /// Moments whose normalized values are compared at the smallest `ε`.
    pub relative_moments: Vec<Moment>,
    pub test_functions: Vec<TestFunction>,
    pub control_variate: ControlVariate,
    pub confidence: f64,
    pub tolerances: Tolerances,
    pub grid: Option<SamplingGrid>,
    pub thresholds: ValidationThresholds,
    pub oracle: OracleOptions,
    pub local_time: LocalTimeOptions,
    pub transform: TransformOptions,
    /// Also write sampled paths as binary frames.
    pub write_frames: bool,
    /// Also write per-path exit records, membrane positions and example paths as CSV.
    pub write_records: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Validate,
            scenario: ScenarioRef::default(),
            epsilons: vec![0.1],
            paths: 1000,
            horizon: 1.0,
            dt_base: 0.01,
            seed: 0,
            out: None,
            scheme: Scheme::Transformed,
            box_half_width: 50.0,
            membrane: 0,
            y: Vec::new(),
            start: Vec::new(),
            record_stride: 1,
            limit_dt: 1e-3,
            crossing_paths: 100,
            reference_paths: 10_000,
            checks: Vec::new(),
            moments: Vec::new(),
            relative_moments: vec![Moment::MeanX, Moment::MeanX2, Moment::CovYy],
            test_functions: Vec::new(),
            control_variate: ControlVariate::Martingale,
            confidence: 0.95,
            tolerances: Tolerances::default(),
            grid: None,
            thresholds: ValidationThresholds::default(),
            oracle: OracleOptions::default(),
            local_time: LocalTimeOptions::default(),
            transform: TransformOptions::default(),
            write_frames: false,
            write_records: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config does not parse: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.epsilons.is_empty() {
            return Err(HarnessError::Config("epsilons must not be empty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(HarnessError::Config("epsilons must be positive and finite".into()));
        }
        if self.epsilons.windows(2).any(|w| w[0] <= w[1]) {
            return Err(HarnessError::Config("epsilons must be strictly decreasing".into()));
        }
        if !(self.dt_base > 0.0 && self.limit_dt > 0.0 && self.horizon > 0.0) {
            return Err(HarnessError::Config("dt_base, limit_dt and horizon must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(HarnessError::Config("confidence must lie in (0, 1)".into()));
        }
        if self.y.len() >= MAX_DIM || self.start.len() > MAX_DIM {
            return Err(HarnessError::Config("start point has too many coordinates".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, without the output directory.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&ExperimentConfig { out: None, ..self.clone() }).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(self.experiment.name()))
    }

    pub fn sim_config(&self, epsilon: f64) -> SimConfig {
        SimConfig {
            epsilon,
            dt_base: self.dt_base,
            scheme: self.scheme,
            horizon: self.horizon,
            box_half_width: self.box_half_width,
            seed: self.seed,
            path_count: self.paths,
            record_stride: self.record_stride,
            ..SimConfig::default()
        }
    }

    /// `y` packed into entries `1..=n`.
    pub fn y_vector(&self) -> Vector {
        let mut v = ZERO;
        for (i, y) in self.y.iter().enumerate() {
            v[i + 1] = *y;
        }
        v
    }

    pub fn start_vector(&self) -> Vector {
        let mut v = ZERO;
        v[..self.start.len()].copy_from_slice(&self.start);
        v
    }

    pub fn moment_list(&self) -> Vec<Moment> {
        if self.moments.is_empty() {
            Moment::ALL.to_vec()
        } else {
            self.moments.clone()
        }
    }

    pub fn wants(&self, check: CheckKind, default: &[CheckKind]) -> bool {
        if self.checks.is_empty() {
            default.contains(&check)
        } else {
            self.checks.contains(&check)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "exit-stats", "scenario": "oned-skew"}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::ExitStats);
        assert!(cfg.scenario.build().is_ok());
    }

    #[test]
    fn rejects_increasing_epsilons() {
        let err = ExperimentConfig::from_json(r#"{"epsilons": [0.1, 0.2]}"#).unwrap_err();
        assert!(err.to_string().contains("decreasing"));
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"epsilon": 0.1}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.out = Some(PathBuf::from("elsewhere"));
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn inline_scenario() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": {"kind": "constant", "n": 1, "m": 2, "b": [1, 0.5],
                "sigma": [[1, 0], [0.5, 1]], "beta": 1.5, "theta": [0.5]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.build().unwrap().dims().n, 1);
    }
}

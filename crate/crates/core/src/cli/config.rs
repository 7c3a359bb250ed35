//! Versioned JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PotentialSpec, ScheduleKind, TimeFamilySpec};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    All,
    JostValidate,
    TraceSweep,
    EigenfunctionCheck,
    WaveopSweep,
    PropagatorCompare,
    NonautonomousConverge,
    OracleAudit,
}

impl ExperimentName {
    /// Concrete experiments in report order.
    pub const EACH: [ExperimentName; 7] = [
        ExperimentName::JostValidate,
        ExperimentName::TraceSweep,
        ExperimentName::EigenfunctionCheck,
        ExperimentName::WaveopSweep,
        ExperimentName::PropagatorCompare,
        ExperimentName::NonautonomousConverge,
        ExperimentName::OracleAudit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::All => "all",
            ExperimentName::JostValidate => "jost-validate",
            ExperimentName::TraceSweep => "trace-sweep",
            ExperimentName::EigenfunctionCheck => "eigenfunction-check",
            ExperimentName::WaveopSweep => "waveop-sweep",
            ExperimentName::PropagatorCompare => "propagator-compare",
            ExperimentName::NonautonomousConverge => "nonautonomous-converge",
            ExperimentName::OracleAudit => "oracle-audit",
        }
    }

    pub fn expand(self) -> Vec<ExperimentName> {
        match self {
            ExperimentName::All => Self::EACH.to_vec(),
            one => vec![one],
        }
    }
}

/// Spatial box and spectral grid shared by the stationary experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub k_min_abs: f64,
    pub k_max: f64,
    /// Nodes per half-line of the spectral grid.
    pub n_k: usize,
}

/// How θ follows h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaRule {
    /// `θ = h^{N₀}`.
    Power,
    /// One value per entry of `h_list`.
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub momentum: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSpec {
    pub h: f64,
    pub thetas: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Refinement factor of the grid used for oracle comparisons.
    pub refine: usize,
    /// Resolvent points as `[re, im]`.
    pub resolvent_points: Vec<[f64; 2]>,
    pub resolvent_theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JostSpec {
    /// Spectral points `[re, im]` of `ζ` at which the Green jumps are read.
    pub green_points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub k_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSpec {
    pub horizon: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub h: f64,
    pub family: TimeFamilySpec,
    pub n_list: Vec<usize>,
    pub reference: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSpec {
    /// The family's horizon is the largest entry of `horizons`.
    pub family: TimeFamilySpec,
    pub horizons: Vec<f64>,
    pub cells_per_unit: usize,
    pub points_per_unit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub h: f64,
    pub theta: f64,
    pub z: [f64; 2],
    pub steps: Vec<f64>,
    pub drift_horizon: f64,
    /// Semiclassical parameter of the box-doubling audit; θ follows the rule.
    pub doubling_h: f64,
    pub doubling_time: f64,
}

/// Every bound a criterion is judged against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub wronskian_identity: f64,
    pub green_jump: f64,
    pub trace_slope_margin: f64,
    pub krein_exact: f64,
    pub eigen_gap: f64,
    pub interface: f64,
    pub resolvent: f64,
    pub completeness: f64,
    pub waveop_slope: f64,
    pub waveop_stderr: f64,
    pub intertwining: f64,
    pub propagator_slope: f64,
    pub stepwise_rate: f64,
    pub envelope_constant: f64,
    pub expansion_slope_margin: f64,
    pub horizon_ratio: f64,
    pub manufactured_slope: f64,
    pub norm_drift: f64,
    pub box_doubling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentName,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub h_list: Vec<f64>,
    pub n0: f64,
    pub theta: ThetaRule,
    pub packet: PacketSpec,
    pub jost: JostSpec,
    pub trace: TraceSpec,
    pub eigen: EigenSpec,
    pub propagation: PropagationSpec,
    pub convergence: ConvergenceSpec,
    pub expansion: ExpansionSpec,
    pub oracle: OracleSpec,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentName::All,
            potential: PotentialSpec::default(),
            grid: GridSpec { x_min: -2.0, x_max: 3.0, n: 2049, k_min_abs: 0.05, k_max: 12.0, n_k: 1024 },
            h_list: vec![0.5, 0.35, 0.25, 0.18, 0.125],
            n0: 3.0,
            theta: ThetaRule::Power,
            packet: PacketSpec { momentum: 3.5, width: 0.2 },
            jost: JostSpec { green_points: vec![[0.8, 0.0], [1.5, 0.0], [3.0, 0.0], [0.4, 0.7]] },
            trace: TraceSpec { k_min: 0.05, k_max: 12.0, k_count: 40 },
            eigen: EigenSpec {
                h: 0.5,
                thetas: vec![0.0, 0.01, 0.05],
                momenta: vec![0.8, 1.5, 3.0],
                refine: 3,
                resolvent_points: vec![[-1.0, 0.0], [-1.0, 0.5], [2.0, 1.0]],
                resolvent_theta: 0.05,
            },
            propagation: PropagationSpec { horizon: 4.0, points: 33 },
            convergence: ConvergenceSpec {
                h: 0.5,
                family: TimeFamilySpec {
                    margin: 0.1,
                    amplitude: 0.5,
                    schedule: ScheduleKind::Linear,
                    horizon: 0.5,
                    period: None,
                },
                n_list: vec![8, 16, 32, 64, 128, 256, 512],
                reference: 1024,
            },
            expansion: ExpansionSpec {
                family: TimeFamilySpec {
                    margin: 0.1,
                    amplitude: 0.5,
                    schedule: ScheduleKind::Linear,
                    horizon: 4.0,
                    period: None,
                },
                horizons: vec![2.0, 4.0],
                cells_per_unit: 16,
                points_per_unit: 8,
            },
            oracle: OracleSpec {
                h: 0.5,
                theta: 0.05,
                z: [-1.0, 0.5],
                steps: vec![0.04, 0.02, 0.01, 0.005],
                drift_horizon: 1.0,
                doubling_h: 0.125,
                doubling_time: 0.2,
            },
            tolerances: Tolerances {
                unitarity: 1e-8,
                wronskian_identity: 1e-6,
                green_jump: 1e-6,
                trace_slope_margin: 0.3,
                krein_exact: 1e-12,
                eigen_gap: 1e-4,
                interface: 1e-6,
                resolvent: 1e-4,
                completeness: 1e-3,
                waveop_slope: 0.7,
                waveop_stderr: 0.15,
                intertwining: 1e-3,
                propagator_slope: 0.7,
                stepwise_rate: 0.8,
                envelope_constant: 10.0,
                expansion_slope_margin: 0.3,
                horizon_ratio: 2.0,
                manufactured_slope: 1.7,
                norm_drift: 1e-8,
                box_doubling: 1e-6,
            },
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.n0 > 2.0) {
            return Err(config_error(format!("N0 must exceed 2, got {}", self.n0)));
        }
        check_h_list(&self.h_list)?;
        if let ThetaRule::Explicit { values } = &self.theta {
            if values.len() != self.h_list.len() {
                return Err(config_error("explicit theta needs one value per h"));
            }
        }
        let g = &self.grid;
        if !(g.x_min < g.x_max && g.n >= 16 && g.k_min_abs > 0.0 && g.k_max > g.k_min_abs && g.n_k >= 64) {
            return Err(config_error("grid: need x_min < x_max, n >= 16, 0 < k_min_abs < k_max, n_k >= 64"));
        }
        if !(self.packet.width > 0.0 && self.packet.momentum != 0.0) {
            return Err(config_error("packet needs a positive width and nonzero momentum"));
        }
        if self.trace.k_count < 2 || !(self.trace.k_min > 0.0 && self.trace.k_max > self.trace.k_min) {
            return Err(config_error("trace: need k_count >= 2 and 0 < k_min < k_max"));
        }
        if self.eigen.refine == 0 || self.eigen.momenta.contains(&0.0) {
            return Err(config_error("eigen: refine must be positive and momenta nonzero"));
        }
        if self.propagation.points < 2 || !(self.propagation.horizon > 0.0) {
            return Err(config_error("propagation: need at least 2 points and a positive horizon"));
        }
        let c = &self.convergence;
        if c.n_list.len() < 4 || c.n_list.iter().any(|&n| n == 0 || !c.reference.is_multiple_of(n) || n >= c.reference) {
            return Err(config_error("convergence: need >= 4 levels, each dividing and below the reference"));
        }
        if c.n_list.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(config_error("convergence: n_list must be geometric with ratio 2"));
        }
        let e = &self.expansion;
        let t_max = e.horizons.iter().copied().fold(0.0, f64::max);
        if e.horizons.len() < 2 || e.horizons.iter().any(|&t| !(t > 0.0)) || e.cells_per_unit == 0 || e.points_per_unit == 0
        {
            return Err(config_error("expansion: need two positive horizons and positive per-unit counts"));
        }
        if (e.family.horizon - t_max).abs() > 1e-12 * t_max {
            return Err(config_error("expansion: the family horizon must equal the largest horizon"));
        }
        if self.oracle.steps.len() < 4 {
            return Err(config_error("oracle: manufactured refinement needs at least 4 steps"));
        }
        Ok(())
    }

    /// θ for each entry of `h_list`.
    pub fn thetas(&self) -> Vec<C64> {
        match &self.theta {
            ThetaRule::Power => self.h_list.iter().map(|h| C64::new(h.powf(self.n0), 0.0)).collect(),
            ThetaRule::Explicit { values } => values.iter().map(|&t| C64::new(t, 0.0)).collect(),
        }
    }

    /// θ at a single `h` under the same rule; explicit rules must list it.
    pub fn theta_at(&self, h: f64) -> Result<C64> {
        match &self.theta {
            ThetaRule::Power => Ok(C64::new(h.powf(self.n0), 0.0)),
            ThetaRule::Explicit { values } => self
                .h_list
                .iter()
                .position(|&x| x == h)
                .map(|i| C64::new(values[i], 0.0))
                .ok_or_else(|| config_error(format!("explicit theta has no entry for h = {h}"))),
        }
    }

    /// Reduced sweeps for CI: coarser spectral and stepwise levels, shorter
    /// horizons. Bounds are unchanged.
    pub fn quick(mut self) -> Self {
        self.grid.n = 1025;
        self.grid.n_k = 512;
        self.trace.k_count = 24;
        self.propagation.points = 17;
        self.convergence.n_list = vec![8, 16, 32, 64];
        self.convergence.reference = 128;
        self.expansion.horizons = vec![1.0, 2.0];
        self.expansion.family.horizon = 2.0;
        self.expansion.cells_per_unit = 8;
        self
    }
}

/// Strictly decreasing and geometric to 1% in successive ratios.
pub fn check_h_list(h_list: &[f64]) -> Result<()> {
    if h_list.len() < 4 {
        return Err(config_error(format!("h_list needs at least 4 values, got {}", h_list.len())));
    }
    if h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(config_error("h_list entries must be positive and finite"));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_error("h_list must be strictly decreasing"));
    }
    let ratios: Vec<f64> = h_list.windows(2).map(|w| w[1] / w[0]).collect();
    let mean = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    if ratios.iter().any(|r| (r.ln() - mean).abs() > 0.1) {
        return Err(config_error(format!("h_list is not geometric: ratios {ratios:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        cfg.clone().quick().validate().unwrap();
    }

    #[test]
    fn increasing_h_list_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.h_list = vec![0.125, 0.18, 0.25, 0.35, 0.5];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn n0_of_two_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.n0 = 2.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn non_geometric_h_list_is_rejected() {
        assert!(check_h_list(&[0.5, 0.4, 0.2, 0.19]).is_err());
        assert!(check_h_list(&[0.5, 0.35, 0.25, 0.18, 0.125]).is_ok());
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["schema_version"] = 2.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        v["schema_version"] = 1.into();
        v["surprise"] = true.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn power_rule_thetas() {
        let cfg = ExperimentConfig::default();
        let t = cfg.thetas();
        assert_eq!(t[0], C64::new(0.125, 0.0));
        assert_eq!(cfg.theta_at(0.35).unwrap(), t[1]);
    }
}

//! Run configuration: one JSON document naming an experiment, its parameter
//! block, an output directory and a seed.
//!
//! ```json
//! { "experiment": "bell", "params": { "angles": [0, 45, 22.5, 67.5] }, "seed": 7 }
//! ```
//!
//! Parameters omitted from `params` take the defaults of the experiment.

use std::fmt;
use std::path::PathBuf;

use qlab::epr_bell::{CorrelationModel, LhvModel, MIN_CHSH_PAIRS};
use qlab::polarization::TransmissionModel;
use qlab::{Error, GridSpec, PotentialSpec, SystemConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Evolve,
    Eigen,
    Madelung,
    ClassicalCompare,
    ThreePolarizer,
    Bell,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Evolve,
        ExperimentId::Eigen,
        ExperimentId::Madelung,
        ExperimentId::ClassicalCompare,
        ExperimentId::ThreePolarizer,
        ExperimentId::Bell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Evolve => "evolve",
            ExperimentId::Eigen => "eigen",
            ExperimentId::Madelung => "madelung",
            ExperimentId::ClassicalCompare => "classical_compare",
            ExperimentId::ThreePolarizer => "three_polarizer",
            ExperimentId::Bell => "bell",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentId::Evolve => "Crank-Nicolson propagation of a Gaussian packet",
            ExperimentId::Eigen => "lowest stationary states of a potential",
            ExperimentId::Madelung => "polar decomposition and field-equation residuals of an evolved packet",
            ExperimentId::ClassicalCompare => {
                "classical trajectory against quantum expectations; Hamilton-Jacobi check"
            }
            ExperimentId::ThreePolarizer => "minimal-transmission curve of the three-polarizer experiment",
            ExperimentId::Bell => "CHSH statistic and coincidence table, quantum vs local hidden variables",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == s)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Gaussian initial state `exp(−(x−center)²/4σ² + i k0 x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub center: f64,
    pub sigma: f64,
    pub k0: f64,
}

fn default_system() -> SystemConfig {
    SystemConfig::natural(GridSpec {
        x_min: -20.0,
        x_max: 20.0,
        n_points: 801,
    })
}

fn default_packet() -> PacketSpec {
    PacketSpec {
        center: -2.0,
        sigma: 1.0,
        k0: 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub system: SystemConfig,
    pub potential: PotentialSpec,
    pub packet: PacketSpec,
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            system: default_system(),
            potential: PotentialSpec::Free,
            packet: default_packet(),
            dt: 0.01,
            n_steps: 200,
            record_every: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenParams {
    pub system: SystemConfig,
    pub potential: PotentialSpec,
    pub n_states: usize,
}

impl Default for EigenParams {
    fn default() -> Self {
        EigenParams {
            system: SystemConfig::natural(GridSpec {
                x_min: -10.0,
                x_max: 10.0,
                n_points: 2000,
            }),
            potential: PotentialSpec::HarmonicOscillator { omega: 1.0 },
            n_states: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadelungParams {
    pub system: SystemConfig,
    pub potential: PotentialSpec,
    pub packet: PacketSpec,
    pub dt: f64,
    /// Steps to the middle of the three analysed snapshots.
    pub n_steps: usize,
    /// Node threshold as a fraction of `max λ`.
    pub node_fraction: f64,
}

impl Default for MadelungParams {
    fn default() -> Self {
        MadelungParams {
            system: default_system(),
            potential: PotentialSpec::Free,
            packet: default_packet(),
            dt: 0.01,
            n_steps: 100,
            node_fraction: qlab::madelung::DEFAULT_NODE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalCompareParams {
    pub system: SystemConfig,
    pub potential: PotentialSpec,
    pub packet: PacketSpec,
    pub dt: f64,
    pub n_steps: usize,
}

impl Default for ClassicalCompareParams {
    fn default() -> Self {
        ClassicalCompareParams {
            system: SystemConfig::natural(GridSpec {
                x_min: -20.0,
                x_max: 20.0,
                n_points: 1601,
            }),
            potential: PotentialSpec::HarmonicOscillator { omega: 1.0 },
            packet: default_packet(),
            dt: 0.005,
            n_steps: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreePolarizerParams {
    pub model: TransmissionModel,
    /// `[start, stop, step]` in degrees.
    pub alpha_sweep: [f64; 3],
    pub beta_step: f64,
}

impl Default for ThreePolarizerParams {
    fn default() -> Self {
        ThreePolarizerParams {
            model: TransmissionModel::Quantum,
            alpha_sweep: [0.0, 180.0, 5.0],
            beta_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellParams {
    /// `[a, a′, b, b′]` in degrees.
    pub angles: [f64; 4],
    pub model: CorrelationModel,
    /// Pairs per setting for Monte Carlo estimates.
    pub n_pairs: u64,
    /// LHV model of the coincidence table.
    pub table_model: LhvModel,
    /// `δ` spacing of the coincidence table over `[0°, 180°]`.
    pub delta_step: f64,
}

impl Default for BellParams {
    fn default() -> Self {
        BellParams {
            angles: [0.0, 45.0, 22.5, 67.5],
            model: CorrelationModel::Quantum,
            n_pairs: 100_000,
            table_model: LhvModel::MalusStochastic,
            delta_step: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    Evolve(EvolveParams),
    Eigen(EigenParams),
    Madelung(MadelungParams),
    ClassicalCompare(ClassicalCompareParams),
    ThreePolarizer(ThreePolarizerParams),
    Bell(BellParams),
}

impl Experiment {
    pub fn defaults(id: ExperimentId) -> Self {
        match id {
            ExperimentId::Evolve => Experiment::Evolve(Default::default()),
            ExperimentId::Eigen => Experiment::Eigen(Default::default()),
            ExperimentId::Madelung => Experiment::Madelung(Default::default()),
            ExperimentId::ClassicalCompare => Experiment::ClassicalCompare(Default::default()),
            ExperimentId::ThreePolarizer => Experiment::ThreePolarizer(Default::default()),
            ExperimentId::Bell => Experiment::Bell(Default::default()),
        }
    }

    pub fn id(&self) -> ExperimentId {
        match self {
            Experiment::Evolve(_) => ExperimentId::Evolve,
            Experiment::Eigen(_) => ExperimentId::Eigen,
            Experiment::Madelung(_) => ExperimentId::Madelung,
            Experiment::ClassicalCompare(_) => ExperimentId::ClassicalCompare,
            Experiment::ThreePolarizer(_) => ExperimentId::ThreePolarizer,
            Experiment::Bell(_) => ExperimentId::Bell,
        }
    }

    fn from_params(id: ExperimentId, params: Value) -> serde_json::Result<Self> {
        use serde_json::from_value as p;
        Ok(match id {
            ExperimentId::Evolve => Experiment::Evolve(p(params)?),
            ExperimentId::Eigen => Experiment::Eigen(p(params)?),
            ExperimentId::Madelung => Experiment::Madelung(p(params)?),
            ExperimentId::ClassicalCompare => Experiment::ClassicalCompare(p(params)?),
            ExperimentId::ThreePolarizer => Experiment::ThreePolarizer(p(params)?),
            ExperimentId::Bell => Experiment::Bell(p(params)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            output_dir: None,
            seed,
        }
    }

    /// Parses a JSON document. Unknown experiment ids, unknown fields and
    /// wrongly typed values are parse errors.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?;
        let id = ExperimentId::parse(&raw.experiment)
            .ok_or_else(|| RunError::Parse(format!("unknown experiment id {:?}", raw.experiment)))?;
        let params = raw.params.unwrap_or_else(|| Value::Object(Default::default()));
        let experiment = Experiment::from_params(id, params).map_err(|e| RunError::Parse(format!("params: {e}")))?;
        Ok(ExperimentConfig {
            experiment,
            output_dir: raw.output_dir,
            seed: raw.seed,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Every module precondition reachable from the config, checked without
    /// computing anything.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        match &self.experiment {
            Experiment::Evolve(p) => {
                check_system(&mut r, &p.system);
                check_potential(&mut r, &p.potential);
                check_packet(&mut r, &p.packet, &p.system.grid);
                positive(&mut r, "params.dt", p.dt);
                at_least(&mut r, "params.n_steps", p.n_steps, 1);
                at_least(&mut r, "params.record_every", p.record_every, 1);
            }
            Experiment::Eigen(p) => {
                check_system(&mut r, &p.system);
                check_potential(&mut r, &p.potential);
                at_least(&mut r, "params.n_states", p.n_states, 1);
                if p.n_states >= 1 && p.n_states >= p.system.grid.n_points / 2 {
                    r.push("params.n_states", "must be below half the number of grid points");
                }
            }
            Experiment::Madelung(p) => {
                check_system(&mut r, &p.system);
                check_potential(&mut r, &p.potential);
                check_packet(&mut r, &p.packet, &p.system.grid);
                positive(&mut r, "params.dt", p.dt);
                at_least(&mut r, "params.n_steps", p.n_steps, 1);
                if !(p.node_fraction >= 0.0 && p.node_fraction < 1.0) {
                    r.push("params.node_fraction", "must lie in [0, 1)");
                }
            }
            Experiment::ClassicalCompare(p) => {
                check_system(&mut r, &p.system);
                check_potential(&mut r, &p.potential);
                if let PotentialSpec::FiniteBarrier { .. } = p.potential {
                    r.push("params.potential", "finite_barrier has no classical force field");
                }
                check_packet(&mut r, &p.packet, &p.system.grid);
                positive(&mut r, "params.dt", p.dt);
                at_least(&mut r, "params.n_steps", p.n_steps, 2);
            }
            Experiment::ThreePolarizer(p) => {
                from_core(&mut r, "params.model", p.model.validate());
                let [start, stop, step] = p.alpha_sweep;
                if !(start.is_finite() && stop.is_finite() && start <= stop) {
                    r.push("params.alpha_sweep", "need finite start <= stop");
                }
                positive(&mut r, "params.alpha_sweep.step", step);
                positive(&mut r, "params.beta_step", p.beta_step);
                if p.beta_step > 90.0 {
                    r.push("params.beta_step", "must not exceed 90 degrees");
                }
            }
            Experiment::Bell(p) => {
                if p.angles.iter().any(|a| !a.is_finite()) {
                    r.push("params.angles", "must be finite");
                }
                if let CorrelationModel::Lhv { model } = &p.model {
                    from_core(&mut r, "params.model", model.validate());
                }
                from_core(&mut r, "params.table_model", p.table_model.validate());
                if p.n_pairs < MIN_CHSH_PAIRS {
                    r.push("params.n_pairs", format!("must be at least {MIN_CHSH_PAIRS}"));
                }
                positive(&mut r, "params.delta_step", p.delta_step);
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Findings of [`ExperimentConfig::validate`]; empty when the config is
/// runnable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        f.write_str(&lines.join("; "))
    }
}

fn positive(r: &mut ValidationReport, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        r.push(field, "must be positive and finite");
    }
}

fn at_least(r: &mut ValidationReport, field: &str, v: usize, min: usize) {
    if v < min {
        r.push(field, format!("must be at least {min}"));
    }
}

fn from_core(r: &mut ValidationReport, field: &str, result: qlab::Result<()>) {
    match result {
        Ok(()) => {}
        Err(Error::InvalidParameter { name, reason }) => r.push(format!("{field}.{name}"), reason),
        Err(e) => r.push(field, e.to_string()),
    }
}

fn check_system(r: &mut ValidationReport, system: &SystemConfig) {
    positive(r, "params.system.hbar", system.hbar);
    positive(r, "params.system.mass", system.mass);
    if let Err(e) = system.grid.validate() {
        r.push("params.system.grid", e.to_string());
    }
}

fn check_potential(r: &mut ValidationReport, potential: &PotentialSpec) {
    from_core(r, "params.potential", potential.validate());
}

fn check_packet(r: &mut ValidationReport, packet: &PacketSpec, grid: &GridSpec) {
    positive(r, "params.packet.sigma", packet.sigma);
    if !packet.k0.is_finite() {
        r.push("params.packet.k0", "must be finite");
    }
    if !(packet.center > grid.x_min && packet.center < grid.x_max) {
        r.push("params.packet.center", "must lie inside the grid");
    }
}

//! Structured run configuration: a strict JSON schema in which every
//! physical quantity carries an explicit unit key. Unknown keys are
//! rejected and diagnostics name the offending field.

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::bath::{BathSpec, Mode, SpectralDensityModel, Temperature};
use crate::bounds::VarentropyCap;
use crate::dynamics::TrajectoryOptions;
use crate::error::{Error, Result};
use crate::models::{Amplitudes, BosonBosonModel, MeasurementModel, SpinBosonModel};

/// A numeric value with a mandatory unit key. The key is optional at the
/// serde level so that a missing unit can be reported with the full field
/// path instead of an opaque enum-variant error.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    #[serde(default)]
    pub unit: Option<String>,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Self { value, unit: Some(unit.to_string()) }
    }

    fn unit(&self, field: &str) -> Result<&str> {
        self.unit
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{field}: missing unit key")))
    }

    /// Angular frequency in rad/s; `Hz` values are multiplied by 2 pi.
    pub fn angular_frequency(&self, field: &str) -> Result<f64> {
        match self.unit(field)? {
            "rad_per_s" => Ok(self.value),
            "Hz" => Ok(self.value * std::f64::consts::TAU),
            other => Err(Error::Config(format!(
                "{field}: unit must be \"rad_per_s\" or \"Hz\", got \"{other}\""
            ))),
        }
    }

    pub fn kelvin(&self, field: &str) -> Result<f64> {
        match self.unit(field)? {
            "K" => Ok(self.value),
            other => Err(Error::Config(format!("{field}: unit must be \"K\", got \"{other}\""))),
        }
    }

    pub fn seconds(&self, field: &str) -> Result<f64> {
        match self.unit(field)? {
            "s" => Ok(self.value),
            other => Err(Error::Config(format!("{field}: unit must be \"s\", got \"{other}\""))),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexNumber {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexNumber {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StateConfig {
    Amplitudes { x: ComplexNumber, y: ComplexNumber },
    Register { register: Vec<ComplexNumber> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub omega: Quantity,
    pub coupling: Quantity,
    /// Fock truncation; derived from `tail_tol` when omitted.
    #[serde(default)]
    pub trunc: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum BathConfig {
    #[serde(rename = "discrete")]
    Discrete {
        modes: Vec<ModeConfig>,
        /// Thermal tail mass tolerated per mode (also used to derive
        /// omitted truncations).
        #[serde(default)]
        tail_tol: Option<f64>,
    },
    #[serde(rename = "ohmic")]
    Ohmic { eta: f64, omega_c: Quantity, omega_max: Quantity },
    #[serde(rename = "tabulated")]
    Tabulated { points: Vec<TabulatedPoint>, omega_max: Quantity },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedPoint {
    pub omega: Quantity,
    /// Spectral density value in rad/s (so its integral is (rad/s)^2).
    pub j: Quantity,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "spin_boson")]
    SpinBoson {
        #[serde(default = "one")]
        qubits: usize,
        #[serde(default = "one")]
        spins_per_qubit: usize,
        state: StateConfig,
        bath: BathConfig,
        temperature: Quantity,
        #[serde(default)]
        dim_cap: Option<usize>,
    },
    #[serde(rename = "boson_boson")]
    BosonBoson {
        alpha: ComplexNumber,
        state: StateConfig,
        #[serde(default)]
        apparatus_trunc: Option<usize>,
        bath: BathConfig,
        temperature: Quantity,
        #[serde(default)]
        dim_cap: Option<usize>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum EpsilonConfig {
    Fraction { fraction_of_post_entropy: f64 },
    Nats { nats: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub t_max: Option<Quantity>,
    /// Measurement threshold; required, never defaulted.
    pub epsilon: EpsilonConfig,
    #[serde(default = "yes")]
    pub include_bath_hamiltonian: bool,
    #[serde(default = "yes")]
    pub include_interaction: bool,
    #[serde(default)]
    pub apparatus_frequency: Option<Quantity>,
    #[serde(default = "default_spectrum_checks")]
    pub spectrum_checks: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    #[serde(default = "default_cap")]
    pub varentropy_cap: String,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self { varentropy_cap: default_cap() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum GridConfig {
    #[serde(rename = "log")]
    Log { start: f64, stop: f64, points: usize },
    #[serde(rename = "linear")]
    Linear { start: f64, stop: f64, points: usize },
    #[serde(rename = "values")]
    Values { values: Vec<f64> },
}

impl GridConfig {
    pub fn expand(&self, field: &str) -> Result<Vec<f64>> {
        let grid = match self {
            GridConfig::Log { start, stop, points } => {
                if !(*start > 0.0 && *stop > *start) || *points < 2 {
                    return Err(Error::Config(format!(
                        "{field}: log grid needs 0 < start < stop and at least 2 points"
                    )));
                }
                let l0 = start.ln();
                let l1 = stop.ln();
                (0..*points)
                    .map(|i| (l0 + (l1 - l0) * i as f64 / (*points - 1) as f64).exp())
                    .collect()
            }
            GridConfig::Linear { start, stop, points } => {
                if !(*stop > *start) || *points < 2 {
                    return Err(Error::Config(format!(
                        "{field}: linear grid needs start < stop and at least 2 points"
                    )));
                }
                (0..*points)
                    .map(|i| start + (stop - start) * i as f64 / (*points - 1) as f64)
                    .collect()
            }
            GridConfig::Values { values } => values.clone(),
        };
        if grid.is_empty() {
            return Err(Error::Config(format!("{field}: empty grid")));
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    /// One of: coupling, spins_per_qubit, alpha, temperature_kelvin.
    pub name: String,
    pub grid: GridConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameters: Vec<SweepParameter>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_outdir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_outdir(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub bound: Option<BoundSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_samples() -> usize {
    400
}
fn default_spectrum_checks() -> usize {
    5
}
fn default_cap() -> String {
    "outcome_count".to_string()
}
fn default_outdir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string()]
}

impl RunConfig {
    /// Parse with field-path diagnostics on schema violations.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        for f in &config.output.formats {
            if !matches!(f.as_str(), "csv" | "json" | "svg") {
                return Err(Error::Config(format!(
                    "output.formats: unknown format \"{f}\" (expected csv, json or svg)"
                )));
            }
        }
        if let Some(b) = &config.bound {
            if !matches!(b.varentropy_cap.as_str(), "outcome_count" | "observed_max") {
                return Err(Error::Config(format!(
                    "bound.varentropy_cap: expected \"outcome_count\" or \"observed_max\", got \"{}\"",
                    b.varentropy_cap
                )));
            }
        }
        Ok(config)
    }

    pub fn varentropy_cap_kind(&self) -> &str {
        self.bound.as_ref().map(|b| b.varentropy_cap.as_str()).unwrap_or("outcome_count")
    }

    /// Build the measurement model this configuration describes.
    pub fn build_model(&self) -> Result<MeasurementModel> {
        build_model_from(&self.model)
    }

    /// Trajectory options of the simulate section (errors if absent).
    pub fn trajectory_options(&self) -> Result<TrajectoryOptions> {
        let sim = self
            .simulate
            .as_ref()
            .ok_or_else(|| Error::Config("simulate: section is required for this command".into()))?;
        if sim.samples < 3 {
            return Err(Error::Config("simulate.samples: need at least 3 samples".into()));
        }
        let t_max = match &sim.t_max {
            Some(q) => Some(q.seconds("simulate.t_max")?),
            None => None,
        };
        let apparatus_frequency = match &sim.apparatus_frequency {
            Some(q) => Some(q.angular_frequency("simulate.apparatus_frequency")?),
            None => None,
        };
        Ok(TrajectoryOptions {
            samples: sim.samples,
            t_max,
            include_bath_hamiltonian: sim.include_bath_hamiltonian,
            include_interaction: sim.include_interaction,
            apparatus_frequency,
            spectrum_checks: sim.spectrum_checks,
        })
    }

    /// Measurement threshold in nats given the post-measurement entropy.
    pub fn epsilon_nats(&self, post_entropy: f64) -> Result<f64> {
        let sim = self
            .simulate
            .as_ref()
            .ok_or_else(|| Error::Config("simulate: section is required for this command".into()))?;
        let eps = match &sim.epsilon {
            EpsilonConfig::Fraction { fraction_of_post_entropy } => {
                if !(*fraction_of_post_entropy > 0.0) {
                    return Err(Error::Config(
                        "simulate.epsilon.fraction_of_post_entropy must be positive".into(),
                    ));
                }
                fraction_of_post_entropy * post_entropy
            }
            EpsilonConfig::Nats { nats } => {
                if !(*nats > 0.0) {
                    return Err(Error::Config("simulate.epsilon.nats must be positive".into()));
                }
                *nats
            }
        };
        Ok(eps)
    }
}

fn parse_state(state: &StateConfig, qubits: usize, field: &str) -> Result<Vec<C64>> {
    match state {
        StateConfig::Amplitudes { x, y } => {
            if qubits != 1 {
                return Err(Error::Config(format!(
                    "{field}: x/y amplitudes describe one qubit, but the model has {qubits}"
                )));
            }
            let a = Amplitudes::new(x.value(), y.value())
                .map_err(|e| Error::Config(format!("{field}: {e}")))?;
            Ok(vec![a.x(), a.y()])
        }
        StateConfig::Register { register } => {
            Ok(register.iter().map(|z| z.value()).collect())
        }
    }
}

fn parse_bath(bath: &BathConfig, temp: Temperature, field: &str) -> Result<(BathSpec, f64)> {
    match bath {
        BathConfig::Discrete { modes, tail_tol } => {
            let tol = tail_tol.unwrap_or(crate::bath::DEFAULT_LEAK_TOL);
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::Config(format!("{field}.tail_tol must be in (0, 1)")));
            }
            let mut out = Vec::with_capacity(modes.len());
            for (k, m) in modes.iter().enumerate() {
                let omega = m.omega.angular_frequency(&format!("{field}.modes[{k}].omega"))?;
                let coupling =
                    m.coupling.angular_frequency(&format!("{field}.modes[{k}].coupling"))?;
                let trunc = match m.trunc {
                    Some(t) => t,
                    None => crate::bath::required_truncation(omega, temp, tol)
                        .map_err(|e| Error::Config(format!("{field}.modes[{k}]: {e}")))?,
                };
                out.push(Mode { omega, coupling, trunc });
            }
            Ok((BathSpec::Discrete { modes: out }, tol))
        }
        BathConfig::Ohmic { eta, omega_c, omega_max } => Ok((
            BathSpec::Continuum {
                j: SpectralDensityModel::Ohmic {
                    eta: *eta,
                    omega_c: omega_c.angular_frequency(&format!("{field}.omega_c"))?,
                },
                omega_max: omega_max.angular_frequency(&format!("{field}.omega_max"))?,
            },
            crate::bath::DEFAULT_LEAK_TOL,
        )),
        BathConfig::Tabulated { points, omega_max } => {
            let pts = points
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    Ok((
                        p.omega.angular_frequency(&format!("{field}.points[{k}].omega"))?,
                        p.j.angular_frequency(&format!("{field}.points[{k}].j"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                BathSpec::Continuum {
                    j: SpectralDensityModel::Tabulated { points: pts },
                    omega_max: omega_max.angular_frequency(&format!("{field}.omega_max"))?,
                },
                crate::bath::DEFAULT_LEAK_TOL,
            ))
        }
    }
}

fn build_model_from(model: &ModelConfig) -> Result<MeasurementModel> {
    match model {
        ModelConfig::SpinBoson { qubits, spins_per_qubit, state, bath, temperature, dim_cap } => {
            let temp = Temperature::from_kelvin(temperature.kelvin("model.temperature")?)
                .map_err(|e| Error::Config(format!("model.temperature: {e}")))?;
            let register = parse_state(state, *qubits, "model.state")?;
            let (bath, leak_tol) = parse_bath(bath, temp, "model.bath")?;
            let mut built =
                SpinBosonModel::multi_qubit(*qubits, *spins_per_qubit, register, bath, temp)
                    .map_err(map_model_err)?
                    .with_bath_leak_tol(leak_tol);
            if let Some(cap) = dim_cap {
                built = built.with_dim_cap(*cap).map_err(map_model_err)?;
            }
            Ok(MeasurementModel::SpinBoson(built))
        }
        ModelConfig::BosonBoson { alpha, state, apparatus_trunc, bath, temperature, dim_cap } => {
            let temp = Temperature::from_kelvin(temperature.kelvin("model.temperature")?)
                .map_err(|e| Error::Config(format!("model.temperature: {e}")))?;
            let register = parse_state(state, 1, "model.state")?;
            let amplitudes = Amplitudes::new(register[0], register[1])
                .map_err(|e| Error::Config(format!("model.state: {e}")))?;
            let (bath, leak_tol) = parse_bath(bath, temp, "model.bath")?;
            let mut built =
                BosonBosonModel::new(alpha.value(), amplitudes, *apparatus_trunc, bath, temp)
                    .map_err(map_model_err)?
                    .with_bath_leak_tol(leak_tol);
            if let Some(cap) = dim_cap {
                built = built.with_dim_cap(*cap).map_err(map_model_err)?;
            }
            Ok(MeasurementModel::BosonBoson(built))
        }
    }
}

/// Model-construction failures under a config are config errors, except for
/// the resource cap which keeps its own exit code.
fn map_model_err(e: Error) -> Error {
    match e {
        Error::TooLarge(m) => Error::TooLarge(m),
        other => Error::Config(format!("model: {other}")),
    }
}

/// Resolve the configured varentropy cap, running a trajectory for the
/// observed maximum when requested.
pub fn resolve_cap(
    config: &RunConfig,
    model: &MeasurementModel,
) -> Result<VarentropyCap> {
    match config.varentropy_cap_kind() {
        "outcome_count" => Ok(VarentropyCap::OutcomeCount),
        "observed_max" => {
            let opts = config.trajectory_options().map_err(|_| {
                Error::Config(
                    "bound.varentropy_cap = \"observed_max\" needs a simulate section \
                     to define the trajectory"
                        .into(),
                )
            })?;
            let times = crate::dynamics::sample_times(model, &opts)?;
            let traj = crate::dynamics::run_trajectory(model, &times, &opts)?;
            let max_v = traj.varentropy.iter().cloned().fold(0.0f64, f64::max);
            Ok(VarentropyCap::ObservedMax(max_v.max(f64::MIN_POSITIVE)))
        }
        other => Err(Error::Config(format!("bound.varentropy_cap: unknown kind \"{other}\""))),
    }
}

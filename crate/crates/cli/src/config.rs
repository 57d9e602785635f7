//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! output_dir = "runs/decay"
//! checkpoint_every = 1.0
//!
//! [scenario]
//! dim = 3
//! n = 32
//! diffusivity = 1.0
//! valences = [1.0, -1.0]
//! means = [1.0, 1.0]
//! epsilon = 0.1
//! seed = 0
//! body = { kind = "band_limited", amplitude = 0.2, seed = 7 }
//!
//! [stepper]
//! dt = "auto"
//! t_end = 5.0
//! output_every = 0.1
//!
//! [experiment]
//! kind = "decay_no_body_charge"
//! fit_window = [1.0, 5.0]
//! ```

use crate::CliError;
use npd_core::scenarios::BodyChargeRecipe;
use npd_core::tangent::VolumeDecayConfig;
use npd_core::timestepper::DtMode;
use npd_core::{ScenarioSpec, StepperConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    /// Simulated time between checkpoints; absent or zero disables them.
    #[serde(default)]
    pub checkpoint_every: f64,
    pub scenario: ScenarioSection,
    pub stepper: StepperSection,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub dim: usize,
    pub n: usize,
    pub diffusivity: f64,
    pub valences: Vec<f64>,
    pub means: Vec<f64>,
    pub epsilon: f64,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub body: BodySection,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySection {
    #[default]
    None,
    BandLimited {
        amplitude: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum DtSetting {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: DtSetting,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub t_end: f64,
    pub output_every: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_dt_max() -> f64 {
    0.01
}

fn default_max_steps() -> usize {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    DecayNoBodyCharge {
        /// Defaults to `[min(1, t_end/5), t_end]`.
        #[serde(default)]
        fit_window: Option<[f64; 2]>,
    },
    AttractorWithBodyCharge {
        /// Start of the late-time window for the sup/mean statistics;
        /// defaults to `t_end / 2`.
        #[serde(default)]
        late_from: Option<f64>,
    },
    TwinLipschitz {
        #[serde(default = "default_twin_size")]
        perturbation: f64,
        #[serde(default = "default_perturbation_seed")]
        perturbation_seed: u64,
    },
    BackwardUniquenessProbe {
        #[serde(default = "default_probe_distance")]
        distance: f64,
        #[serde(default = "default_perturbation_seed")]
        perturbation_seed: u64,
    },
    VolumeDecay {
        n_list: Vec<usize>,
        fit_window: [f64; 2],
        #[serde(default = "default_reorth")]
        reorth_every: usize,
        #[serde(default = "default_sample")]
        sample_every: usize,
        #[serde(default)]
        tangent_seed: u64,
        #[serde(default)]
        tangent_k_max: Option<usize>,
        #[serde(default)]
        uncharged: bool,
        /// Start from the spatially constant state instead of the
        /// scenario's random perturbation.
        #[serde(default)]
        equilibrium: bool,
    },
    InvariantSuite {},
}

fn default_twin_size() -> f64 {
    1e-4
}

fn default_probe_distance() -> f64 {
    1e-3
}

fn default_perturbation_seed() -> u64 {
    1
}

fn default_reorth() -> usize {
    10
}

fn default_sample() -> usize {
    5
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::DecayNoBodyCharge { .. } => "decay_no_body_charge",
            Experiment::AttractorWithBodyCharge { .. } => "attractor_with_body_charge",
            Experiment::TwinLipschitz { .. } => "twin_lipschitz",
            Experiment::BackwardUniquenessProbe { .. } => "backward_uniqueness_probe",
            Experiment::VolumeDecay { .. } => "volume_decay",
            Experiment::InvariantSuite {} => "invariant_suite",
        }
    }

    /// Experiments that follow a single trajectory and can be resumed.
    pub fn single_trajectory(&self) -> bool {
        matches!(
            self,
            Experiment::DecayNoBodyCharge { .. }
                | Experiment::AttractorWithBodyCharge { .. }
                | Experiment::InvariantSuite {}
        )
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(describe_toml_error(text, &e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        ScenarioSpec {
            dim: s.dim,
            n: s.n,
            diffusivity: s.diffusivity,
            valences: s.valences.clone(),
            means: s.means.clone(),
            epsilon: s.epsilon,
            k_max: s.k_max,
            seed: s.seed,
            body: match s.body {
                BodySection::None => BodyChargeRecipe::None,
                BodySection::BandLimited { amplitude, seed } => {
                    BodyChargeRecipe::BandLimited { amplitude, seed }
                }
            },
        }
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            dt: match s.dt {
                DtSetting::Fixed(dt) => DtMode::Fixed(dt),
                DtSetting::Named(_) => DtMode::Auto,
            },
            cfl: s.cfl,
            dt_max: s.dt_max,
            t_end: s.t_end,
            output_every: s.output_every,
            max_steps: s.max_steps,
        }
    }

    /// Nominal step of fixed-step experiments (`dt`, or `dt_max` in auto mode).
    pub fn nominal_dt(&self) -> f64 {
        match self.stepper.dt {
            DtSetting::Fixed(dt) => dt,
            DtSetting::Named(_) => self.stepper.dt_max,
        }
    }

    pub fn volume_decay_config(&self) -> Option<VolumeDecayConfig<f64>> {
        match &self.experiment {
            Experiment::VolumeDecay {
                n_list,
                fit_window,
                reorth_every,
                sample_every,
                tangent_seed,
                tangent_k_max,
                uncharged,
                ..
            } => Some(VolumeDecayConfig {
                n_list: n_list.clone(),
                t0: fit_window[0],
                t1: fit_window[1],
                dt: self.nominal_dt(),
                reorth_every: *reorth_every,
                sample_every: *sample_every,
                seed: *tangent_seed,
                k_max: *tangent_k_max,
                uncharged: *uncharged,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            );
        }
        if let DtSetting::Named(word) = &self.stepper.dt {
            if word != "auto" {
                return bad(
                    "stepper.dt",
                    format!("expected a number or \"auto\", got {word:?}"),
                );
            }
        }
        if !(self.checkpoint_every >= 0.0) || !self.checkpoint_every.is_finite() {
            return bad("checkpoint_every", "must be a finite number >= 0".into());
        }
        if self.checkpoint_every > 0.0 {
            let ratio = self.checkpoint_every / self.stepper.output_every;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return bad(
                    "checkpoint_every",
                    "must be a positive multiple of stepper.output_every".into(),
                );
            }
        }
        self.scenario_spec()
            .validate()
            .or_else(|e| bad("scenario", e.to_string()))?;
        self.stepper_config()
            .validate()
            .or_else(|e| bad("stepper", e.to_string()))?;
        match &self.experiment {
            Experiment::DecayNoBodyCharge { fit_window } => {
                if self.scenario.body != BodySection::None {
                    return bad(
                        "scenario.body",
                        "decay_no_body_charge requires kind = \"none\"".into(),
                    );
                }
                if let Some([a, b]) = fit_window {
                    if !(a < b) || *b > self.stepper.t_end {
                        return bad("experiment.fit_window", "needs start < end <= t_end".into());
                    }
                }
            }
            Experiment::AttractorWithBodyCharge { late_from } => {
                if self.scenario.body == BodySection::None {
                    return bad(
                        "scenario.body",
                        "attractor_with_body_charge needs a body charge".into(),
                    );
                }
                if let Some(t) = late_from {
                    if !(*t >= 0.0 && *t <= self.stepper.t_end) {
                        return bad("experiment.late_from", "must lie in [0, t_end]".into());
                    }
                }
            }
            Experiment::TwinLipschitz {
                perturbation: size, ..
            }
            | Experiment::BackwardUniquenessProbe { distance: size, .. } => {
                if !(*size > 0.0) || !size.is_finite() {
                    return bad("experiment", "perturbation size must be > 0".into());
                }
                if self.nominal_dt() <= 0.0 {
                    return bad("stepper.dt", "must be > 0".into());
                }
            }
            Experiment::VolumeDecay { fit_window, .. } => {
                let vd = self.volume_decay_config().expect("volume decay experiment");
                vd.validate()
                    .or_else(|e| bad("experiment", e.to_string()))?;
                if fit_window[1] > self.stepper.t_end + 1e-12 {
                    return bad(
                        "experiment.fit_window",
                        "must end at or before stepper.t_end".into(),
                    );
                }
            }
            Experiment::InvariantSuite {} => {}
        }
        Ok(())
    }
}

/// `line N, column M: message` for TOML parse and schema errors.
fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {col}: {msg}")
        }
        None => msg.to_string(),
    }
}

//! Strict TOML run-configuration schema and its conversion to library
//! types. Unknown keys are fatal everywhere: a silently ignored typo in a
//! physics parameter is the worst failure mode this tool can have.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use lics::dynamics::{AmplitudeState, IntegratorConfig, SystemParams};
use lics::optimize::{FreeParam, Objective, Target};
use lics::pulses::{CrossCoupling, PulseSchedule};
use lics::scenarios::{default_window, preset, ScenarioPreset};
use lics::sweep::{AxisSpec, Observable, ParamPath, SweepSpec};

use crate::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Preset name (plus optional overrides) or a full explicit block;
/// exactly one of the two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Parameter-path overrides applied on top of the preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitScenario>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitScenario {
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorFileConfig>,
}

fn default_d() -> f64 {
    1.0
}

fn default_enabled() -> bool {
    true
}

fn default_cross() -> CrossCoupling {
    CrossCoupling::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub g_mn0: f64,
    #[serde(default)]
    pub g_nn0: f64,
    #[serde(default)]
    pub g_ff0: f64,
    #[serde(default = "default_cross")]
    pub g_nf0: CrossCoupling,
    #[serde(default)]
    pub delta2: f64,
    #[serde(default)]
    pub delta3: f64,
    #[serde(default = "default_d")]
    pub d2: f64,
    #[serde(default = "default_d")]
    pub d3: f64,
    #[serde(default = "default_enabled")]
    pub e1_enabled: bool,
    #[serde(default = "default_enabled")]
    pub e2_enabled: bool,
    #[serde(default = "default_enabled")]
    pub e3_enabled: bool,
}

impl From<&PulseSchedule> for ScheduleConfig {
    fn from(s: &PulseSchedule) -> Self {
        ScheduleConfig {
            g_mn0: s.g_mn0,
            g_nn0: s.g_nn0,
            g_ff0: s.g_ff0,
            g_nf0: s.g_nf0,
            delta2: s.delta2,
            delta3: s.delta3,
            d2: s.d2,
            d3: s.d3,
            e1_enabled: s.e1_enabled,
            e2_enabled: s.e2_enabled,
            e3_enabled: s.e3_enabled,
        }
    }
}

impl From<&ScheduleConfig> for PulseSchedule {
    fn from(c: &ScheduleConfig) -> Self {
        PulseSchedule {
            g_mn0: c.g_mn0,
            g_nn0: c.g_nn0,
            g_ff0: c.g_ff0,
            g_nf0: c.g_nf0,
            delta2: c.delta2,
            delta3: c.delta3,
            d2: c.d2,
            d3: c.d3,
            e1_enabled: c.e1_enabled,
            e2_enabled: c.e2_enabled,
            e3_enabled: c.e3_enabled,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub eta_m: f64,
    #[serde(default)]
    pub eta_n: f64,
    #[serde(default)]
    pub eta_f: f64,
    #[serde(default)]
    pub delta_mn: f64,
    #[serde(default)]
    pub delta_nf: f64,
    #[serde(default)]
    pub q_nn: f64,
    #[serde(default)]
    pub q_ff: f64,
    #[serde(default)]
    pub q_nf: f64,
}

impl From<&SystemParams> for ParamsConfig {
    fn from(p: &SystemParams) -> Self {
        ParamsConfig {
            eta_m: p.eta_m,
            eta_n: p.eta_n,
            eta_f: p.eta_f,
            delta_mn: p.delta_mn,
            delta_nf: p.delta_nf,
            q_nn: p.q_nn,
            q_ff: p.q_ff,
            q_nf: p.q_nf,
        }
    }
}

impl From<&ParamsConfig> for SystemParams {
    fn from(c: &ParamsConfig) -> Self {
        SystemParams {
            eta_m: c.eta_m,
            eta_n: c.eta_n,
            eta_f: c.eta_f,
            delta_mn: c.delta_mn,
            delta_nf: c.delta_nf,
            q_nn: c.q_nn,
            q_ff: c.q_ff,
            q_nf: c.q_nf,
        }
    }
}

/// Initial state: either `state = "m" | "n" | "f"` or explicit complex
/// amplitudes as `[re, im]` pairs (missing levels default to zero).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_m: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_n: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_f: Option<[f64; 2]>,
}

impl InitConfig {
    pub fn resolve(&self) -> CliResult<AmplitudeState> {
        let has_amps = self.a_m.is_some() || self.a_n.is_some() || self.a_f.is_some();
        match (&self.state, has_amps) {
            (Some(_), true) => Err(CliError::Config(
                "init: give either `state` or explicit amplitudes, not both".into(),
            )),
            (Some(name), false) => match name.as_str() {
                "m" => Ok(AmplitudeState::basis_m()),
                "n" => Ok(AmplitudeState::basis_n()),
                "f" => Ok(AmplitudeState::basis_f()),
                other => Err(CliError::Config(format!(
                    "init: unknown basis state `{other}` (expected m, n, or f)"
                ))),
            },
            (None, true) => {
                let c = |p: Option<[f64; 2]>| {
                    Complex64::new(p.unwrap_or([0.0; 2])[0], p.unwrap_or([0.0; 2])[1])
                };
                Ok(AmplitudeState::new(c(self.a_m), c(self.a_n), c(self.a_f)))
            }
            (None, false) => Err(CliError::Config(
                "init: either `state` or explicit amplitudes required".into(),
            )),
        }
    }

    pub fn from_state(s: &AmplitudeState) -> Self {
        InitConfig {
            state: None,
            a_m: Some([s.a_m.re, s.a_m.im]),
            a_n: Some([s.a_n.re, s.a_n.im]),
            a_f: Some([s.a_f.re, s.a_f.im]),
        }
    }
}

/// Integrator overrides; window must be given as both ends or neither
/// (neither derives the window from the schedule).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorFileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl IntegratorFileConfig {
    fn resolve(&self, schedule: &PulseSchedule) -> CliResult<IntegratorConfig> {
        let (auto_start, auto_end) = default_window(schedule);
        let (t_start, t_end) = match (self.t_start, self.t_end) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => (auto_start, auto_end),
            _ => {
                return Err(CliError::Config(
                    "integrator: t_start and t_end must be given together".into(),
                ))
            }
        };
        let defaults = IntegratorConfig::default();
        Ok(IntegratorConfig {
            rel_tol: self.rel_tol.unwrap_or(defaults.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(defaults.abs_tol),
            max_step: self.max_step.unwrap_or(defaults.max_step),
            t_start,
            t_end,
        })
    }

    pub fn from_config(cfg: &IntegratorConfig) -> Self {
        IntegratorFileConfig {
            rel_tol: Some(cfg.rel_tol),
            abs_tol: Some(cfg.abs_tol),
            max_step: Some(cfg.max_step),
            t_start: Some(cfg.t_start),
            t_end: Some(cfg.t_end),
        }
    }
}

fn default_points() -> usize {
    401
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Uniform output samples across the window.
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            points: default_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis1: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<AxisSpec>,
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Desired final observables, keyed by observable name.
    pub targets: BTreeMap<String, f64>,
    /// Per-target weights (default 1); keys must be a subset of `targets`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, f64>>,
    pub free: Vec<FreeParam>,
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// Restrict emitted file kinds; any of "csv", "json", "mat", "toml".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            formats: None,
        }
    }
}

pub const KNOWN_FORMATS: [&str; 4] = ["csv", "json", "mat", "toml"];

impl OutputConfig {
    pub fn validate(&self) -> CliResult<()> {
        if let Some(formats) = &self.formats {
            for f in formats {
                if !KNOWN_FORMATS.contains(&f.as_str()) {
                    return Err(CliError::Config(format!(
                        "output: unknown format `{f}` (known: {})",
                        KNOWN_FORMATS.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn wants(&self, kind: &str) -> bool {
        match &self.formats {
            None => true,
            Some(list) => list.iter().any(|f| f == kind),
        }
    }
}

/// A scenario after preset lookup / explicit-block construction.
pub struct ResolvedScenario {
    pub schedule: PulseSchedule,
    pub params: SystemParams,
    pub init: AmplitudeState,
    pub integrator: IntegratorConfig,
    /// Whether the integrator window came from the schedule (vs the file).
    pub auto_window: bool,
    pub preset: Option<ScenarioPreset>,
}

pub fn resolve_scenario(cfg: &ScenarioConfig) -> CliResult<ResolvedScenario> {
    match (&cfg.preset, &cfg.explicit) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "scenario: `preset` and `explicit` are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Config(
            "scenario: either `preset` or `explicit` required".into(),
        )),
        (Some(name), None) => {
            let p = preset(name).map_err(CliError::from)?;
            let mut schedule = p.schedule.clone();
            let mut params = p.params;
            if let Some(overrides) = &cfg.set {
                for (key, &value) in overrides {
                    let path: ParamPath = key
                        .parse()
                        .map_err(|e: lics::Error| CliError::Config(e.to_string()))?;
                    path.apply(&mut schedule, &mut params, value);
                }
            }
            schedule.validate().map_err(CliError::from)?;
            params.validate().map_err(CliError::from)?;
            let (t0, t1) = default_window(&schedule);
            Ok(ResolvedScenario {
                schedule,
                params,
                init: p.init,
                integrator: IntegratorConfig::for_window(t0, t1),
                auto_window: true,
                preset: Some(p),
            })
        }
        (None, Some(explicit)) => {
            if cfg.set.is_some() {
                return Err(CliError::Config(
                    "scenario: `set` overrides only apply to presets".into(),
                ));
            }
            let schedule = PulseSchedule::from(&explicit.schedule);
            let params = SystemParams::from(&explicit.params);
            let init = explicit.init.resolve()?;
            schedule.validate().map_err(CliError::from)?;
            params.validate().map_err(CliError::from)?;
            let file_cfg = explicit.integrator.clone().unwrap_or_default();
            let auto_window = file_cfg.t_start.is_none() && file_cfg.t_end.is_none();
            let integrator = file_cfg.resolve(&schedule)?;
            integrator.validate().map_err(CliError::from)?;
            Ok(ResolvedScenario {
                schedule,
                params,
                init,
                integrator,
                auto_window,
                preset: None,
            })
        }
    }
}

/// Sweep spec from the config block, falling back to the preset's
/// descriptor when the block is absent.
pub fn build_sweep_spec(
    scenario: &ResolvedScenario,
    block: Option<&SweepConfig>,
) -> CliResult<SweepSpec> {
    let integrator = if scenario.auto_window {
        None // per-cell windows follow the swept schedule
    } else {
        Some(scenario.integrator)
    };
    match block {
        Some(cfg) => Ok(SweepSpec {
            schedule: scenario.schedule.clone(),
            params: scenario.params,
            init: scenario.init,
            integrator,
            axis1: cfg.axis1,
            axis2: cfg.axis2,
            observables: cfg.observables.clone(),
            trajectory_points: cfg.trajectory_points,
        }),
        None => {
            let preset = scenario.preset.as_ref().ok_or_else(|| {
                CliError::Config("sweep: a [sweep] block is required for explicit scenarios".into())
            })?;
            let swept = preset.swept.as_ref().ok_or_else(|| {
                CliError::Config(format!(
                    "sweep: preset `{}` has no default axes; add a [sweep] block",
                    preset.name
                ))
            })?;
            Ok(SweepSpec {
                schedule: scenario.schedule.clone(),
                params: scenario.params,
                init: scenario.init,
                integrator,
                axis1: swept.axis1,
                axis2: swept.axis2,
                observables: swept.observables.clone(),
                trajectory_points: swept.trajectory_points,
            })
        }
    }
}

pub fn build_objective(scenario: &ResolvedScenario, cfg: &OptimizeConfig) -> CliResult<Objective> {
    let mut targets = Vec::new();
    for (name, &value) in &cfg.targets {
        let observable: Observable = name
            .parse()
            .map_err(|e: lics::Error| CliError::Config(e.to_string()))?;
        let weight = match &cfg.weights {
            Some(w) => w.get(name).copied().unwrap_or(1.0),
            None => 1.0,
        };
        targets.push(Target {
            observable,
            value,
            weight,
        });
    }
    if let Some(weights) = &cfg.weights {
        for name in weights.keys() {
            if !cfg.targets.contains_key(name) {
                return Err(CliError::Config(format!(
                    "optimize: weight for `{name}` has no matching target"
                )));
            }
        }
    }
    let integrator = if scenario.auto_window {
        None
    } else {
        Some(scenario.integrator)
    };
    Ok(Objective {
        targets,
        free: cfg.free.clone(),
        schedule: scenario.schedule.clone(),
        params: scenario.params,
        init: scenario.init,
        integrator,
    })
}

//! Run configuration: one JSON document per run.
//!
//! A config file may also be a previous output of this tool. JSON outputs
//! carry the resolved config under `"config"` and CSV outputs carry it on a
//! leading `# config=` line, so either can be fed back through `--config`.

use std::path::Path;

use lzsweep_core::ensemble::{log_grid, Numerics};
use lzsweep_core::optimizer::OptimizeConfig;
use lzsweep_core::{Decoherence, EnsembleConfig, PredictOptions, ScalingScenario, ThermalParams};
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Within};

pub const CSV_CONFIG_PREFIX: &str = "# config=";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Units {
    pub hbar: f64,
    pub energy: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            energy: "delta".into(),
            time: "1/delta".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_trajectories")]
    pub n_trajectories: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_standard_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_trajectories: Option<u64>,
}

fn default_trajectories() -> u64 {
    1000
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            n_trajectories: default_trajectories(),
            master_seed: 0,
            target_standard_error: None,
            max_trajectories: None,
        }
    }
}

impl EnsembleBlock {
    pub fn to_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            n_trajectories: self.n_trajectories,
            master_seed: self.master_seed,
            target_standard_error: self.target_standard_error,
            max_trajectories: self.max_trajectories.unwrap_or(self.n_trajectories),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Sweep rates for `curve`; exactly one field must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2_over_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_v: Option<LogRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_delta2_over_v: Option<LogRange>,
}

impl CurveBlock {
    /// Sweep rates in the order the points will be evaluated.
    pub fn sweep_rates(&self, delta: f64) -> Result<Vec<f64>, Failure> {
        let set = [
            self.v.is_some(),
            self.delta2_over_v.is_some(),
            self.log_v.is_some(),
            self.log_delta2_over_v.is_some(),
        ];
        if set.iter().filter(|s| **s).count() != 1 {
            return Err(Failure::config(
                "curve: set exactly one of v, delta2_over_v, log_v, log_delta2_over_v",
            ));
        }
        let from_x = |xs: Vec<f64>| -> Result<Vec<f64>, Failure> {
            xs.into_iter()
                .map(|x| {
                    if x > 0.0 && x.is_finite() {
                        Ok(delta * delta / x)
                    } else {
                        Err(Failure::config(format!("curve: Δ²/v must be > 0, got {x}")))
                    }
                })
                .collect()
        };
        let log = |r: &LogRange| log_grid(r.min, r.max, r.points).map_err(Failure::from);
        let rates = if let Some(v) = &self.v {
            v.clone()
        } else if let Some(x) = &self.delta2_over_v {
            from_x(x.clone())?
        } else if let Some(r) = &self.log_v {
            log(r)?
        } else {
            from_x(log(self.log_delta2_over_v.as_ref().unwrap())?)?
        };
        if rates.is_empty() {
            return Err(Failure::config("curve: grid is empty"));
        }
        Ok(rates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeBlock {
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default = "default_coarse")]
    pub coarse_grid_points: usize,
    #[serde(default = "default_refine")]
    pub refine_iterations: usize,
}

fn default_coarse() -> usize {
    12
}

fn default_refine() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    pub tau: f64,
    pub per_qubit_amplitude: f64,
    pub m_values: Vec<u32>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    10.0
}

impl ScalingBlock {
    pub fn scenario(&self, delta: f64) -> ScalingScenario {
        ScalingScenario {
            delta,
            tau: self.tau,
            per_qubit_amplitude: self.per_qubit_amplitude,
            m_qubits: self.m_values.first().copied().unwrap_or(1),
            margin: self.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: Units,
    /// Subcommand that produced an output; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub system: SystemBlock,
    #[serde(default = "no_decoherence")]
    pub decoherence: Decoherence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalParams>,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub predict: PredictOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingBlock>,
}

fn no_decoherence() -> Decoherence {
    Decoherence::None
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("config: cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let body = match text.lines().next() {
            Some(line) if line.starts_with(CSV_CONFIG_PREFIX) => &line[CSV_CONFIG_PREFIX.len()..],
            _ => text,
        };
        let mut value: serde_json::Value = serde_json::from_str(body)
            .map_err(|e| Failure::config(format!("config: not valid JSON: {e}")))?;
        if let Some(obj) = value.as_object_mut() {
            if obj.contains_key("result") {
                if let Some(inner) = obj.remove("config") {
                    value = inner;
                }
            }
        }
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Failure::config(format!("config: {inner}"))
            } else {
                Failure::config(format!("config field `{path}`: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.units.hbar != 1.0 {
            return Err(Failure::config("units.hbar: only hbar = 1 is supported"));
        }
        let s = &self.system;
        if !(s.delta >= 0.0) || !s.delta.is_finite() {
            return Err(Failure::config(format!(
                "system.delta: must be finite and >= 0, got {}",
                s.delta
            )));
        }
        if let Some(v) = s.v {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Failure::config(format!(
                    "system.v: must be finite and > 0, got {v}"
                )));
            }
        }
        if s.t_start.is_some() != s.t_end.is_some() {
            return Err(Failure::config(
                "system.t_start/t_end: give both or neither",
            ));
        }
        match &self.decoherence {
            Decoherence::None => {}
            Decoherence::Lindblad { gamma } => {
                if !(*gamma >= 0.0) || !gamma.is_finite() {
                    return Err(Failure::config(format!(
                        "decoherence.gamma: must be finite and >= 0, got {gamma}"
                    )));
                }
            }
            Decoherence::Classical(spec) => spec.validate().map_err(|e| e.within("decoherence"))?,
        }
        if let Some(t) = &self.thermal {
            t.validate().map_err(|e| e.within("thermal"))?;
        }
        self.ensemble
            .to_config()
            .validate()
            .map_err(|e| e.within("ensemble"))?;
        Ok(())
    }

    pub fn require_v(&self) -> Result<f64, Failure> {
        self.system.v.ok_or_else(|| {
            Failure::config("system.v: missing field, this command needs a sweep rate")
        })
    }

    pub fn optimize_config(&self) -> Result<OptimizeConfig, Failure> {
        let o = self
            .optimize
            .ok_or_else(|| Failure::config("optimize: missing block"))?;
        let c = OptimizeConfig {
            v_min: o.v_min,
            v_max: o.v_max,
            coarse_grid_points: o.coarse_grid_points,
            refine_iterations: o.refine_iterations,
            ensemble: self.ensemble.to_config(),
        };
        c.validate().map_err(|e| e.within("optimize"))?;
        Ok(c)
    }

    /// Fill defaults so the embedded config reproduces the run on its own.
    pub fn resolved(&self, command: &str, seed: Option<u64>) -> Self {
        let mut c = self.clone();
        c.command = Some(command.to_string());
        if let Some(seed) = seed {
            c.ensemble.master_seed = seed;
        }
        c.ensemble.max_trajectories = Some(c.ensemble.to_config().max_trajectories);
        c
    }
}

use lzsweep_core::ensemble::{evaluate, success_curve, write_curve_csv};
use lzsweep_core::noise::NoiseStream;
use lzsweep_core::propagator::{evolve_lindblad, evolve_pure_streamed};
use lzsweep_core::scaling::{scaling_table, write_scaling_csv};
use lzsweep_core::seed::derive_seed;
use lzsweep_core::{
    apply_thermal_floor, auto_time_window, evolve_pure, find_optimal_sweep, predict, Decoherence,
    SystemParams, TimeGrid,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::failure::{Failure, Within};

/// Result of one subcommand, ready to be written in either format.
pub struct Output {
    pub result: Value,
    /// Table body for `--format csv`; `None` means the result is written as
    /// `field,value` rows.
    pub table: Option<Vec<u8>>,
    pub summary: String,
}

impl Output {
    fn new<T: Serialize>(
        result: &T,
        table: Option<Vec<u8>>,
        summary: String,
    ) -> Result<Self, Failure> {
        let result = serde_json::to_value(result)
            .map_err(|e| Failure::numerical(format!("cannot serialize result: {e}")))?;
        Ok(Self {
            result,
            table,
            summary,
        })
    }
}

fn table<F>(write: F) -> Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut Vec<u8>) -> lzsweep_core::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn predict_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    let Decoherence::Classical(noise) = &cfg.decoherence else {
        return Err(Failure::config(
            "decoherence: predict needs classical noise (kind = \"classical\")",
        ));
    };
    let report = predict(
        noise,
        cfg.system.delta,
        cfg.system.v,
        cfg.thermal.as_ref(),
        &cfg.predict,
    )?;
    let mut summary = format!("quadrant: {}", report.quadrant);
    let fields = [
        ("v_optimal", report.v_optimal),
        ("p_failure", report.p_failure),
        ("p_env_lz", report.p_env_lz),
        ("thermal_floor", report.thermal_floor),
    ];
    for (name, value) in fields {
        if let Some(x) = value {
            summary.push_str(&format!("\n{name}: {x}"));
        }
    }
    for d in &report.diagnostics {
        summary.push_str(&format!("\nnote: {d}"));
    }
    Output::new(&report, None, summary)
}

fn explicit_window(cfg: &RunConfig) -> Option<(f64, f64)> {
    cfg.system.t_start.zip(cfg.system.t_end)
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    let delta = cfg.system.delta;
    let v = cfg.require_v()?;
    let noise = match &cfg.decoherence {
        Decoherence::Classical(spec) => Some(spec),
        _ => None,
    };
    let control = &cfg.numerics.control;
    let (system, grid) = match explicit_window(cfg) {
        Some((t0, t1)) => {
            let system = SystemParams::new(delta, v, t0, t1).map_err(|e| e.within("system"))?;
            let grid = TimeGrid::covering(t0, t1, control.max_dt(&system, noise))?;
            (system, grid)
        }
        None => {
            let w = auto_time_window(delta, v, noise, &cfg.numerics.window, control)?;
            (w.system, w.grid)
        }
    };
    let result = match &cfg.decoherence {
        Decoherence::None => evolve_pure(&system, &grid, None, control)?,
        Decoherence::Lindblad { gamma } => evolve_lindblad(&system, *gamma, &grid, control)?,
        Decoherence::Classical(spec) => {
            // same noise realization as trajectory 0 of an ensemble run
            let spec = spec.with_seed(derive_seed(cfg.ensemble.master_seed, 0));
            let stream = NoiseStream::from_spec(&spec, grid.dt)?;
            evolve_pure_streamed(&system, &grid, &spec, stream, control)?
        }
    };
    let summary = format!(
        "ground-state population {} after {} steps on [{}, {}]",
        result.ground_state_population, result.step_count, system.t_start, system.t_end
    );
    let series = table(|w| result.write_series_csv(w))?;
    Output::new(&result, Some(series), summary)
}

pub fn ensemble_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    if explicit_window(cfg).is_some() {
        return Err(Failure::config(
            "system.t_start/t_end: explicit windows apply to simulate only",
        ));
    }
    let v = cfg.require_v()?;
    let r = evaluate(
        cfg.system.delta,
        v,
        &cfg.decoherence,
        &cfg.ensemble.to_config(),
        &cfg.numerics,
    )?;
    let summary = format!(
        "success probability {} ± {} from {} trajectories",
        r.success_probability, r.standard_error, r.n_used
    );
    Output::new(&r, None, summary)
}

pub fn curve_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    let block = cfg
        .curve
        .as_ref()
        .ok_or_else(|| Failure::config("curve: missing block"))?;
    let rates = block.sweep_rates(cfg.system.delta)?;
    let points = success_curve(
        cfg.system.delta,
        &cfg.decoherence,
        &rates,
        &cfg.ensemble.to_config(),
        &cfg.numerics,
    )?;
    let summary = format!("{} curve points", points.len());
    let csv = table(|w| write_curve_csv(&points, w))?;
    Output::new(&points, Some(csv), summary)
}

pub fn optimize_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    let oc = cfg.optimize_config()?;
    let mut report = find_optimal_sweep(cfg.system.delta, &cfg.decoherence, &oc, &cfg.numerics)?;
    if let Some(th) = &cfg.thermal {
        report = apply_thermal_floor(report, cfg.system.delta, th)?;
    }
    let summary = format!(
        "v_opt {} with success {} ± {} ({:?})",
        report.v_opt_numeric, report.p_max_numeric, report.p_max_error, report.status
    );
    let csv = table(|w| report.write_landscape_csv(w))?;
    Output::new(&report, Some(csv), summary)
}

pub fn scaling_cmd(cfg: &RunConfig) -> Result<Output, Failure> {
    let block = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| Failure::config("scaling: missing block"))?;
    let rows = scaling_table(&block.scenario(cfg.system.delta), &block.m_values)
        .map_err(|e| e.within("scaling"))?;
    let passing = rows.iter().filter(|r| r.pass).count();
    let summary = format!(
        "{passing} of {} qubit counts within the noise bound",
        rows.len()
    );
    let csv = table(|w| write_scaling_csv(&rows, w))?;
    Output::new(&rows, Some(csv), summary)
}

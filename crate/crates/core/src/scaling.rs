//! Noise at crossings where `M` qubits flip together.
//!
//! Independent per-qubit noise of amplitude `δ` adds in quadrature, so the
//! crossing sees an effective amplitude `√M·δ`. Plugging that into the
//! environment-driven LZ estimate gives an (optimistic) excitation
//! probability `exp(-πΔ²τ / (2√M δ))`, and demanding the exponent stay
//! large bounds the tolerable per-qubit noise by `Δ²τ / √M`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{evaluate, EnsembleConfig, EnsembleResult, Numerics};
use crate::error::{Error, Result};
use crate::export;
use crate::model::{NoiseModel, NoiseSpec};
use crate::Decoherence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingScenario {
    pub delta: f64,
    pub tau: f64,
    pub per_qubit_amplitude: f64,
    pub m_qubits: u32,
    /// Strength of the `≪` in the tolerable-noise bound.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    10.0
}

impl ScalingScenario {
    pub fn validate(&self) -> Result<()> {
        if self.m_qubits < 1 {
            return Err(Error::config("m_qubits", "must be >= 1"));
        }
        for (name, x) in [
            ("delta", self.delta),
            ("tau", self.tau),
            ("margin", self.margin),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        if !(self.per_qubit_amplitude >= 0.0) || !self.per_qubit_amplitude.is_finite() {
            return Err(Error::config(
                "per_qubit_amplitude",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn with_m(self, m_qubits: u32) -> Self {
        Self { m_qubits, ..self }
    }
}

/// `√M · δ`.
pub fn aggregate_amplitude(delta_per_qubit: f64, m: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::domain("qubit count must be >= 1"));
    }
    Ok((m as f64).sqrt() * delta_per_qubit)
}

/// `exp(-πΔ²τ / (2√M δ))`; an optimistic estimate.
pub fn m_qubit_excitation(s: &ScalingScenario) -> Result<f64> {
    s.validate()?;
    let a = aggregate_amplitude(s.per_qubit_amplitude, s.m_qubits)?;
    Ok((-PI * s.delta * s.delta * s.tau / (2.0 * a)).exp())
}

/// `Δ²τ / (√M · margin)`.
pub fn tolerable_noise_bound(delta: f64, tau: f64, m: u32, margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::config("margin", "must be > 0"));
    }
    if m < 1 {
        return Err(Error::domain("qubit count must be >= 1"));
    }
    Ok(delta * delta * tau / ((m as f64).sqrt() * margin))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m: u32,
    pub agg_amplitude: f64,
    pub p_excite: f64,
    pub delta_bound: f64,
    /// Per-qubit amplitude is within the bound.
    pub pass: bool,
}

pub fn scaling_table(base: &ScalingScenario, m_values: &[u32]) -> Result<Vec<ScalingRow>> {
    if m_values.is_empty() {
        return Err(Error::config("m_values", "must not be empty"));
    }
    base.validate()?;
    m_values
        .iter()
        .map(|&m| {
            let s = base.with_m(m);
            let bound = tolerable_noise_bound(s.delta, s.tau, m, s.margin)?;
            Ok(ScalingRow {
                m,
                agg_amplitude: aggregate_amplitude(s.per_qubit_amplitude, m)?,
                p_excite: m_qubit_excitation(&s)?,
                delta_bound: bound,
                pass: s.per_qubit_amplitude <= bound,
            })
        })
        .collect()
}

/// CSV with header `m,agg_amplitude,p_excite_eq14,delta_bound_eq15,pass`.
pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: &mut W) -> Result<()> {
    export::write_header(
        w,
        &[
            "m",
            "agg_amplitude",
            "p_excite_eq14",
            "delta_bound_eq15",
            "pass",
        ],
    )?;
    for r in rows {
        export::write_row(
            w,
            &[
                r.m.to_string(),
                export::fmt_float(r.agg_amplitude),
                export::fmt_float(r.p_excite),
                export::fmt_float(r.delta_bound),
                r.pass.to_string(),
            ],
        )?;
    }
    Ok(())
}

/// Noise spec with `M` independent OU channels of amplitude `δ` and time `τ`.
pub fn multichannel_noise(s: &ScalingScenario, seed: u64) -> Result<NoiseSpec> {
    s.validate()?;
    NoiseSpec::new(NoiseModel::OrnsteinUhlenbeck, s.per_qubit_amplitude, s.tau)?
        .with_channels(s.m_qubits)
        .map(|n| n.with_seed(seed))
}

/// Simulated failure `1 - P_success` of a sweep at rate `v` through the
/// crossing under the scenario's aggregated noise.
pub fn simulated_excitation(
    s: &ScalingScenario,
    v: f64,
    config: &EnsembleConfig,
    numerics: &Numerics,
) -> Result<EnsembleResult> {
    let noise = multichannel_noise(s, config.master_seed)?;
    let mut r = evaluate(s.delta, v, &Decoherence::Classical(noise), config, numerics)?;
    r.success_probability = 1.0 - r.success_probability;
    Ok(r)
}

//! Landau-Zener sweeps of a two-level system under classical noise and
//! dephasing.
//!
//! * [`model`]: domain types and the closed-form estimates (LZ formula,
//!   noise-regime classification, optimal sweep rates, failure
//!   probabilities, thermal limits).
//! * [`noise`]: Ornstein-Uhlenbeck and telegraph noise traces.
//! * [`propagator`]: Schrödinger and Lindblad propagation.
//! * [`ensemble`]: Monte Carlo averaging over noise realizations.
//! * [`optimizer`]: numerical search for the best sweep rate.
//! * [`scaling`]: √M aggregation of noise over many-qubit crossings.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod export;
pub mod grid;
pub mod model;
pub mod noise;
pub mod optimizer;
pub mod propagator;
pub mod scaling;
pub mod seed;

pub use ensemble::{run_ensemble, success_curve, CurvePoint, EnsembleConfig, EnsembleResult};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{
    classify_regime, lz_success_probability, predict, NoiseModel, NoiseSpec, PredictOptions,
    RegimeQuadrant, RegimeReport, SystemParams, ThermalParams,
};
pub use noise::{NoiseStream, NoiseTrace, TraceStats};
pub use optimizer::{apply_thermal_floor, find_optimal_sweep, OptimizeConfig, OptimumReport};
pub use propagator::{
    auto_time_window, evolve_lindblad, evolve_pure, AutoWindow, DensityMatrix, EvolutionResult,
    QuantumState, StepControl, WindowPolicy,
};
pub use scaling::{ScalingRow, ScalingScenario};

use serde::{Deserialize, Serialize};

/// How the environment acts on the sweep: not at all, through a σz
/// Lindblad dephasing channel of rate `gamma`, or as classical bias noise
/// averaged over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decoherence {
    None,
    Lindblad { gamma: f64 },
    Classical(NoiseSpec),
}

impl Decoherence {
    pub fn is_noise_free(&self) -> bool {
        match self {
            Decoherence::None => true,
            Decoherence::Lindblad { gamma } => *gamma == 0.0,
            Decoherence::Classical(spec) => spec.is_silent(),
        }
    }
}

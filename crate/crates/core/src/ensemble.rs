//! Monte Carlo averaging of noisy sweeps.
//!
//! Trajectory `i` draws its noise from `derive_seed(master_seed, i)`.
//! Trajectories run in parallel on the current rayon pool, but their
//! populations are reduced in index order, so a result depends only on the
//! configuration and never on the thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::grid::TimeGrid;
use crate::model::{NoiseSpec, SystemParams};
use crate::noise::NoiseStream;
use crate::propagator::{
    auto_time_window, dephasing_tail_factor, evolve_lindblad, evolve_pure, evolve_pure_streamed,
    StepControl, WindowPolicy,
};
use crate::seed::derive_seed;
use crate::Decoherence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Trajectories per run, or per batch when a target error is set.
    pub n_trajectories: u64,
    pub master_seed: u64,
    /// Keep adding whole batches until the standard error drops to this.
    #[serde(default)]
    pub target_standard_error: Option<f64>,
    pub max_trajectories: u64,
}

impl EnsembleConfig {
    pub fn new(n_trajectories: u64, master_seed: u64) -> Self {
        Self {
            n_trajectories,
            master_seed,
            target_standard_error: None,
            max_trajectories: n_trajectories,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 1 {
            return Err(Error::config("n_trajectories", "must be >= 1"));
        }
        if self.max_trajectories < self.n_trajectories {
            return Err(Error::config(
                "max_trajectories",
                "must be >= n_trajectories",
            ));
        }
        if let Some(t) = self.target_standard_error {
            if !(t > 0.0) {
                return Err(Error::config("target_standard_error", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn trajectory_seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, index)
    }
}

/// Window and step settings used to turn `(Δ, v)` into a grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Numerics {
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default)]
    pub control: StepControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// No noise: one deterministic Schrödinger run.
    Deterministic,
    /// Average over classical noise trajectories.
    Trajectories,
    /// Lindblad dephasing, one density-matrix run.
    Lindblad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub success_probability: f64,
    /// Sample standard deviation over `sqrt(n_used)`; zero for
    /// deterministic methods.
    pub standard_error: f64,
    pub n_used: u64,
    pub method: Method,
    /// Trajectory `i` used `derive_seed(master_seed, i)`.
    pub master_seed: u64,
    pub batches: u64,
    /// Whether the target standard error, if any, was met.
    pub converged: bool,
}

impl EnsembleResult {
    fn exact(p: f64, n: u64, method: Method, master_seed: u64) -> Self {
        Self {
            success_probability: p,
            standard_error: 0.0,
            n_used: n,
            method,
            master_seed,
            batches: 1,
            converged: true,
        }
    }

    /// Seeds of every trajectory that contributed.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_used).map(move |i| derive_seed(self.master_seed, i))
    }
}

fn trajectory(
    system: &SystemParams,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    seed: u64,
    control: &StepControl,
) -> Result<f64> {
    let spec = noise.with_seed(seed);
    let stream = NoiseStream::from_spec(&spec, grid.dt)?;
    Ok(evolve_pure_streamed(system, grid, &spec, stream, control)?.ground_state_population)
}

fn run_batch(
    system: &SystemParams,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    config: &EnsembleConfig,
    control: &StepControl,
    range: std::ops::Range<u64>,
) -> Result<Vec<f64>> {
    let outcomes: Vec<Result<f64>> = range
        .clone()
        .into_par_iter()
        .map(|i| trajectory(system, grid, noise, config.trajectory_seed(i), control))
        .collect();
    outcomes
        .into_iter()
        .zip(range)
        .map(|(r, i)| {
            r.map_err(|e| Error::Trajectory {
                index: i,
                seed: config.trajectory_seed(i),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean and standard error, summed in index order.
fn summarize(pops: &[f64]) -> (f64, f64) {
    let n = pops.len() as f64;
    let mean = pops.iter().sum::<f64>() / n;
    if pops.len() < 2 {
        return (mean, 0.0);
    }
    let var = pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Average ground-state population over independent noise realizations.
pub fn run_ensemble(
    system: &SystemParams,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    config: &EnsembleConfig,
    control: &StepControl,
) -> Result<EnsembleResult> {
    config.validate()?;
    noise.validate()?;
    if noise.is_silent() && noise.mean_offset == 0.0 {
        let p = evolve_pure(system, grid, None, control)?.ground_state_population;
        return Ok(EnsembleResult::exact(
            p,
            config.n_trajectories,
            Method::Deterministic,
            config.master_seed,
        ));
    }

    let batch = config.n_trajectories;
    let mut pops = run_batch(system, grid, noise, config, control, 0..batch)?;
    let mut batches = 1;
    let (mut mean, mut se) = summarize(&pops);
    let mut converged = true;
    if let Some(target) = config.target_standard_error {
        converged = se <= target;
        while !converged && pops.len() as u64 + batch <= config.max_trajectories {
            let start = pops.len() as u64;
            pops.extend(run_batch(
                system,
                grid,
                noise,
                config,
                control,
                start..start + batch,
            )?);
            batches += 1;
            (mean, se) = summarize(&pops);
            converged = se <= target;
        }
    }
    Ok(EnsembleResult {
        success_probability: mean.clamp(0.0, 1.0),
        standard_error: se,
        n_used: pops.len() as u64,
        method: Method::Trajectories,
        master_seed: config.master_seed,
        batches,
        converged,
    })
}

/// Success probability at `(Δ, v)` under any decoherence model, on the
/// automatically chosen window.
pub fn evaluate(
    delta: f64,
    v: f64,
    decoherence: &Decoherence,
    config: &EnsembleConfig,
    numerics: &Numerics,
) -> Result<EnsembleResult> {
    let noise = match decoherence {
        Decoherence::Classical(spec) => Some(spec),
        _ => None,
    };
    let w = auto_time_window(delta, v, noise, &numerics.window, &numerics.control)?;
    match decoherence {
        Decoherence::None => {
            let p =
                evolve_pure(&w.system, &w.grid, None, &numerics.control)?.ground_state_population;
            Ok(EnsembleResult::exact(
                p,
                1,
                Method::Deterministic,
                config.master_seed,
            ))
        }
        Decoherence::Lindblad { gamma } => {
            let inside = evolve_lindblad(&w.system, *gamma, &w.grid, &numerics.control)?
                .ground_state_population;
            // the dephasing channel is unital, so hops outside the window
            // only pull the imbalance towards one half
            let s = &w.system;
            let tails = dephasing_tail_factor(delta, v, *gamma, v * s.t_start)
                * dephasing_tail_factor(delta, v, *gamma, v * s.t_end);
            let p = (0.5 + tails * (inside - 0.5)).clamp(0.0, 1.0);
            Ok(EnsembleResult::exact(
                p,
                1,
                Method::Lindblad,
                config.master_seed,
            ))
        }
        Decoherence::Classical(spec) => {
            run_ensemble(&w.system, &w.grid, spec, config, &numerics.control)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub v: f64,
    pub delta2_over_v: f64,
    pub result: EnsembleResult,
}

/// One evaluation per sweep rate; point `j` uses master seed
/// `derive_seed(config.master_seed, j)`.
pub fn success_curve(
    delta: f64,
    decoherence: &Decoherence,
    v_grid: &[f64],
    config: &EnsembleConfig,
    numerics: &Numerics,
) -> Result<Vec<CurvePoint>> {
    if let Some(bad) = v_grid.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::config(
            "v_grid",
            format!("sweep rates must be > 0, got {bad}"),
        ));
    }
    v_grid
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let cfg = EnsembleConfig {
                master_seed: derive_seed(config.master_seed, j as u64),
                ..*config
            };
            Ok(CurvePoint {
                v,
                delta2_over_v: delta * delta / v,
                result: evaluate(delta, v, decoherence, &cfg, numerics)?,
            })
        })
        .collect()
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::config(
            "log_grid",
            "need 0 < lo < hi and at least 2 points",
        ));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// CSV with header `v,delta2_over_v,p_success,std_err,n`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], w: &mut W) -> Result<()> {
    export::write_header(w, &["v", "delta2_over_v", "p_success", "std_err", "n"])?;
    for p in points {
        export::write_row(
            w,
            &[
                export::fmt_float(p.v),
                export::fmt_float(p.delta2_over_v),
                export::fmt_float(p.result.success_probability),
                export::fmt_float(p.result.standard_error),
                p.result.n_used.to_string(),
            ],
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lz_success_probability;
    use crate::propagator::AutoWindow;

    fn window(v: f64, noise: Option<&NoiseSpec>) -> AutoWindow {
        auto_time_window(
            1.0,
            v,
            noise,
            &WindowPolicy::default(),
            &StepControl::default(),
        )
        .unwrap()
    }

    #[test]
    fn silent_noise_is_deterministic() {
        let w = window(1.0, None);
        let c = StepControl::default();
        let r = run_ensemble(
            &w.system,
            &w.grid,
            &NoiseSpec::none(),
            &EnsembleConfig::new(50, 1),
            &c,
        )
        .unwrap();
        let single = evolve_pure(&w.system, &w.grid, None, &c).unwrap();
        assert_eq!(r.success_probability, single.ground_state_population);
        assert_eq!(r.standard_error, 0.0);
        assert_eq!(r.n_used, 50);
    }

    #[test]
    fn same_config_same_bits_across_pools() {
        let noise = NoiseSpec::ou(0.3, 0.5).unwrap();
        let w = window(2.0, Some(&noise));
        let cfg = EnsembleConfig::new(24, 99);
        let c = StepControl::default();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one
            .install(|| run_ensemble(&w.system, &w.grid, &noise, &cfg, &c))
            .unwrap();
        let b = four
            .install(|| run_ensemble(&w.system, &w.grid, &noise, &cfg, &c))
            .unwrap();
        assert_eq!(
            a.success_probability.to_bits(),
            b.success_probability.to_bits()
        );
        assert_eq!(a.standard_error.to_bits(), b.standard_error.to_bits());
        assert!(a.standard_error > 0.0);
    }

    #[test]
    fn adaptive_stopping_uses_whole_batches() {
        let noise = NoiseSpec::ou(0.5, 0.5).unwrap();
        let w = window(2.0, Some(&noise));
        let cfg = EnsembleConfig {
            n_trajectories: 8,
            master_seed: 3,
            target_standard_error: Some(1e-9),
            max_trajectories: 30,
        };
        let r = run_ensemble(&w.system, &w.grid, &noise, &cfg, &StepControl::default()).unwrap();
        assert_eq!(r.n_used, 24);
        assert_eq!(r.batches, 3);
        assert!(!r.converged);

        // the first 24 trajectories of a fixed run give the same answer
        let fixed = EnsembleConfig::new(24, 3);
        let f = run_ensemble(&w.system, &w.grid, &noise, &fixed, &StepControl::default()).unwrap();
        assert_eq!(f.success_probability, r.success_probability);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = EnsembleConfig::new(10, 0);
        c.max_trajectories = 5;
        assert!(c.validate().is_err());
        assert!(EnsembleConfig::new(0, 0).validate().is_err());
    }

    #[test]
    fn trajectory_failure_names_its_seed() {
        let noise = NoiseSpec::ou(0.3, 0.5).unwrap();
        let w = window(2.0, Some(&noise));
        // a control that rejects any drift forces a numerical failure
        let c = StepControl {
            norm_tolerance: -1.0,
            ..Default::default()
        };
        let cfg = EnsembleConfig::new(4, 5);
        match run_ensemble(&w.system, &w.grid, &noise, &cfg, &c) {
            Err(Error::Trajectory { index, seed, .. }) => {
                assert_eq!(index, 0);
                assert_eq!(seed, cfg.trajectory_seed(0));
            }
            other => panic!("expected trajectory error, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_curve_matches_closed_form() {
        let vs = log_grid(0.3, 10.0, 6).unwrap();
        let pts = success_curve(
            1.0,
            &Decoherence::None,
            &vs,
            &EnsembleConfig::new(1, 0),
            &Numerics::default(),
        )
        .unwrap();
        for p in &pts {
            let exact = lz_success_probability(1.0, p.v).unwrap();
            assert!((p.result.success_probability - exact).abs() < 5e-3);
        }
        let mut buf = Vec::new();
        write_curve_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("v,delta2_over_v,p_success,std_err,n\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 100.0, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert_eq!(g[3], 100.0);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!(log_grid(1.0, 1.0, 3).is_err());
    }
}

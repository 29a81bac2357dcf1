//! Numerical search for the sweep rate that maximizes success.
//!
//! A log-spaced coarse scan locates the best grid point; golden-section
//! search on `ln v` then refines inside the bracket formed by its two
//! neighbours. Ensemble noise can make the refined samples non-unimodal, in
//! which case the bracket is rescanned on a dense grid instead. Every
//! evaluation `k` (coarse points first, then refinements in order) uses
//! master seed `derive_seed(master_seed, k)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{evaluate, log_grid, EnsembleConfig, EnsembleResult, Numerics};
use crate::error::{Error, Result};
use crate::export;
use crate::model::{
    classify_regime, predict, thermal_floor, thermal_occupation, PredictOptions, RegimeQuadrant,
    ThermalParams,
};
use crate::seed::derive_seed;
use crate::Decoherence;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub coarse_grid_points: usize,
    pub refine_iterations: usize,
    pub ensemble: EnsembleConfig,
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min > 0.0 && self.v_max > self.v_min && self.v_max.is_finite()) {
            return Err(Error::config("v_min/v_max", "need 0 < v_min < v_max"));
        }
        if self.coarse_grid_points < 5 {
            return Err(Error::config("coarse_grid_points", "must be >= 5"));
        }
        self.ensemble.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumStatus {
    /// Maximum strictly inside the scanned range.
    Interior,
    /// No decoherence: success only grows as the sweep slows.
    MonotoneNoiseFree,
    /// Best coarse point sits on the edge of the range.
    Boundary,
    /// Every coarse point is within error bars of the best one.
    ResolutionInsufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    SweepAtOptimum,
    SlowSweepToEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub v: f64,
    pub p_success: f64,
    pub std_err: f64,
}

impl LandscapePoint {
    fn from_result(v: f64, r: &EnsembleResult) -> Self {
        Self {
            v,
            p_success: r.success_probability,
            std_err: r.standard_error,
        }
    }

    fn combined_error(&self, other: &Self) -> f64 {
        self.std_err.hypot(other.std_err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub v_opt_numeric: f64,
    pub p_max_numeric: f64,
    pub p_max_error: f64,
    pub status: OptimumStatus,
    /// Both coarse neighbours of the optimum are lower by more than one
    /// combined standard error.
    pub local_max_verified: bool,
    /// Golden-section samples were not unimodal and a dense rescan was used.
    pub dense_fallback: bool,
    pub bracket: Option<(f64, f64)>,
    pub quadrant: Option<RegimeQuadrant>,
    pub v_opt_analytic: Option<f64>,
    pub ratio_numeric_to_analytic: Option<f64>,
    pub p_failure_predicted: Option<f64>,
    /// `πΔ²τ/2A` for high-amplitude noise, where no analytic optimum exists.
    pub env_exponent: Option<f64>,
    pub negligible_env_effect: Option<bool>,
    pub thermal_floor_applied: bool,
    pub recommendation: Recommendation,
    pub success_ceiling: Option<f64>,
    /// Every evaluation, sorted by `v`.
    pub landscape: Vec<LandscapePoint>,
}

impl OptimumReport {
    /// CSV with header `v,p_success,std_err`.
    pub fn write_landscape_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        export::write_header(w, &["v", "p_success", "std_err"])?;
        for p in &self.landscape {
            export::float_row(w, &[p.v, p.p_success, p.std_err])?;
        }
        Ok(())
    }
}

struct Evaluator<'a> {
    delta: f64,
    decoherence: &'a Decoherence,
    config: &'a OptimizeConfig,
    numerics: &'a Numerics,
    count: u64,
    points: Vec<LandscapePoint>,
}

impl Evaluator<'_> {
    fn config_for(&self, index: u64) -> EnsembleConfig {
        EnsembleConfig {
            master_seed: derive_seed(self.config.ensemble.master_seed, index),
            ..self.config.ensemble
        }
    }

    fn eval_many(&mut self, vs: &[f64]) -> Result<Vec<LandscapePoint>> {
        let base = self.count;
        let results: Vec<Result<EnsembleResult>> = vs
            .par_iter()
            .enumerate()
            .map(|(j, &v)| {
                let cfg = self.config_for(base + j as u64);
                evaluate(self.delta, v, self.decoherence, &cfg, self.numerics)
            })
            .collect();
        self.count += vs.len() as u64;
        let mut out = Vec::with_capacity(vs.len());
        for (&v, r) in vs.iter().zip(results) {
            let p = LandscapePoint::from_result(v, &r?);
            self.points.push(p);
            out.push(p);
        }
        Ok(out)
    }

    fn eval(&mut self, v: f64) -> Result<LandscapePoint> {
        Ok(self.eval_many(&[v])?[0])
    }
}

fn argmax(points: &[LandscapePoint]) -> usize {
    // first of equal maxima, so ties resolve toward smaller v
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.p_success > points[best].p_success {
            best = i;
        }
    }
    best
}

/// Samples sorted by `v` rise to the maximum and fall after it, allowing
/// dips of up to two combined standard errors.
fn is_unimodal(sorted: &[LandscapePoint]) -> bool {
    let peak = argmax(sorted);
    let slack = |a: &LandscapePoint, b: &LandscapePoint| 2.0 * a.combined_error(b);
    sorted[..=peak]
        .windows(2)
        .all(|w| w[1].p_success + slack(&w[0], &w[1]) >= w[0].p_success)
        && sorted[peak..]
            .windows(2)
            .all(|w| w[1].p_success <= w[0].p_success + slack(&w[0], &w[1]))
}

fn analytic_fields(
    delta: f64,
    decoherence: &Decoherence,
    report: &mut OptimumReport,
) -> Result<()> {
    let Decoherence::Classical(spec) = decoherence else {
        return Ok(());
    };
    if spec.is_silent() {
        return Ok(());
    }
    let q = classify_regime(spec, delta)?;
    report.quadrant = Some(q);
    let r = predict(spec, delta, None, None, &PredictOptions::default())?;
    if q.is_low_amplitude() {
        report.v_opt_analytic = r.v_optimal;
        report.p_failure_predicted = r.p_failure;
        report.ratio_numeric_to_analytic = r.v_optimal.map(|a| report.v_opt_numeric / a);
    } else {
        report.env_exponent = r.env_exponent;
        report.negligible_env_effect = r.negligible_env_effect;
    }
    Ok(())
}

/// Locate the sweep rate in `[v_min, v_max]` with the highest success.
pub fn find_optimal_sweep(
    delta: f64,
    decoherence: &Decoherence,
    config: &OptimizeConfig,
    numerics: &Numerics,
) -> Result<OptimumReport> {
    config.validate()?;
    if !(delta > 0.0) {
        return Err(Error::config("delta", "must be > 0"));
    }
    let mut ev = Evaluator {
        delta,
        decoherence,
        config,
        numerics,
        count: 0,
        points: Vec::new(),
    };
    let mut report = OptimumReport {
        v_opt_numeric: config.v_min,
        p_max_numeric: 0.0,
        p_max_error: 0.0,
        status: OptimumStatus::MonotoneNoiseFree,
        local_max_verified: false,
        dense_fallback: false,
        bracket: None,
        quadrant: None,
        v_opt_analytic: None,
        ratio_numeric_to_analytic: None,
        p_failure_predicted: None,
        env_exponent: None,
        negligible_env_effect: None,
        thermal_floor_applied: false,
        recommendation: Recommendation::SweepAtOptimum,
        success_ceiling: None,
        landscape: Vec::new(),
    };

    if decoherence.is_noise_free() {
        let p = ev.eval(config.v_min)?;
        report.p_max_numeric = p.p_success;
        report.p_max_error = p.std_err;
        report.landscape = ev.points;
        return Ok(report);
    }

    let grid = log_grid(config.v_min, config.v_max, config.coarse_grid_points)?;
    let coarse = ev.eval_many(&grid)?;
    let best = argmax(&coarse);
    let top = coarse[best];
    let flat = coarse
        .iter()
        .all(|p| (top.p_success - p.p_success).abs() <= top.combined_error(p));

    let (status, chosen) = if flat {
        (OptimumStatus::ResolutionInsufficient, top)
    } else if best == 0 || best == coarse.len() - 1 {
        (OptimumStatus::Boundary, top)
    } else {
        let (left, right) = (coarse[best - 1], coarse[best + 1]);
        report.bracket = Some((left.v, right.v));
        let (mut a, mut b) = (left.v.ln(), right.v.ln());
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut in_bracket = vec![left, top, right];
        if config.refine_iterations > 0 {
            let mut fc = ev.eval(c.exp())?;
            let mut fd = ev.eval(d.exp())?;
            in_bracket.extend([fc, fd]);
            for _ in 2..config.refine_iterations {
                if fc.p_success > fd.p_success {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = ev.eval(c.exp())?;
                    in_bracket.push(fc);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = ev.eval(d.exp())?;
                    in_bracket.push(fd);
                }
            }
        }
        in_bracket.sort_by(|x, y| x.v.total_cmp(&y.v));
        if !is_unimodal(&in_bracket) {
            report.dense_fallback = true;
            let n = config.refine_iterations.max(3) + 2;
            let dense = log_grid(left.v, right.v, n)?;
            let inner = &dense[1..n - 1];
            in_bracket.extend(ev.eval_many(inner)?);
        }
        let chosen = in_bracket[argmax(&in_bracket)];
        report.local_max_verified = chosen.p_success - left.p_success
            > chosen.combined_error(&left)
            && chosen.p_success - right.p_success > chosen.combined_error(&right);
        (OptimumStatus::Interior, chosen)
    };

    report.status = status;
    report.v_opt_numeric = chosen.v;
    report.p_max_numeric = chosen.p_success;
    report.p_max_error = chosen.std_err;
    let mut landscape = ev.points;
    landscape.sort_by(|x, y| x.v.total_cmp(&y.v));
    report.landscape = landscape;
    analytic_fields(delta, decoherence, &mut report)?;
    Ok(report)
}

/// Switch to a slow sweep when noise-induced failure exceeds the thermal
/// excited-state occupation.
///
/// The failure used is the analytic prediction when the report has one,
/// otherwise the simulated `1 - p_max`. Switching sets the ceiling to
/// `1/(1 + exp(-Δ/k_BT))`; otherwise the report is returned unchanged.
pub fn apply_thermal_floor(
    report: OptimumReport,
    delta: f64,
    thermal: &ThermalParams,
) -> Result<OptimumReport> {
    let occupation = thermal_occupation(delta, thermal)?;
    let failure = report
        .p_failure_predicted
        .unwrap_or(1.0 - report.p_max_numeric);
    if failure > occupation {
        Ok(OptimumReport {
            thermal_floor_applied: true,
            recommendation: Recommendation::SlowSweepToEquilibrium,
            success_ceiling: Some(thermal_floor(delta, thermal)?),
            ..report
        })
    } else {
        Ok(report)
    }
}

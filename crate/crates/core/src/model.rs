//! Domain types and the closed-form Landau-Zener estimates.
//!
//! Units: ħ = 1, energies and rates share one unit, sweep rates are
//! energy²/time. The `∼` estimates are evaluated with unit prefactors, so
//! every estimator here is an order-of-magnitude predictor and is meant to
//! be compared with simulations through trends rather than exact values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(name, format!("must be finite, got {x}")))
    }
}

/// Gap, sweep rate and simulation window of the driven two-level system.
///
/// The drive Hamiltonian is `H(t) = -(Δ/2)σx - ((v t + ξ(t))/2)σz`, with the
/// degeneracy point at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta: f64,
    pub v: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl SystemParams {
    pub fn new(delta: f64, v: f64, t_start: f64, t_end: f64) -> Result<Self> {
        let p = Self {
            delta,
            v,
            t_start,
            t_end,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("delta", self.delta)?;
        require_finite("v", self.v)?;
        require_finite("t_start", self.t_start)?;
        require_finite("t_end", self.t_end)?;
        if self.delta < 0.0 {
            return Err(Error::config("delta", "must be >= 0"));
        }
        if self.v <= 0.0 {
            return Err(Error::config("v", "must be > 0"));
        }
        if !(self.t_start < 0.0 && self.t_end > 0.0) {
            return Err(Error::config(
                "t_start/t_end",
                "window must satisfy t_start < 0 < t_end",
            ));
        }
        Ok(())
    }

    /// Dimensionless adiabaticity `Δ²/v`, the abscissa of success curves.
    pub fn adiabaticity(&self) -> f64 {
        self.delta * self.delta / self.v
    }

    pub fn bias(&self, t: f64) -> f64 {
        self.v * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    OrnsteinUhlenbeck,
    Telegraph,
}

/// Classical bias noise `ξ(t)` coupled through σz.
///
/// `amplitude` is the RMS deviation of a single channel about
/// `mean_offset`; with `channels = M` independent channels the total signal
/// has RMS `√M · amplitude` (see [`NoiseSpec::effective_amplitude`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub amplitude: f64,
    pub tau: f64,
    #[serde(default)]
    pub mean_offset: f64,
    #[serde(default = "default_channels")]
    pub channels: u32,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_channels() -> u32 {
    1
}

impl NoiseSpec {
    pub fn new(model: NoiseModel, amplitude: f64, tau: f64) -> Result<Self> {
        let s = Self {
            model,
            amplitude,
            tau,
            mean_offset: 0.0,
            channels: 1,
            master_seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn none() -> Self {
        Self {
            model: NoiseModel::None,
            amplitude: 0.0,
            tau: 1.0,
            mean_offset: 0.0,
            channels: 1,
            master_seed: 0,
        }
    }

    pub fn ou(amplitude: f64, tau: f64) -> Result<Self> {
        Self::new(NoiseModel::OrnsteinUhlenbeck, amplitude, tau)
    }

    pub fn telegraph(amplitude: f64, tau: f64) -> Result<Self> {
        Self::new(NoiseModel::Telegraph, amplitude, tau)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_channels(mut self, channels: u32) -> Result<Self> {
        self.channels = channels;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mean_offset(mut self, offset: f64) -> Result<Self> {
        self.mean_offset = offset;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("amplitude", self.amplitude)?;
        require_finite("tau", self.tau)?;
        require_finite("mean_offset", self.mean_offset)?;
        if self.amplitude < 0.0 {
            return Err(Error::config("amplitude", "must be >= 0"));
        }
        if self.tau <= 0.0 {
            return Err(Error::config("tau", "must be > 0"));
        }
        if self.channels < 1 {
            return Err(Error::config("channels", "must be >= 1"));
        }
        Ok(())
    }

    /// Spectral cutoff `ω_max ≡ 1/τ`.
    pub fn omega_max(&self) -> f64 {
        1.0 / self.tau
    }

    /// RMS of the summed signal over all channels, zero for `NoiseModel::None`.
    pub fn effective_amplitude(&self) -> f64 {
        match self.model {
            NoiseModel::None => 0.0,
            _ => (self.channels as f64).sqrt() * self.amplitude,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.model == NoiseModel::None || self.amplitude == 0.0
    }
}

/// Noise classification by amplitude (vs Δ) and spectral cutoff (vs Δ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeQuadrant {
    LowAmpShortCorr,
    LowAmpLongCorr,
    HighAmpLongCorr,
    HighAmpShortCorr,
}

impl RegimeQuadrant {
    pub fn is_low_amplitude(self) -> bool {
        matches!(self, Self::LowAmpShortCorr | Self::LowAmpLongCorr)
    }

    pub fn is_short_correlation(self) -> bool {
        matches!(self, Self::LowAmpShortCorr | Self::HighAmpShortCorr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LowAmpShortCorr => "low-amplitude, short-correlation",
            Self::LowAmpLongCorr => "low-amplitude, long-correlation",
            Self::HighAmpLongCorr => "high-amplitude, long-correlation",
            Self::HighAmpShortCorr => "high-amplitude, short-correlation",
        }
    }
}

impl std::fmt::Display for RegimeQuadrant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub k_b_t: f64,
}

impl ThermalParams {
    pub fn new(k_b_t: f64) -> Result<Self> {
        let t = Self { k_b_t };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_b_t > 0.0) || self.k_b_t.is_nan() {
            return Err(Error::config("k_b_t", "must be > 0"));
        }
        Ok(())
    }
}

/// Tunables for the estimators that involve a `≫` comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictOptions {
    /// `πΔ²τ/2A` above this counts as "≫ 1".
    pub negligible_threshold: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            negligible_threshold: 10.0,
        }
    }
}

/// Classified quadrant plus whichever estimates apply to it.
///
/// Fields that do not apply to the quadrant are `None`. Every probability is
/// clamped to `[0, 1]`; the names of clamped fields are listed in `clamped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub quadrant: RegimeQuadrant,
    pub delta: f64,
    pub amplitude: f64,
    pub omega_max: f64,
    pub v: Option<f64>,
    pub excitation_rate: Option<f64>,
    pub p_noise: Option<f64>,
    pub v_optimal: Option<f64>,
    pub p_failure: Option<f64>,
    pub photon_order: Option<u32>,
    pub v_env: Option<f64>,
    pub env_exponent: Option<f64>,
    pub p_env_lz: Option<f64>,
    pub negligible_env_effect: Option<bool>,
    pub crossing_count: Option<f64>,
    pub k_b_t: Option<f64>,
    pub thermal_occupation: Option<f64>,
    pub thermal_floor: Option<f64>,
    pub n_min: Option<u32>,
    pub thermal_limited: Option<bool>,
    pub clamped: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl RegimeReport {
    fn empty(quadrant: RegimeQuadrant, delta: f64, noise: &NoiseSpec) -> Self {
        Self {
            quadrant,
            delta,
            amplitude: noise.effective_amplitude(),
            omega_max: noise.omega_max(),
            v: None,
            excitation_rate: None,
            p_noise: None,
            v_optimal: None,
            p_failure: None,
            photon_order: None,
            v_env: None,
            env_exponent: None,
            p_env_lz: None,
            negligible_env_effect: None,
            crossing_count: None,
            k_b_t: None,
            thermal_occupation: None,
            thermal_floor: None,
            n_min: None,
            thermal_limited: None,
            clamped: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn clamp_probability(&mut self, field: &str, p: f64) -> f64 {
        if (0.0..=1.0).contains(&p) {
            p
        } else {
            self.clamped.push(field.to_string());
            p.clamp(0.0, 1.0)
        }
    }

    /// Success probability the estimate promises at the optimum, `1 - p_failure`.
    pub fn predicted_success(&self) -> Option<f64> {
        self.p_failure.map(|p| 1.0 - p)
    }
}

/// Largest integer strictly smaller than `x`.
pub fn int_below(x: f64) -> i64 {
    x.ceil() as i64 - 1
}

/// `P_LZ = 1 - exp(-πΔ²/2v)`, the probability of ending in the new ground state.
pub fn lz_success_probability(delta: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("sweep rate must be > 0, got {v}")));
    }
    if !delta.is_finite() {
        return Err(Error::domain(format!("gap must be finite, got {delta}")));
    }
    Ok(-(-PI * delta * delta / (2.0 * v)).exp_m1())
}

/// Quadrant of `(A, ω_max)` relative to `Δ`. `A` is the effective (all
/// channel) amplitude. Ties go to high amplitude (`A = Δ`) and to long
/// correlation (`ω_max = Δ`).
pub fn classify_regime(noise: &NoiseSpec, delta: f64) -> Result<RegimeQuadrant> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("gap must be > 0, got {delta}")));
    }
    noise.validate()?;
    let low_amp = noise.effective_amplitude() < delta;
    let short_corr = noise.omega_max() > delta;
    Ok(match (low_amp, short_corr) {
        (true, true) => RegimeQuadrant::LowAmpShortCorr,
        (true, false) => RegimeQuadrant::LowAmpLongCorr,
        (false, false) => RegimeQuadrant::HighAmpLongCorr,
        (false, true) => RegimeQuadrant::HighAmpShortCorr,
    })
}

fn expect_quadrant(
    noise: &NoiseSpec,
    delta: f64,
    allowed: &[RegimeQuadrant],
    name: &str,
) -> Result<RegimeQuadrant> {
    let q = classify_regime(noise, delta)?;
    if allowed.contains(&q) {
        Ok(q)
    } else {
        Err(Error::RegimeMismatch {
            expected: name.to_string(),
            actual: q.name().to_string(),
        })
    }
}

fn check_v(v: Option<f64>) -> Result<()> {
    match v {
        Some(v) if !(v > 0.0) || !v.is_finite() => {
            Err(Error::domain(format!("sweep rate must be > 0, got {v}")))
        }
        _ => Ok(()),
    }
}

/// Ground-to-excited rate `A²/ω_max` (noise spectrum at the gap frequency).
pub fn short_corr_excitation_rate(amplitude: f64, omega_max: f64) -> f64 {
    amplitude * amplitude / omega_max
}

/// Noise-induced excitation during the crossing, `A²Δ/(ω_max v)`. Unclamped.
pub fn short_corr_noise_excitation(amplitude: f64, omega_max: f64, delta: f64, v: f64) -> f64 {
    amplitude * amplitude * delta / (omega_max * v)
}

/// Failure at the optimum, `A²/(ω_max Δ)`. Unclamped.
pub fn short_corr_failure(amplitude: f64, omega_max: f64, delta: f64) -> f64 {
    amplitude * amplitude / (omega_max * delta)
}

/// Order of the multi-quantum process, `Int(Δ/ω_max) + 1`, at least 1.
pub fn photon_order(delta: f64, omega_max: f64) -> u32 {
    int_below(delta / omega_max)
        .saturating_add(1)
        .clamp(1, u32::MAX as i64) as u32
}

/// `(A²/ω_max)(A/Δ)^(2n-1)`.
pub fn long_corr_excitation_rate(amplitude: f64, omega_max: f64, delta: f64, n: u32) -> f64 {
    short_corr_excitation_rate(amplitude, omega_max)
        * (amplitude / delta).powf(2.0 * n as f64 - 1.0)
}

/// `(A²/(ω_max Δ))(A/Δ)^(2n-1)`. Unclamped.
pub fn long_corr_failure(amplitude: f64, omega_max: f64, delta: f64, n: u32) -> f64 {
    short_corr_failure(amplitude, omega_max, delta) * (amplitude / delta).powf(2.0 * n as f64 - 1.0)
}

/// Estimates for weak noise whose spectrum extends past the gap.
pub fn predict_low_amp_short_corr(
    noise: &NoiseSpec,
    delta: f64,
    v: Option<f64>,
) -> Result<RegimeReport> {
    let q = expect_quadrant(
        noise,
        delta,
        &[RegimeQuadrant::LowAmpShortCorr],
        RegimeQuadrant::LowAmpShortCorr.name(),
    )?;
    check_v(v)?;
    let a = noise.effective_amplitude();
    let w = noise.omega_max();
    let mut r = RegimeReport::empty(q, delta, noise);
    r.v = v;
    r.excitation_rate = Some(short_corr_excitation_rate(a, w));
    if let Some(v) = v {
        let p = short_corr_noise_excitation(a, w, delta, v);
        r.p_noise = Some(r.clamp_probability("p_noise", p));
    }
    let pf = short_corr_failure(a, w, delta);
    r.p_failure = Some(r.clamp_probability("p_failure", pf));

    if a == 0.0 {
        r.diagnostics.push(
            "noiseless: success increases monotonically as the sweep slows; no finite optimum"
                .into(),
        );
    } else {
        // ln(ω_max Δ / A²) must exceed 1, otherwise v_optimal >= Δ² and the
        // bias-driven LZ failure alone is already of order one.
        let log_arg = (w * delta / (a * a)).ln();
        if log_arg > 1.0 {
            r.v_optimal = Some(delta * delta / log_arg);
        } else {
            r.diagnostics.push(format!(
                "v_optimal outside validity: ln(ω_max Δ / A²) = {log_arg:.6} <= 1"
            ));
        }
    }
    Ok(r)
}

/// Estimates for weak noise whose spectrum stops below the gap
/// (multi-quantum excitation of order `n`).
pub fn predict_low_amp_long_corr(noise: &NoiseSpec, delta: f64) -> Result<RegimeReport> {
    let q = expect_quadrant(
        noise,
        delta,
        &[RegimeQuadrant::LowAmpLongCorr],
        RegimeQuadrant::LowAmpLongCorr.name(),
    )?;
    let a = noise.effective_amplitude();
    let w = noise.omega_max();
    let n = photon_order(delta, w);
    let mut r = RegimeReport::empty(q, delta, noise);
    r.photon_order = Some(n);
    r.excitation_rate = Some(long_corr_excitation_rate(a, w, delta, n));
    let pf = long_corr_failure(a, w, delta, n);
    r.p_failure = Some(r.clamp_probability("p_failure", pf));

    if a == 0.0 {
        r.diagnostics.push(
            "noiseless: success increases monotonically as the sweep slows; no finite optimum"
                .into(),
        );
    } else {
        // ln(ω_max Δ^(2n) / A^(2n+1)) evaluated in log space
        let nf = n as f64;
        let log_arg = w.ln() + 2.0 * nf * delta.ln() - (2.0 * nf + 1.0) * a.ln();
        if log_arg > 0.0 {
            r.v_optimal = Some(delta * delta / log_arg);
        } else {
            r.diagnostics.push(format!(
                "v_optimal outside validity: logarithm argument exp({log_arg:.6}) <= 1"
            ));
        }
    }
    Ok(r)
}

/// Lowest multi-quantum order allowed at temperature `k_BT`: `Int(Δ/k_BT)`, at least 1.
pub fn n_min_thermal(delta: f64, thermal: &ThermalParams) -> Result<u32> {
    thermal.validate()?;
    Ok(int_below(delta / thermal.k_b_t).clamp(1, u32::MAX as i64) as u32)
}

/// Estimates for noise larger than the gap, which drives its own LZ crossings.
pub fn predict_high_amp(
    noise: &NoiseSpec,
    delta: f64,
    v: Option<f64>,
    opts: &PredictOptions,
) -> Result<RegimeReport> {
    let q = expect_quadrant(
        noise,
        delta,
        &[
            RegimeQuadrant::HighAmpLongCorr,
            RegimeQuadrant::HighAmpShortCorr,
        ],
        "high-amplitude",
    )?;
    check_v(v)?;
    let a = noise.effective_amplitude();
    let tau = noise.tau;
    let mut r = RegimeReport::empty(q, delta, noise);
    r.v = v;
    r.v_env = Some(a * noise.omega_max());
    let exponent = PI * delta * delta * tau / (2.0 * a);
    r.env_exponent = Some(exponent);
    r.p_env_lz = Some((-exponent).exp());
    r.negligible_env_effect = Some(exponent > opts.negligible_threshold);
    if let Some(v) = v {
        r.crossing_count = Some(a / (v * tau));
    }
    if q == RegimeQuadrant::HighAmpShortCorr {
        r.diagnostics.push(
            "slow sweeps saturate at 50% success: both eigenstates end equally occupied".into(),
        );
    }
    Ok(r)
}

/// Excited-state occupation in equilibrium, `1/(1 + exp(Δ/k_BT))`.
pub fn thermal_occupation(delta: f64, thermal: &ThermalParams) -> Result<f64> {
    thermal.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::domain(format!("gap must be >= 0, got {delta}")));
    }
    Ok(1.0 / (1.0 + (delta / thermal.k_b_t).exp()))
}

/// Best success reachable by a slow sweep to equilibrium, `1/(1 + exp(-Δ/k_BT))`.
pub fn thermal_floor(delta: f64, thermal: &ThermalParams) -> Result<f64> {
    // written as 1 - occupation so the pair sums to exactly one
    Ok(1.0 - thermal_occupation(delta, thermal)?)
}

/// Classify, run the estimator for the quadrant, and attach thermal limits.
pub fn predict(
    noise: &NoiseSpec,
    delta: f64,
    v: Option<f64>,
    thermal: Option<&ThermalParams>,
    opts: &PredictOptions,
) -> Result<RegimeReport> {
    let mut r = match classify_regime(noise, delta)? {
        RegimeQuadrant::LowAmpShortCorr => predict_low_amp_short_corr(noise, delta, v)?,
        RegimeQuadrant::LowAmpLongCorr => {
            check_v(v)?;
            let mut r = predict_low_amp_long_corr(noise, delta)?;
            r.v = v;
            r
        }
        _ => predict_high_amp(noise, delta, v, opts)?,
    };
    if let Some(th) = thermal {
        let occ = thermal_occupation(delta, th)?;
        r.k_b_t = Some(th.k_b_t);
        r.thermal_occupation = Some(occ);
        r.thermal_floor = Some(thermal_floor(delta, th)?);
        if r.quadrant == RegimeQuadrant::LowAmpLongCorr {
            let n_min = n_min_thermal(delta, th)?;
            r.n_min = Some(n_min);
            if noise.omega_max() > th.k_b_t {
                r.diagnostics.push(format!(
                    "ω_max exceeds k_BT; the photon order cannot drop below n_min = {n_min}"
                ));
            }
        }
        if let Some(pf) = r.p_failure {
            let limited = pf > occ;
            r.thermal_limited = Some(limited);
            if limited {
                r.diagnostics.push(
                    "p_failure exceeds the thermal occupation: sweep slowly to thermal equilibrium"
                        .into(),
                );
            }
        }
    }
    Ok(r)
}

//! Classical noise traces `ξ(t)` with RMS amplitude `A` and correlation time `τ`.
//!
//! Two realizations share the autocorrelation `A² exp(-|s|/τ)`:
//!
//! * Ornstein-Uhlenbeck, sampled with the exact discretization
//!   `x' = x e^{-dt/τ} + A √(1 - e^{-2dt/τ}) η`, started from the stationary
//!   distribution, so trace statistics do not depend on `dt`;
//! * random telegraph noise `±A`, switching as a Poisson process of rate
//!   `1/(2τ)`, started in either state with probability 1/2.
//!
//! Multi-channel noise is the pointwise sum of independent channels; channel
//! `c` draws from `derive_seed(master_seed, c)`.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::grid::TimeGrid;
use crate::model::{NoiseModel, NoiseSpec};
use crate::seed::{derive_seed, stream_rng};

#[derive(Debug, Clone)]
enum Channel {
    Ou {
        x: f64,
        decay: f64,
        kick: f64,
        rng: ChaCha8Rng,
    },
    Telegraph {
        state: f64,
        flip_prob: f64,
        rng: ChaCha8Rng,
    },
}

impl Channel {
    #[inline]
    fn value(&self) -> f64 {
        match self {
            Channel::Ou { x, .. } => *x,
            Channel::Telegraph { state, .. } => *state,
        }
    }

    #[inline]
    fn advance(&mut self) {
        match self {
            Channel::Ou {
                x,
                decay,
                kick,
                rng,
            } => {
                let eta: f64 = rng.sample(StandardNormal);
                *x = *x * *decay + *kick * eta;
            }
            Channel::Telegraph {
                state,
                flip_prob,
                rng,
            } => {
                if rng.random::<f64>() < *flip_prob {
                    *state = -*state;
                }
            }
        }
    }
}

/// Streaming noise generator on a uniform grid.
///
/// Yields the sample at grid point 0, then 1, and so on without end. The
/// propagator consumes one sample per step, so long ensembles never
/// materialize a whole trace.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    mean: f64,
    channels: Vec<Channel>,
}

impl NoiseStream {
    /// Generator for `spec` with per-channel RMS `channel_amplitude` and step `dt`.
    pub fn new(spec: &NoiseSpec, channel_amplitude: f64, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("time step must be > 0, got {dt}")));
        }
        if !(channel_amplitude >= 0.0) || !channel_amplitude.is_finite() {
            return Err(Error::config("amplitude", "must be finite and >= 0"));
        }
        let n_channels = match spec.model {
            NoiseModel::None => 0,
            _ => spec.channels as u64,
        };
        let a = channel_amplitude;
        let ratio = dt / spec.tau;
        let channels = (0..n_channels)
            .map(|c| {
                let mut rng = stream_rng(derive_seed(spec.master_seed, c));
                match spec.model {
                    NoiseModel::OrnsteinUhlenbeck => {
                        let eta: f64 = rng.sample(StandardNormal);
                        Channel::Ou {
                            x: a * eta,
                            decay: (-ratio).exp(),
                            kick: a * (-(-2.0 * ratio).exp_m1()).sqrt(),
                            rng,
                        }
                    }
                    NoiseModel::Telegraph => {
                        let up = rng.random::<bool>();
                        Channel::Telegraph {
                            state: if up { a } else { -a },
                            // odd number of Poisson(dt/2τ) switches
                            flip_prob: -0.5 * (-ratio).exp_m1(),
                            rng,
                        }
                    }
                    NoiseModel::None => unreachable!(),
                }
            })
            .collect();
        Ok(Self {
            mean: spec.mean_offset,
            channels,
        })
    }

    /// Generator with the spec's own per-channel amplitude.
    pub fn from_spec(spec: &NoiseSpec, dt: f64) -> Result<Self> {
        Self::new(spec, spec.amplitude, dt)
    }

    #[inline]
    pub fn current(&self) -> f64 {
        self.mean + self.channels.iter().map(Channel::value).sum::<f64>()
    }
}

impl Iterator for NoiseStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let v = self.current();
        for c in &mut self.channels {
            c.advance();
        }
        Some(v)
    }
}

/// A sampled noise signal on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub spec: NoiseSpec,
}

impl NoiseTrace {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// CSV with header `t,xi`, one row per grid point.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        export::write_header(w, &["t", "xi"])?;
        for (t, xi) in self.grid.times().zip(&self.values) {
            export::float_row(w, &[t, *xi])?;
        }
        Ok(())
    }
}

fn sample(spec: &NoiseSpec, channel_amplitude: f64, grid: &TimeGrid) -> Result<NoiseTrace> {
    let stream = NoiseStream::new(spec, channel_amplitude, grid.dt)?;
    let mut spec = *spec;
    spec.amplitude = channel_amplitude;
    Ok(NoiseTrace {
        grid: *grid,
        values: stream.take(grid.len()).collect(),
        spec,
    })
}

fn require_model(spec: &NoiseSpec, model: NoiseModel) -> Result<()> {
    if spec.model != model {
        return Err(Error::config(
            "model",
            format!("expected {model:?}, got {:?}", spec.model),
        ));
    }
    Ok(())
}

/// Ornstein-Uhlenbeck trace (all `spec.channels` summed).
pub fn generate_ou(spec: &NoiseSpec, grid: &TimeGrid) -> Result<NoiseTrace> {
    require_model(spec, NoiseModel::OrnsteinUhlenbeck)?;
    sample(spec, spec.amplitude, grid)
}

/// Random telegraph trace (all `spec.channels` summed).
pub fn generate_telegraph(spec: &NoiseSpec, grid: &TimeGrid) -> Result<NoiseTrace> {
    require_model(spec, NoiseModel::Telegraph)?;
    sample(spec, spec.amplitude, grid)
}

/// Sum of `spec.channels` independent channels of RMS `per_channel_amplitude`.
pub fn generate_multichannel(
    spec: &NoiseSpec,
    per_channel_amplitude: f64,
    grid: &TimeGrid,
) -> Result<NoiseTrace> {
    if spec.channels < 1 {
        return Err(Error::domain("channel count must be >= 1"));
    }
    if spec.model == NoiseModel::None {
        return Err(Error::config(
            "model",
            "multichannel noise needs a noise model",
        ));
    }
    sample(spec, per_channel_amplitude, grid)
}

/// Trace for whichever model the spec names; `None` gives a constant trace.
pub fn generate(spec: &NoiseSpec, grid: &TimeGrid) -> Result<NoiseTrace> {
    sample(spec, spec.amplitude, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub mean: f64,
    pub rms: f64,
    /// Lag where the normalized autocorrelation first drops below `1/e`,
    /// linearly interpolated between grid lags.
    pub autocorr_time: Option<f64>,
}

const MIN_AUTOCORR_LEN: usize = 100;

pub fn trace_stats(trace: &NoiseTrace) -> TraceStats {
    let x = &trace.values;
    let n = x.len();
    if n == 0 {
        return TraceStats {
            mean: 0.0,
            rms: 0.0,
            autocorr_time: None,
        };
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let rms = var.sqrt();

    let autocorr_time = if n < MIN_AUTOCORR_LEN || var == 0.0 {
        None
    } else {
        let target = (-1.0f64).exp();
        let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let mut prev = 1.0;
        let mut found = None;
        for lag in 1..n / 2 {
            let m = n - lag;
            let c = dev[..m]
                .iter()
                .zip(&dev[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (m as f64 * var);
            if c < target {
                let frac = (prev - target) / (prev - c);
                found = Some((lag as f64 - 1.0 + frac) * trace.grid.dt);
                break;
            }
            prev = c;
        }
        found
    };
    TraceStats {
        mean,
        rms,
        autocorr_time,
    }
}

/// Welch estimate of the two-sided power spectrum `S(ω) = ∫ C(s) e^{iωs} ds`.
///
/// The mean-subtracted trace is cut into non-overlapping Hann-windowed
/// segments of `segment_len` samples whose periodograms are averaged.
/// Returns `(ω, S(ω))` for `ω = 2πj/(segment_len·dt)`, `j = 0..=segment_len/2`.
pub fn power_spectrum(trace: &NoiseTrace, segment_len: usize) -> Result<Vec<(f64, f64)>> {
    let n = trace.values.len();
    if segment_len < 8 || segment_len > n {
        return Err(Error::domain(format!(
            "segment length {segment_len} must be in [8, {n}]"
        )));
    }
    let dt = trace.grid.dt;
    let mean = trace.values.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = (0..segment_len)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / segment_len as f64).sin();
            s * s
        })
        .collect();
    let norm = window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let half = segment_len / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let segments = n / segment_len;
    for s in 0..segments {
        let seg = &trace.values[s * segment_len..(s + 1) * segment_len];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = dt / (norm * segments as f64);
    let dw = 2.0 * std::f64::consts::PI / (segment_len as f64 * dt);
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(j, p)| (j as f64 * dw, p * scale))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(dt: f64, samples: usize) -> TimeGrid {
        TimeGrid::new(0.0, dt, samples - 1).unwrap()
    }

    #[test]
    fn zero_amplitude_is_constant_offset() {
        let ou = NoiseSpec::ou(0.0, 1.0)
            .unwrap()
            .with_mean_offset(0.7)
            .unwrap();
        let t = generate_ou(&ou, &grid(0.1, 500)).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.7));
        let tg = NoiseSpec::telegraph(0.0, 1.0).unwrap();
        let t = generate_telegraph(&tg, &grid(0.1, 500)).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn telegraph_takes_two_values() {
        let tg = NoiseSpec::telegraph(1.0, 1.0).unwrap().with_seed(3);
        let t = generate_telegraph(&tg, &grid(0.05, 10_000)).unwrap();
        assert!(t.values.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn wrong_model_is_rejected() {
        let tg = NoiseSpec::telegraph(1.0, 1.0).unwrap();
        assert!(generate_ou(&tg, &grid(0.1, 10)).is_err());
        assert!(generate_multichannel(&NoiseSpec::none(), 1.0, &grid(0.1, 10)).is_err());
    }

    #[test]
    fn zero_step_leaves_ou_state_unchanged() {
        let spec = NoiseSpec::ou(1.0, 1.0).unwrap().with_seed(9);
        let mut s = NoiseStream::new(&spec, 1.0, 1e-300).unwrap();
        let first = s.next().unwrap();
        let second = s.next().unwrap();
        assert!((first - second).abs() < 1e-100);
        assert!(NoiseStream::new(&spec, 1.0, 0.0).is_err());
    }

    #[test]
    fn identical_seed_identical_trace() {
        let spec = NoiseSpec::ou(1.0, 0.5)
            .unwrap()
            .with_seed(11)
            .with_channels(3)
            .unwrap();
        let g = grid(0.01, 2000);
        let a = generate_ou(&spec, &g).unwrap();
        let b = generate_ou(&spec, &g).unwrap();
        assert_eq!(a, b);
        let c = generate_ou(&spec.with_seed(12), &g).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn single_channel_multichannel_matches_ou() {
        let spec = NoiseSpec::ou(0.4, 2.0).unwrap().with_seed(5);
        let g = grid(0.1, 1000);
        let ou = generate_ou(&spec, &g).unwrap();
        let mc = generate_multichannel(&spec, 0.4, &g).unwrap();
        assert_eq!(ou.values, mc.values);
    }

    #[test]
    fn constant_trace_stats() {
        let spec = NoiseSpec::ou(0.0, 1.0)
            .unwrap()
            .with_mean_offset(2.0)
            .unwrap();
        let t = generate_ou(&spec, &grid(0.1, 200)).unwrap();
        let s = trace_stats(&t);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.rms, 0.0);
        assert_eq!(s.autocorr_time, None);
    }

    #[test]
    fn alternating_trace_decorrelates_within_one_step() {
        let g = grid(0.1, 1000);
        let values = (0..g.len())
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let t = NoiseTrace {
            grid: g,
            values,
            spec: NoiseSpec::telegraph(1.0, 1.0).unwrap(),
        };
        let s = trace_stats(&t);
        assert!(s.autocorr_time.unwrap() < g.dt);
        assert_relative_eq!(s.rms, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn short_trace_has_no_autocorr_time() {
        let spec = NoiseSpec::ou(1.0, 1.0).unwrap();
        let t = generate_ou(&spec, &grid(0.1, 50)).unwrap();
        assert_eq!(trace_stats(&t).autocorr_time, None);
    }

    #[test]
    fn csv_export_layout() {
        let spec = NoiseSpec::ou(1.0, 1.0).unwrap();
        let t = generate_ou(&spec, &grid(0.5, 3)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,xi");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("5.0000000000000000e-1,"));
    }

    #[test]
    fn spectrum_rejects_bad_segment() {
        let spec = NoiseSpec::ou(1.0, 1.0).unwrap();
        let t = generate_ou(&spec, &grid(0.1, 100)).unwrap();
        assert!(power_spectrum(&t, 4).is_err());
        assert!(power_spectrum(&t, 200).is_err());
    }
}

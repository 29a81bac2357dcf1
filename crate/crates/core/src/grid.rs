use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_k = t_start + k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("time step must be > 0, got {dt}")));
        }
        if !t_start.is_finite() {
            return Err(Error::domain("grid start must be finite"));
        }
        if steps < 1 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(Self { t_start, dt, steps })
    }

    /// Smallest uniform grid on `[t_start, t_end]` with step at most `max_dt`.
    pub fn covering(t_start: f64, t_end: f64, max_dt: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::domain(format!("empty window [{t_start}, {t_end}]")));
        }
        if !(max_dt > 0.0) || !max_dt.is_finite() {
            return Err(Error::domain(format!(
                "time step must be > 0, got {max_dt}"
            )));
        }
        let span = t_end - t_start;
        let steps = (span / max_dt).ceil().max(1.0) as usize;
        Self::new(t_start, span / steps as f64, steps)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }
}

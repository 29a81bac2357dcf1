//! Time evolution of the driven two-level system.
//!
//! Both integrators treat the Hamiltonian as constant over each step
//! (bias `v t` at the step midpoint, noise `ξ_k` at the step start) and
//! apply the exact 2×2 propagator
//! `U = cos(ω dt) - i sin(ω dt) H/ω`, `ω = √(Δ² + b²)/2`.
//! The Lindblad integrator wraps each unitary step between two half steps
//! of exact σz dephasing (Strang splitting), which keeps the density matrix
//! trace-one and positive by construction.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::grid::TimeGrid;
use crate::model::{NoiseSpec, SystemParams};
use crate::noise::{NoiseStream, NoiseTrace};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Noise excursions assumed when sizing steps and windows, in units of the
/// effective RMS amplitude.
pub const NOISE_BOUND_SIGMAS: f64 = 5.0;

pub type Matrix2 = [[Complex64; 2]; 2];

/// `H = -(Δ/2)σx - ((v t + ξ)/2)σz` in the diabatic `{|↑⟩, |↓⟩}` basis.
pub fn hamiltonian(system: &SystemParams, t: f64, xi: f64) -> Matrix2 {
    let b = system.v * t + xi;
    let d = Complex64::new(-0.5 * system.delta, 0.0);
    [
        [Complex64::new(-0.5 * b, 0.0), d],
        [d, Complex64::new(0.5 * b, 0.0)],
    ]
}

/// Pure state `c_up |↑⟩ + c_down |↓⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    pub up: Complex64,
    pub down: Complex64,
}

impl QuantumState {
    pub fn new(up: Complex64, down: Complex64) -> Self {
        Self { up, down }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self::new(self.up / n, self.down / n)
    }

    /// Instantaneous ground state of the noise-free Hamiltonian at `t`.
    pub fn ground(system: &SystemParams, t: f64) -> Result<Self> {
        let (c, s) = ground_components(system, t)?;
        Ok(Self::new(c.into(), s.into()))
    }

    /// Instantaneous excited state of the noise-free Hamiltonian at `t`.
    pub fn excited(system: &SystemParams, t: f64) -> Result<Self> {
        let (c, s) = ground_components(system, t)?;
        Ok(Self::new((-s).into(), c.into()))
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            rho_up: self.up.norm_sqr(),
            rho_down: self.down.norm_sqr(),
            coherence: self.up * self.down.conj(),
        }
    }

    #[inline]
    fn apply(&mut self, u: &StepUnitary) {
        let up = u.alpha * self.up + u.beta * self.down;
        let down = u.beta * self.up + u.alpha.conj() * self.down;
        self.up = up;
        self.down = down;
    }
}

/// 2×2 density matrix `[[rho_up, coherence], [coherence*, rho_down]]`,
/// Hermitian by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub rho_up: f64,
    pub rho_down: f64,
    pub coherence: Complex64,
}

impl DensityMatrix {
    pub fn maximally_mixed() -> Self {
        Self {
            rho_up: 0.5,
            rho_down: 0.5,
            coherence: Complex64::new(0.0, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho_up + self.rho_down
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let r = (0.25 * (self.rho_up - self.rho_down).powi(2) + self.coherence.norm_sqr()).sqrt();
        (half_tr - r, half_tr + r)
    }

    pub fn matrix(&self) -> Matrix2 {
        [
            [self.rho_up.into(), self.coherence],
            [self.coherence.conj(), self.rho_down.into()],
        ]
    }

    #[inline]
    fn dephase(&mut self, factor: f64) {
        self.coherence *= factor;
    }

    #[inline]
    fn apply(&mut self, u: &StepUnitary) {
        // U = [[α, β], [β, α*]] with β purely imaginary
        let (a, b) = (u.alpha, u.beta);
        let ac = a.conj();
        let r00: Complex64 = self.rho_up.into();
        let r11: Complex64 = self.rho_down.into();
        let r01 = self.coherence;
        let r10 = r01.conj();
        // M = U ρ
        let m00 = a * r00 + b * r10;
        let m01 = a * r01 + b * r11;
        let m10 = b * r00 + ac * r10;
        let m11 = b * r01 + ac * r11;
        // ρ' = M U†, U† = [[α*, β*], [β*, α]]
        let bc = b.conj();
        self.rho_up = (m00 * ac + m01 * bc).re;
        self.coherence = m00 * bc + m01 * a;
        self.rho_down = (m10 * bc + m11 * a).re;
    }
}

#[derive(Debug, Clone, Copy)]
struct StepUnitary {
    alpha: Complex64,
    beta: Complex64,
}

impl StepUnitary {
    #[inline]
    fn new(delta: f64, bias: f64, dt: f64) -> Self {
        let omega = 0.5 * (delta * delta + bias * bias).sqrt();
        if omega == 0.0 {
            return Self {
                alpha: Complex64::new(1.0, 0.0),
                beta: Complex64::new(0.0, 0.0),
            };
        }
        let (s, c) = (omega * dt).sin_cos();
        let k = s / (2.0 * omega);
        Self {
            alpha: Complex64::new(c, k * bias),
            beta: I * (k * delta),
        }
    }
}

/// `(cos θ/2, sin θ/2)`, the diabatic components of the instantaneous ground
/// state, computed without cancellation on either side of the crossing.
fn ground_components(system: &SystemParams, t: f64) -> Result<(f64, f64)> {
    let b = system.v * t;
    let d = system.delta;
    let w = (d * d + b * b).sqrt();
    if w == 0.0 {
        return Err(Error::DegenerateBasis { t });
    }
    Ok(if b >= 0.0 {
        let c = (0.5 * (1.0 + b / w)).sqrt();
        (c, d / (2.0 * w * c))
    } else {
        let s = (0.5 * (1.0 - b / w)).sqrt();
        (d / (2.0 * w * s), s)
    })
}

/// Anything whose instantaneous-ground-state population can be measured.
pub trait Populated {
    fn ground_population(&self, ground: (f64, f64)) -> f64;
}

impl Populated for QuantumState {
    fn ground_population(&self, (c, s): (f64, f64)) -> f64 {
        (self.up * c + self.down * s).norm_sqr()
    }
}

impl Populated for DensityMatrix {
    fn ground_population(&self, (c, s): (f64, f64)) -> f64 {
        c * c * self.rho_up + s * s * self.rho_down + 2.0 * c * s * self.coherence.re
    }
}

/// Population of the instantaneous ground state of the noise-free
/// Hamiltonian at `t`, clamped to `[0, 1]`.
pub fn adiabatic_ground_population<S: Populated>(
    state: &S,
    system: &SystemParams,
    t: f64,
) -> Result<f64> {
    let g = ground_components(system, t)?;
    Ok(state.ground_population(g).clamp(0.0, 1.0))
}

/// Step-size rules and runtime checks shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    /// Upper bound on `dt · max|H|` over the window.
    pub max_phase_per_step: f64,
    /// Minimum grid points per noise correlation time.
    pub steps_per_tau: f64,
    /// Largest tolerated deviation of norm (or trace) from one.
    pub norm_tolerance: f64,
    /// Record a time-series sample every this many steps (0 disables).
    pub record_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            max_phase_per_step: 0.05,
            steps_per_tau: 10.0,
            norm_tolerance: 1e-6,
            record_every: 0,
        }
    }
}

/// Largest `|ξ|` the step rules account for: `|mean| + 5·A_eff`.
pub fn noise_bound(noise: Option<&NoiseSpec>) -> f64 {
    match noise {
        Some(n) if !n.is_silent() => {
            n.mean_offset.abs() + NOISE_BOUND_SIGMAS * n.effective_amplitude()
        }
        Some(n) => n.mean_offset.abs(),
        None => 0.0,
    }
}

impl StepControl {
    /// Largest step allowed on `[t_start, t_end]` for this system and noise.
    pub fn max_dt(&self, system: &SystemParams, noise: Option<&NoiseSpec>) -> f64 {
        let edge =
            (system.v * system.t_start.abs().max(system.t_end.abs())).abs() + noise_bound(noise);
        let h_max = 0.5 * (system.delta * system.delta + edge * edge).sqrt();
        let mut dt = if h_max > 0.0 {
            self.max_phase_per_step / h_max
        } else {
            f64::INFINITY
        };
        if let Some(n) = noise {
            if !n.is_silent() {
                dt = dt.min(n.tau / self.steps_per_tau);
            }
        }
        dt
    }

    /// Error if `grid.dt` is larger than [`StepControl::max_dt`].
    pub fn check(
        &self,
        system: &SystemParams,
        grid: &TimeGrid,
        noise: Option<&NoiseSpec>,
    ) -> Result<()> {
        let limit = self.max_dt(system, noise);
        if grid.dt > limit * (1.0 + 1e-9) {
            return Err(Error::StepControl {
                dt: grid.dt,
                suggested_dt: limit,
            });
        }
        Ok(())
    }
}

/// Grid must start at `t_start` and end at `t_end` of the system.
fn check_window(system: &SystemParams, grid: &TimeGrid) -> Result<()> {
    let scale = system.t_start.abs().max(system.t_end.abs());
    let tol = 1e-9 * scale;
    if (grid.t_start - system.t_start).abs() > tol || (grid.t_end() - system.t_end).abs() > tol {
        return Err(Error::domain(format!(
            "grid [{}, {}] does not match window [{}, {}]",
            grid.t_start,
            grid.t_end(),
            system.t_start,
            system.t_end
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub p_ground: f64,
    pub p_excited: f64,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub final_state: Option<QuantumState>,
    pub final_density: Option<DensityMatrix>,
    /// Population of the noise-free instantaneous ground state at `t_end`.
    pub ground_state_population: f64,
    pub step_count: usize,
    /// Largest `|norm - 1|` (pure) or `|trace - 1|` (density) seen.
    pub max_norm_drift: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesPoint>,
}

impl EvolutionResult {
    /// CSV with header `t,p_ground,p_excited,norm_or_trace_drift`.
    pub fn write_series_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        export::write_header(w, &["t", "p_ground", "p_excited", "norm_or_trace_drift"])?;
        for p in &self.series {
            export::float_row(w, &[p.t, p.p_ground, p.p_excited, p.drift])?;
        }
        Ok(())
    }
}

fn sample_point<S: Populated>(state: &S, system: &SystemParams, t: f64, drift: f64) -> SeriesPoint {
    let p = adiabatic_ground_population(state, system, t).unwrap_or(f64::NAN);
    SeriesPoint {
        t,
        p_ground: p,
        p_excited: 1.0 - p,
        drift,
    }
}

fn run_pure(
    system: &SystemParams,
    grid: &TimeGrid,
    initial: QuantumState,
    mut xi: impl FnMut() -> f64,
    control: &StepControl,
) -> Result<EvolutionResult> {
    let mut psi = initial;
    let mut max_drift = (psi.norm_sqr() - 1.0).abs();
    let mut series = Vec::new();
    let record = control.record_every;
    if record > 0 {
        series.push(sample_point(&psi, system, grid.t_start, max_drift));
    }
    let half = 0.5 * grid.dt;
    for k in 0..grid.steps {
        let t_mid = grid.time(k) + half;
        let u = StepUnitary::new(system.delta, system.v * t_mid + xi(), grid.dt);
        psi.apply(&u);
        let drift = (psi.norm_sqr() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > control.norm_tolerance {
            return Err(Error::Integration {
                t: grid.time(k + 1),
                reason: format!("norm drift {drift:e} exceeds {:e}", control.norm_tolerance),
            });
        }
        if record > 0 && ((k + 1) % record == 0 || k + 1 == grid.steps) {
            series.push(sample_point(&psi, system, grid.time(k + 1), drift));
        }
    }
    let t_end = grid.t_end();
    Ok(EvolutionResult {
        final_state: Some(psi),
        final_density: None,
        ground_state_population: adiabatic_ground_population(&psi, system, t_end)?,
        step_count: grid.steps,
        max_norm_drift: max_drift,
        series,
    })
}

/// Schrödinger evolution from the instantaneous ground state at `t_start`.
///
/// `noise`, when given, must be sampled on `grid`; sample `k` is applied
/// during step `k`.
pub fn evolve_pure(
    system: &SystemParams,
    grid: &TimeGrid,
    noise: Option<&NoiseTrace>,
    control: &StepControl,
) -> Result<EvolutionResult> {
    let initial = QuantumState::ground(system, system.t_start)?;
    evolve_pure_from(initial, system, grid, noise, control)
}

pub fn evolve_pure_from(
    initial: QuantumState,
    system: &SystemParams,
    grid: &TimeGrid,
    noise: Option<&NoiseTrace>,
    control: &StepControl,
) -> Result<EvolutionResult> {
    system.validate()?;
    check_window(system, grid)?;
    control.check(system, grid, noise.map(|n| &n.spec))?;
    match noise {
        Some(trace) => {
            if trace.grid != *grid {
                return Err(Error::domain(
                    "noise trace is not sampled on the integration grid",
                ));
            }
            let mut values = trace.values.iter().copied();
            run_pure(
                system,
                grid,
                initial,
                || values.next().unwrap_or(0.0),
                control,
            )
        }
        None => run_pure(system, grid, initial, || 0.0, control),
    }
}

/// Schrödinger evolution with noise drawn on the fly from `stream`.
///
/// Gives bit-identical results to [`evolve_pure`] with the trace the same
/// stream would have produced.
pub fn evolve_pure_streamed(
    system: &SystemParams,
    grid: &TimeGrid,
    spec: &NoiseSpec,
    mut stream: NoiseStream,
    control: &StepControl,
) -> Result<EvolutionResult> {
    system.validate()?;
    check_window(system, grid)?;
    control.check(system, grid, Some(spec))?;
    let initial = QuantumState::ground(system, system.t_start)?;
    run_pure(
        system,
        grid,
        initial,
        || stream.next().unwrap_or(0.0),
        control,
    )
}

/// Lindblad evolution `dρ/dt = -i[H, ρ] + (Γ/2)(σz ρ σz - ρ)` from the
/// instantaneous ground state at `t_start`. Diabatic coherences decay at
/// rate `Γ`.
pub fn evolve_lindblad(
    system: &SystemParams,
    gamma: f64,
    grid: &TimeGrid,
    control: &StepControl,
) -> Result<EvolutionResult> {
    let initial = QuantumState::ground(system, system.t_start)?.density();
    evolve_lindblad_from(initial, system, gamma, grid, control)
}

/// Shrink factor of the adiabatic population imbalance `p_g - p_e` caused by
/// dephasing on one side of the window, from edge bias `b_edge` out to
/// infinity.
///
/// Far from the crossing σz dephasing at rate Γ drives incoherent hops
/// between the adiabatic levels at rate `Δ²Γ/(2(Γ² + b²))`. Integrating over
/// `db/v` gives `exp(-(Δ²/v)·atan(Γ/b_edge))`.
pub fn dephasing_tail_factor(delta: f64, v: f64, gamma: f64, b_edge: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    (-(delta * delta / v) * (gamma / b_edge.abs()).atan()).exp()
}

pub fn evolve_lindblad_from(
    initial: DensityMatrix,
    system: &SystemParams,
    gamma: f64,
    grid: &TimeGrid,
    control: &StepControl,
) -> Result<EvolutionResult> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::config(
            "gamma",
            format!("must be finite and >= 0, got {gamma}"),
        ));
    }
    system.validate()?;
    check_window(system, grid)?;
    control.check(system, grid, None)?;

    let mut rho = initial;
    let half_decay = (-0.5 * gamma * grid.dt).exp();
    let mut max_drift = (rho.trace() - 1.0).abs();
    let mut series = Vec::new();
    let record = control.record_every;
    if record > 0 {
        series.push(sample_point(&rho, system, grid.t_start, max_drift));
    }
    let half = 0.5 * grid.dt;
    for k in 0..grid.steps {
        let t_mid = grid.time(k) + half;
        let u = StepUnitary::new(system.delta, system.v * t_mid, grid.dt);
        rho.dephase(half_decay);
        rho.apply(&u);
        rho.dephase(half_decay);
        let drift = (rho.trace() - 1.0).abs();
        max_drift = max_drift.max(drift);
        let (low, _) = rho.eigenvalues();
        if drift > control.norm_tolerance || low < -control.norm_tolerance {
            return Err(Error::Integration {
                t: grid.time(k + 1),
                reason: format!("trace drift {drift:e}, smallest eigenvalue {low:e}"),
            });
        }
        if record > 0 && ((k + 1) % record == 0 || k + 1 == grid.steps) {
            series.push(sample_point(&rho, system, grid.time(k + 1), drift));
        }
    }
    let t_end = grid.t_end();
    Ok(EvolutionResult {
        final_state: None,
        final_density: Some(rho),
        ground_state_population: adiabatic_ground_population(&rho, system, t_end)?,
        step_count: grid.steps,
        max_norm_drift: max_drift,
        series,
    })
}

/// Rules for truncating the infinite sweep to a finite symmetric window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPolicy {
    /// Target error in the final population from truncating `t → ±∞`.
    pub tail_tolerance: f64,
    /// Minimum edge bias in units of `max(Δ, √v)`.
    pub edge_factor: f64,
    pub max_steps: u64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-4,
            edge_factor: 20.0,
            max_steps: 50_000_000,
        }
    }
}

/// A window and grid chosen by [`auto_time_window`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoWindow {
    pub system: SystemParams,
    pub grid: TimeGrid,
}

impl AutoWindow {
    pub fn t_start(&self) -> f64 {
        self.system.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.system.t_end
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }
}

/// Symmetric window `[-t_edge, t_edge]` and step for sweeping `(Δ, v)`.
///
/// The edge bias is
/// `v t_edge = max(20Δ, 20√v, (vΔ/tol)^(1/3)) + |mean| + 5 A_eff`;
/// the cube-root term bounds the non-adiabatic admixture `~vΔ/b³` left at
/// the edges. The step is the largest allowed by `control` on that window.
pub fn auto_time_window(
    delta: f64,
    v: f64,
    noise: Option<&NoiseSpec>,
    policy: &WindowPolicy,
    control: &StepControl,
) -> Result<AutoWindow> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("gap must be > 0, got {delta}")));
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("sweep rate must be > 0, got {v}")));
    }
    if !(policy.tail_tolerance > 0.0) {
        return Err(Error::config("tail_tolerance", "must be > 0"));
    }
    if let Some(n) = noise {
        n.validate()?;
    }
    let base = policy.edge_factor * delta.max(v.sqrt());
    let tail = (v * delta / policy.tail_tolerance).cbrt();
    let edge_bias = base.max(tail) + noise_bound(noise);
    let t_edge = edge_bias / v;
    let system = SystemParams::new(delta, v, -t_edge, t_edge)?;
    let max_dt = control.max_dt(&system, noise);
    let steps = (2.0 * t_edge / max_dt).ceil();
    if steps > policy.max_steps as f64 {
        return Err(Error::WindowTooLarge {
            steps: steps as u64,
            max_steps: policy.max_steps,
        });
    }
    let grid = TimeGrid::new(-t_edge, 2.0 * t_edge / steps, steps as usize)?;
    Ok(AutoWindow { system, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lz_success_probability;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn auto(delta: f64, v: f64) -> AutoWindow {
        auto_time_window(
            delta,
            v,
            None,
            &WindowPolicy::default(),
            &StepControl::default(),
        )
        .unwrap()
    }

    fn sys(delta: f64, v: f64) -> SystemParams {
        SystemParams::new(delta, v, -10.0, 10.0).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let h = hamiltonian(&sys(1.0, 1.0), 0.0, 0.0);
        assert_eq!(h[0][1], Complex64::new(-0.5, 0.0));
        assert_eq!(h[1][0], Complex64::new(-0.5, 0.0));
        assert_eq!(h[0][0], Complex64::new(0.0, 0.0));
        assert_eq!(h[1][1], Complex64::new(0.0, 0.0));

        let h = hamiltonian(&sys(0.0, 1.0), 2.0, 0.0);
        assert_eq!(h[0][0].re, -1.0);
        assert_eq!(h[1][1].re, 1.0);
        assert_eq!(h[0][1].norm(), 0.0);

        let s = sys(1.0, 0.7);
        let h = hamiltonian(&s, 3.0, -2.1);
        assert!(h[0][0].norm() < 1e-15 && h[1][1].norm() < 1e-15);
    }

    #[test]
    fn ground_and_excited_projections() {
        let s = sys(1.0, 1.0);
        for t in [-7.0, -0.3, 0.0, 0.4, 9.0] {
            let g = QuantumState::ground(&s, t).unwrap();
            let e = QuantumState::excited(&s, t).unwrap();
            assert_relative_eq!(
                adiabatic_ground_population(&g, &s, t).unwrap(),
                1.0,
                epsilon = 1e-14
            );
            assert!(adiabatic_ground_population(&e, &s, t).unwrap() < 1e-14);
            assert_relative_eq!(
                adiabatic_ground_population(&g.density(), &s, t).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
    }

    /// Eigenvector of `H` for the lower eigenvalue from the closed-form
    /// 2×2 characteristic polynomial, independent of `ground_components`.
    fn ground_by_diagonalization(h: &Matrix2) -> (Complex64, Complex64) {
        let (a, d, b) = (h[0][0].re, h[1][1].re, h[0][1]);
        let lambda = 0.5 * (a + d) - (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        // (H - λ) x = 0 → x = (b, λ - a) or (λ - d, b*)
        let (x0, x1) = if (lambda - a).abs() > (lambda - d).abs() {
            (b, Complex64::new(lambda - a, 0.0))
        } else {
            (Complex64::new(lambda - d, 0.0), b.conj())
        };
        let n = (x0.norm_sqr() + x1.norm_sqr()).sqrt();
        (x0 / n, x1 / n)
    }

    #[test]
    fn superposition_population_matches_diagonalization() {
        let s = sys(1.0, 1.0);
        let phase = Complex64::from_polar(1.0, 1.234);
        let psi = QuantumState::new(Complex64::new(1.0, 0.0), phase).normalized();
        for t in [-50.0, -3.0, 0.2, 8.0, 60.0] {
            let (g0, g1) = ground_by_diagonalization(&hamiltonian(&s, t, 0.0));
            let oracle = (g0.conj() * psi.up + g1.conj() * psi.down).norm_sqr();
            let p = adiabatic_ground_population(&psi, &s, t).unwrap();
            assert_relative_eq!(p, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_basis_is_an_error() {
        let s = sys(0.0, 1.0);
        let psi = QuantumState::new(1.0.into(), 0.0.into());
        assert!(matches!(
            adiabatic_ground_population(&psi, &s, 0.0),
            Err(Error::DegenerateBasis { .. })
        ));
    }

    #[test]
    fn noiseless_sweep_matches_lz_formula() {
        for exponent in [1.0, 5.0] {
            let v = PI / (2.0 * exponent);
            let w = auto(1.0, v);
            let r = evolve_pure(&w.system, &w.grid, None, &StepControl::default()).unwrap();
            let exact = lz_success_probability(1.0, v).unwrap();
            assert!(
                (r.ground_state_population - exact).abs() < 2e-3,
                "{} vs {exact}",
                r.ground_state_population
            );
            assert!(r.max_norm_drift < 1e-9);
        }
    }

    #[test]
    fn window_of_spec_example_reproduces_lz() {
        // |vt| <= 25 at v = π/2
        let v = PI / 2.0;
        let s = SystemParams::new(1.0, v, -25.0 / v, 25.0 / v).unwrap();
        let control = StepControl::default();
        let g = TimeGrid::covering(s.t_start, s.t_end, control.max_dt(&s, None)).unwrap();
        let r = evolve_pure(&s, &g, None, &control).unwrap();
        assert!((r.ground_state_population - 0.632121).abs() < 0.005);
    }

    #[test]
    fn zero_gap_stays_diabatic() {
        let s = SystemParams::new(0.0, 1.0, -20.0, 20.0).unwrap();
        let g = TimeGrid::covering(s.t_start, s.t_end, 0.002).unwrap();
        let r = evolve_pure(&s, &g, None, &StepControl::default()).unwrap();
        assert!(r.ground_state_population < 1e-20);
    }

    #[test]
    fn coarse_step_is_rejected_with_suggestion() {
        let w = auto(1.0, 1.0);
        let g = TimeGrid::covering(w.system.t_start, w.system.t_end, 0.5).unwrap();
        match evolve_pure(&w.system, &g, None, &StepControl::default()) {
            Err(Error::StepControl { suggested_dt, .. }) => assert!(suggested_dt < 0.5),
            other => panic!("expected step-control error, got {other:?}"),
        }
    }

    #[test]
    fn lindblad_without_dephasing_matches_pure() {
        let w = auto(1.0, 0.8);
        let c = StepControl::default();
        let pure = evolve_pure(&w.system, &w.grid, None, &c).unwrap();
        let mixed = evolve_lindblad(&w.system, 0.0, &w.grid, &c).unwrap();
        assert!((pure.ground_state_population - mixed.ground_state_population).abs() < 1e-6);
    }

    #[test]
    fn maximally_mixed_is_a_fixed_point() {
        let w = auto(1.0, 1.0);
        for gamma in [0.0, 0.05, 3.0] {
            let r = evolve_lindblad_from(
                DensityMatrix::maximally_mixed(),
                &w.system,
                gamma,
                &w.grid,
                &StepControl::default(),
            )
            .unwrap();
            let rho = r.final_density.unwrap();
            assert!((rho.rho_up - 0.5).abs() < 1e-12);
            assert!(rho.coherence.norm() < 1e-12);
            assert!((r.ground_state_population - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_dephasing_saturates_at_half() {
        let w = auto(1.0, 1.0 / 50.0);
        let r = evolve_lindblad(&w.system, 10.0, &w.grid, &StepControl::default()).unwrap();
        assert!((r.ground_state_population - 0.5).abs() < 0.02);
        let (low, _) = r.final_density.unwrap().eigenvalues();
        assert!(low > -1e-9);
    }

    #[test]
    fn lindblad_rejects_negative_rate() {
        let w = auto(1.0, 1.0);
        assert!(evolve_lindblad(&w.system, -1.0, &w.grid, &StepControl::default()).is_err());
    }

    #[test]
    fn series_recording() {
        let w = auto(1.0, 1.0);
        let c = StepControl {
            record_every: 1000,
            ..Default::default()
        };
        let r = evolve_pure(&w.system, &w.grid, None, &c).unwrap();
        assert!(r.series.len() >= 2);
        assert_eq!(r.series.first().unwrap().t, w.system.t_start);
        let last = r.series.last().unwrap();
        assert_relative_eq!(last.p_ground, r.ground_state_population, epsilon = 1e-15);
        let mut buf = Vec::new();
        r.write_series_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,p_ground,p_excited,norm_or_trace_drift\n"));
        assert_eq!(text.lines().count(), r.series.len() + 1);
    }

    #[test]
    fn window_rules() {
        let w = auto(1.0, 1.0);
        assert!(w.system.t_end * w.system.v >= 20.0);
        assert!(
            w.grid.dt * 0.5 * (1.0 + (w.system.v * w.system.t_end).powi(2)).sqrt()
                <= 0.05 * (1.0 + 1e-9)
        );

        let w = auto(1.0, 100.0);
        assert!(w.system.t_end * 100.0 >= 200.0 - 1e-9);

        let p = WindowPolicy::default();
        let tight = WindowPolicy {
            tail_tolerance: p.tail_tolerance / 2.0,
            ..p
        };
        for v in [0.01, 0.3, 1.0, 5.0, 400.0] {
            let a = auto_time_window(1.0, v, None, &p, &StepControl::default()).unwrap();
            let b = auto_time_window(1.0, v, None, &tight, &StepControl::default()).unwrap();
            assert!(b.system.t_end >= a.system.t_end);
        }
    }

    #[test]
    fn window_respects_noise_correlation_time() {
        let n = NoiseSpec::ou(0.1, 0.02).unwrap();
        let w = auto_time_window(
            1.0,
            1.0,
            Some(&n),
            &WindowPolicy::default(),
            &StepControl::default(),
        )
        .unwrap();
        assert!(w.grid.dt <= 0.002 * (1.0 + 1e-12));
        assert!(w.system.t_end >= 20.5);
    }

    #[test]
    fn window_step_limit() {
        let p = WindowPolicy {
            max_steps: 1000,
            ..Default::default()
        };
        assert!(matches!(
            auto_time_window(1.0, 0.01, None, &p, &StepControl::default()),
            Err(Error::WindowTooLarge { .. })
        ));
    }
}

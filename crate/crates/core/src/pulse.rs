//! Pulse envelopes on uniform time grids.
//!
//! Integrals use the trapezoidal rule on the sample grid. Between samples an
//! envelope is the piecewise-linear interpolant of its samples, and it ramps
//! to zero over one step on either side of the grid; the time-domain and
//! frequency-domain scattering backends both use this continuous signal.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::csvfmt;
use crate::qmath::{C64, ZERO};

/// Allowed deviation of `∫|f|²dt` from one for a normalized pulse.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Samples per `1/κ` on the default grid.
pub const DT_KAPPA_SAMPLES: f64 = 200.0;
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("grid [{start:e}, {end:e}] s does not cover the pulse window [0, {tau:e}] s")]
    Coverage { start: f64, end: f64, tau: f64 },
    #[error("pulses live on different time grids")]
    GridMismatch,
    #[error("pulse is not normalized: integral of |f|^2 = {0}")]
    NotNormalized(f64),
    #[error("pulse has zero energy")]
    ZeroEnergy,
    #[error("malformed pulse CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_samples: usize) -> Result<Self, PulseError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PulseError::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if n_samples < MIN_SAMPLES {
            return Err(PulseError::InvalidGrid(format!("{n_samples} samples, need at least {MIN_SAMPLES}")));
        }
        if !t_start.is_finite() {
            return Err(PulseError::InvalidGrid("non-finite start time".into()));
        }
        Ok(Self { t_start, dt, n_samples })
    }

    /// Default grid for a pulse of duration `tau` probing a resonator with
    /// decay rate `kappa`: `[0, τ]` with `dt ≤ min(1/(200κ), τ/512)`.
    ///
    /// The `1/(200κ)` bound keeps the trapezoid error on reflected energies
    /// (second order in `κ dt`) below `1e-6` for a bare-cavity reflection.
    pub fn for_pulse(tau: f64, kappa: f64) -> Result<Self, PulseError> {
        if !(tau > 0.0 && kappa > 0.0) {
            return Err(PulseError::InvalidGrid(format!("tau = {tau}, kappa = {kappa} must be positive")));
        }
        let dt_max = (1.0 / (DT_KAPPA_SAMPLES * kappa)).min(tau / 512.0);
        let intervals = (tau / dt_max - 1e-9).ceil() as usize;
        Self::new(0.0, tau / intervals as f64, intervals + 1)
    }

    /// `[0, τ]` split into `samples − 1` equal intervals.
    pub fn spanning(tau: f64, samples: usize) -> Result<Self, PulseError> {
        if samples < 2 {
            return Err(PulseError::InvalidGrid(format!("{samples} samples")));
        }
        Self::new(0.0, tau / (samples - 1) as f64, samples)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|i| self.time(i))
    }

    /// Same start and step, more samples.
    pub fn extended(&self, n_samples: usize) -> Self {
        Self { n_samples: n_samples.max(self.n_samples), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    grid: TimeGrid,
    envelope: Vec<C64>,
}

impl Pulse {
    pub fn new(grid: TimeGrid, envelope: Vec<C64>) -> Result<Self, PulseError> {
        if envelope.len() != grid.len() {
            return Err(PulseError::InvalidGrid(format!(
                "{} samples for a grid of {}",
                envelope.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, envelope })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> C64) -> Self {
        let envelope = grid.times().map(f).collect();
        Self { grid, envelope }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.envelope
    }

    /// `∫|f|² dt`.
    pub fn energy(&self) -> f64 {
        trapezoid(self.grid.dt, self.envelope.iter().map(|z| z.norm_sqr()))
    }

    pub fn is_normalized(&self) -> bool {
        (self.energy() - 1.0).abs() < NORMALIZATION_TOLERANCE
    }

    pub fn ensure_normalized(&self) -> Result<(), PulseError> {
        let e = self.energy();
        if (e - 1.0).abs() < NORMALIZATION_TOLERANCE { Ok(()) } else { Err(PulseError::NotNormalized(e)) }
    }

    pub fn normalized(&self) -> Result<Self, PulseError> {
        let e = self.energy();
        if !(e > 0.0 && e.is_finite()) {
            return Err(PulseError::ZeroEnergy);
        }
        Ok(self.scaled(C64::new(1.0 / e.sqrt(), 0.0)))
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { grid: self.grid, envelope: self.envelope.iter().map(|z| z * s).collect() }
    }

    /// Appends zeros up to `n_samples` on the same step.
    pub fn zero_padded(&self, n_samples: usize) -> Self {
        let grid = self.grid.extended(n_samples);
        let mut envelope = self.envelope.clone();
        envelope.resize(grid.len(), ZERO);
        Self { grid, envelope }
    }

    /// Piecewise-linear value at time `t`, vanishing beyond one step outside the grid.
    pub fn interpolate(&self, t: f64) -> C64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        let last = self.envelope.len() as f64 - 1.0;
        if !(x > -1.0 && x < last + 1.0) {
            return ZERO;
        }
        let k = x.floor();
        let frac = x - k;
        let at = |i: f64| -> C64 {
            if i < 0.0 || i > last { ZERO } else { self.envelope[i as usize] }
        };
        at(k) * (1.0 - frac) + at(k + 1.0) * frac
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,re_f,im_f")?;
        for (t, z) in self.grid.times().zip(&self.envelope) {
            writeln!(w, "{}", csvfmt::row(&[t, z.re, z.im]))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Pulse::write_csv`]; the grid is
    /// reconstructed from the first and last time stamps.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, PulseError> {
        let mut times = Vec::new();
        let mut envelope = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| PulseError::Csv { line: line_no, reason: e.to_string() })?;
            if idx == 0 {
                if line.trim() != "t_s,re_f,im_f" {
                    return Err(PulseError::Csv { line: 1, reason: format!("unexpected header `{line}`") });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match fields {
                Ok(v) if v.len() == 3 => {
                    times.push(v[0]);
                    envelope.push(C64::new(v[1], v[2]));
                }
                Ok(v) => return Err(PulseError::Csv { line: line_no, reason: format!("{} columns", v.len()) }),
                Err(e) => return Err(PulseError::Csv { line: line_no, reason: e.to_string() }),
            }
        }
        if times.len() < 2 {
            return Err(PulseError::Csv { line: times.len() + 1, reason: "too few rows".into() });
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let grid = TimeGrid::new(times[0], dt, times.len())?;
        Self::new(grid, envelope)
    }
}

pub(crate) fn trapezoid(dt: f64, values: impl Iterator<Item = f64>) -> f64 {
    trapezoid_generic(dt, values, 0.0)
}

fn trapezoid_generic<T>(dt: f64, values: impl Iterator<Item = T>, zero: T) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut acc = zero;
    let mut first = None;
    let mut last = zero;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        acc = acc + v;
        last = v;
    }
    match first {
        None => zero,
        Some(f) => (acc + (f + last) * -0.5) * dt,
    }
}

/// `f(t) ∝ exp(−(t − τ/2)² / (τ/5)²)` on `[0, τ]`, zero elsewhere, normalized
/// on `grid`.
pub fn gaussian_pulse(tau: f64, grid: TimeGrid) -> Result<Pulse, PulseError> {
    let slack = 1e-9 * grid.dt();
    if !(tau > 0.0) || grid.t_start() > slack || grid.t_end() < tau - slack {
        return Err(PulseError::Coverage { start: grid.t_start(), end: grid.t_end(), tau });
    }
    let width = tau / 5.0;
    let centre = tau / 2.0;
    let raw = Pulse::from_fn(grid, |t| {
        if t < -slack || t > tau + slack {
            ZERO
        } else {
            let x = (t - centre) / width;
            C64::new((-x * x).exp(), 0.0)
        }
    });
    raw.normalized()
}

fn same_grid(a: &Pulse, b: &Pulse) -> Result<(), PulseError> {
    let (ga, gb) = (a.grid(), b.grid());
    let tol = 1e-9 * ga.dt();
    if ga.len() != gb.len() || (ga.dt() - gb.dt()).abs() > tol || (ga.t_start() - gb.t_start()).abs() > tol {
        return Err(PulseError::GridMismatch);
    }
    Ok(())
}

/// `∫ a*(t) b(t) dt`.
pub fn overlap(a: &Pulse, b: &Pulse) -> Result<C64, PulseError> {
    same_grid(a, b)?;
    let products = a.samples().iter().zip(b.samples()).map(|(x, y)| x.conj() * y);
    Ok(trapezoid_generic(a.grid().dt(), products, ZERO))
}

/// Shape mismatch `ε = 1 − |∫ f_in*(t) f_out(t) dt|` between two normalized
/// pulses. The global phase is deliberately ignored; it is reported with the
/// reflection coefficient instead.
pub fn mismatch_epsilon(f_in: &Pulse, f_out: &Pulse) -> Result<f64, PulseError> {
    f_in.ensure_normalized()?;
    f_out.ensure_normalized()?;
    let ov = overlap(f_in, f_out)?;
    Ok((1.0 - ov.norm()).clamp(0.0, 1.0))
}

/// Discrete spectrum of a pulse.
///
/// `F_j = dt Σ_k f_k e^{−2πi jk/n}`, so with `dν = 1/(n dt)` (Hz) Parseval
/// reads `Σ|F_j|² dν = dt Σ|f_k|²`. Bin `j` corresponds to the component
/// `e^{+iω_j (t − t_start)}` with `ω_j` from [`Spectrum::angular_frequency`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TimeGrid,
    bins: Vec<C64>,
}

impl Spectrum {
    pub fn bins(&self) -> &[C64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [C64] {
        &mut self.bins
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Bin spacing in Hz.
    pub fn dnu(&self) -> f64 {
        1.0 / (self.bins.len() as f64 * self.grid.dt())
    }

    /// Signed angular frequency of bin `j` (rad/s), in `[−π/dt, π/dt)`.
    pub fn angular_frequency(&self, j: usize) -> f64 {
        let n = self.bins.len() as i64;
        let j = j as i64;
        let signed = if j < (n + 1) / 2 { j } else { j - n };
        std::f64::consts::TAU * signed as f64 * self.dnu()
    }

    pub fn angular_frequencies(&self) -> Vec<f64> {
        (0..self.bins.len()).map(|j| self.angular_frequency(j)).collect()
    }

    /// Inverse transform back onto the original grid.
    pub fn inverse(&self) -> Pulse {
        let n = self.bins.len();
        let mut buf = self.bins.clone();
        plan(n, true).process(&mut buf);
        let scale = 1.0 / (n as f64 * self.grid.dt());
        for z in &mut buf {
            *z *= scale;
        }
        Pulse { grid: self.grid, envelope: buf }
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) }
}

pub fn spectrum(p: &Pulse) -> Spectrum {
    let n = p.samples().len();
    let mut buf = p.samples().to_vec();
    plan(n, false).process(&mut buf);
    let dt = p.grid().dt();
    for z in &mut buf {
        *z *= dt;
    }
    Spectrum { grid: *p.grid(), bins: buf }
}

//! Reflection of a pulse off the resonator for each joint charge state of the
//! two double dots.
//!
//! The two dots are folded into one effective emitter with coupling
//! `√n·g`, where `n` counts the dots in `|0⟩` (bright-state reduction: the
//! dressed modes sit at `±√2 g` for `|00⟩` and `±g` for `|01⟩`, `|10⟩`).
//! Dots in `|1⟩` are far detuned and do not couple.
//!
//! Four backends of increasing fidelity share one output convention:
//!
//! * [`Backend::Analytic`]: the adiabatic closed forms, `ξ₁₁ = −1`,
//!   `ξ₀₁ = (4s−1)/(4s+1)`, `ξ₀₀ = (8s−1)/(8s+1)`.
//! * [`Backend::Filter`]: the linear-response reflection `r(ν)` applied to the
//!   pulse spectrum.
//! * [`Backend::MeanField`]: factorized (Maxwell-Bloch) equations for `⟨c⟩`,
//!   `⟨σ₋⟩`, `⟨σ_z⟩`.
//! * [`Backend::Master`]: the Lindblad master equation on charge ⊗ Fock space.
//!
//! The input field is `⟨c_in(t)⟩ = α f_in(t)` and the output
//! `g_out(t) = α f_in(t) + √κ ⟨c(t)⟩`. The output is split into loss
//! `η = 1 − ∫|g_out|²/|α|²`, a reflection phase `φ = arg⟨f_in|g_out⟩/α`, and a
//! shape mismatch `ε = 1 − |⟨f_in|f_out⟩|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::csvfmt;
use crate::device::DeviceParams;
use crate::ode::Rk4;
use crate::pulse::{overlap, spectrum, Pulse, PulseError};
use crate::qmath::{DensityMatrix, HilbertSpace, ComplexMatrix, C64, I, ONE, ZERO};

/// Integrator sub-steps per pulse sample.
pub const SUBSTEPS: usize = 4;
/// Fock-tail population above which a master-equation run is rejected.
pub const FOCK_TAIL_LIMIT: f64 = 1e-4;
/// Trace drift above which a master-equation run is rejected.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// The window after the pulse lasts this many 1/e amplitude decay times of
/// the slowest linear-response pole.
pub const TAIL_DECAY_LENGTHS: f64 = 30.0;
/// Upper bound on the tail, in units of 1/κ.
pub const MAX_TAIL_KAPPA: f64 = 400.0;
/// Number of aliases summed on either side of each DFT bin in the filter.
const ALIAS_TERMS: i64 = 64;
/// Samples between eigenvalue (positivity) checks of the master equation.
const EIGEN_CHECK_STRIDE: usize = 256;
/// Density-matrix components below this are flushed to zero; high Fock
/// coherences otherwise decay into subnormal floats, which are very slow.
const FLUSH_BELOW: f64 = 1e-200;
/// Extra refinements tried when the mean-field integrator blows up.
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatterError {
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error("input amplitude must be nonzero for the {0} backend")]
    ZeroAmplitude(Backend),
    #[error("non-finite input amplitude")]
    InvalidAmplitude,
    #[error("reflected pulse carries no energy")]
    NoOutput,
    #[error("output energy exceeds input by {excess:e} (gain is unphysical)")]
    Passivity { excess: f64 },
    #[error("integrator failed at t = {time:e} s after {refinements} refinements")]
    IntegratorFailure { time: f64, refinements: usize },
    #[error("Fock space of {fock_dim} levels truncates the field: tail population {tail:e} > {FOCK_TAIL_LIMIT:e}")]
    FockTruncation { fock_dim: usize, tail: f64 },
    #[error("density-matrix trace drifted by {drift:e}")]
    TraceDrift { drift: f64 },
    #[error("invalid Fock dimension {0}")]
    FockDimension(usize),
    #[error("state {state}: {source}")]
    State { state: JointState, source: Box<ScatterError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JointState {
    S00,
    S01,
    S10,
    S11,
}

impl JointState {
    pub const ALL: [JointState; 4] = [JointState::S00, JointState::S01, JointState::S10, JointState::S11];

    pub fn label(self) -> &'static str {
        match self {
            JointState::S00 => "00",
            JointState::S01 => "01",
            JointState::S10 => "10",
            JointState::S11 => "11",
        }
    }

    /// Number of dots in `|0⟩`, i.e. coupled to the resonator.
    pub fn n_coupled(self) -> u32 {
        match self {
            JointState::S00 => 2,
            JointState::S01 | JointState::S10 => 1,
            JointState::S11 => 0,
        }
    }

    pub fn g_eff(self, g: f64) -> f64 {
        (self.n_coupled() as f64).sqrt() * g
    }

    /// Sign an ideal CPF gate attaches to this state: −1 for `|11⟩`.
    pub fn ideal_sign(self) -> f64 {
        if self == JointState::S11 { -1.0 } else { 1.0 }
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for JointState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        JointState::ALL.into_iter().find(|st| st.label() == s).ok_or_else(|| format!("unknown state `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Analytic,
    Filter,
    MeanField,
    Master,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::Filter => "filter",
            Backend::MeanField => "meanfield",
            Backend::Master => "master",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "analytic" => Ok(Backend::Analytic),
            "filter" => Ok(Backend::Filter),
            "meanfield" => Ok(Backend::MeanField),
            "master" => Ok(Backend::Master),
            other => Err(format!("unknown backend `{other}` (expected analytic|filter|meanfield|master)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionResult {
    pub state: JointState,
    pub backend: Backend,
    /// Closed-form adiabatic reflection coefficient for this state.
    pub xi: C64,
    /// Projection of the output on the input mode, `⟨f_in|g_out⟩/α`.
    pub xi_effective: C64,
    pub alpha_in: C64,
    pub alpha_out: C64,
    /// Input envelope on the output window (zero-padded, normalized).
    pub f_in: Pulse,
    /// Normalized output envelope with `alpha_out · f_out = g_out`.
    pub f_out: Pulse,
    pub epsilon: f64,
    pub eta: f64,
    /// `arg(alpha_out/alpha_in)` in `(−π, π]`.
    pub phase: f64,
    pub diagnostics: BTreeMap<&'static str, f64>,
}

impl ReflectionResult {
    /// `|α_out/α_in|`.
    pub fn amplitude_ratio(&self) -> f64 {
        if self.alpha_in == ZERO { self.xi.norm() } else { (self.alpha_out / self.alpha_in).norm() }
    }

    /// Real reflection coefficient entering the fidelity formula.
    ///
    /// Closed-form results carry their loss inside ξ (with η = 0), so ξ is
    /// used as is. Numerical backends carry the loss in η, so only the
    /// reflection phase is kept, `Re e^{iφ} = cos φ`, which folds any
    /// deviation from the ideal phase (0 or π) into the sign pattern.
    pub fn xi_for_fidelity(&self) -> f64 {
        match self.backend {
            Backend::Analytic => self.xi.re,
            _ => self.phase.cos(),
        }
    }

    /// Output field `g_out(t)` on the output window.
    pub fn output_field(&self) -> Vec<C64> {
        self.f_out.samples().iter().map(|z| z * self.alpha_out).collect()
    }

    /// Intracavity amplitude `⟨c(t)⟩ = (g_out − α f_in)/√κ`.
    pub fn cavity_amplitude(&self, kappa: f64) -> Vec<C64> {
        let sk = kappa.sqrt();
        self.output_field()
            .iter()
            .zip(self.f_in.samples())
            .map(|(g, f)| (g - self.alpha_in * f) / sk)
            .collect()
    }

    pub fn summary_header() -> &'static str {
        "state,backend,re_xi,im_xi,abs_ratio,epsilon,eta,phi"
    }

    /// One summary CSV row; ξ is the effective (projected) coefficient.
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{}",
            self.state,
            self.backend,
            csvfmt::row(&[
                self.xi_effective.re,
                self.xi_effective.im,
                self.amplitude_ratio(),
                self.epsilon,
                self.eta,
                self.phase
            ])
        )
    }

    /// Time series `t, f_in, g_out, ⟨c⟩`.
    pub fn write_trajectory_csv<W: Write>(&self, kappa: f64, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,re_f_in,im_f_in,re_g_out,im_g_out,re_c,im_c")?;
        let g = self.output_field();
        let c = self.cavity_amplitude(kappa);
        for (i, t) in self.f_in.grid().times().enumerate() {
            let f = self.f_in.samples()[i];
            writeln!(w, "{}", csvfmt::row(&[t, f.re, f.im, g[i].re, g[i].im, c[i].re, c[i].im]))?;
        }
        Ok(())
    }
}

/// Closed-form adiabatic reflection coefficient `(4ns − 1)/(4ns + 1)` with
/// `s = g²T₁/κ` and `n` coupled dots; `−1` for `|11⟩`.
pub fn xi_analytic(state: JointState, g: f64, kappa: f64, t1: f64) -> C64 {
    let s = g * g * t1 / kappa;
    let x = 4.0 * state.n_coupled() as f64 * s;
    C64::new((x - 1.0) / (x + 1.0), 0.0)
}

/// Linear-response reflection of the component `e^{iνt}` (ν relative to the
/// drive carrier):
///
/// `r(ν) = [i(ν+Δ) − κ/2 + G(ν)] / [i(ν+Δ) + κ/2 + G(ν)]`,
/// `G(ν) = g_eff² / (iν + 1/(2T₁))`.
///
/// Δ enters with the sign of the time-domain term `−iΔ⟨c⟩`. At resonance
/// `r(0) = (4s_eff − 1)/(4s_eff + 1)`; far off resonance `r → 1`.
pub fn reflection_filter(nu: f64, g_eff: f64, kappa: f64, t1: f64, detuning: f64) -> C64 {
    let gamma = 0.5 / t1;
    let dressed = C64::new(g_eff * g_eff, 0.0) / C64::new(gamma, nu);
    let common = I * (nu + detuning) + dressed;
    (common - kappa / 2.0) / (common + kappa / 2.0)
}

/// Smallest amplitude decay rate among the poles of the linear response.
fn slowest_decay_rate(g_eff: f64, kappa: f64, t1: f64) -> f64 {
    if g_eff == 0.0 {
        return kappa / 2.0;
    }
    let gamma = 0.5 / t1;
    // Poles of s + κ/2 + g²/(s + γ): s² + (κ/2 + γ)s + κγ/2 + g² = 0.
    let b = kappa / 2.0 + gamma;
    let c = kappa * gamma / 2.0 + g_eff * g_eff;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 { b / 2.0 } else { (b - disc.sqrt()) / 2.0 }
}

/// Number of samples of the output window: the input grid plus a tail long
/// enough for every state's response to ring down.
pub fn output_window_len(f_in: &Pulse, params: &DeviceParams) -> usize {
    let rate = JointState::ALL
        .iter()
        .map(|st| slowest_decay_rate(st.g_eff(params.g_coupling), params.kappa, params.t1))
        .fold(f64::INFINITY, f64::min);
    let tail = (TAIL_DECAY_LENGTHS / rate).min(MAX_TAIL_KAPPA / params.kappa);
    f_in.samples().len() + (tail / f_in.grid().dt()).ceil() as usize
}

/// Zero-padded, renormalized copy of the input on the output window.
fn padded_input(f_in: &Pulse, params: &DeviceParams) -> Result<Pulse, ScatterError> {
    f_in.ensure_normalized()?;
    Ok(f_in.zero_padded(output_window_len(f_in, params)).normalized()?)
}

/// Splits `g_out` into amplitude, phase and shape.
fn decompose(
    state: JointState,
    backend: Backend,
    params: &DeviceParams,
    alpha: C64,
    f_in: Pulse,
    g_out: Vec<C64>,
    diagnostics: BTreeMap<&'static str, f64>,
) -> Result<ReflectionResult, ScatterError> {
    let g_pulse = Pulse::new(*f_in.grid(), g_out)?;
    let energy = g_pulse.energy() / alpha.norm_sqr();
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(ScatterError::NoOutput);
    }
    if energy > 1.0 + 1e-6 {
        return Err(ScatterError::Passivity { excess: energy - 1.0 });
    }
    let projection = overlap(&f_in, &g_pulse)? / alpha;
    let phase = projection.arg();
    let alpha_out = alpha * energy.sqrt() * C64::from_polar(1.0, phase);
    let f_out = g_pulse.scaled(alpha_out.inv());
    let epsilon = (1.0 - projection.norm() / energy.sqrt()).clamp(0.0, 1.0);
    Ok(ReflectionResult {
        state,
        backend,
        xi: xi_analytic(state, params.g_coupling, params.kappa, params.t1),
        xi_effective: projection,
        alpha_in: alpha,
        alpha_out,
        f_in,
        f_out,
        epsilon,
        // Tiny negative values are quadrature noise on a lossless reflection.
        eta: (1.0 - energy).max(0.0),
        phase,
        diagnostics,
    })
}

/// Closed-form idealization: `f_out = f_in`, `α_out = ξα`, `ε = η = 0`.
pub fn reflect_analytic(f_in: &Pulse, alpha: C64, state: JointState, params: &DeviceParams) -> ReflectionResult {
    let xi = xi_analytic(state, params.g_coupling, params.kappa, params.t1);
    ReflectionResult {
        state,
        backend: Backend::Analytic,
        xi,
        xi_effective: xi,
        alpha_in: alpha,
        alpha_out: xi * alpha,
        f_in: f_in.clone(),
        f_out: f_in.clone(),
        epsilon: 0.0,
        eta: 0.0,
        phase: if xi.re < 0.0 { PI } else { 0.0 },
        diagnostics: BTreeMap::new(),
    }
}

/// Applies `r(ν)` to the input spectrum.
///
/// The input is the piecewise-linear interpolant of its samples, whose
/// continuous spectrum is the DFT times `sinc²(ν dt/2)` repeated over all
/// aliases. Summing `r` over those aliases gives the exact response at the
/// sample times, so this backend and the time-domain integrators see the same
/// drive.
pub fn reflect_filter_pulse(
    f_in: &Pulse,
    state: JointState,
    params: &DeviceParams,
) -> Result<ReflectionResult, ScatterError> {
    let padded = padded_input(f_in, params)?;
    let g_eff = state.g_eff(params.g_coupling);
    let dt = padded.grid().dt();
    let aliasing = std::f64::consts::TAU / dt;
    let mut spec = spectrum(&padded);
    let freqs = spec.angular_frequencies();
    for (bin, &nu) in spec.bins_mut().iter_mut().zip(&freqs) {
        let mut response = ONE;
        for m in -ALIAS_TERMS..=ALIAS_TERMS {
            let w = nu + m as f64 * aliasing;
            let x = 0.5 * w * dt;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            response += (reflection_filter(w, g_eff, params.kappa, params.t1, params.detuning) - ONE) * (sinc * sinc);
        }
        *bin *= response;
    }
    let out = spec.inverse();
    let mut diagnostics = BTreeMap::new();
    let sk = params.kappa.sqrt();
    let peak = out
        .samples()
        .iter()
        .zip(padded.samples())
        .map(|(g, f)| ((g - f) / sk).norm_sqr())
        .fold(0.0, f64::max);
    diagnostics.insert("peak_photons_per_alpha2", peak);
    decompose(state, Backend::Filter, params, ONE, padded, out.samples().to_vec(), diagnostics)
}

fn check_alpha(alpha: C64, backend: Backend) -> Result<(), ScatterError> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(ScatterError::InvalidAmplitude);
    }
    if alpha == ZERO {
        return Err(ScatterError::ZeroAmplitude(backend));
    }
    Ok(())
}

/// Right-hand side of the factorized equations, state `[⟨c⟩, ⟨σ₋⟩, ⟨σ_z⟩]`.
struct MeanField {
    g: f64,
    kappa: f64,
    detuning: f64,
    t1: f64,
}

impl MeanField {
    fn rhs(&self, drive: C64, y: &[C64], dy: &mut [C64]) {
        let (c, sm, sz) = (y[0], y[1], y[2]);
        dy[0] = -(I * self.detuning + self.kappa / 2.0) * c - I * self.g * sm - self.kappa.sqrt() * drive;
        dy[1] = -sm / (2.0 * self.t1) + I * self.g * sz * c;
        let exchange = c * sm.conj() - c.conj() * sm;
        // ⟨σ_z⟩ is real; drop the round-off imaginary part.
        dy[2] = C64::new((-(sz + 1.0) / self.t1 - 2.0 * I * self.g * exchange).re, 0.0);
    }
}

/// Integrates the factorized Maxwell-Bloch equations driven by
/// `⟨c_in(t)⟩ = α f_in(t)`, starting from the empty resonator and the charge
/// ground state one step before the grid.
pub fn reflect_meanfield(
    f_in: &Pulse,
    alpha: C64,
    state: JointState,
    params: &DeviceParams,
) -> Result<ReflectionResult, ScatterError> {
    check_alpha(alpha, Backend::MeanField)?;
    let padded = padded_input(f_in, params)?;
    let model = MeanField {
        g: state.g_eff(params.g_coupling),
        kappa: params.kappa,
        detuning: params.detuning,
        t1: params.t1,
    };
    let mut substeps = SUBSTEPS;
    let mut failure_time = f64::NAN;
    for refinement in 0..=MAX_REFINEMENTS {
        match integrate_meanfield(&model, &padded, alpha, substeps) {
            Ok((g_out, diag)) => {
                let mut diagnostics = diag;
                diagnostics.insert("refinements", refinement as f64);
                return decompose(state, Backend::MeanField, params, alpha, padded, g_out, diagnostics);
            }
            Err(t) => {
                failure_time = t;
                substeps *= 2;
            }
        }
    }
    Err(ScatterError::IntegratorFailure { time: failure_time, refinements: MAX_REFINEMENTS })
}

type Trace = (Vec<C64>, BTreeMap<&'static str, f64>);

fn integrate_meanfield(model: &MeanField, f_in: &Pulse, alpha: C64, substeps: usize) -> Result<Trace, f64> {
    let grid = *f_in.grid();
    let h = grid.dt() / substeps as f64;
    let sk = model.kappa.sqrt();
    let mut y = [ZERO, ZERO, C64::new(-1.0, 0.0)];
    let mut rk = Rk4::new(3);
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| model.rhs(alpha * f_in.interpolate(t), y, dy);
    let mut t = grid.t_start() - grid.dt();
    let mut g_out = Vec::with_capacity(grid.len());
    let (mut max_sm, mut min_sz, mut peak_n) = (0.0f64, -1.0f64, 0.0f64);
    for (k, f) in f_in.samples().iter().enumerate() {
        let target = grid.time(k);
        for j in 0..substeps {
            // Recompute from the sample time to avoid accumulating round-off in t.
            let t_next = if j + 1 == substeps { target } else { t + h };
            rk.step(&mut rhs, t, t_next - t, &mut y);
            t = t_next;
        }
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(t);
        }
        max_sm = max_sm.max(y[1].norm());
        min_sz = min_sz.min(y[2].re);
        peak_n = peak_n.max(y[0].norm_sqr());
        g_out.push(alpha * f + sk * y[0]);
    }
    let mut diag = BTreeMap::new();
    diag.insert("max_abs_sigma_minus", max_sm);
    diag.insert("min_sigma_z", min_sz);
    diag.insert("max_excited_population", 0.5 * (1.0 + y_max_sz(min_sz, max_sm)));
    diag.insert("peak_photons", peak_n);
    Ok((g_out, diag))
}

// Upper bound on the excited population from the tracked extremes; only
// min ⟨σ_z⟩ is monitored, so use the coherence to bound it from above.
fn y_max_sz(min_sz: f64, max_sm: f64) -> f64 {
    // |⟨σ₋⟩|² ≤ (1 − ⟨σ_z⟩²)/4 for a physical Bloch vector, so
    // ⟨σ_z⟩ ≤ −√(1 − 4|⟨σ₋⟩|²) is not guaranteed under factorization; report
    // the larger of the two estimates.
    let from_coherence = -(1.0 - 4.0 * max_sm * max_sm).max(0.0).sqrt();
    from_coherence.max(min_sz)
}

/// Sparse operator as `(row, col, value)` triples.
#[derive(Debug, Clone)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != ZERO {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Self { entries }
    }
}

/// Lindblad generator for one effective emitter coupled to the resonator:
///
/// `dρ/dt = −i[H, ρ] + κ D[c]ρ + (1/T₁) D[σ₋]ρ`,
/// `H = Δ c†c + g(σ₊c + σ₋c†) + i√κ(β* c − β c†)`, `β = ⟨c_in(t)⟩`,
///
/// with `D[L]ρ = LρL† − ½{L†L, ρ}`.
pub struct Lindblad {
    space: HilbertSpace,
    kappa: f64,
    t1: f64,
    detuning: f64,
    g: f64,
    c: SparseOp,
    sm: SparseOp,
    /// `σ₊c`.
    exchange: SparseOp,
    photons: Vec<f64>,
    excited: Vec<f64>,
}

impl Lindblad {
    pub fn new(space: HilbertSpace, g_eff: f64, kappa: f64, t1: f64, detuning: f64) -> Self {
        let c_dense = space.cavity_lowering();
        let sm_dense = space.charge_lowering();
        let exchange = &sm_dense.adjoint() * &c_dense;
        let photons = (0..space.dim()).map(|i| (i % space.fock_dim()) as f64).collect();
        let excited = (0..space.dim()).map(|i| if i >= space.fock_dim() { 1.0 } else { 0.0 }).collect();
        Self {
            space,
            kappa,
            t1,
            detuning,
            g: g_eff,
            c: SparseOp::from_dense(&c_dense),
            sm: SparseOp::from_dense(&sm_dense),
            exchange: SparseOp::from_dense(&exchange),
            photons,
            excited,
        }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    /// Writes `dρ/dt` for drive `β` into `out` (row-major `d × d`).
    pub fn rhs(&self, beta: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.space.dim();
        let gamma = 1.0 / self.t1;
        // Diagonal parts: Δ c†c in the commutator, −½{L†L, ρ} in the dissipators.
        for i in 0..d {
            for j in 0..d {
                let coherent = -I * self.detuning * (self.photons[i] - self.photons[j]);
                let decay = -0.5 * (self.kappa * (self.photons[i] + self.photons[j]) + gamma * (self.excited[i] + self.excited[j]));
                out[i * d + j] = rho[i * d + j] * (coherent + decay);
            }
        }
        // Off-diagonal Hamiltonian V = g(X + X†) + i√κ(β* c − β c†), X = σ₊c.
        let sk = self.kappa.sqrt();
        let drive_c = I * sk * beta.conj();
        let drive_cdag = -I * sk * beta;
        let mut v_terms: Vec<(usize, usize, C64)> =
            Vec::with_capacity(2 * (self.exchange.entries.len() + self.c.entries.len()));
        for &(r, k, x) in &self.exchange.entries {
            v_terms.push((r, k, x * self.g));
            v_terms.push((k, r, x.conj() * self.g));
        }
        if beta != ZERO {
            for &(r, k, x) in &self.c.entries {
                v_terms.push((r, k, x * drive_c));
                v_terms.push((k, r, x.conj() * drive_cdag));
            }
        }
        // −i(Vρ − ρV)
        for &(r, k, v) in &v_terms {
            let coef = -I * v;
            let src = &rho[k * d..(k + 1) * d];
            let dst = &mut out[r * d..(r + 1) * d];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += coef * x;
            }
            let coef = I * v;
            for i in 0..d {
                out[i * d + k] += rho[i * d + r] * coef;
            }
        }
        // Jumps κ cρc† and (1/T₁) σ₋ρσ₊.
        for (op, rate) in [(&self.c, self.kappa), (&self.sm, gamma)] {
            for &(r1, k1, v1) in &op.entries {
                for &(r2, k2, v2) in &op.entries {
                    out[r1 * d + r2] += rho[k1 * d + k2] * (v1 * v2.conj() * rate);
                }
            }
        }
    }

    /// `tr(ρ c)`.
    pub fn cavity_expectation(&self, rho: &[C64]) -> C64 {
        let d = self.space.dim();
        self.c.entries.iter().map(|&(r, k, v)| v * rho[k * d + r]).sum()
    }

    /// Free evolution (no drive) of `rho` over `duration` in `steps` RK4 steps,
    /// calling `observe(t, ρ)` after every step.
    pub fn evolve_free(
        &self,
        rho: &DensityMatrix,
        duration: f64,
        steps: usize,
        mut observe: impl FnMut(f64, &DensityMatrix),
    ) -> DensityMatrix {
        let d = self.space.dim();
        let mut y = rho.matrix().as_slice().to_vec();
        let mut rk = Rk4::new(d * d);
        let h = duration / steps as f64;
        let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| self.rhs(ZERO, y, dy);
        for k in 0..steps {
            rk.step(&mut rhs, k as f64 * h, h, &mut y);
            let current = DensityMatrix::from_raw(
                self.space,
                ComplexMatrix::from_vec(d, d, y.clone()).expect("square state"),
            );
            observe((k + 1) as f64 * h, &current);
        }
        DensityMatrix::from_raw(self.space, ComplexMatrix::from_vec(d, d, y).expect("square state"))
    }
}

/// Rough Fock dimension for a drive of amplitude `α` on pulse `f_in`:
/// `(2|α| max|f_in| / √κ · 2)²`, at least 4.
pub fn suggested_fock_dim(alpha: C64, f_in: &Pulse, kappa: f64) -> usize {
    let peak = f_in.samples().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let amp = 2.0 * alpha.norm() * peak / kappa.sqrt() * 2.0;
    (amp * amp).ceil().max(4.0) as usize
}

/// Solves the master equation from `|0⟩⊗|vac⟩` with fixed-step RK4
/// (`dt/4`) and reads off `⟨c(t)⟩ = tr(ρc)`.
///
/// Rejects the run if the top two Fock levels ever hold more than
/// [`FOCK_TAIL_LIMIT`] population or the trace drifts by more than
/// [`TRACE_DRIFT_LIMIT`]. Diagnostics record the worst trace drift,
/// Hermiticity error, minimum eigenvalue (sampled) and tail population.
pub fn reflect_master(
    f_in: &Pulse,
    alpha: C64,
    state: JointState,
    params: &DeviceParams,
    fock_dim: usize,
) -> Result<ReflectionResult, ScatterError> {
    check_alpha(alpha, Backend::Master)?;
    let space = HilbertSpace::new(fock_dim).map_err(|_| ScatterError::FockDimension(fock_dim))?;
    let padded = padded_input(f_in, params)?;
    let model = Lindblad::new(space, state.g_eff(params.g_coupling), params.kappa, params.t1, params.detuning);
    let d = space.dim();
    let grid = *padded.grid();
    let h = grid.dt() / SUBSTEPS as f64;
    let sk = params.kappa.sqrt();

    let mut y = DensityMatrix::ground(space).matrix().as_slice().to_vec();
    let mut rk = Rk4::new(d * d);
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| model.rhs(alpha * padded.interpolate(t), y, dy);
    let mut t = grid.t_start() - grid.dt();

    let mut g_out = Vec::with_capacity(grid.len());
    let (mut drift, mut herm, mut min_eig, mut tail, mut peak_n, mut max_exc) =
        (0.0f64, 0.0f64, f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let last = grid.len() - 1;
    for (k, f) in padded.samples().iter().enumerate() {
        let target = grid.time(k);
        for j in 0..SUBSTEPS {
            let t_next = if j + 1 == SUBSTEPS { target } else { t + h };
            rk.step(&mut rhs, t, t_next - t, &mut y);
            t = t_next;
        }
        for z in y.iter_mut() {
            if z.re.abs() < FLUSH_BELOW {
                z.re = 0.0;
            }
            if z.im.abs() < FLUSH_BELOW {
                z.im = 0.0;
            }
        }
        let rho = DensityMatrix::from_raw(space, ComplexMatrix::from_vec(d, d, y.clone()).expect("square state"));
        let tr = rho.trace();
        if !(tr.re.is_finite() && tr.im.is_finite()) {
            return Err(ScatterError::IntegratorFailure { time: t, refinements: 0 });
        }
        drift = drift.max((tr - ONE).norm());
        herm = herm.max(rho.hermiticity_error());
        tail = tail.max(rho.fock_tail_population(2));
        max_exc = max_exc.max(rho.excited_population());
        let n: f64 = (0..d).map(|i| model.photons[i] * y[i * d + i].re).sum();
        peak_n = peak_n.max(n);
        if k % EIGEN_CHECK_STRIDE == 0 || k == last {
            min_eig = min_eig.min(rho.min_eigenvalue());
        }
        if drift > TRACE_DRIFT_LIMIT {
            return Err(ScatterError::TraceDrift { drift });
        }
        if tail > FOCK_TAIL_LIMIT {
            return Err(ScatterError::FockTruncation { fock_dim, tail });
        }
        g_out.push(alpha * f + sk * model.cavity_expectation(&y));
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("max_trace_drift", drift);
    diagnostics.insert("max_hermiticity_error", herm);
    diagnostics.insert("min_eigenvalue", min_eig);
    diagnostics.insert("fock_tail_population", tail);
    diagnostics.insert("peak_photons", peak_n);
    diagnostics.insert("max_excited_population", max_exc);
    decompose(state, Backend::Master, params, alpha, padded, g_out, diagnostics)
}

/// Options that only some backends read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackendOptions {
    /// Fock truncation for the master equation.
    pub fock_dim: usize,
}

impl Default for BackendOptions {
    fn default() -> Self {
        Self { fock_dim: 16 }
    }
}

/// One backend run for one state. The filter is linear, so it is evaluated at
/// unit amplitude and rescaled; this also makes `α = 0` well defined there.
pub fn scatter_state(
    f_in: &Pulse,
    alpha: C64,
    state: JointState,
    params: &DeviceParams,
    backend: Backend,
    options: BackendOptions,
) -> Result<ReflectionResult, ScatterError> {
    let result = match backend {
        Backend::Analytic => Ok(reflect_analytic(f_in, alpha, state, params)),
        Backend::Filter => reflect_filter_pulse(f_in, state, params).map(|mut r| {
            r.alpha_out *= alpha;
            r.alpha_in = alpha;
            r
        }),
        Backend::MeanField => reflect_meanfield(f_in, alpha, state, params),
        Backend::Master => reflect_master(f_in, alpha, state, params, options.fock_dim),
    };
    result.map_err(|e| ScatterError::State { state, source: Box::new(e) })
}

/// Runs `backend` for all four joint states. `|01⟩` and `|10⟩` couple
/// identically, so the former is computed once and relabelled.
pub fn scatter_all_states(
    f_in: &Pulse,
    alpha: C64,
    params: &DeviceParams,
    backend: Backend,
    options: BackendOptions,
) -> Result<BTreeMap<JointState, ReflectionResult>, ScatterError> {
    let distinct = [JointState::S00, JointState::S01, JointState::S11];
    let computed: Vec<ReflectionResult> = distinct
        .par_iter()
        .map(|&st| scatter_state(f_in, alpha, st, params, backend, options))
        .collect::<Result<_, _>>()?;
    let mut out = BTreeMap::new();
    for r in computed {
        if r.state == JointState::S01 {
            out.insert(JointState::S10, ReflectionResult { state: JointState::S10, ..r.clone() });
        }
        out.insert(r.state, r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{gaussian_pulse, TimeGrid};

    fn reference_pulse(params: &DeviceParams, tau_kappa: f64) -> Pulse {
        let tau = tau_kappa / params.kappa;
        gaussian_pulse(tau, TimeGrid::for_pulse(tau, params.kappa).unwrap()).unwrap()
    }

    #[test]
    fn joint_state_couplings() {
        let g = 3.0;
        assert_eq!(JointState::S11.g_eff(g), 0.0);
        assert_eq!(JointState::S01.g_eff(g), g);
        assert_eq!(JointState::S10.g_eff(g), g);
        assert!((JointState::S00.g_eff(g) - 2f64.sqrt() * g).abs() < 1e-15);
        assert_eq!("10".parse::<JointState>().unwrap(), JointState::S10);
        assert_eq!("master".parse::<Backend>().unwrap(), Backend::Master);
        assert!("quantum".parse::<Backend>().is_err());
    }

    #[test]
    fn xi_analytic_examples() {
        let p = DeviceParams::reference();
        let xi = |st| xi_analytic(st, p.g_coupling, p.kappa, p.t1).re;
        assert_eq!(xi(JointState::S11), -1.0);
        assert!((xi(JointState::S00) - 1151.0 / 1153.0).abs() < 1e-12);
        assert!((xi(JointState::S01) - 575.0 / 577.0).abs() < 1e-12);
        let strong = xi_analytic(JointState::S00, 1e3 * p.g_coupling, p.kappa, p.t1).re;
        assert!(1.0 - strong < 1e-8);
    }

    #[test]
    fn filter_limits() {
        let p = DeviceParams::reference();
        assert_eq!(reflection_filter(0.0, 0.0, p.kappa, p.t1, 0.0), C64::new(-1.0, 0.0));
        let far = reflection_filter(1e4 * p.kappa, p.g_coupling, p.kappa, p.t1, 0.0);
        assert!((far - ONE).norm() < 1e-3);
        for (st, n) in [(JointState::S01, 1.0), (JointState::S00, 2.0)] {
            let s = p.s_parameter();
            let r = reflection_filter(0.0, st.g_eff(p.g_coupling), p.kappa, p.t1, 0.0);
            let expect = (4.0 * n * s - 1.0) / (4.0 * n * s + 1.0);
            assert!((r.re - expect).abs() < 1e-12 && r.im.abs() < 1e-12);
        }
    }

    #[test]
    fn filter_is_passive_and_lossless_for_bare_cavity() {
        let p = DeviceParams::reference();
        for nu in [-5e9, -1e8, 0.0, 3e8, 7e9] {
            for st in JointState::ALL {
                assert!(reflection_filter(nu, st.g_eff(p.g_coupling), p.kappa, p.t1, 0.0).norm() <= 1.0 + 1e-15);
            }
            assert!((reflection_filter(nu, 0.0, p.kappa, p.t1, 0.0).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bare_cavity_reflection_at_reference_pulse() {
        let p = DeviceParams::reference();
        let f = reference_pulse(&p, 10.0);
        let r = reflect_filter_pulse(&f, JointState::S11, &p).unwrap();
        assert!(r.eta < 1e-6, "eta = {}", r.eta);
        assert!((r.phase.abs() - PI).abs() < 0.02, "phase = {}", r.phase);
        assert!((r.eta - (1.0 - r.amplitude_ratio().powi(2))).abs() < 1e-9);
        assert!(r.f_out.is_normalized());
    }

    #[test]
    fn dressed_states_reflect_nearly_fully() {
        let p = DeviceParams::reference();
        let f = reference_pulse(&p, 10.0);
        let r = reflect_filter_pulse(&f, JointState::S00, &p).unwrap();
        let xi00 = 1151.0 / 1153.0;
        assert!(r.amplitude_ratio() > xi00 - 0.01 && r.amplitude_ratio() <= 1.0);
    }

    #[test]
    fn master_backend_rejects_bad_inputs() {
        let p = DeviceParams::reference();
        let f = reference_pulse(&p, 10.0);
        assert!(matches!(
            reflect_master(&f, ZERO, JointState::S11, &p, 8),
            Err(ScatterError::ZeroAmplitude(Backend::Master))
        ));
        assert!(matches!(
            reflect_master(&f, ONE, JointState::S11, &p, 1),
            Err(ScatterError::FockDimension(1))
        ));
        // A strong drive on a tiny Fock space must be flagged.
        let err = reflect_master(&f, C64::new(3.0, 0.0), JointState::S11, &p, 4).unwrap_err();
        assert!(matches!(err, ScatterError::FockTruncation { fock_dim: 4, .. }), "{err}");
    }

    #[test]
    fn analytic_backend_is_the_idealization() {
        let p = DeviceParams::reference();
        let f = reference_pulse(&p, 10.0);
        let all = scatter_all_states(&f, C64::new(2.0, 0.0), &p, Backend::Analytic, BackendOptions::default()).unwrap();
        for (st, r) in &all {
            assert_eq!(r.epsilon, 0.0);
            assert_eq!(r.eta, 0.0);
            assert_eq!(r.xi, xi_analytic(*st, p.g_coupling, p.kappa, p.t1));
        }
        assert_eq!(all[&JointState::S11].phase, PI);
    }

    #[test]
    fn window_covers_ringdown() {
        let p = DeviceParams::reference();
        let f = reference_pulse(&p, 10.0);
        let n = output_window_len(&f, &p);
        let tail = (n - f.samples().len()) as f64 * f.grid().dt() * p.kappa;
        // Slowest pole of the |01⟩ response decays at ≈ κ/4 + γ/2.
        assert!(tail > 100.0 && tail < MAX_TAIL_KAPPA + 1.0, "tail = {tail}/kappa");
    }
}

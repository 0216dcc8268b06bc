//! Batch front-end behind the `sim` binary: configuration, subcommands and
//! output files.
//!
//! Frequencies in the configuration are `f/2π` in MHz and every key carries
//! its unit, e.g. `kappa_over_2pi_MHz = 100.0`. Circuit values are SI.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::csvfmt;
use crate::device::{
    angular_to_energy, charge_dephasing_estimate, coupling_g, dqd_hamiltonian, energy_gap, mixing_angle,
    resonator_fundamental, spin_dephasing_estimate, validate_regime, CircuitParams, DeviceError, DeviceParams,
    ZeemanParams, HBAR,
};
use crate::gate::{
    gate_time_estimate, svg_plot, sweep_coupling_variation, sweep_photon_number, write_sweep_csv, FidelityPoint,
    GateError,
};
use crate::pulse::{gaussian_pulse, Pulse, PulseError, TimeGrid};
use crate::qmath::{hermitian_eigenvalues, C64};
use crate::scattering::{scatter_all_states, Backend, BackendOptions, ReflectionResult, ScatterError};

/// Configuration shipped with the crate: the reference operating point.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

/// Environment variable holding the worker-thread count for sweeps.
pub const THREADS_ENV: &str = "CPF_SIM_THREADS";

/// Nominal gate time for a `τ = 10/κ` pulse (s).
pub const QUOTED_GATE_TIME: f64 = 100e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_OTHER,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<DeviceError> for CliError {
    fn from(e: DeviceError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PulseError> for CliError {
    fn from(e: PulseError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ScatterError> for CliError {
    fn from(e: ScatterError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        match e {
            GateError::CouplingFraction(_) | GateError::Amplitude(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    #[serde(rename = "delta_over_2pi_MHz")]
    pub delta_mhz: f64,
    #[serde(rename = "tunneling_over_2pi_MHz")]
    pub tunneling_mhz: f64,
    #[serde(rename = "g_over_2pi_MHz")]
    pub g_mhz: f64,
    #[serde(rename = "kappa_over_2pi_MHz")]
    pub kappa_mhz: f64,
    #[serde(rename = "detuning_over_2pi_MHz", default)]
    pub detuning_mhz: f64,
    /// `1/(2π T₁)`.
    #[serde(rename = "relaxation_rate_over_2pi_MHz")]
    pub relaxation_mhz: f64,
    #[serde(rename = "bare_dephasing_time_ns")]
    pub tb_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub length_m: f64,
    #[serde(rename = "capacitance_per_length_F_per_m")]
    pub capacitance_per_length: f64,
    pub impedance_ohm: f64,
    pub coupling_ratio_v: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanSection {
    pub g_factor: f64,
    #[serde(rename = "field_T")]
    pub field: f64,
    /// RMS hyperfine field difference between the dots, for the T₂* estimate.
    #[serde(rename = "gradient_rms_mT", default)]
    pub gradient_rms_mt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    /// Pulse duration in units of `1/κ`.
    pub tau_times_kappa: f64,
    /// Samples on `[0, τ]`; the default grid when absent.
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Photon,
    Coupling,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    /// Real amplitudes α for `photon`, fractions δg/g for `coupling`.
    pub points: Vec<f64>,
    /// Amplitude used by the coupling sweep.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    /// Half-width of the δ grid in units of T.
    pub span_over_tunneling: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub backend: String,
    /// Amplitude for `reflect`.
    pub alpha: f64,
    pub fock_dim: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSection,
    #[serde(default)]
    pub circuit: Option<CircuitSection>,
    #[serde(default)]
    pub zeeman: Option<ZeemanSection>,
    pub pulse: PulseSection,
    pub sweep: SweepSection,
    pub levels: LevelsSection,
    pub run: RunSection,
}

fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    fn validate(&self) -> Result<(), CliError> {
        self.device_params()?.validate()?;
        self.backend()?;
        let bad = |key: &str, why: &str| Err(CliError::Config(format!("{key}: {why}")));
        if !(self.pulse.tau_times_kappa > 0.0 && self.pulse.tau_times_kappa.is_finite()) {
            return bad("pulse.tau_times_kappa", "must be positive");
        }
        if self.sweep.points.is_empty() {
            return bad("sweep.points", "must not be empty");
        }
        if self.levels.points < 2 {
            return bad("levels.points", "need at least 2");
        }
        if !(self.levels.span_over_tunneling > 0.0) {
            return bad("levels.span_over_tunneling", "must be positive");
        }
        if self.run.fock_dim < 2 {
            return bad("run.fock_dim", "need at least 2");
        }
        if let Some(z) = &self.zeeman {
            if z.gradient_rms_mt.is_some_and(|g| g < 0.0) {
                return bad("zeeman.gradient_rms_mT", "must be >= 0");
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Result<Backend, CliError> {
        self.run.backend.parse().map_err(|e: String| CliError::Config(format!("run.backend: {e}")))
    }

    pub fn device_params(&self) -> Result<DeviceParams, CliError> {
        let d = &self.device;
        if !(d.relaxation_mhz > 0.0) {
            return Err(CliError::Config(format!(
                "device.relaxation_rate_over_2pi_MHz = {} must be > 0",
                d.relaxation_mhz
            )));
        }
        Ok(DeviceParams {
            delta: mhz(d.delta_mhz),
            tunneling: mhz(d.tunneling_mhz),
            g_coupling: mhz(d.g_mhz),
            kappa: mhz(d.kappa_mhz),
            detuning: mhz(d.detuning_mhz),
            t1: 1.0 / mhz(d.relaxation_mhz),
            tb: d.tb_ns * 1e-9,
            circuit: self.circuit.as_ref().map(|c| CircuitParams {
                length: c.length_m,
                cap_per_len: c.capacitance_per_length,
                impedance: c.impedance_ohm,
                coupling_ratio: c.coupling_ratio_v,
            }),
            zeeman: self.zeeman.as_ref().map(|z| ZeemanParams { g_factor: z.g_factor, b_field: z.field }),
        })
    }

    /// Pulse duration τ (s).
    pub fn tau(&self) -> Result<f64, CliError> {
        Ok(self.pulse.tau_times_kappa / self.device_params()?.kappa)
    }

    pub fn input_pulse(&self) -> Result<Pulse, CliError> {
        let tau = self.tau()?;
        let grid = match self.pulse.samples {
            Some(n) => TimeGrid::spanning(tau, n)?,
            None => TimeGrid::for_pulse(tau, self.device_params()?.kappa)?,
        };
        Ok(gaussian_pulse(tau, grid)?)
    }

    fn options(&self) -> BackendOptions {
        BackendOptions { fock_dim: self.run.fock_dim }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Levels,
    Reflect,
    Fidelity,
    Regime,
}

/// Everything a subcommand needs besides the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub plot: bool,
    pub out: Option<PathBuf>,
}

/// Reads the worker count from [`THREADS_ENV`] and sizes the global pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={value}: expected a positive integer")))?;
    // A second call in the same process (tests) finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one subcommand; human-readable output goes to `stdout`.
pub fn run<W: Write>(inv: &Invocation, stdout: &mut W) -> Result<(), CliError> {
    let mut cfg = match &inv.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default_config(),
    };
    if let Some(b) = inv.backend {
        cfg.run.backend = b.label().to_string();
    }
    if let Some(out) = &inv.out {
        cfg.run.output_dir = out.clone();
    }
    match inv.command {
        Command::Levels => cmd_levels(&cfg, stdout),
        Command::Reflect => cmd_reflect(&cfg, stdout),
        Command::Fidelity => cmd_fidelity(&cfg, inv.plot, stdout),
        Command::Regime => cmd_regime(&cfg, stdout),
    }
}

fn create_file(dir: &Path, name: &str) -> Result<(BufWriter<fs::File>, PathBuf), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
    Ok((BufWriter::new(file), path))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(CliError::io(format!("writing {}", path.display())))
}

fn say<W: Write>(stdout: &mut W, text: &str) -> Result<(), CliError> {
    stdout.write_all(text.as_bytes()).map_err(CliError::io("writing to stdout"))
}

pub const LEVELS_HEADER: &str = "delta_rad_per_s,e_lower_rad_per_s,e_upper_rad_per_s,gap_rad_per_s";

/// Eigenvalues of the reduced double-dot Hamiltonian on a symmetric δ grid.
pub fn levels_table(params: &DeviceParams, span_over_tunneling: f64, points: usize) -> Vec<[f64; 4]> {
    let span = span_over_tunneling * params.tunneling;
    let last = (points - 1) as f64;
    (0..points)
        .map(|k| {
            // Written so that mirrored points are exact negatives.
            let delta = span * (2.0 * k as f64 - last) / last;
            let ev = hermitian_eigenvalues(&dqd_hamiltonian(delta, params.tunneling));
            [delta, ev[0], ev[1], energy_gap(delta, params.tunneling)]
        })
        .collect()
}

pub fn cmd_levels<W: Write>(cfg: &RunConfig, stdout: &mut W) -> Result<(), CliError> {
    let params = cfg.device_params()?;
    let rows = levels_table(&params, cfg.levels.span_over_tunneling, cfg.levels.points);
    let (mut w, path) = create_file(&cfg.run.output_dir, "levels.csv")?;
    let write = |w: &mut BufWriter<fs::File>| -> io::Result<()> {
        writeln!(w, "{LEVELS_HEADER}")?;
        for r in &rows {
            writeln!(w, "{}", csvfmt::row(r))?;
        }
        Ok(())
    };
    write(&mut w).map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)?;
    say(stdout, &format!("wrote {}\n", path.display()))
}

pub fn cmd_reflect<W: Write>(cfg: &RunConfig, stdout: &mut W) -> Result<(), CliError> {
    let params = cfg.device_params()?;
    let backend = cfg.backend()?;
    let f_in = cfg.input_pulse()?;
    let alpha = C64::new(cfg.run.alpha, 0.0);
    let results = scatter_all_states(&f_in, alpha, &params, backend, cfg.options())?;
    let dir = &cfg.run.output_dir;

    let (mut w, path) = create_file(dir, "reflect_summary.csv")?;
    let mut summary = format!("{}\n", ReflectionResult::summary_header());
    for r in results.values() {
        summary.push_str(&r.summary_row());
        summary.push('\n');
    }
    w.write_all(summary.as_bytes()).map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)?;
    let mut report = format!("wrote {}\n", path.display());

    for (st, r) in &results {
        let (mut w, path) = create_file(dir, &format!("trajectory_{st}.csv"))?;
        r.write_trajectory_csv(params.kappa, &mut w).map_err(CliError::io(format!("writing {}", path.display())))?;
        finish(w, &path)?;
        let _ = writeln!(report, "wrote {}", path.display());
        if !r.diagnostics.is_empty() {
            let diag: Vec<String> = r.diagnostics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
            let _ = writeln!(report, "  {st}: {}", diag.join(" "));
        }
    }
    say(stdout, &report)
}

pub fn fidelity_points(cfg: &RunConfig) -> Result<Vec<FidelityPoint>, CliError> {
    let params = cfg.device_params()?;
    let backend = cfg.backend()?;
    let f_in = cfg.input_pulse()?;
    Ok(match cfg.sweep.kind {
        SweepKind::Photon => sweep_photon_number(&params, &f_in, &cfg.sweep.points, backend, cfg.options())?,
        SweepKind::Coupling => {
            sweep_coupling_variation(&params, &f_in, &cfg.sweep.points, cfg.sweep.alpha, backend, cfg.options())?
        }
    })
}

pub fn cmd_fidelity<W: Write>(cfg: &RunConfig, plot: bool, stdout: &mut W) -> Result<(), CliError> {
    let points = fidelity_points(cfg)?;
    let stem = match cfg.sweep.kind {
        SweepKind::Photon => "fidelity_photon",
        SweepKind::Coupling => "fidelity_coupling",
    };
    let (mut w, path) = create_file(&cfg.run.output_dir, &format!("{stem}.csv"))?;
    write_sweep_csv(&points, &mut w).map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)?;
    let mut report = format!("wrote {}\n", path.display());
    if plot {
        let (title, x_label) = match cfg.sweep.kind {
            SweepKind::Photon => ("CPF fidelity vs photon number", "|alpha|^2"),
            SweepKind::Coupling => ("CPF fidelity vs coupling variation", "dg/g"),
        };
        let (mut w, path) = create_file(&cfg.run.output_dir, &format!("{stem}.svg"))?;
        w.write_all(svg_plot(&points, title, x_label).as_bytes())
            .map_err(CliError::io(format!("writing {}", path.display())))?;
        finish(w, &path)?;
        let _ = writeln!(report, "wrote {}", path.display());
    }
    for p in &points {
        let _ = writeln!(report, "x = {:>10.4}  F = {:.6}", p.x_value, p.fidelity);
    }
    say(stdout, &report)
}

/// Text of the regime report.
pub fn regime_report(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.device_params()?;
    let tau = cfg.tau()?;
    let report = validate_regime(&params, Some(tau));
    let mut out = String::new();
    let _ = writeln!(out, "regime checks");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "  [{:<4}] {:<26} value={:.4e} bound={:.4e} margin={:.4e}  {}",
            c.status.label(),
            c.name,
            c.value,
            c.bound,
            c.margin,
            c.detail
        );
    }
    let _ = writeln!(out, "  all passed: {}", report.all_passed());

    let mhz_of = |w: f64| w / TAU / 1e6;
    let omega = params.charge_gap();
    let _ = writeln!(out, "coupling");
    let _ = writeln!(out, "  configured g/2pi = {:.3} MHz", mhz_of(params.g_coupling));
    match &params.circuit {
        Some(c) => {
            let theta = mixing_angle(params.delta, params.tunneling)?;
            let g4 = coupling_g(c, theta);
            let _ = writeln!(
                out,
                "  circuit g/2pi = {:.3} MHz (ratio to configured {:.3}), resonator omega0/2pi = {:.4} GHz",
                mhz_of(g4),
                g4 / params.g_coupling,
                resonator_fundamental(c) / TAU / 1e9
            );
        }
        None => {
            let _ = writeln!(out, "  circuit g: skipped (no circuit section)");
        }
    }
    let s = params.s_parameter();
    let _ = writeln!(out, "  s = g^2 T1 / kappa = {s:.4}");
    let _ = writeln!(out, "  photon-loss scale kappa/(g^2 T1) = 1/s = {:.4e}", 1.0 / s);

    let _ = writeln!(out, "timescales");
    let t2 = charge_dephasing_estimate(omega, params.tb);
    let gate = gate_time_estimate(tau);
    let _ = writeln!(out, "  hbar*omega = {:.3} ueV (omega/2pi = {:.4} GHz)", angular_to_energy(omega), omega / TAU / 1e9);
    let _ = writeln!(out, "  gate time ~ tau = {:.4e} s (tau*kappa = {})", gate, cfg.pulse.tau_times_kappa);
    let _ = writeln!(
        out,
        "  quoted gate time = {:.4e} s; differs from tau by a factor {:.3}",
        QUOTED_GATE_TIME,
        QUOTED_GATE_TIME / gate
    );
    let _ = writeln!(out, "  T1 = {:.4e} s (T1/tau = {:.3})", params.t1, params.t1 / gate);
    let _ = writeln!(out, "  charge T2 ~ omega*Tb^2 = {:.4e} s (T2/tau = {:.3})", t2, t2 / gate);
    match cfg.zeeman.as_ref().and_then(|z| z.gradient_rms_mt.map(|g| (z.g_factor, g))) {
        Some((gf, grad)) => {
            let t2s = spin_dephasing_estimate(gf, grad * 1e-3);
            let _ = writeln!(out, "  spin T2* = {:.4e} s (T2*/tau = {:.3})", t2s, t2s / gate);
        }
        None => {
            let _ = writeln!(out, "  spin T2*: skipped (no gradient_rms_mT)");
        }
    }
    let _ = writeln!(out, "  1/kappa = {:.4e} s, hbar = {:.6e} J s", 1.0 / params.kappa, HBAR);
    Ok(out)
}

pub fn cmd_regime<W: Write>(cfg: &RunConfig, stdout: &mut W) -> Result<(), CliError> {
    say(stdout, &regime_report(cfg)?)
}

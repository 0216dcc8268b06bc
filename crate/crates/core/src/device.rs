//! Double-dot charge qubit, stripline resonator and their coupling.
//!
//! Internally ħ = 1 and every energy or rate is an angular frequency in rad/s.
//! Circuit and Zeeman quantities stay in SI and are converted at the boundary.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use thiserror::Error;

use crate::qmath::{annihilation_op, kron, sigma_plus, ComplexMatrix, HilbertSpace, C64};

/// Elementary charge (C).
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Numerical reading of "≫" in the regime checks.
pub const MUCH_GREATER_THRESHOLD: f64 = 10.0;
/// Allowed relative mismatch between the resonator mode and the charge gap.
pub const RESONANCE_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid device parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("mixing angle undefined for delta = tunneling = 0")]
    UndefinedAngle,
}

fn require(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), DeviceError> {
    if cond && value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::InvalidParameter { name, value, reason })
    }
}

/// Transmission-line resonator geometry and its capacitive coupling to one dot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Resonator length (m).
    pub length: f64,
    /// Capacitance per unit length (F/m).
    pub cap_per_len: f64,
    /// Characteristic impedance (Ω).
    pub impedance: f64,
    /// `C_c / C_tot`.
    pub coupling_ratio: f64,
}

impl CircuitParams {
    /// 3 cm, 50 Ω line with `C₀` chosen so the fundamental sits at 2π×10 GHz,
    /// and `v = 0.2`.
    pub fn reference() -> Self {
        let length = 0.03;
        let impedance = 50.0;
        let omega0 = TAU * 10e9;
        Self { length, cap_per_len: PI / (length * impedance * omega0), impedance, coupling_ratio: 0.2 }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        require(self.length > 0.0, "length", self.length, "must be > 0")?;
        require(self.cap_per_len > 0.0, "cap_per_len", self.cap_per_len, "must be > 0")?;
        require(self.impedance > 0.0, "impedance", self.impedance, "must be > 0")?;
        require(
            self.coupling_ratio > 0.0 && self.coupling_ratio <= 1.0,
            "coupling_ratio",
            self.coupling_ratio,
            "must lie in (0, 1]",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanParams {
    /// Effective g-factor `g*` (sign kept, magnitude used).
    pub g_factor: f64,
    /// Field along z (T).
    pub b_field: f64,
}

impl ZeemanParams {
    /// InAs nanowire, `g* = −13`, `B_z = 1 T`.
    pub fn reference() -> Self {
        Self { g_factor: -13.0, b_field: 1.0 }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        require(self.b_field >= 0.0, "b_field", self.b_field, "must be >= 0")?;
        require(self.g_factor.is_finite(), "g_factor", self.g_factor, "must be finite")
    }

    /// `|g*| μ_B B_z` in joules.
    pub fn splitting_joules(&self) -> f64 {
        self.g_factor.abs() * BOHR_MAGNETON * self.b_field
    }
}

/// Every physical input of the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    /// Energy offset δ (rad/s).
    pub delta: f64,
    /// Interdot tunneling T (rad/s).
    pub tunneling: f64,
    /// Charge-resonator coupling g (rad/s).
    pub g_coupling: f64,
    /// Resonator energy decay rate κ (rad/s).
    pub kappa: f64,
    /// Drive detuning Δ from the resonator (rad/s).
    pub detuning: f64,
    /// Charge relaxation time T₁ (s).
    pub t1: f64,
    /// Bare charge dephasing time T_b (s).
    pub tb: f64,
    pub circuit: Option<CircuitParams>,
    pub zeeman: Option<ZeemanParams>,
}

impl DeviceParams {
    /// `(g, κ, 1/T₁)/2π = (120, 100, 1) MHz` at the balanced point with
    /// `2T = 2π×10 GHz`, `T_b = 1 ns`, the reference circuit and a 1 T field.
    pub fn reference() -> Self {
        Self {
            delta: 0.0,
            tunneling: TAU * 5e9,
            g_coupling: TAU * 120e6,
            kappa: TAU * 100e6,
            detuning: 0.0,
            t1: 1.0 / (TAU * 1e6),
            tb: 1e-9,
            circuit: Some(CircuitParams::reference()),
            zeeman: Some(ZeemanParams::reference()),
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        require(self.tunneling >= 0.0, "tunneling", self.tunneling, "must be >= 0")?;
        require(self.kappa > 0.0, "kappa", self.kappa, "must be > 0")?;
        require(self.t1 > 0.0, "t1", self.t1, "must be > 0")?;
        require(self.g_coupling >= 0.0, "g_coupling", self.g_coupling, "must be >= 0")?;
        require(self.delta.is_finite(), "delta", self.delta, "must be finite")?;
        require(self.detuning.is_finite(), "detuning", self.detuning, "must be finite")?;
        require(self.tb >= 0.0, "tb", self.tb, "must be >= 0")?;
        if let Some(c) = &self.circuit {
            c.validate()?;
        }
        if let Some(z) = &self.zeeman {
            z.validate()?;
        }
        Ok(())
    }

    /// Same device with a different coupling `g` (rad/s).
    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g_coupling: g, ..*self }
    }

    /// Charge gap `ω = √(δ² + 4T²)` at the configured operating point.
    pub fn charge_gap(&self) -> f64 {
        energy_gap(self.delta, self.tunneling)
    }

    pub fn s_parameter(&self) -> f64 {
        self.g_coupling * self.g_coupling * self.t1 / self.kappa
    }
}

/// Reduced double-dot Hamiltonian in the basis `{|0⟩, |a⟩}`:
/// `[[0, T], [T, −δ]]`.
pub fn dqd_hamiltonian(delta: f64, tunneling: f64) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, tunneling], &[tunneling, -delta]])
}

/// `√(δ² + 4T²)`.
pub fn energy_gap(delta: f64, tunneling: f64) -> f64 {
    delta.hypot(2.0 * tunneling)
}

/// `ϑ = ½ tan⁻¹(2T/δ)`, continued through δ = 0 (where it equals π/4) so
/// that `sin 2ϑ = 2T/√(δ²+4T²)` for either sign of δ.
pub fn mixing_angle(delta: f64, tunneling: f64) -> Result<f64, DeviceError> {
    if delta == 0.0 && tunneling == 0.0 {
        return Err(DeviceError::UndefinedAngle);
    }
    if delta == 0.0 {
        return Ok(FRAC_PI_4);
    }
    Ok(0.5 * (2.0 * tunneling).atan2(delta))
}

/// Charge-resonator coupling
/// `g = ½ e v (1/(L C₀)) √(π/(Z₀ ħ)) sin 2ϑ`, evaluated in SI.
///
/// Unit audit: `e/(L C₀)` is a voltage, `√(1/(Ω·J·s))` is `1/(V·s)`, so the
/// product is already in s⁻¹ and is returned as an angular frequency.
pub fn coupling_g(circuit: &CircuitParams, theta: f64) -> f64 {
    0.5 * ELECTRON_CHARGE * circuit.coupling_ratio / (circuit.length * circuit.cap_per_len)
        * (PI / (circuit.impedance * HBAR)).sqrt()
        * (2.0 * theta).sin()
}

/// Fundamental mode `ω₀ = π/(L Z₀ C₀)` (rad/s).
pub fn resonator_fundamental(circuit: &CircuitParams) -> f64 {
    PI / (circuit.length * circuit.impedance * circuit.cap_per_len)
}

/// `g (c σ₊ + c† σ₋)` on the charge ⊗ Fock space.
pub fn interaction_hamiltonian(g: f64, space: HilbertSpace) -> ComplexMatrix {
    let a = annihilation_op(space.fock_dim()).expect("validated dimension");
    let term = kron(&sigma_plus(), &a);
    (&term + &term.adjoint()).scale(C64::new(g, 0.0))
}

/// Cooperativity-like ratio `s = g² T₁ / κ`.
pub fn s_parameter(g: f64, t1: f64, kappa: f64) -> Result<f64, DeviceError> {
    require(g >= 0.0, "g", g, "must be >= 0")?;
    require(t1 > 0.0, "t1", t1, "must be > 0")?;
    require(kappa > 0.0, "kappa", kappa, "must be > 0")?;
    Ok(g * g * t1 / kappa)
}

/// `T₂ ~ ω T_b²` near the balanced point.
pub fn charge_dephasing_estimate(omega: f64, tb: f64) -> f64 {
    omega * tb * tb
}

/// Quasi-static hyperfine dephasing `T₂* = ħ / (|g*| μ_B ⟨ΔB⟩_rms)` (s).
/// A vanishing gradient gives `f64::INFINITY`.
pub fn spin_dephasing_estimate(g_factor: f64, gradient_rms: f64) -> f64 {
    let rate = g_factor.abs() * BOHR_MAGNETON * gradient_rms.abs() / HBAR;
    if rate == 0.0 { f64::INFINITY } else { 1.0 / rate }
}

/// μeV → rad/s.
pub fn energy_to_angular(energy_uev: f64) -> f64 {
    energy_uev * 1e-6 * ELECTRON_CHARGE / HBAR
}

/// rad/s → μeV.
pub fn angular_to_energy(omega: f64) -> f64 {
    omega * HBAR / (1e-6 * ELECTRON_CHARGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Measured quantity and the bound it was compared against.
    pub value: f64,
    pub bound: f64,
    /// `value / bound` for lower bounds, `bound − value` for tolerances.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn get(&self, name: &str) -> Option<&RegimeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_ZEEMAN: &str = "zeeman_gap";
pub const CHECK_S: &str = "s_much_greater_than_one";
pub const CHECK_PULSE: &str = "pulse_adiabatic";
pub const CHECK_RESONANCE: &str = "resonator_resonance";

fn skipped(name: &'static str, why: &str) -> RegimeCheck {
    RegimeCheck { name, status: CheckStatus::Skipped, value: f64::NAN, bound: f64::NAN, margin: f64::NAN, detail: why.into() }
}

fn at_least(value: f64, bound: f64) -> CheckStatus {
    // Relative slack so that e.g. τ = 10/κ evaluates as τκ = 10.
    if value >= bound * (1.0 - 1e-12) { CheckStatus::Pass } else { CheckStatus::Fail }
}

/// Checks the operating point against the assumptions of the gate protocol.
/// `pulse_duration` enables the adiabaticity check `τκ ≥ 10`.
pub fn validate_regime(params: &DeviceParams, pulse_duration: Option<f64>) -> RegimeReport {
    let omega = params.charge_gap();
    let mut checks = Vec::with_capacity(4);

    checks.push(match &params.zeeman {
        Some(z) => {
            let ez = angular_to_energy(z.splitting_joules() / HBAR);
            let hw = angular_to_energy(omega);
            RegimeCheck {
                name: CHECK_ZEEMAN,
                status: if ez > hw { CheckStatus::Pass } else { CheckStatus::Fail },
                value: ez,
                bound: hw,
                margin: ez / hw,
                detail: format!("|E_z| = {ez:.1} ueV vs hbar*omega = {hw:.2} ueV"),
            }
        }
        None => skipped(CHECK_ZEEMAN, "no Zeeman parameters"),
    });

    let s = params.s_parameter();
    checks.push(RegimeCheck {
        name: CHECK_S,
        status: at_least(s, MUCH_GREATER_THRESHOLD),
        value: s,
        bound: MUCH_GREATER_THRESHOLD,
        margin: s / MUCH_GREATER_THRESHOLD,
        detail: format!("s = g^2 T1 / kappa = {s:.3}"),
    });

    checks.push(match pulse_duration {
        Some(tau) => {
            let tk = tau * params.kappa;
            RegimeCheck {
                name: CHECK_PULSE,
                status: at_least(tk, MUCH_GREATER_THRESHOLD),
                value: tk,
                bound: MUCH_GREATER_THRESHOLD,
                margin: tk / MUCH_GREATER_THRESHOLD,
                detail: format!("tau * kappa = {tk:.3}"),
            }
        }
        None => skipped(CHECK_PULSE, "no pulse duration supplied"),
    });

    checks.push(match &params.circuit {
        Some(c) => {
            let w0 = resonator_fundamental(c);
            let rel = if omega > 0.0 { (w0 - omega).abs() / omega } else { f64::INFINITY };
            RegimeCheck {
                name: CHECK_RESONANCE,
                status: if rel <= RESONANCE_TOLERANCE { CheckStatus::Pass } else { CheckStatus::Fail },
                value: rel,
                bound: RESONANCE_TOLERANCE,
                margin: RESONANCE_TOLERANCE - rel,
                detail: format!(
                    "omega0/2pi = {:.4} GHz vs omega/2pi = {:.4} GHz",
                    w0 / TAU / 1e9,
                    omega / TAU / 1e9
                ),
            }
        }
        None => skipped(CHECK_RESONANCE, "no circuit parameters"),
    });

    RegimeReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::hermitian_eigenvalues;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn hamiltonian_and_gap_examples() {
        assert_eq!(dqd_hamiltonian(0.0, 0.0), ComplexMatrix::zeros(2, 2));
        let ev = hermitian_eigenvalues(&dqd_hamiltonian(0.0, 1.5));
        assert!((ev[0] + 1.5).abs() < 1e-14 && (ev[1] - 1.5).abs() < 1e-14);
        let ev = hermitian_eigenvalues(&dqd_hamiltonian(3.0, 2.0));
        assert!((ev[1] - ev[0] - 5.0).abs() < 1e-12);
        assert_eq!(energy_gap(3.0, 2.0), 5.0);
        assert_eq!(energy_gap(0.0, 7.0), 14.0);
    }

    #[test]
    fn gap_at_max_tunneling() {
        // 150 μeV tunneling at δ = 0: ω = 2T; ω/2π = 2·150e-6 eV / h ≈ 72.5 GHz.
        let t = energy_to_angular(150.0);
        let f = energy_gap(0.0, t) / TAU;
        let oracle = 2.0 * 150e-6 * ELECTRON_CHARGE / (TAU * HBAR);
        assert!(rel(f, oracle) < 1e-12);
        assert!((f / 1e9 - 72.5).abs() < 0.1);
    }

    #[test]
    fn mixing_angle_examples() {
        assert_eq!(mixing_angle(0.0, 1.0).unwrap(), FRAC_PI_4);
        assert!((mixing_angle(2.0, 1.0).unwrap() - PI / 8.0).abs() < 1e-15);
        let th = mixing_angle(100.0, 1.0).unwrap();
        assert!(((2.0 * th).sin() - 0.02).abs() < 1e-5);
        assert_eq!(mixing_angle(0.0, 0.0), Err(DeviceError::UndefinedAngle));
        // Decreasing in δ across the balanced point.
        let grid: Vec<f64> = (-20..=20).map(|k| mixing_angle(k as f64 * 0.5, 1.0).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn circuit_examples() {
        let c = CircuitParams::reference();
        assert!((c.cap_per_len - 3.3333e-11).abs() < 1e-14);
        assert!(rel(resonator_fundamental(&c), TAU * 10e9) < 1e-12);
        let long = CircuitParams { length: 2.0 * c.length, ..c };
        assert!(rel(resonator_fundamental(&long), 0.5 * resonator_fundamental(&c)) < 1e-12);

        let g = coupling_g(&c, FRAC_PI_4);
        let target = TAU * 120e6;
        assert!(g > target / 3.0 && g < target * 3.0, "g/2pi = {} MHz", g / TAU / 1e6);
        let half = CircuitParams { coupling_ratio: 0.1, ..c };
        assert!(rel(coupling_g(&half, FRAC_PI_4), 0.5 * g) < 1e-12);
        assert_eq!(coupling_g(&c, 0.0), 0.0);
    }

    #[test]
    fn interaction_hamiltonian_examples() {
        let space = HilbertSpace::new(4).unwrap();
        assert_eq!(interaction_hamiltonian(0.0, space), ComplexMatrix::zeros(8, 8));
        let h = interaction_hamiltonian(2.5, space);
        assert!(h.is_hermitian(0.0));
        let out = h.apply(&space.basis_vector(0, 1)).unwrap();
        let expected: Vec<C64> = space.basis_vector(1, 0).iter().map(|z| z * 2.5).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn s_parameter_examples() {
        let p = DeviceParams::reference();
        let s = s_parameter(p.g_coupling, p.t1, p.kappa).unwrap();
        assert!(rel(s, 144.0) < 1e-12);
        let s4 = s_parameter(2.0 * p.g_coupling, p.t1, p.kappa).unwrap();
        assert!(rel(s4, 4.0 * s) < 1e-12);
        assert!(s_parameter(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn regime_at_reference_defaults() {
        let p = DeviceParams::reference();
        let report = validate_regime(&p, Some(10.0 / p.kappa));
        assert!(report.all_passed(), "{report:#?}");
        let z = report.get(CHECK_ZEEMAN).unwrap();
        assert!((z.value - 752.5).abs() < 1.0, "E_z = {}", z.value);
        assert!((z.bound - 41.36).abs() < 0.05, "hbar omega = {}", z.bound);
        assert!((report.get(CHECK_S).unwrap().value - 144.0).abs() < 1e-9);
        assert_eq!(validate_regime(&p, Some(10.0 / p.kappa)), report);
    }

    #[test]
    fn regime_failures_and_skips() {
        let mut p = DeviceParams::reference();
        p.zeeman = Some(ZeemanParams { b_field: 0.0, ..ZeemanParams::reference() });
        p.circuit = None;
        let report = validate_regime(&p, None);
        assert_eq!(report.get(CHECK_ZEEMAN).unwrap().status, CheckStatus::Fail);
        assert_eq!(report.get(CHECK_PULSE).unwrap().status, CheckStatus::Skipped);
        assert_eq!(report.get(CHECK_RESONANCE).unwrap().status, CheckStatus::Skipped);
        let short = validate_regime(&DeviceParams::reference(), Some(5.0 / p.kappa));
        assert_eq!(short.get(CHECK_PULSE).unwrap().status, CheckStatus::Fail);
    }

    #[test]
    fn dephasing_estimates() {
        let w = TAU * 10e9;
        let t2 = charge_dephasing_estimate(w, 1e-9);
        assert!((t2 - 62.83e-9).abs() < 0.01e-9);
        assert!(t2 > 10e-9 && t2 < 100e-9);
        assert!(rel(charge_dephasing_estimate(w, 1e-8), 100.0 * t2) < 1e-12);
        assert!((charge_dephasing_estimate(w, 1e-6) - 62.83e-3).abs() < 0.01e-3);

        let grad = HBAR / (13.0 * BOHR_MAGNETON * 4e-9);
        let t2s = spin_dephasing_estimate(-13.0, grad);
        assert!(rel(t2s, 4e-9) < 1e-12);
        assert!(rel(spin_dephasing_estimate(-13.0, 0.5 * grad), 8e-9) < 1e-12);
        assert!(spin_dephasing_estimate(-13.0, 0.0).is_infinite());
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(energy_to_angular(0.0), 0.0);
        let f = energy_to_angular(41.36) / TAU;
        assert!((f / 1e9 - 10.0).abs() < 0.01);
        assert!((energy_to_angular(150.0) / TAU / 1e9 - 36.27).abs() < 0.01);
        assert!(rel(angular_to_energy(energy_to_angular(123.0)), 123.0) < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(DeviceParams::reference().validate().is_ok());
        let bad = DeviceParams { kappa: 0.0, ..DeviceParams::reference() };
        assert!(matches!(bad.validate(), Err(DeviceError::InvalidParameter { name: "kappa", .. })));
        let bad_v = CircuitParams { coupling_ratio: 1.5, ..CircuitParams::reference() };
        assert!(bad_v.validate().is_err());
    }
}

//! Gate fidelity from the per-state reflections, and the sweeps over photon
//! number and coupling strength.
//!
//! The input field is an even coherent state `N₋(|α⟩ − |−α⟩)`. Reflection
//! maps each coherent component of a state `|mn⟩` to `|α_mn f_out^mn⟩`, and
//! the fidelity compares that with the ideal `(−1)^{δ_{m1}δ_{n1}}|α f_in⟩`:
//!
//! `F = |(Σ_{mn≠11} e^{−½|α|²B⁻_mn} + e^{−½|α|²B⁺_11}) / 4|²`,
//! `B^∓ = (1−ε)² + (1−η) ∓ 2ξ√(1−η)(1−ε)`.
//!
//! Each term is the overlap of the ideal and actual coherent pulses, with the
//! interference between `|α⟩` and `|−α⟩` dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::csvfmt;
use crate::device::DeviceParams;
use crate::pulse::Pulse;
use crate::qmath::{C64, ZERO};
use crate::scattering::{scatter_all_states, Backend, BackendOptions, JointState, ReflectionResult, ScatterError};

/// Allowed excess of a computed fidelity above 1.
pub const FIDELITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("state {0} missing from the reflection results")]
    MissingState(JointState),
    #[error("results mix backends {0} and {1}")]
    MixedBackends(Backend, Backend),
    #[error("{quantity} = {value} for state {state} is outside [0, 1]")]
    OutOfRange { quantity: &'static str, state: JointState, value: f64 },
    #[error("state vector norm {0} is not 1")]
    NotNormalized(f64),
    #[error("coupling fraction {0} outside (-1, 1]")]
    CouplingFraction(f64),
    #[error("invalid amplitude {0}")]
    Amplitude(f64),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
}

/// Two-qubit state over `|00⟩, |01⟩, |10⟩, |11⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [C64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [C64; 4]) -> Result<Self, GateError> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(GateError::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    pub fn basis(state: JointState) -> Self {
        let mut amps = [ZERO; 4];
        amps[state as usize] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn amplitude(&self, state: JointState) -> C64 {
        self.amps[state as usize]
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amps
    }
}

/// The ideal controlled phase flip `e^{iπ|11⟩⟨11|}`.
pub fn cpf_ideal(psi: &TwoQubitState) -> TwoQubitState {
    let mut amps = psi.amps;
    amps[JointState::S11 as usize] = -amps[JointState::S11 as usize];
    TwoQubitState { amps }
}

/// The three numbers each state contributes to the fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTerms {
    /// Real reflection coefficient (see [`ReflectionResult::xi_for_fidelity`]).
    pub xi: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl StateTerms {
    pub const IDEAL_ZERO: StateTerms = StateTerms { xi: 1.0, epsilon: 0.0, eta: 0.0 };
    pub const IDEAL_ONE: StateTerms = StateTerms { xi: -1.0, epsilon: 0.0, eta: 0.0 };

    pub fn ideal(state: JointState) -> Self {
        if state == JointState::S11 { Self::IDEAL_ONE } else { Self::IDEAL_ZERO }
    }

    pub fn from_result(r: &ReflectionResult) -> Self {
        Self { xi: r.xi_for_fidelity(), epsilon: r.epsilon, eta: r.eta }
    }

    /// Squared distance (per `|α|²`) between the ideal and actual pulse.
    pub fn bracket(&self, state: JointState) -> f64 {
        let shape = 1.0 - self.epsilon;
        let kept = (1.0 - self.eta).sqrt();
        shape * shape + kept * kept - 2.0 * state.ideal_sign() * self.xi * kept * shape
    }

    fn check(&self, state: JointState) -> Result<(), GateError> {
        for (quantity, value) in [("epsilon", self.epsilon), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(GateError::OutOfRange { quantity, state, value });
            }
        }
        Ok(())
    }
}

/// Fidelity from per-state terms at input mean amplitude `|α|²`.
pub fn fidelity_from_terms(alpha_abs2: f64, terms: &BTreeMap<JointState, StateTerms>) -> Result<f64, GateError> {
    if !(alpha_abs2 >= 0.0 && alpha_abs2.is_finite()) {
        return Err(GateError::Amplitude(alpha_abs2));
    }
    let mut sum = 0.0;
    for st in JointState::ALL {
        let t = terms.get(&st).ok_or(GateError::MissingState(st))?;
        t.check(st)?;
        sum += (-0.5 * alpha_abs2 * t.bracket(st)).exp();
    }
    Ok((sum / 4.0).powi(2))
}

/// Per-state reflections for one input amplitude, all from one backend.
#[derive(Debug, Clone)]
pub struct GateInputs {
    alpha: C64,
    results: BTreeMap<JointState, ReflectionResult>,
}

impl GateInputs {
    pub fn new(alpha: C64, results: BTreeMap<JointState, ReflectionResult>) -> Result<Self, GateError> {
        for st in JointState::ALL {
            if !results.contains_key(&st) {
                return Err(GateError::MissingState(st));
            }
        }
        let first = results[&JointState::S00].backend;
        if let Some(other) = results.values().map(|r| r.backend).find(|b| *b != first) {
            return Err(GateError::MixedBackends(first, other));
        }
        Ok(Self { alpha, results })
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn results(&self) -> &BTreeMap<JointState, ReflectionResult> {
        &self.results
    }

    pub fn terms(&self) -> BTreeMap<JointState, StateTerms> {
        self.results.iter().map(|(st, r)| (*st, StateTerms::from_result(r))).collect()
    }
}

pub fn gate_fidelity(inputs: &GateInputs) -> Result<f64, GateError> {
    fidelity_from_terms(inputs.alpha.norm_sqr(), &inputs.terms())
}

/// Global loss `1 − min |α_mn/α|²`, the largest per-state η.
pub fn photon_loss_eta_global(inputs: &GateInputs) -> f64 {
    inputs.results.values().map(|r| r.eta).fold(0.0, f64::max)
}

/// Exact mean photon number `|α|² coth |α|²` of `N₋(|α⟩ − |−α⟩)`; 1 at `α = 0`.
pub fn mean_photon_exact(alpha_abs2: f64) -> f64 {
    if alpha_abs2 < 1e-8 {
        // Series of x coth x.
        1.0 + alpha_abs2 * alpha_abs2 / 3.0
    } else {
        alpha_abs2 / alpha_abs2.tanh()
    }
}

/// Gate duration estimate: the pulse length.
pub fn gate_time_estimate(tau: f64) -> f64 {
    tau
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityPoint {
    /// `|α|²` or `δg/g`, depending on the sweep.
    pub x_value: f64,
    pub fidelity: f64,
    pub per_state: BTreeMap<JointState, StateTerms>,
    pub mean_photon_exact: f64,
}

impl FidelityPoint {
    pub fn csv_header() -> &'static str {
        "x_value,fidelity,eps_00,eps_01,eps_11,eta_00,eta_01,eta_11,xi_00,xi_01,xi_11,mean_photon_exact"
    }

    pub fn csv_row(&self) -> String {
        let t = |st: JointState| self.per_state[&st];
        let (a, b, c) = (t(JointState::S00), t(JointState::S01), t(JointState::S11));
        csvfmt::row(&[
            self.x_value,
            self.fidelity,
            a.epsilon,
            b.epsilon,
            c.epsilon,
            a.eta,
            b.eta,
            c.eta,
            a.xi,
            b.xi,
            c.xi,
            self.mean_photon_exact,
        ])
    }
}

pub fn write_sweep_csv<W: Write>(points: &[FidelityPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", FidelityPoint::csv_header())?;
    for p in points {
        writeln!(w, "{}", p.csv_row())?;
    }
    Ok(())
}

fn point(x_value: f64, alpha: C64, results: BTreeMap<JointState, ReflectionResult>) -> Result<FidelityPoint, GateError> {
    let inputs = GateInputs::new(alpha, results)?;
    Ok(FidelityPoint {
        x_value,
        fidelity: gate_fidelity(&inputs)?,
        per_state: inputs.terms(),
        mean_photon_exact: mean_photon_exact(alpha.norm_sqr()),
    })
}

/// Backends whose ε, η and ξ do not depend on the amplitude.
fn is_linear(backend: Backend) -> bool {
    matches!(backend, Backend::Analytic | Backend::Filter)
}

fn with_alpha(results: &BTreeMap<JointState, ReflectionResult>, alpha: C64) -> BTreeMap<JointState, ReflectionResult> {
    results
        .iter()
        .map(|(st, r)| {
            let ratio = if r.alpha_in == ZERO { r.xi } else { r.alpha_out / r.alpha_in };
            (*st, ReflectionResult { alpha_in: alpha, alpha_out: ratio * alpha, ..r.clone() })
        })
        .collect()
}

/// Fidelity against `|α|²` for real amplitudes `alphas`.
///
/// Linear backends are evaluated once and rescaled. The nonlinear backends
/// run per amplitude; at `α = 0`, where they have nothing to propagate, the
/// filter supplies the per-state terms (the fidelity is 1 regardless).
pub fn sweep_photon_number(
    params: &DeviceParams,
    f_in: &Pulse,
    alphas: &[f64],
    backend: Backend,
    options: BackendOptions,
) -> Result<Vec<FidelityPoint>, GateError> {
    for &a in alphas {
        if !a.is_finite() {
            return Err(GateError::Amplitude(a));
        }
    }
    let unit = C64::new(1.0, 0.0);
    let linear = if is_linear(backend) {
        Some(scatter_all_states(f_in, unit, params, backend, options)?)
    } else if alphas.contains(&0.0) {
        Some(scatter_all_states(f_in, unit, params, Backend::Filter, options)?)
    } else {
        None
    };
    alphas
        .par_iter()
        .map(|&a| {
            let alpha = C64::new(a, 0.0);
            let results = match &linear {
                Some(base) if is_linear(backend) || a == 0.0 => with_alpha(base, alpha),
                _ => scatter_all_states(f_in, alpha, params, backend, options)?,
            };
            point(a * a, alpha, results)
        })
        .collect()
}

/// Fidelity at amplitude `alpha` with the coupling scaled to `g(1 + x)`.
pub fn sweep_coupling_variation(
    params: &DeviceParams,
    f_in: &Pulse,
    dg_fractions: &[f64],
    alpha: f64,
    backend: Backend,
    options: BackendOptions,
) -> Result<Vec<FidelityPoint>, GateError> {
    for &x in dg_fractions {
        if !(x > -1.0 && x <= 1.0) {
            return Err(GateError::CouplingFraction(x));
        }
    }
    dg_fractions
        .par_iter()
        .map(|&x| {
            let shifted = params.with_coupling(params.g_coupling * (1.0 + x));
            let pts = sweep_photon_number(&shifted, f_in, &[alpha], backend, options)?;
            let mut p = pts.into_iter().next().expect("one amplitude");
            p.x_value = x;
            Ok(p)
        })
        .collect()
}

/// Minimal SVG line chart of fidelity against `x_value`.
pub fn svg_plot(points: &[FidelityPoint], title: &str, x_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let xs: Vec<f64> = points.iter().map(|p| p.x_value).collect();
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (x_min, x_max) = if x_max > x_min { (x_min, x_max) } else { (x_min - 1.0, x_min + 1.0) };
    let y_min = points.iter().map(|p| p.fidelity).fold(1.0, f64::min).min(0.9);
    let sx = |x: f64| PAD + (x - x_min) / (x_max - x_min) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_min) / (1.0 - y_min) * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = PAD,
        t = PAD,
        b = H - PAD,
        r = W - PAD
    );
    let path: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x_value), sy(p.fidelity))).collect();
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" "));
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 14.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">fidelity</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor_x, anchor_y) in [(x_min, sx(x_min), H - PAD + 18.0), (x_max, sx(x_max), H - PAD + 18.0)] {
        let _ = writeln!(svg, r#"<text x="{anchor_x:.2}" y="{anchor_y:.2}" text-anchor="middle" font-size="11">{v:.3}</text>"#);
    }
    for v in [y_min, 1.0] {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{v:.3}</text>"#, PAD - 6.0, sy(v) + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_terms() -> BTreeMap<JointState, StateTerms> {
        JointState::ALL.iter().map(|&st| (st, StateTerms::ideal(st))).collect()
    }

    #[test]
    fn cpf_flips_only_eleven() {
        let one = TwoQubitState::basis(JointState::S11);
        assert_eq!(cpf_ideal(&one).amplitude(JointState::S11), C64::new(-1.0, 0.0));
        let zero = TwoQubitState::basis(JointState::S00);
        assert_eq!(cpf_ideal(&zero), zero);
        let h = 0.5;
        let psi = TwoQubitState::new([C64::new(h, 0.0), C64::new(0.0, h), C64::new(-h, 0.0), C64::new(h, 0.0)]).unwrap();
        assert_eq!(cpf_ideal(&cpf_ideal(&psi)), psi);
        assert!(TwoQubitState::new([C64::new(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn ideal_and_vacuum_fidelity() {
        for a2 in [0.0, 1.0, 400.0] {
            assert_eq!(fidelity_from_terms(a2, &ideal_terms()).unwrap(), 1.0);
        }
        let mut bad = ideal_terms();
        bad.insert(JointState::S01, StateTerms { xi: 0.3, epsilon: 0.4, eta: 0.5 });
        assert_eq!(fidelity_from_terms(0.0, &bad).unwrap(), 1.0);
        assert!(fidelity_from_terms(1.0, &bad).unwrap() < 1.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut t = ideal_terms();
        t.insert(JointState::S00, StateTerms { xi: 1.0, epsilon: 1.5, eta: 0.0 });
        assert!(matches!(fidelity_from_terms(1.0, &t), Err(GateError::OutOfRange { quantity: "epsilon", .. })));
        t.insert(JointState::S00, StateTerms { xi: 1.0, epsilon: 0.0, eta: -0.1 });
        assert!(matches!(fidelity_from_terms(1.0, &t), Err(GateError::OutOfRange { quantity: "eta", .. })));
        t.insert(JointState::S00, StateTerms::IDEAL_ZERO);
        t.remove(&JointState::S10);
        assert_eq!(fidelity_from_terms(1.0, &t), Err(GateError::MissingState(JointState::S10)));
    }

    #[test]
    fn mean_photon_number_of_cat() {
        assert_eq!(mean_photon_exact(0.0), 1.0);
        assert!((mean_photon_exact(1e-9) - 1.0).abs() < 1e-15);
        assert!((mean_photon_exact(1.0) - 1.0 / 1f64.tanh()).abs() < 1e-15);
        assert!((mean_photon_exact(400.0) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn gate_time_is_pulse_length() {
        let kappa = 2.0 * std::f64::consts::PI * 1e8;
        assert!((gate_time_estimate(10.0 / kappa) - 15.915e-9).abs() < 1e-12);
        assert_eq!(gate_time_estimate(2.0), 2.0 * gate_time_estimate(1.0));
    }

    #[test]
    fn svg_is_well_formed() {
        let p = |x: f64, f: f64| FidelityPoint { x_value: x, fidelity: f, per_state: ideal_terms(), mean_photon_exact: 1.0 };
        let svg = svg_plot(&[p(0.0, 1.0), p(4.0, 0.95)], "F <a&b>", "|alpha|^2");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("F &lt;a&amp;b&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}

//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use cpf_gate::device::DeviceParams;
use cpf_gate::pulse::{gaussian_pulse, Pulse, TimeGrid};
use cpf_gate::qmath::C64;

pub fn reference_pulse(params: &DeviceParams, tau_kappa: f64) -> Pulse {
    let tau = tau_kappa / params.kappa;
    gaussian_pulse(tau, TimeGrid::for_pulse(tau, params.kappa).unwrap()).unwrap()
}

/// Fock amplitudes of `|β⟩`, built by the recursion `c_{k+1} = c_k β/√(k+1)`.
pub fn coherent(beta: f64, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    let mut c = (-0.5 * beta * beta).exp();
    for k in 0..n {
        v.push(c);
        c *= beta / ((k + 1) as f64).sqrt();
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-mode (signal, loss) state as a sum of product branches.
struct TwoMode {
    branches: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl TwoMode {
    fn inner(&self, other: &TwoMode) -> f64 {
        let mut s = 0.0;
        for (wa, sa, la) in &self.branches {
            for (wb, sb, lb) in &other.branches {
                s += wa * wb * dot(sa, sb) * dot(la, lb);
            }
        }
        s
    }

    fn normalized(self) -> TwoMode {
        let n = self.inner(&self).sqrt();
        TwoMode { branches: self.branches.into_iter().map(|(w, s, l)| (w / n, s, l)).collect() }
    }
}

/// Signal amplitude `ξα` with the remaining `√(1−ξ²)α` in a loss mode.
fn reflected(alpha: f64, xi: f64, n: usize, cat: bool) -> TwoMode {
    let lost = (1.0 - xi * xi).max(0.0).sqrt() * alpha;
    let mut branches = vec![(1.0, coherent(xi * alpha, n), coherent(lost, n))];
    if cat {
        branches.push((-1.0, coherent(-xi * alpha, n), coherent(-lost, n)));
    }
    TwoMode { branches }.normalized()
}

/// `|⟨Φ_ID|Φ_out⟩|²` for the equal superposition of the four joint states,
/// with real reflection coefficients `xis` (order 00, 01, 10, 11) on a
/// truncated Fock space of `n` levels per mode.
///
/// With `cat = false` each state carries one coherent pulse `|α⟩`; with
/// `cat = true` it carries `N₋(|α⟩ − |−α⟩)`.
pub fn brute_force_fidelity(alpha: f64, xis: [f64; 4], n: usize, cat: bool) -> f64 {
    let signs = [1.0, 1.0, 1.0, -1.0];
    let mut amp = 0.0;
    for (xi, s) in xis.iter().zip(signs) {
        let ideal = reflected(s * alpha, 1.0, n, cat);
        let actual = reflected(alpha, *xi, n, cat);
        amp += ideal.inner(&actual) / 4.0;
    }
    amp * amp
}

pub fn rms_relative_to_peak(a: &[C64], b: &[C64]) -> f64 {
    let peak = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ms = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64;
    ms.sqrt() / peak
}

//! Simulation of a resonator-assisted controlled-phase-flip (CPF) gate between
//! two singlet-triplet qubits in nanowire double quantum dots.
//!
//! A pulse is reflected off a lossy stripline resonator whose response depends
//! on the charge state of the dots. The crate computes that reflection with
//! four backends (closed form, linear filter, mean-field, Lindblad master
//! equation) and turns the per-state outcomes into a gate fidelity.
//!
//! The guide in `book/` walks through the model chapter by chapter; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod csvfmt;
pub mod device;
pub mod pulse;
pub mod qmath;
pub(crate) mod ode;
pub mod scattering;
pub mod gate;
pub mod cli;

// The guide's listings run as doc-tests, one module per chapter so a failure
// points at its chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/levels.md")]
    mod levels {}
    #[doc = include_str!("../../../book/src/pulses.md")]
    mod pulses {}
    #[doc = include_str!("../../../book/src/scattering.md")]
    mod scattering {}
    #[doc = include_str!("../../../book/src/fidelity.md")]
    mod fidelity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

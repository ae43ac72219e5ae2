//! Modelling toolkit for spatial-to-spectral harmonic-modulated arrays (SHAs).
//!
//! An SHA mixes each antenna channel with a periodic harmonic-modulation LO
//! (HM-LO) `a(t)`. Every harmonic `m` of the HM-LO translates the received
//! band to `f_rf + m*f_hm`, and the per-channel delays/phase shifts give each
//! translated copy its own progressive phase, hence its own beam direction.
//!
//! The crate is split by concern:
//!
//! * [`waveform`]: HM-LO waveforms as finite complex Fourier series.
//! * [`architecture`]: TMA / HMA / HM-JPTA configurations, phase-frequency
//!   profiles, beam maps and bandwidth rules.
//! * [`analysis`]: closed-form array factor, signal/noise gain, array gain and
//!   harmonic loss.
//! * [`dof`]: degrees-of-freedom matrices, rank, and the inverse steering
//!   solver.
//! * [`sim`]: a brute-force time-domain simulator used as an independent
//!   oracle for the analytic results.
//! * [`cli`]: the `sha` command-line front end.

pub mod analysis;
pub mod architecture;
pub mod cli;
pub mod dof;
mod error;
pub mod io;
pub mod sim;
pub mod waveform;

pub use error::{Error, Result};

pub use analysis::{array_factor, compare_waveforms, gain_report, GainReport, PatternSlice};
pub use architecture::{
    beam_map, phase_profile, required_bandwidths, validate_bandwidth, ArchitectureConfig,
    ArchitectureKind, BeamMap, ChannelControls, PhaseProfile,
};
pub use dof::{
    build_dof_matrix, dof_rank, elementary_transform, solve_steering, verify_steering, DofMatrix,
    SteeringProblem, SteeringSolution,
};
pub use sim::{SimParams, Source, SpectrumResult};
pub use waveform::{ChannelCoefficients, HarmonicWaveform};

/// Wrap a phase into `(-pi, pi]`.
pub fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let wrapped = phase - TAU * ((phase - PI) / TAU).ceil();
    // ceil() can land on -pi for inputs a hair above an odd multiple of pi.
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Integer sign with `sgn(0) = 0`.
pub fn sgn(m: i32) -> i32 {
    m.signum()
}

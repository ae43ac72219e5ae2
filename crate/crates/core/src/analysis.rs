//! Closed-form per-harmonic array factor, gains and harmonic loss.
//!
//! With lossless combining and phase-only channel weights the output at
//! harmonic `m` carries
//!
//! * signal power gain `G_sig,m = N^2 |beta_m|^2` (coherent in voltage),
//! * noise power gain `G_noise,m = N |beta_m|^2` (uncorrelated, adds in power),
//! * array gain `AG_m = G_sig,m / G_noise,m = N`, independent of the waveform.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::architecture::{harmonic_weights, ArchitectureConfig, ChannelControls};
use crate::error::{invalid, Result};
use crate::waveform::{default_square_m_max, CombPhases, HarmonicWaveform, SquareWave};

/// Default pattern grid spacing in degrees.
pub const DEFAULT_GRID_STEP_DEG: f64 = 0.05;

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `N^2 |beta_m|^2`.
pub fn signal_gain(cfg: &ArchitectureConfig, m: i32) -> f64 {
    let n = cfg.n_channels() as f64;
    n * n * cfg.waveform().coeff(m).norm_sqr()
}

/// `N |beta_m|^2`.
pub fn noise_gain(cfg: &ArchitectureConfig, m: i32) -> f64 {
    cfg.n_channels() as f64 * cfg.waveform().coeff(m).norm_sqr()
}

/// Uniform grid over `[-90, 90]` degrees, endpoints included.
pub fn theta_grid(step_deg: f64) -> Vec<f64> {
    let steps = (180.0 / step_deg).round().max(1.0) as usize;
    (0..=steps).map(|k| -90.0 + 180.0 * k as f64 / steps as f64).collect()
}

/// Array-factor magnitude over an angle grid for one harmonic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSlice {
    pub m: i32,
    pub theta_deg: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Grid point with the largest magnitude (first one on ties).
    pub peak_theta_deg: f64,
    /// Peak refined by a parabola through the grid maximum and its neighbours.
    pub refined_peak_theta_deg: f64,
}

impl PatternSlice {
    pub fn peak_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

/// `AF_m(theta) = |sum_n w_{n,m} exp(-j*n*2*pi*d*sin(theta))|`.
pub fn array_factor(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    m: i32,
    theta_grid_deg: &[f64],
) -> Result<PatternSlice> {
    if theta_grid_deg.is_empty() {
        return Err(invalid("theta grid is empty"));
    }
    if let Some(bad) = theta_grid_deg.iter().find(|t| !(t.abs() <= 90.0)) {
        return Err(invalid(format!("theta {bad} deg is outside [-90, 90]")));
    }
    let weights = harmonic_weights(cfg, ctl, m)?;
    let d = cfg.spacing_d();
    let magnitude: Vec<f64> = theta_grid_deg
        .iter()
        .map(|t| {
            let psi = TAU * d * t.to_radians().sin();
            weights
                .iter()
                .enumerate()
                .map(|(n, w)| w * Complex64::from_polar(1.0, -(n as f64) * psi))
                .sum::<Complex64>()
                .norm()
        })
        .collect();

    let mut peak = 0;
    for (i, &v) in magnitude.iter().enumerate() {
        if v > magnitude[peak] {
            peak = i;
        }
    }
    let refined = if peak > 0 && peak + 1 < magnitude.len() {
        let (y0, y1, y2) = (magnitude[peak - 1], magnitude[peak], magnitude[peak + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        let step = 0.5 * (theta_grid_deg[peak + 1] - theta_grid_deg[peak - 1]);
        if denom < 0.0 {
            theta_grid_deg[peak] + 0.5 * (y0 - y2) / denom * step
        } else {
            theta_grid_deg[peak]
        }
    } else {
        theta_grid_deg[peak]
    };

    Ok(PatternSlice {
        m,
        theta_deg: theta_grid_deg.to_vec(),
        magnitude,
        peak_theta_deg: theta_grid_deg[peak],
        refined_peak_theta_deg: refined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainEntry {
    pub m: i32,
    pub f_m_hz: f64,
    pub g_sig: f64,
    pub g_noise: f64,
    /// `None` when `beta_m = 0`: there is no beam to speak of.
    pub ag: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub n_channels: usize,
    pub entries: Vec<GainEntry>,
    /// Fraction of LO power in harmonics outside the used set.
    pub harmonic_loss: f64,
}

impl GainReport {
    pub fn get(&self, m: i32) -> Option<&GainEntry> {
        self.entries.iter().find(|e| e.m == m)
    }
}

/// Closed-form gains for the used harmonics, lossless combining.
pub fn gain_report(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    used_harmonics: &[i32],
) -> Result<GainReport> {
    gain_report_with_loss(cfg, ctl, used_harmonics, 0.0)
}

/// As [`gain_report`], with a uniform combining loss applied to both signal
/// and noise gains.
pub fn gain_report_with_loss(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    used_harmonics: &[i32],
    combining_loss_db: f64,
) -> Result<GainReport> {
    // Gains do not depend on the controls, but they must still be legal.
    cfg.effective_controls(ctl)?;
    if used_harmonics.is_empty() {
        return Err(invalid("used harmonic set is empty"));
    }
    if !(combining_loss_db >= 0.0 && combining_loss_db.is_finite()) {
        return Err(invalid(format!(
            "combining loss must be a non-negative dB value, got {combining_loss_db}"
        )));
    }
    let mut used = used_harmonics.to_vec();
    used.sort_unstable();
    used.dedup();

    let loss = from_db(-combining_loss_db);
    let w = cfg.waveform();
    let entries = used
        .iter()
        .map(|&m| {
            let g_sig = signal_gain(cfg, m) * loss;
            let g_noise = noise_gain(cfg, m) * loss;
            GainEntry {
                m,
                f_m_hz: cfg.f_rf() + m as f64 * cfg.f_hm(),
                g_sig,
                g_noise,
                ag: w.is_occupied(m).then(|| g_sig / g_noise),
            }
        })
        .collect();
    let used_power: f64 = used.iter().map(|&m| w.coeff(m).norm_sqr()).sum();
    let harmonic_loss = (1.0 - used_power / w.total_power()).clamp(0.0, 1.0);
    Ok(GainReport {
        n_channels: cfg.n_channels(),
        entries,
        harmonic_loss,
    })
}

/// The `K` harmonics a `K`-beam comb occupies: symmetric for odd `K`,
/// `{-K/2, ..., K/2 - 1}` for even `K`.
pub fn comb_harmonics(k: usize) -> Vec<i32> {
    let k = k as i32;
    let lo = -(k / 2);
    (lo..lo + k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub k: usize,
    pub g_square_m0: f64,
    pub g_comb_m0: f64,
    /// `(m, G_sig,m)` for the square LO over the comb's harmonics.
    pub square_curve: Vec<(i32, f64)>,
    pub comb_curve: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub n_channels: usize,
    pub fixed_power: f64,
    pub rows: Vec<CompareRow>,
}

/// Square (duty `1/N`) versus comb (`K` beams) at equal LO power.
///
/// The square wave is scaled so its untruncated power `A^2/N` equals
/// `fixed_power`, which puts `G_sig,0` at exactly `N` for unit power.
pub fn compare_waveforms(n_channels: usize, k_values: &[usize], fixed_power: f64) -> Result<Comparison> {
    if n_channels < 2 {
        return Err(invalid("compare needs at least 2 channels"));
    }
    if !(fixed_power > 0.0 && fixed_power.is_finite()) {
        return Err(invalid(format!("fixed power must be positive, got {fixed_power}")));
    }
    if let Some(bad) = k_values.iter().find(|&&k| k < 1) {
        return Err(invalid(format!("K must be at least 1, got {bad}")));
    }
    let f_hm = 1.0;
    let n = n_channels as f64;
    let duty = 1.0 / n;
    let k_max = k_values.iter().copied().max().unwrap_or(1);
    let m_max = default_square_m_max(duty).max(k_max as u32 / 2 + 1);
    let square = SquareWave::new(duty, (fixed_power / duty).sqrt(), m_max, f_hm).build()?;
    let gain = |w: &HarmonicWaveform, m: i32| n * n * w.coeff(m).norm_sqr();

    let rows = k_values
        .iter()
        .map(|&k| {
            let ms = comb_harmonics(k);
            let comb = HarmonicWaveform::comb(&ms, fixed_power, CombPhases::Zero, f_hm)?;
            Ok(CompareRow {
                k,
                g_square_m0: gain(&square, 0),
                g_comb_m0: gain(&comb, 0),
                square_curve: ms.iter().map(|&m| (m, gain(&square, m))).collect(),
                comb_curve: ms.iter().map(|&m| (m, gain(&comb, m))).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        n_channels,
        fixed_power,
        rows,
    })
}

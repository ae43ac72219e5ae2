//! SHA architectures and their phase-frequency behaviour.
//!
//! Sign convention: a positive `d_tau` gives a positive progressive phase at
//! positive harmonics, `dphi(f_m) = 2*pi*m*f_hm*d_tau + ...`, and channel `n`
//! is weighted by `exp(+j*n*dphi(f_m))`. A plane wave from `theta` reaches
//! channel `n` with phase `exp(-j*n*2*pi*d*sin(theta))`, so the beam at
//! harmonic `m` points where `2*pi*d*sin(theta) = dphi(f_m)` (wrapped).
//! In time-delay terms the LO of channel `n` is advanced by `n*d_tau`.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{invalid, Error, Result};
use crate::waveform::{ChannelCoefficients, HarmonicWaveform};
use crate::{sgn, wrap_phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitectureKind {
    /// Time-modulated array: duty-1/N square LO, fixed delay `T_hm/N`.
    Tma,
    /// Harmonic-modulated array: arbitrary LO, tunable delay.
    Hma,
    /// HM joint phase-time array with an RF phase shifter.
    #[serde(rename = "hmjpta2")]
    HmJpta2,
    /// HM-JPTA with RF and LO phase shifters and the delay at the mixer output.
    #[serde(rename = "hmjpta3")]
    HmJpta3,
}

impl ArchitectureKind {
    /// Number of independently tunable controls.
    pub fn dof_count(self) -> usize {
        match self {
            Self::Tma => 0,
            Self::Hma => 1,
            Self::HmJpta2 => 2,
            Self::HmJpta3 => 3,
        }
    }

    pub fn all() -> [Self; 4] {
        [Self::Tma, Self::Hma, Self::HmJpta2, Self::HmJpta3]
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tma => "TMA",
            Self::Hma => "HMA",
            Self::HmJpta2 => "HM-JPTA-2",
            Self::HmJpta3 => "HM-JPTA-3",
        })
    }
}

impl std::str::FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "tma" => Ok(Self::Tma),
            "hma" => Ok(Self::Hma),
            "hmjpta2" => Ok(Self::HmJpta2),
            "hmjpta3" => Ok(Self::HmJpta3),
            _ => Err(invalid(format!("unknown architecture '{s}'"))),
        }
    }
}

/// Progressive (channel-to-channel) control increments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelControls {
    #[serde(default)]
    pub d_tau_s: f64,
    #[serde(default)]
    pub d_phi_rf_rad: f64,
    #[serde(default)]
    pub d_phi_lo_rad: f64,
}

impl ChannelControls {
    pub fn delay(d_tau_s: f64) -> Self {
        Self {
            d_tau_s,
            ..Self::default()
        }
    }

    pub fn new(d_tau_s: f64, d_phi_rf_rad: f64, d_phi_lo_rad: f64) -> Self {
        Self {
            d_tau_s,
            d_phi_rf_rad,
            d_phi_lo_rad,
        }
    }

    /// Reject controls the architecture has no hardware for.
    pub fn validate(&self, kind: ArchitectureKind) -> Result<()> {
        for v in [self.d_tau_s, self.d_phi_rf_rad, self.d_phi_lo_rad] {
            if !v.is_finite() {
                return Err(Error::InvalidControl {
                    kind: kind.to_string(),
                    detail: "controls must be finite".into(),
                });
            }
        }
        let unsupported: &[(&str, f64)] = match kind {
            ArchitectureKind::Tma => &[
                ("d_tau_s (fixed at T_hm/N)", self.d_tau_s),
                ("d_phi_rf_rad", self.d_phi_rf_rad),
                ("d_phi_lo_rad", self.d_phi_lo_rad),
            ],
            ArchitectureKind::Hma => &[
                ("d_phi_rf_rad", self.d_phi_rf_rad),
                ("d_phi_lo_rad", self.d_phi_lo_rad),
            ],
            ArchitectureKind::HmJpta2 => &[("d_phi_lo_rad", self.d_phi_lo_rad)],
            ArchitectureKind::HmJpta3 => &[],
        };
        match unsupported.iter().find(|(_, v)| *v != 0.0) {
            Some((name, v)) => Err(Error::InvalidControl {
                kind: kind.to_string(),
                detail: format!("{name} = {v} is not supported"),
            }),
            None => Ok(()),
        }
    }
}

/// Array geometry, architecture kind and HM-LO waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArchitectureJson", into = "ArchitectureJson")]
pub struct ArchitectureConfig {
    kind: ArchitectureKind,
    n_channels: usize,
    spacing_d: f64,
    f_rf: f64,
    f_bw: f64,
    f_tr: f64,
    waveform: HarmonicWaveform,
}

impl ArchitectureConfig {
    /// `spacing_d` is in carrier wavelengths (0.5 for half-wavelength).
    pub fn new(
        kind: ArchitectureKind,
        n_channels: usize,
        spacing_d: f64,
        f_rf: f64,
        waveform: HarmonicWaveform,
    ) -> Result<Self> {
        Self::with_all(kind, n_channels, spacing_d, f_rf, 0.0, 0.0, waveform)
    }

    /// A TMA with a unit-amplitude duty-1/N square LO at default truncation.
    pub fn tma(n_channels: usize, f_hm: f64, f_rf: f64) -> Result<Self> {
        if n_channels < 2 {
            return Err(invalid("n_channels must be at least 2"));
        }
        let duty = 1.0 / n_channels as f64;
        let w = HarmonicWaveform::square(
            duty,
            1.0,
            crate::waveform::default_square_m_max(duty),
            f_hm,
        )?;
        Self::new(ArchitectureKind::Tma, n_channels, 0.5, f_rf, w)
    }

    pub fn with_all(
        kind: ArchitectureKind,
        n_channels: usize,
        spacing_d: f64,
        f_rf: f64,
        f_bw: f64,
        f_tr: f64,
        waveform: HarmonicWaveform,
    ) -> Result<Self> {
        if n_channels < 2 {
            return Err(invalid(format!("n_channels must be at least 2, got {n_channels}")));
        }
        if !(spacing_d > 0.0 && spacing_d.is_finite()) {
            return Err(invalid(format!("spacing_d must be positive, got {spacing_d}")));
        }
        if !(f_rf > 0.0 && f_rf.is_finite()) {
            return Err(invalid(format!("f_rf must be positive, got {f_rf}")));
        }
        if !(f_bw >= 0.0 && f_bw.is_finite()) {
            return Err(invalid(format!("f_bw must be non-negative, got {f_bw}")));
        }
        if !(f_tr >= 0.0 && f_tr.is_finite()) {
            return Err(invalid(format!("f_tr must be non-negative, got {f_tr}")));
        }
        if kind == ArchitectureKind::Tma {
            check_tma_waveform(&waveform, n_channels)?;
        }
        Ok(Self {
            kind,
            n_channels,
            spacing_d,
            f_rf,
            f_bw,
            f_tr,
            waveform,
        })
    }

    /// Same geometry and waveform under a different architecture kind.
    pub fn with_kind(&self, kind: ArchitectureKind) -> Result<Self> {
        Self::with_all(
            kind,
            self.n_channels,
            self.spacing_d,
            self.f_rf,
            self.f_bw,
            self.f_tr,
            self.waveform.clone(),
        )
    }

    pub fn with_waveform(&self, waveform: HarmonicWaveform) -> Result<Self> {
        Self::with_all(
            self.kind,
            self.n_channels,
            self.spacing_d,
            self.f_rf,
            self.f_bw,
            self.f_tr,
            waveform,
        )
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.kind
    }
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }
    pub fn spacing_d(&self) -> f64 {
        self.spacing_d
    }
    pub fn f_rf(&self) -> f64 {
        self.f_rf
    }
    pub fn f_bw(&self) -> f64 {
        self.f_bw
    }
    pub fn f_tr(&self) -> f64 {
        self.f_tr
    }
    pub fn f_hm(&self) -> f64 {
        self.waveform.f_hm()
    }
    pub fn waveform(&self) -> &HarmonicWaveform {
        &self.waveform
    }

    /// Controls actually in effect; for a TMA the delay is pinned to `T_hm/N`.
    pub fn effective_controls(&self, ctl: &ChannelControls) -> Result<ChannelControls> {
        ctl.validate(self.kind)?;
        Ok(match self.kind {
            ArchitectureKind::Tma => ChannelControls::delay(self.waveform.period() / self.n_channels as f64),
            _ => *ctl,
        })
    }

    /// Raw progressive phase at harmonic `m` for already-effective controls.
    fn raw_phase(&self, ctl: &ChannelControls, m: i32) -> f64 {
        let f_hm = self.f_hm();
        let mf = m as f64 * f_hm;
        match self.kind {
            ArchitectureKind::Tma | ArchitectureKind::Hma => TAU * mf * ctl.d_tau_s,
            ArchitectureKind::HmJpta2 => TAU * mf * ctl.d_tau_s + ctl.d_phi_rf_rad,
            ArchitectureKind::HmJpta3 => {
                TAU * (self.f_rf + mf) * ctl.d_tau_s
                    + ctl.d_phi_rf_rad
                    + sgn(m) as f64 * ctl.d_phi_lo_rad
            }
        }
    }

    pub fn bandwidth_check(&self) -> BandwidthCheck {
        validate_bandwidth(self.f_hm(), self.f_bw, self.f_tr)
    }
}

/// A TMA LO must be a duty-1/N pulse train (any amplitude, any position).
fn check_tma_waveform(w: &HarmonicWaveform, n: usize) -> Result<()> {
    let duty = 1.0 / n as f64;
    let b0 = w.coeff(0);
    if !(b0.re > 0.0) || b0.im.abs() > 1e-12 * b0.re {
        return Err(invalid("TMA waveform must be a unipolar square wave with a positive DC term"));
    }
    let amplitude = b0.re / duty;
    let reference = crate::waveform::SquareWave::new(duty, amplitude, w.m_max().max(1), w.f_hm());
    for m in w.harmonics() {
        let want = reference.coefficient(m).norm();
        let got = w.coeff(m).norm();
        if (want - got).abs() > 1e-9 * amplitude {
            return Err(invalid(format!(
                "TMA waveform must be a square wave of duty 1/{n}; |beta_{m}| = {got:.6e}, expected {want:.6e}"
            )));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchitectureJson {
    kind: ArchitectureKind,
    n_channels: usize,
    #[serde(default = "default_spacing")]
    spacing_d: f64,
    f_rf_hz: f64,
    #[serde(default)]
    f_bw_hz: f64,
    #[serde(default)]
    f_tr_hz: f64,
    waveform: HarmonicWaveform,
}

fn default_spacing() -> f64 {
    0.5
}

impl From<ArchitectureConfig> for ArchitectureJson {
    fn from(c: ArchitectureConfig) -> Self {
        Self {
            kind: c.kind,
            n_channels: c.n_channels,
            spacing_d: c.spacing_d,
            f_rf_hz: c.f_rf,
            f_bw_hz: c.f_bw,
            f_tr_hz: c.f_tr,
            waveform: c.waveform,
        }
    }
}

impl TryFrom<ArchitectureJson> for ArchitectureConfig {
    type Error = Error;

    fn try_from(j: ArchitectureJson) -> Result<Self> {
        Self::with_all(j.kind, j.n_channels, j.spacing_d, j.f_rf_hz, j.f_bw_hz, j.f_tr_hz, j.waveform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseEntry {
    pub m: i32,
    pub f_m_hz: f64,
    pub d_phi_rad: f64,
    pub d_phi_wrapped_rad: f64,
}

/// Progressive phase per output harmonic, ascending in `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseProfile {
    pub entries: Vec<PhaseEntry>,
}

impl PhaseProfile {
    pub fn get(&self, m: i32) -> Option<&PhaseEntry> {
        self.entries.iter().find(|e| e.m == m)
    }
}

fn sorted_unique(harmonics: &[i32]) -> Vec<i32> {
    let mut ms = harmonics.to_vec();
    ms.sort_unstable();
    ms.dedup();
    ms
}

/// Progressive phase `dphi(f_m)` at each requested harmonic.
pub fn phase_profile(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    harmonics: &[i32],
) -> Result<PhaseProfile> {
    let eff = cfg.effective_controls(ctl)?;
    let entries = sorted_unique(harmonics)
        .into_iter()
        .map(|m| {
            let raw = cfg.raw_phase(&eff, m);
            PhaseEntry {
                m,
                f_m_hz: cfg.f_rf + m as f64 * cfg.f_hm(),
                d_phi_rad: raw,
                d_phi_wrapped_rad: wrap_phase(raw),
            }
        })
        .collect();
    Ok(PhaseProfile { entries })
}

/// `w_{n,m} = beta_m * exp(j*n*dphi(f_m))` over every stored harmonic.
pub fn channel_weights(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    n: usize,
) -> Result<ChannelCoefficients> {
    if n >= cfg.n_channels {
        return Err(invalid(format!(
            "channel {n} out of range for a {}-channel array",
            cfg.n_channels
        )));
    }
    let eff = cfg.effective_controls(ctl)?;
    let w = &cfg.waveform;
    let entries = w
        .coeffs()
        .map(|(m, beta)| {
            // exp(j*n*x) only depends on x mod 2*pi; wrapping first keeps the
            // large 2*pi*f_rf*d_tau term from costing precision.
            let phase = wrap_phase(cfg.raw_phase(&eff, m));
            beta * Complex64::from_polar(1.0, n as f64 * phase)
        })
        .collect();
    Ok(ChannelCoefficients::from_parts(n, w.f_hm(), w.m_max(), entries))
}

/// `w_{n,m}` for one harmonic across all channels `0..N`.
pub fn harmonic_weights(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    m: i32,
) -> Result<Vec<Complex64>> {
    let eff = cfg.effective_controls(ctl)?;
    let beta = cfg.waveform.coeff(m);
    let phase = wrap_phase(cfg.raw_phase(&eff, m));
    Ok((0..cfg.n_channels)
        .map(|n| beta * Complex64::from_polar(1.0, n as f64 * phase))
        .collect())
}

/// All channels' weights, `0..N`.
pub fn all_channel_weights(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
) -> Result<Vec<ChannelCoefficients>> {
    (0..cfg.n_channels).map(|n| channel_weights(cfg, ctl, n)).collect()
}

/// Beam angle (degrees) for a wrapped progressive phase, `None` if the
/// required `sin(theta)` falls outside `[-1, 1]`.
pub fn beam_angle_deg(d_phi_wrapped: f64, spacing_d: f64) -> Option<f64> {
    let s = d_phi_wrapped / (TAU * spacing_d);
    if s.abs() <= 1.0 + 1e-12 {
        Some(s.clamp(-1.0, 1.0).asin().to_degrees())
    } else {
        None
    }
}

/// Progressive phase that steers a beam to `theta_deg`.
pub fn steering_phase(theta_deg: f64, spacing_d: f64) -> f64 {
    TAU * spacing_d * theta_deg.to_radians().sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamEntry {
    pub m: i32,
    pub f_m_hz: f64,
    pub d_phi_wrapped_rad: f64,
    /// `None` when the beam is outside visible space.
    pub theta_deg: Option<f64>,
    pub g_sig_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamMap {
    pub entries: Vec<BeamEntry>,
}

impl BeamMap {
    pub fn get(&self, m: i32) -> Option<&BeamEntry> {
        self.entries.iter().find(|e| e.m == m)
    }
}

/// Angle-frequency mapping `theta_m <-> f_m`.
pub fn beam_map(cfg: &ArchitectureConfig, ctl: &ChannelControls, harmonics: &[i32]) -> Result<BeamMap> {
    let profile = phase_profile(cfg, ctl, harmonics)?;
    let entries = profile
        .entries
        .iter()
        .map(|e| BeamEntry {
            m: e.m,
            f_m_hz: e.f_m_hz,
            d_phi_wrapped_rad: e.d_phi_wrapped_rad,
            theta_deg: beam_angle_deg(e.d_phi_wrapped_rad, cfg.spacing_d),
            g_sig_db: analysis::to_db(analysis::signal_gain(cfg, e.m)),
        })
        .collect();
    Ok(BeamMap { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthCheck {
    pub pass: bool,
    /// `f_hm - (f_bw + f_tr)`; negative on failure.
    pub margin_hz: f64,
}

/// Harmonic bands stay disjoint (with guard) iff `f_hm > f_bw + f_tr`.
pub fn validate_bandwidth(f_hm: f64, f_bw: f64, f_tr: f64) -> BandwidthCheck {
    let margin_hz = f_hm - (f_bw + f_tr);
    BandwidthCheck {
        pass: margin_hz > 0.0,
        margin_hz,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredBandwidths {
    /// LO distribution network must pass `M_eff * f_hm`.
    pub lo_network_bw_hz: f64,
    /// Mixer output / combiner must pass harmonic bands `-M_eff..=M_eff`.
    pub output_span_hz: f64,
    pub output_low_hz: f64,
    pub output_high_hz: f64,
    pub m_eff: u32,
}

pub fn required_bandwidths(w: &HarmonicWaveform, f_rf: f64) -> RequiredBandwidths {
    let m_eff = w.effective_m_max();
    let lo = m_eff as f64 * w.f_hm();
    RequiredBandwidths {
        lo_network_bw_hz: lo,
        output_span_hz: 2.0 * lo,
        output_low_hz: f_rf - lo,
        output_high_hz: f_rf + lo,
        m_eff,
    }
}

//! Brute-force time-domain oracle.
//!
//! Signals are simulated at equivalent baseband around `f_rf`. Each channel
//! is built from its hardware blocks rather than from the closed-form
//! channel weights:
//!
//! 1. plane-wave input `A * exp(j*2*pi*f_off*t) * exp(-j*n*2*pi*d*sin(theta))`
//!    plus white noise band-limited to the RF channel,
//! 2. RF phase shifter `exp(j*n*d_phi_rf)` (HM-JPTA only),
//! 3. mixer driven by the channel's LO: `a(t + n*d_tau)` when the delay sits
//!    at the LO port (TMA, HMA, HM-JPTA-2), or `a(t)` with each positive
//!    harmonic rotated by `+n*d_phi_lo` and each negative one by
//!    `-n*d_phi_lo` (HM-JPTA-3),
//! 4. for HM-JPTA-3, a true-time delay at the mixer output, applied as a
//!    per-bin phase ramp plus the analytic carrier rotation
//!    `exp(j*2*pi*f_rf*n*d_tau)`,
//! 5. lossless summation and a DFT.
//!
//! Record lengths are coherent (integer LO periods, integer offset periods)
//! so every tone lands exactly on a bin.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::architecture::{phase_profile, steering_phase, ArchitectureConfig, ArchitectureKind, ChannelControls};
use crate::error::{invalid, Result};
use crate::waveform::HarmonicWaveform;
use crate::wrap_phase;

/// Largest number of LO periods a snapped record may span.
pub const MAX_PERIODS: usize = 1 << 16;

/// A far-field plane-wave source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub theta_deg: f64,
    #[serde(default)]
    pub baseband_offset_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub sources: Vec<Source>,
    /// Per-channel complex white-noise power per sample, before the
    /// channel-select filter.
    #[serde(default)]
    pub noise_psd: f64,
    /// Two-sided RF channel bandwidth the noise is limited to. Defaults to
    /// the architecture's `f_bw` when `0 < f_bw < f_hm`, else `f_hm/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_bandwidth_hz: Option<f64>,
    /// Baseband offset at which each harmonic's amplitude is read. Defaults
    /// to the first source's offset, or 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_offset_hz: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SimParams {
    /// `samples_per_period * f_hm` sample rate over `periods` LO periods.
    pub fn coherent(f_hm: f64, samples_per_period: usize, periods: usize) -> Self {
        Self {
            sample_rate_hz: samples_per_period as f64 * f_hm,
            duration_s: periods as f64 / f_hm,
            sources: vec![],
            noise_psd: 0.0,
            noise_bandwidth_hz: None,
            probe_offset_hz: None,
            seed: 0,
        }
    }

    /// Smallest power-of-two samples per period that satisfies the sampling
    /// rule for `waveform` with offsets up to `max_offset_hz`.
    pub fn for_waveform(waveform: &HarmonicWaveform, periods: usize, max_offset_hz: f64) -> Self {
        let m = waveform.effective_m_max() as f64;
        let need = 2.0 * (m + max_offset_hz.abs() / waveform.f_hm()) + 1.0;
        let spp = (need.ceil() as usize).next_power_of_two().max(4);
        Self::coherent(waveform.f_hm(), spp, periods)
    }

    pub fn with_source(mut self, theta_deg: f64, baseband_offset_hz: f64, amplitude: f64) -> Self {
        self.sources.push(Source {
            theta_deg,
            baseband_offset_hz,
            amplitude,
        });
        self
    }

    pub fn with_noise(mut self, noise_psd: f64, seed: u64) -> Self {
        self.noise_psd = noise_psd;
        self.seed = seed;
        self
    }

    fn probe(&self) -> f64 {
        self.probe_offset_hz
            .or_else(|| self.sources.first().map(|s| s.baseband_offset_hz))
            .unwrap_or(0.0)
    }

    /// Round sample rate, duration and offsets onto a coherent grid for
    /// `f_hm`, reporting what moved.
    pub fn snap_to_coherent(&self, f_hm: f64) -> Result<(SimParams, SnapReport)> {
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0) {
            return Err(invalid("sample rate and duration must be positive"));
        }
        let spp = (self.sample_rate_hz / f_hm).round().max(1.0) as usize;
        let periods = (self.duration_s * f_hm).round().clamp(1.0, MAX_PERIODS as f64) as usize;
        let df = f_hm / periods as f64;
        let snap = |f: f64| (f / df).round() * df;
        let mut out = self.clone();
        out.sample_rate_hz = spp as f64 * f_hm;
        out.duration_s = periods as f64 / f_hm;
        let mut changes = vec![];
        if out.sample_rate_hz != self.sample_rate_hz {
            changes.push(SnapChange::new("sample_rate_hz", self.sample_rate_hz, out.sample_rate_hz));
        }
        if out.duration_s != self.duration_s {
            changes.push(SnapChange::new("duration_s", self.duration_s, out.duration_s));
        }
        for (i, s) in out.sources.iter_mut().enumerate() {
            let snapped = snap(s.baseband_offset_hz);
            if snapped != s.baseband_offset_hz {
                changes.push(SnapChange::new(
                    &format!("sources[{i}].baseband_offset_hz"),
                    s.baseband_offset_hz,
                    snapped,
                ));
                s.baseband_offset_hz = snapped;
            }
        }
        if let Some(p) = out.probe_offset_hz {
            let snapped = snap(p);
            if snapped != p {
                changes.push(SnapChange::new("probe_offset_hz", p, snapped));
                out.probe_offset_hz = Some(snapped);
            }
        }
        Ok((out, SnapReport { changes }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapChange {
    pub field: String,
    pub from: f64,
    pub to: f64,
}

impl SnapChange {
    fn new(field: &str, from: f64, to: f64) -> Self {
        Self {
            field: field.to_string(),
            from,
            to,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SnapReport {
    pub changes: Vec<SnapChange>,
}

/// Output at one harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicBin {
    pub m: i32,
    /// Bin frequency relative to `f_rf`: `m*f_hm + probe offset`.
    pub f_offset_hz: f64,
    /// Total (signal + noise) complex amplitude at the bin.
    pub amplitude: Complex64,
    /// `|signal-only amplitude|^2`.
    pub signal_power: f64,
    /// Noise power summed over the harmonic's band.
    pub noise_power: f64,
    /// Adjacent-channel phase difference of the mixed signal at the bin.
    pub interchannel_phase_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub bins: Vec<HarmonicBin>,
    /// Measured per-channel input noise power inside the channel band.
    pub input_noise_power: f64,
    pub record_len: usize,
    pub bin_spacing_hz: f64,
}

impl SpectrumResult {
    pub fn get(&self, m: i32) -> Option<&HarmonicBin> {
        self.bins.iter().find(|b| b.m == m)
    }
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    len: usize,
    periods: usize,
    df: f64,
    dt: f64,
}

impl Grid {
    fn bin(&self, f: f64) -> Result<usize> {
        let x = f / self.df;
        if (x - x.round()).abs() > 1e-6 {
            return Err(invalid(format!(
                "frequency {f} Hz is not on the coherent grid (spacing {} Hz)",
                self.df
            )));
        }
        Ok((x.round() as i64).rem_euclid(self.len as i64) as usize)
    }

    fn signed_freq(&self, k: usize) -> f64 {
        if k <= self.len / 2 {
            k as f64 * self.df
        } else {
            (k as f64 - self.len as f64) * self.df
        }
    }
}

fn check_grid(params: &SimParams, f_hm: f64, m_eff: u32) -> Result<Grid> {
    if !(params.sample_rate_hz > 0.0 && params.duration_s > 0.0) {
        return Err(invalid("sample rate and duration must be positive"));
    }
    let spp = params.sample_rate_hz / f_hm;
    let periods = params.duration_s * f_hm;
    if (spp - spp.round()).abs() > 1e-9 * spp || spp.round() < 1.0 {
        return Err(invalid(format!(
            "sample rate {} Hz is not an integer multiple of f_hm {f_hm} Hz",
            params.sample_rate_hz
        )));
    }
    if (periods - periods.round()).abs() > 1e-9 * periods || periods.round() < 1.0 {
        return Err(invalid(format!(
            "duration {} s is not an integer number of LO periods",
            params.duration_s
        )));
    }
    let (spp, periods) = (spp.round() as usize, periods.round() as usize);
    let len = spp * periods;
    let grid = Grid {
        len,
        periods,
        df: f_hm / periods as f64,
        dt: 1.0 / (spp as f64 * f_hm),
    };
    let max_off = params
        .sources
        .iter()
        .map(|s| s.baseband_offset_hz.abs())
        .chain(std::iter::once(params.probe().abs()))
        .fold(0.0, f64::max);
    let needed = 2.0 * (m_eff as f64 * f_hm + max_off);
    if params.sample_rate_hz <= needed {
        return Err(invalid(format!(
            "sample rate {} Hz must exceed 2*(M*f_hm + max|offset|) = {needed} Hz",
            params.sample_rate_hz
        )));
    }
    for (i, s) in params.sources.iter().enumerate() {
        if !(s.theta_deg.abs() <= 90.0) || !s.amplitude.is_finite() || s.amplitude < 0.0 {
            return Err(invalid(format!("source {i} has an invalid angle or amplitude")));
        }
        grid.bin(s.baseband_offset_hz)
            .map_err(|e| invalid(format!("source {i} offset is not coherent: {e}")))?;
    }
    grid.bin(params.probe())?;
    if !(params.noise_psd >= 0.0 && params.noise_psd.is_finite()) {
        return Err(invalid("noise_psd must be non-negative"));
    }
    Ok(grid)
}

/// One receive channel's hardware chain, precomputed on the sample grid.
struct Chain {
    /// LO samples `a_n(t_k)` with the RF phase shifter folded in.
    lo: Vec<Complex64>,
    /// Output true-time advance in seconds (HM-JPTA-3 only).
    output_delay: f64,
}

/// `(m, offset, amplitude, interchannel phase)` for one output bin.
type SignalBin = (i32, f64, Complex64, Option<f64>);

/// Internal source description: incidence expressed as the progressive
/// phase `psi = 2*pi*d*sin(theta)` it imposes across channels.
#[derive(Debug, Clone, Copy)]
struct Wave {
    psi: f64,
    offset_hz: f64,
    amplitude: f64,
}

/// A configured array on a coherent sample grid.
pub struct Simulator {
    chains: Vec<Chain>,
    grid: Grid,
    f_hm: f64,
    f_rf: f64,
    m_eff: i32,
    /// Harmonics whose LO coefficient is nonzero.
    occupied: Vec<i32>,
    noise_half_bins: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    spacing_d: f64,
}

fn lo_samples(w: &HarmonicWaveform, grid: &Grid, advance: f64, lo_phase: f64, rf_phase: f64) -> Vec<Complex64> {
    let rf = Complex64::from_polar(1.0, rf_phase);
    if lo_phase == 0.0 {
        return (0..grid.len)
            .map(|k| rf * w.eval_time(k as f64 * grid.dt + advance))
            .collect();
    }
    // Wideband LO phase shifter: rotate the positive- and negative-frequency
    // parts of a(t) in opposite directions.
    let pos = Complex64::from_polar(1.0, lo_phase);
    let neg = pos.conj();
    let f_hm = w.f_hm();
    (0..grid.len)
        .map(|k| {
            let t = k as f64 * grid.dt + advance;
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, beta) in w.coeffs() {
                let rot = match m.signum() {
                    1 => pos,
                    -1 => neg,
                    _ => Complex64::new(1.0, 0.0),
                };
                let cycles = (m as f64 * f_hm * t).rem_euclid(1.0);
                acc += beta * rot * Complex64::from_polar(1.0, TAU * cycles);
            }
            rf * acc
        })
        .collect()
}

impl Simulator {
    pub fn new(cfg: &ArchitectureConfig, ctl: &ChannelControls, params: &SimParams) -> Result<Self> {
        let eff = cfg.effective_controls(ctl)?;
        let w = cfg.waveform();
        let grid = check_grid(params, w.f_hm(), w.effective_m_max())?;
        let chains = (0..cfg.n_channels())
            .map(|n| {
                let nf = n as f64;
                match cfg.kind() {
                    ArchitectureKind::Tma | ArchitectureKind::Hma => Chain {
                        lo: lo_samples(w, &grid, nf * eff.d_tau_s, 0.0, 0.0),
                        output_delay: 0.0,
                    },
                    ArchitectureKind::HmJpta2 => Chain {
                        lo: lo_samples(w, &grid, nf * eff.d_tau_s, 0.0, nf * eff.d_phi_rf_rad),
                        output_delay: 0.0,
                    },
                    ArchitectureKind::HmJpta3 => Chain {
                        lo: lo_samples(w, &grid, 0.0, nf * eff.d_phi_lo_rad, nf * eff.d_phi_rf_rad),
                        output_delay: nf * eff.d_tau_s,
                    },
                }
            })
            .collect();
        Self::assemble(chains, grid, cfg, params)
    }

    /// A lone channel driven by `waveform`, used as the SNR baseline.
    pub fn single_channel(waveform: &HarmonicWaveform, params: &SimParams) -> Result<Self> {
        let grid = check_grid(params, waveform.f_hm(), waveform.effective_m_max())?;
        let chains = vec![Chain {
            lo: lo_samples(waveform, &grid, 0.0, 0.0, 0.0),
            output_delay: 0.0,
        }];
        let noise_bw = params.noise_bandwidth_hz.unwrap_or(waveform.f_hm() / 2.0);
        let mut planner = FftPlanner::new();
        Ok(Self {
            noise_half_bins: noise_half_bins(noise_bw, &grid, waveform.f_hm())?,
            fft: planner.plan_fft_forward(grid.len),
            ifft: planner.plan_fft_inverse(grid.len),
            chains,
            grid,
            f_hm: waveform.f_hm(),
            f_rf: 1.0,
            m_eff: waveform.effective_m_max() as i32,
            occupied: occupied(waveform),
            spacing_d: 0.5,
        })
    }

    fn assemble(chains: Vec<Chain>, grid: Grid, cfg: &ArchitectureConfig, params: &SimParams) -> Result<Self> {
        let f_hm = cfg.f_hm();
        let noise_bw = params.noise_bandwidth_hz.unwrap_or_else(|| {
            if cfg.f_bw() > 0.0 && cfg.f_bw() < f_hm {
                cfg.f_bw()
            } else {
                f_hm / 2.0
            }
        });
        let mut planner = FftPlanner::new();
        Ok(Self {
            noise_half_bins: noise_half_bins(noise_bw, &grid, f_hm)?,
            fft: planner.plan_fft_forward(grid.len),
            ifft: planner.plan_fft_inverse(grid.len),
            chains,
            grid,
            f_hm,
            f_rf: cfg.f_rf(),
            m_eff: cfg.waveform().effective_m_max() as i32,
            occupied: occupied(cfg.waveform()),
            spacing_d: cfg.spacing_d(),
        })
    }

    pub fn n_channels(&self) -> usize {
        self.chains.len()
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i32> {
        -self.m_eff..=self.m_eff
    }

    fn has_output_delay(&self) -> bool {
        self.chains.iter().any(|c| c.output_delay != 0.0)
    }

    /// Apply a channel's output delay to its spectrum in place.
    fn apply_output_delay(&self, chain: &Chain, spec: &mut [Complex64]) {
        if chain.output_delay == 0.0 {
            return;
        }
        let carrier = TAU * (self.f_rf * chain.output_delay).rem_euclid(1.0);
        for (k, x) in spec.iter_mut().enumerate() {
            let cycles = (self.grid.signed_freq(k) * chain.output_delay).rem_euclid(1.0);
            *x *= Complex64::from_polar(1.0, carrier + TAU * cycles);
        }
    }

    /// Per-channel input samples for a set of plane waves.
    fn wave_input(&self, n: usize, waves: &[Wave]) -> Vec<Complex64> {
        let nf = n as f64;
        let mut x = vec![Complex64::new(0.0, 0.0); self.grid.len];
        for wv in waves {
            let spatial = Complex64::from_polar(wv.amplitude, -nf * wv.psi);
            for (k, v) in x.iter_mut().enumerate() {
                let cycles = (wv.offset_hz * k as f64 * self.grid.dt).rem_euclid(1.0);
                *v += spatial * Complex64::from_polar(1.0, TAU * cycles);
            }
        }
        x
    }

    /// Mixed, delayed spectrum of each channel, normalized by record length.
    fn channel_spectra(&self, inputs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let scale = 1.0 / self.grid.len as f64;
        self.chains
            .iter()
            .zip(inputs)
            .map(|(chain, x)| {
                let mut buf: Vec<Complex64> = chain.lo.iter().zip(x).map(|(a, s)| a * s).collect();
                self.fft.process(&mut buf);
                for v in &mut buf {
                    *v *= scale;
                }
                self.apply_output_delay(chain, &mut buf);
                buf
            })
            .collect()
    }

    /// Combined output spectrum, normalized by record length.
    fn combined_spectrum(&self, inputs: &[Vec<Complex64>]) -> Vec<Complex64> {
        let len = self.grid.len;
        if self.has_output_delay() {
            let mut out = vec![Complex64::new(0.0, 0.0); len];
            for spec in self.channel_spectra(inputs) {
                for (o, s) in out.iter_mut().zip(spec) {
                    *o += s;
                }
            }
            return out;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (chain, x) in self.chains.iter().zip(inputs) {
            for ((b, a), s) in buf.iter_mut().zip(&chain.lo).zip(x) {
                *b += a * s;
            }
        }
        self.fft.process(&mut buf);
        let scale = 1.0 / len as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }

    /// Offsets (in bins) of the channel band around each harmonic.
    fn band_offsets(&self) -> impl Iterator<Item = i64> {
        let h = self.noise_half_bins as i64;
        -h..=h
    }

    fn harmonic_bin(&self, m: i32) -> usize {
        (m as i64 * self.grid.periods as i64).rem_euclid(self.grid.len as i64) as usize
    }

    /// Band-limited noise for every channel of one realization, with the
    /// mean per-channel input band power.
    fn noise_inputs(&self, noise_psd: f64, seed: u64, trial: u64) -> (Vec<Vec<Complex64>>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let len = self.grid.len;
        // DFT bins of white noise with per-sample power s have power len*s.
        let sigma = (len as f64 * noise_psd / 2.0).sqrt();
        let scale = 1.0 / len as f64;
        let mut input_power = 0.0;
        let inputs = (0..self.n_channels())
            .map(|_| {
                let mut spec = vec![Complex64::new(0.0, 0.0); len];
                for b in self.band_offsets() {
                    let k = b.rem_euclid(len as i64) as usize;
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    spec[k] = Complex64::new(re * sigma, im * sigma);
                    input_power += (spec[k] * scale).norm_sqr();
                }
                self.ifft.process(&mut spec);
                spec.iter().map(|v| v * scale).collect()
            })
            .collect();
        (inputs, input_power / self.n_channels() as f64)
    }

    /// One noise-only realization through the array: output band power per
    /// harmonic and the mean per-channel input band power.
    fn noise_trial(&self, noise_psd: f64, seed: u64, trial: u64) -> (Vec<f64>, f64, Vec<Complex64>) {
        let (inputs, input_power) = self.noise_inputs(noise_psd, seed, trial);
        let out = self.combined_spectrum(&inputs);
        let len = self.grid.len as i64;
        let powers = self
            .harmonics()
            .map(|m| {
                let center = self.harmonic_bin(m) as i64;
                self.band_offsets()
                    .map(|b| out[(center + b).rem_euclid(len) as usize].norm_sqr())
                    .sum()
            })
            .collect();
        (powers, input_power, out)
    }

    fn waves_from_sources(&self, sources: &[Source]) -> Vec<Wave> {
        sources
            .iter()
            .map(|s| Wave {
                psi: steering_phase(s.theta_deg, self.spacing_d),
                offset_hz: s.baseband_offset_hz,
                amplitude: s.amplitude,
            })
            .collect()
    }

    fn signal_run(&self, waves: &[Wave], probe: f64) -> Result<Vec<SignalBin>> {
        let inputs: Vec<Vec<Complex64>> = (0..self.n_channels()).map(|n| self.wave_input(n, waves)).collect();
        let per_channel = self.channel_spectra(&inputs);
        let mut out = Vec::new();
        for m in self.harmonics() {
            let f = m as f64 * self.f_hm + probe;
            let k = self.grid.bin(f)?;
            let total: Complex64 = per_channel.iter().map(|s| s[k]).sum();
            let cross: Complex64 = per_channel.windows(2).map(|p| p[1][k] * p[0][k].conj()).sum();
            let scale = per_channel.iter().map(|s| s[k].norm_sqr()).fold(0.0, f64::max);
            let phase = (per_channel.len() > 1 && scale > 1e-24).then(|| wrap_phase(cross.arg()));
            out.push((m, f, total, phase));
        }
        Ok(out)
    }

    /// Simulate the configured sources and noise.
    pub fn run(&self, params: &SimParams) -> Result<SpectrumResult> {
        let probe = params.probe();
        let waves = self.waves_from_sources(&params.sources);
        let signal = self.signal_run(&waves, probe)?;
        let (noise_powers, input_noise_power, noise_amp) = if params.noise_psd > 0.0 {
            let (powers, input, out) = self.noise_trial(params.noise_psd, params.seed, 0);
            let amp = signal
                .iter()
                .map(|(_, f, _, _)| self.grid.bin(*f).map(|k| out[k]))
                .collect::<Result<Vec<_>>>()?;
            (powers, input, amp)
        } else {
            let n = signal.len();
            (vec![0.0; n], 0.0, vec![Complex64::new(0.0, 0.0); n])
        };
        let bins = signal
            .iter()
            .zip(noise_powers)
            .zip(noise_amp)
            .map(|(((m, f, amp, phase), noise_power), namp)| HarmonicBin {
                m: *m,
                f_offset_hz: *f,
                amplitude: amp + namp,
                signal_power: amp.norm_sqr(),
                noise_power,
                interchannel_phase_rad: *phase,
            })
            .collect();
        Ok(SpectrumResult {
            bins,
            input_noise_power,
            record_len: self.grid.len,
            bin_spacing_hz: self.grid.df,
        })
    }

    /// Empirical gains: noiseless aligned-source signal gain per harmonic and
    /// Monte-Carlo noise gain over `trials` independent realizations.
    pub fn measure_gains(&self, aligned_phase: impl Fn(i32) -> f64, params: &SimParams, trials: usize) -> Result<EmpiricalGains> {
        if trials < 1 {
            return Err(invalid("trials must be at least 1"));
        }
        if !(params.noise_psd > 0.0) {
            return Err(invalid("noise_psd must be positive to estimate noise gain"));
        }
        let probe = params.probe();
        let ms: Vec<i32> = self.harmonics().collect();

        let mut g_sig = Vec::with_capacity(ms.len());
        for &m in &ms {
            let wave = Wave {
                psi: aligned_phase(m),
                offset_hz: probe,
                amplitude: 1.0,
            };
            let run = self.signal_run(&[wave], probe)?;
            let (_, _, amp, _) = run.iter().find(|r| r.0 == m).copied().expect("harmonic in run");
            g_sig.push(amp.norm_sqr());
        }

        // Independent trials; summed in trial order for reproducibility.
        let results: Vec<(Vec<f64>, f64)> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let (powers, input, _) = self.noise_trial(params.noise_psd, params.seed, t);
                (powers, input)
            })
            .collect();
        let mut out_sum = vec![0.0; ms.len()];
        let mut in_sum = 0.0;
        for (powers, input) in &results {
            for (acc, p) in out_sum.iter_mut().zip(powers) {
                *acc += p;
            }
            in_sum += input;
        }

        let entries = ms
            .iter()
            .zip(g_sig)
            .zip(out_sum)
            .map(|((&m, g_sig), out)| {
                let g_noise = out / in_sum;
                EmpiricalGain {
                    m,
                    g_sig,
                    g_noise,
                    ag: (self.occupied.contains(&m) && g_noise > 0.0).then(|| g_sig / g_noise),
                }
            })
            .collect();
        Ok(EmpiricalGains { trials, entries })
    }
}

fn occupied(w: &HarmonicWaveform) -> Vec<i32> {
    w.harmonics().filter(|&m| w.is_occupied(m)).collect()
}

fn noise_half_bins(noise_bw: f64, grid: &Grid, f_hm: f64) -> Result<usize> {
    if !(noise_bw > 0.0 && noise_bw < f_hm) {
        return Err(invalid(format!(
            "noise bandwidth must be in (0, f_hm) so harmonic bands do not overlap, got {noise_bw} Hz"
        )));
    }
    let half = ((noise_bw / 2.0) / grid.df).floor() as usize;
    // Keep adjacent harmonic bands disjoint.
    Ok(half.min((grid.periods.saturating_sub(1)) / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalGain {
    pub m: i32,
    pub g_sig: f64,
    pub g_noise: f64,
    pub ag: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalGains {
    pub trials: usize,
    pub entries: Vec<EmpiricalGain>,
}

impl EmpiricalGains {
    pub fn get(&self, m: i32) -> Option<&EmpiricalGain> {
        self.entries.iter().find(|e| e.m == m)
    }
}

/// Run the time-domain simulation for `params`' sources and noise.
pub fn simulate_rx(cfg: &ArchitectureConfig, ctl: &ChannelControls, params: &SimParams) -> Result<SpectrumResult> {
    Simulator::new(cfg, ctl, params)?.run(params)
}

/// Empirical gain report. Each harmonic's signal gain uses a unit source
/// aligned with that harmonic's beam (by progressive phase, so beams outside
/// visible space are still measured).
pub fn measure_gains(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    params: &SimParams,
    trials: usize,
) -> Result<EmpiricalGains> {
    let sim = Simulator::new(cfg, ctl, params)?;
    let ms: Vec<i32> = sim.harmonics().collect();
    let profile = phase_profile(cfg, ctl, &ms)?;
    sim.measure_gains(
        |m| profile.get(m).map_or(0.0, |e| e.d_phi_wrapped_rad),
        params,
        trials,
    )
}

/// Single-channel baseline with the same waveform: array gain 1.
pub fn measure_single_channel_gains(
    waveform: &HarmonicWaveform,
    params: &SimParams,
    trials: usize,
) -> Result<EmpiricalGains> {
    Simulator::single_channel(waveform, params)?.measure_gains(|_| 0.0, params, trials)
}

/// Adjacent-channel phase at harmonic `m` for a unit broadside tone
/// (noiseless), wrapped to `(-pi, pi]`.
pub fn measure_interchannel_phase(
    cfg: &ArchitectureConfig,
    ctl: &ChannelControls,
    params: &SimParams,
    m: i32,
) -> Result<f64> {
    let mut p = params.clone();
    let probe = p.probe();
    p.sources = vec![Source {
        theta_deg: 0.0,
        baseband_offset_hz: probe,
        amplitude: 1.0,
    }];
    p.noise_psd = 0.0;
    let sim = Simulator::new(cfg, ctl, &p)?;
    let run = sim.signal_run(&sim.waves_from_sources(&p.sources), probe)?;
    run.iter()
        .find(|r| r.0 == m)
        .and_then(|r| r.3)
        .ok_or_else(|| invalid(format!("no signal at harmonic {m}; beta_{m} is zero or out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gain_report;
    use crate::waveform::CombPhases;
    use std::f64::consts::PI;

    const F_HM: f64 = 1e9;
    const F_RF: f64 = 28e9;

    fn comb_cfg(kind: ArchitectureKind, n: usize) -> ArchitectureConfig {
        let w = HarmonicWaveform::comb(&[-2, -1, 0, 1, 2], 1.0, CombPhases::Zero, F_HM).unwrap();
        ArchitectureConfig::new(kind, n, 0.5, F_RF, w).unwrap()
    }

    fn params(cfg: &ArchitectureConfig) -> SimParams {
        SimParams::for_waveform(cfg.waveform(), 4, 0.0)
    }

    #[test]
    fn silent_input_gives_zero_spectrum() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let r = simulate_rx(&cfg, &ChannelControls::delay(0.1e-9), &params(&cfg)).unwrap();
        assert!(r.bins.iter().all(|b| b.amplitude == Complex64::new(0.0, 0.0)));
        assert!(r.bins.iter().all(|b| b.signal_power == 0.0 && b.noise_power == 0.0));
    }

    #[test]
    fn comb_broadside_uniform_power() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let p = params(&cfg).with_source(0.0, 0.0, 1.0);
        let r = simulate_rx(&cfg, &ChannelControls::default(), &p).unwrap();
        let p0 = r.get(0).unwrap().signal_power;
        assert!((p0 - 3.2).abs() < 1e-9);
        for b in &r.bins {
            assert!((b.signal_power / p0 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_rule_enforced() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let slow = SimParams::coherent(F_HM, 4, 4);
        assert!(simulate_rx(&cfg, &ChannelControls::default(), &slow).is_err());
        let mut off_grid = params(&cfg).with_source(0.0, 0.1e9, 1.0);
        off_grid.sources[0].baseband_offset_hz = 0.1e9;
        assert!(simulate_rx(&cfg, &ChannelControls::default(), &off_grid).is_err());
        let mut bad_rate = params(&cfg);
        bad_rate.sample_rate_hz *= 1.01;
        assert!(simulate_rx(&cfg, &ChannelControls::default(), &bad_rate).is_err());
    }

    #[test]
    fn snapping_makes_params_coherent() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let mut p = SimParams::coherent(F_HM, 16, 8).with_source(10.0, 0.13e9, 1.0);
        p.sample_rate_hz = 16.2e9;
        p.duration_s = 8.3e-9;
        let (snapped, report) = p.snap_to_coherent(F_HM).unwrap();
        assert_eq!(report.changes.len(), 3);
        assert_eq!(snapped.sources[0].baseband_offset_hz, 0.125e9);
        assert!(simulate_rx(&cfg, &ChannelControls::default(), &snapped).is_ok());
    }

    #[test]
    fn source_offset_moves_the_bins() {
        let cfg = comb_cfg(ArchitectureKind::HmJpta2, 4);
        let p = SimParams::for_waveform(cfg.waveform(), 8, 0.25e9).with_source(0.0, 0.25e9, 2.0);
        let r = simulate_rx(&cfg, &ChannelControls::default(), &p).unwrap();
        let b = r.get(1).unwrap();
        assert_eq!(b.f_offset_hz, 1.25e9);
        assert!((b.signal_power - 4.0 * 3.2).abs() < 1e-9);
    }

    #[test]
    fn beam_follows_source_angle() {
        // HMA delay chosen so the m=1 beam points at 30 degrees; sweep the
        // source and find where the m=1 output peaks.
        let cfg = comb_cfg(ArchitectureKind::Hma, 8);
        let d_tau = (PI / 2.0) / (TAU * F_HM);
        let ctl = ChannelControls::delay(d_tau);
        let base = params(&cfg);
        let sim = Simulator::new(&cfg, &ctl, &base).unwrap();
        let mut best = (f64::MIN, 0.0);
        let mut theta = 0.0;
        while theta <= 60.0 {
            let r = sim.run(&base.clone().with_source(theta, 0.0, 1.0)).unwrap();
            let p = r.get(1).unwrap().signal_power;
            if p > best.0 {
                best = (p, theta);
            }
            theta += 0.1;
        }
        assert!((best.1 - 30.0).abs() < 0.5, "peak at {}", best.1);
    }

    #[test]
    fn measured_phase_matches_profile() {
        for kind in [ArchitectureKind::Hma, ArchitectureKind::HmJpta2, ArchitectureKind::HmJpta3] {
            let cfg = comb_cfg(kind, 4);
            let ctl = match kind {
                ArchitectureKind::Hma => ChannelControls::delay(0.11e-9),
                ArchitectureKind::HmJpta2 => ChannelControls::new(0.11e-9, 0.7, 0.0),
                _ => ChannelControls::new(0.013e-9, 0.7, 0.5),
            };
            let prof = phase_profile(&cfg, &ctl, &[-2, -1, 0, 1, 2]).unwrap();
            for e in &prof.entries {
                let got = measure_interchannel_phase(&cfg, &ctl, &params(&cfg), e.m).unwrap();
                assert!(wrap_phase(got - e.d_phi_wrapped_rad).abs() < 1e-6, "{kind} m={}", e.m);
            }
        }
    }

    #[test]
    fn lo_phase_sign_flip() {
        let cfg = comb_cfg(ArchitectureKind::HmJpta3, 4);
        let ctl = ChannelControls::new(0.0, 0.0, 0.5);
        let p = params(&cfg);
        assert!((measure_interchannel_phase(&cfg, &ctl, &p, 1).unwrap() - 0.5).abs() < 1e-9);
        assert!((measure_interchannel_phase(&cfg, &ctl, &p, -1).unwrap() + 0.5).abs() < 1e-9);
        assert!(measure_interchannel_phase(&cfg, &ctl, &p, 0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn rf_phase_is_m_independent() {
        let cfg = comb_cfg(ArchitectureKind::HmJpta2, 4);
        let ctl = ChannelControls::new(0.0, 0.7, 0.0);
        for m in -2..=2 {
            let got = measure_interchannel_phase(&cfg, &ctl, &params(&cfg), m).unwrap();
            assert!((got - 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_gains_match_closed_form() {
        let cfg = comb_cfg(ArchitectureKind::HmJpta3, 4);
        let ctl = ChannelControls::new(0.021e-9, 0.3, -1.1);
        let p = params(&cfg).with_noise(1.0, 3);
        let emp = measure_gains(&cfg, &ctl, &p, 50).unwrap();
        let ana = gain_report(&cfg, &ctl, &[-2, -1, 0, 1, 2]).unwrap();
        for e in &ana.entries {
            let got = emp.get(e.m).unwrap();
            assert!((got.g_sig - e.g_sig).abs() / e.g_sig < 1e-6);
        }
    }

    #[test]
    fn single_channel_baseline_has_unit_array_gain() {
        let w = HarmonicWaveform::comb(&[-1, 0, 1], 1.0, CombPhases::Zero, F_HM).unwrap();
        let p = SimParams::for_waveform(&w, 4, 0.0).with_noise(1.0, 11);
        let emp = measure_single_channel_gains(&w, &p, 4000).unwrap();
        for e in &emp.entries {
            let ag_db = 10.0 * e.ag.unwrap().log10();
            assert!(ag_db.abs() < 0.3, "m={} ag={ag_db} dB", e.m);
        }
    }

    #[test]
    fn deterministic_for_equal_seeds() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let p = params(&cfg).with_source(12.0, 0.0, 1.0).with_noise(0.5, 42);
        let a = simulate_rx(&cfg, &ChannelControls::delay(0.05e-9), &p).unwrap();
        let b = simulate_rx(&cfg, &ChannelControls::delay(0.05e-9), &p).unwrap();
        assert_eq!(a, b);
        let c = simulate_rx(&cfg, &ChannelControls::delay(0.05e-9), &p.clone().with_noise(0.5, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_gain_tracks_closed_form() {
        let cfg = comb_cfg(ArchitectureKind::Hma, 4);
        let p = params(&cfg).with_noise(1.0, 5);
        let emp = measure_gains(&cfg, &ChannelControls::delay(0.07e-9), &p, 3000).unwrap();
        for e in &emp.entries {
            // N*|beta|^2 = 4 * 0.2
            assert!((10.0 * (e.g_noise / 0.8).log10()).abs() < 0.3, "m={} g_noise={}", e.m, e.g_noise);
        }
    }
}

//! HM-LO waveforms as finite complex Fourier series.
//!
//! `a(t) = sum_{m=-M}^{M} beta_m * exp(j*2*pi*m*f_hm*t)`
//!
//! Coefficients are stored densely over `-M..=M` with explicit zeros.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when checking conjugate symmetry of loaded data.
const SYMMETRY_TOL: f64 = 1e-12;

/// Coefficients smaller than this fraction of the largest one count as zero
/// when scanning for the highest occupied harmonic.
const OCCUPIED_TOL: f64 = 1e-12;

/// A periodic HM-LO waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveformJson", into = "WaveformJson")]
pub struct HarmonicWaveform {
    f_hm: f64,
    m_max: u32,
    coeffs: Vec<Complex64>,
    real_valued: bool,
}

/// Phase assignment for comb-like waveforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombPhases {
    Zero,
    /// Seeded random phases with `beta_{-m} = conj(beta_m)` wherever both
    /// `m` and `-m` are present.
    ConjugateSymmetricRandom { seed: u64 },
}

/// Square-wave (pulse train) parameters. The pulse is high on
/// `[0, duty*T)` of every period `T = 1/f_hm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWave {
    pub duty: f64,
    pub amplitude: f64,
    pub m_max: u32,
    pub f_hm: f64,
    /// Switch between `-amplitude` and `+amplitude` instead of `0` and
    /// `amplitude`.
    pub bipolar: bool,
}

impl SquareWave {
    pub fn new(duty: f64, amplitude: f64, m_max: u32, f_hm: f64) -> Self {
        Self {
            duty,
            amplitude,
            m_max,
            f_hm,
            bipolar: false,
        }
    }

    pub fn bipolar(mut self, bipolar: bool) -> Self {
        self.bipolar = bipolar;
        self
    }

    /// Power of the untruncated waveform, `A^2*duty` (unipolar) or `A^2`
    /// (bipolar).
    pub fn full_power(&self) -> f64 {
        if self.bipolar {
            self.amplitude * self.amplitude
        } else {
            self.amplitude * self.amplitude * self.duty
        }
    }

    /// Fourier coefficient of the untruncated pulse train at harmonic `m`.
    pub fn coefficient(&self, m: i32) -> Complex64 {
        let d = self.duty;
        let unipolar = if m == 0 {
            Complex64::new(d, 0.0)
        } else {
            let x = m as f64 * d;
            if (x - x.round()).abs() < 1e-12 {
                Complex64::new(0.0, 0.0)
            } else {
                let mag = (PI * x).sin() / (PI * m as f64);
                Complex64::from_polar(mag, -PI * x)
            }
        };
        if self.bipolar {
            if m == 0 {
                Complex64::new(self.amplitude * (2.0 * d - 1.0), 0.0)
            } else {
                unipolar * (2.0 * self.amplitude)
            }
        } else {
            unipolar * self.amplitude
        }
    }

    pub fn build(&self) -> Result<HarmonicWaveform> {
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(invalid(format!("square duty must be in (0, 1], got {}", self.duty)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(format!(
                "square amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        check_f_hm(self.f_hm)?;
        if self.m_max < 1 {
            return Err(invalid("square m_max must be at least 1"));
        }
        let m_max = self.m_max as i32;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * self.m_max as usize + 1];
        coeffs[m_max as usize] = self.coefficient(0);
        for m in 1..=m_max {
            let beta = self.coefficient(m);
            coeffs[(m_max + m) as usize] = beta;
            coeffs[(m_max - m) as usize] = beta.conj();
        }
        HarmonicWaveform::from_dense(self.f_hm, coeffs, true)
    }
}

/// Default square-wave truncation: `4 * ceil(1/duty)`.
pub fn default_square_m_max(duty: f64) -> u32 {
    4 * (1.0 / duty).ceil() as u32
}

fn check_f_hm(f_hm: f64) -> Result<()> {
    if f_hm > 0.0 && f_hm.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("f_hm must be positive and finite, got {f_hm}")))
    }
}

impl HarmonicWaveform {
    /// Build from sparse `(m, beta_m)` entries. Missing harmonics are zero.
    pub fn new(
        f_hm: f64,
        entries: impl IntoIterator<Item = (i32, Complex64)>,
        real_valued: bool,
    ) -> Result<Self> {
        let entries: Vec<(i32, Complex64)> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(invalid("waveform needs at least one coefficient"));
        }
        let m_max = entries.iter().map(|(m, _)| m.unsigned_abs()).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * m_max as usize + 1];
        let mut seen = BTreeSet::new();
        for (m, beta) in entries {
            if !seen.insert(m) {
                return Err(invalid(format!("duplicate harmonic m={m}")));
            }
            coeffs[(m + m_max as i32) as usize] = beta;
        }
        Self::from_dense(f_hm, coeffs, real_valued)
    }

    fn from_dense(f_hm: f64, coeffs: Vec<Complex64>, real_valued: bool) -> Result<Self> {
        check_f_hm(f_hm)?;
        debug_assert!(coeffs.len() % 2 == 1);
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("waveform coefficients must be finite"));
        }
        let w = Self {
            f_hm,
            m_max: (coeffs.len() / 2) as u32,
            coeffs,
            real_valued,
        };
        if w.total_power() <= 0.0 {
            return Err(invalid("waveform has zero total power"));
        }
        if real_valued {
            let scale = w.max_magnitude();
            for m in 0..=w.m_max as i32 {
                let diff = (w.coeff(-m) - w.coeff(m).conj()).norm();
                if diff > SYMMETRY_TOL * scale {
                    return Err(invalid(format!(
                        "real_valued waveform violates conjugate symmetry at m=+/-{m} \
                         (|beta_-m - conj(beta_m)| = {diff:.3e})"
                    )));
                }
            }
        }
        Ok(w)
    }

    /// Unipolar 0/1 pulse train of the given duty, truncated at `m_max`.
    pub fn square(duty: f64, amplitude: f64, m_max: u32, f_hm: f64) -> Result<Self> {
        SquareWave::new(duty, amplitude, m_max, f_hm).build()
    }

    /// Equal-height comb over `harmonics`, each carrying
    /// `total_power / |harmonics|`.
    pub fn comb(harmonics: &[i32], total_power: f64, phases: CombPhases, f_hm: f64) -> Result<Self> {
        let set: BTreeSet<i32> = harmonics.iter().copied().collect();
        if set.is_empty() {
            return Err(invalid("comb needs a nonempty harmonic set"));
        }
        if !(total_power > 0.0 && total_power.is_finite()) {
            return Err(invalid(format!("comb power must be positive, got {total_power}")));
        }
        check_f_hm(f_hm)?;
        let mag = (total_power / set.len() as f64).sqrt();
        let symmetric = set.iter().all(|m| set.contains(&-m));
        let entries: Vec<(i32, Complex64)> = match phases {
            CombPhases::Zero => set.iter().map(|&m| (m, Complex64::new(mag, 0.0))).collect(),
            CombPhases::ConjugateSymmetricRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(set.len());
                // Draw in ascending |m| so the assignment does not depend on
                // which side of a pair is visited first.
                let mut mags: Vec<i32> = set.iter().map(|m| m.abs()).collect();
                mags.sort_unstable();
                mags.dedup();
                for k in mags {
                    if k == 0 {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        out.push((0, Complex64::new(sign * mag, 0.0)));
                        continue;
                    }
                    let phi = rng.random_range(-PI..PI);
                    match (set.contains(&k), set.contains(&-k)) {
                        (true, true) => {
                            out.push((k, Complex64::from_polar(mag, phi)));
                            out.push((-k, Complex64::from_polar(mag, -phi)));
                        }
                        (true, false) => out.push((k, Complex64::from_polar(mag, phi))),
                        (false, true) => out.push((-k, Complex64::from_polar(mag, phi))),
                        (false, false) => unreachable!(),
                    }
                }
                out
            }
        };
        Self::new(f_hm, entries, symmetric)
    }

    /// Random complex waveform over `-m_max..=m_max` with i.i.d. circular
    /// Gaussian coefficients, scaled to `total_power`. Not real-valued.
    pub fn random_complex(m_max: u32, total_power: f64, seed: u64, f_hm: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<Complex64> = (0..2 * m_max as usize + 1)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_dense(f_hm, coeffs, false)?.normalize_power(total_power)
    }

    pub fn f_hm(&self) -> f64 {
        self.f_hm
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_hm
    }

    /// Stored truncation order `M`.
    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    /// `beta_m`, zero outside the stored range.
    pub fn coeff(&self, m: i32) -> Complex64 {
        if m.unsigned_abs() > self.m_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + self.m_max as i32) as usize]
        }
    }

    /// `(m, beta_m)` for every stored harmonic, ascending in `m`.
    pub fn coeffs(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        let off = self.m_max as i32;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i32 - off, c))
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i32> {
        let m = self.m_max as i32;
        -m..=m
    }

    fn max_magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Whether `beta_m` is (numerically) nonzero.
    pub fn is_occupied(&self, m: i32) -> bool {
        self.coeff(m).norm() > OCCUPIED_TOL * self.max_magnitude()
    }

    /// Largest `|m|` with a nonzero coefficient.
    pub fn effective_m_max(&self) -> u32 {
        self.harmonics()
            .filter(|&m| self.is_occupied(m))
            .map(|m| m.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// `sum_m |beta_m|^2`, the mean of `|a(t)|^2` over a period.
    pub fn total_power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Scale every coefficient by one positive real so the total power
    /// becomes `target_power`.
    pub fn normalize_power(&self, target_power: f64) -> Result<Self> {
        if !(target_power > 0.0 && target_power.is_finite()) {
            return Err(invalid(format!("target power must be positive, got {target_power}")));
        }
        let p = self.total_power();
        if p <= 0.0 {
            return Err(invalid("cannot normalize a zero-power waveform"));
        }
        let scale = (target_power / p).sqrt();
        Ok(Self {
            coeffs: self.coeffs.iter().map(|c| c * scale).collect(),
            ..self.clone()
        })
    }

    /// Evaluate the truncated Fourier sum at time `t` (seconds).
    pub fn eval_time(&self, t: f64) -> Complex64 {
        eval_series(self.f_hm, self.m_max, &self.coeffs, t)
    }

    /// Coefficients of channel `n`'s copy delayed by `n*tau`, with an
    /// optional LO-port phase shifter that adds `n*phi_lo*sgn(m)`:
    ///
    /// `w_{n,m} = beta_m * exp(-j*2*pi*m*f_hm*n*tau) * exp(j*n*phi_lo*sgn(m))`
    pub fn shifted_copy(&self, n: usize, tau: f64, phi_lo: f64) -> ChannelCoefficients {
        let nf = n as f64;
        let entries = self
            .coeffs()
            .map(|(m, beta)| {
                let phase = -TAU * m as f64 * self.f_hm * nf * tau + nf * phi_lo * m.signum() as f64;
                beta * Complex64::from_polar(1.0, phase)
            })
            .collect();
        ChannelCoefficients {
            channel: n,
            f_hm: self.f_hm,
            m_max: self.m_max,
            entries,
        }
    }

    /// `(t, a(t))` at `samples` uniform instants over one period.
    pub fn sample_period(&self, samples: usize) -> Vec<(f64, Complex64)> {
        let dt = self.period() / samples as f64;
        (0..samples)
            .map(|k| {
                let t = k as f64 * dt;
                (t, self.eval_time(t))
            })
            .collect()
    }
}

fn eval_series(f_hm: f64, m_max: u32, coeffs: &[Complex64], t: f64) -> Complex64 {
    let off = m_max as i32;
    coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let m = (i as i32 - off) as f64;
            // Reduce m*f_hm*t modulo 1 before scaling by 2*pi so large t
            // does not eat precision.
            let cycles = (m * f_hm * t).rem_euclid(1.0);
            c * Complex64::from_polar(1.0, TAU * cycles)
        })
        .sum()
}

/// Per-channel HM-LO coefficients `w_{n,m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCoefficients {
    pub channel: usize,
    f_hm: f64,
    m_max: u32,
    entries: Vec<Complex64>,
}

impl ChannelCoefficients {
    pub(crate) fn from_parts(channel: usize, f_hm: f64, m_max: u32, entries: Vec<Complex64>) -> Self {
        debug_assert_eq!(entries.len(), 2 * m_max as usize + 1);
        Self {
            channel,
            f_hm,
            m_max,
            entries,
        }
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn get(&self, m: i32) -> Complex64 {
        if m.unsigned_abs() > self.m_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.entries[(m + self.m_max as i32) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        let off = self.m_max as i32;
        self.entries.iter().enumerate().map(move |(i, &c)| (i as i32 - off, c))
    }

    /// `a_n(t)` for this channel.
    pub fn eval_time(&self, t: f64) -> Complex64 {
        eval_series(self.f_hm, self.m_max, &self.entries, t)
    }
}

/// JSON interchange form: `{"f_hm_hz", "real_valued", "coeffs": [{"m","re","im"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformJson {
    pub f_hm_hz: f64,
    pub real_valued: bool,
    pub coeffs: Vec<CoeffJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffJson {
    pub m: i32,
    pub re: f64,
    pub im: f64,
}

impl From<HarmonicWaveform> for WaveformJson {
    fn from(w: HarmonicWaveform) -> Self {
        Self {
            f_hm_hz: w.f_hm,
            real_valued: w.real_valued,
            coeffs: w
                .coeffs()
                .map(|(m, c)| CoeffJson { m, re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl TryFrom<WaveformJson> for HarmonicWaveform {
    type Error = Error;

    fn try_from(j: WaveformJson) -> Result<Self> {
        HarmonicWaveform::new(
            j.f_hm_hz,
            j.coeffs.into_iter().map(|c| (c.m, Complex64::new(c.re, c.im))),
            j.real_valued,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F_HM: f64 = 1e9;

    /// Trapezoid integration of the 0/1 pulse train high on [0, d*T).
    fn integrate_pulse_coefficient(duty: f64, m: i32, samples: usize) -> Complex64 {
        let period = 1.0;
        let dt = period / samples as f64;
        let f = |t: f64| -> Complex64 {
            let level = if t < duty * period { 1.0 } else { 0.0 };
            level * Complex64::from_polar(1.0, -TAU * m as f64 * t / period)
        };
        let mut acc = (f(0.0) + f(period)) * 0.5;
        for k in 1..samples {
            acc += f(k as f64 * dt);
        }
        acc * dt / period
    }

    #[test]
    fn square_dc_and_null() {
        let w = HarmonicWaveform::square(0.25, 1.0, 16, F_HM).unwrap();
        assert!((w.coeff(0) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert_eq!(w.coeff(4), Complex64::new(0.0, 0.0));
        assert_eq!(w.coeff(-8), Complex64::new(0.0, 0.0));
        assert!(w.real_valued());
    }

    #[test]
    fn square_fundamental_matches_numerical_integration() {
        let w = HarmonicWaveform::square(0.25, 1.0, 16, F_HM).unwrap();
        let numeric = integrate_pulse_coefficient(0.25, 1, 200_000);
        assert!((w.coeff(1).norm() - numeric.norm()).abs() < 1e-5);
        assert!((w.coeff(1).norm() - 0.22508).abs() < 1e-5);
    }

    #[test]
    fn square_total_power_truncated() {
        // Closed-form sum over |m| <= 8, cross-checked in the Parseval test.
        let w = HarmonicWaveform::square(0.25, 1.0, 8, F_HM).unwrap();
        assert!((w.total_power() - 0.237_489_266_007_596_7).abs() < 1e-12);
        let long = HarmonicWaveform::square(0.25, 1.0, 20_000, F_HM).unwrap();
        assert!((long.total_power() - 0.25).abs() < 1e-5);
    }

    #[test]
    fn square_rejects_bad_parameters() {
        assert!(HarmonicWaveform::square(0.0, 1.0, 8, F_HM).is_err());
        assert!(HarmonicWaveform::square(1.5, 1.0, 8, F_HM).is_err());
        assert!(HarmonicWaveform::square(0.25, -1.0, 8, F_HM).is_err());
        assert!(HarmonicWaveform::square(0.25, 1.0, 8, 0.0).is_err());
    }

    #[test]
    fn full_duty_square_is_dc() {
        let w = HarmonicWaveform::square(1.0, 2.0, 4, F_HM).unwrap();
        assert_eq!(w.effective_m_max(), 0);
        assert!((w.coeff(0).re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bipolar_square() {
        let w = SquareWave::new(0.5, 1.0, 9, F_HM).bipolar(true).build().unwrap();
        assert!(w.coeff(0).norm() < 1e-15);
        assert!((w.coeff(1).norm() - 2.0 / PI).abs() < 1e-12);
        // Mean of a +/-1 square squared is 1.
        let long = SquareWave::new(0.5, 1.0, 4001, F_HM).bipolar(true).build().unwrap();
        assert!((long.total_power() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn square_pulse_center_value() {
        let w = HarmonicWaveform::square(0.25, 1.0, 64, F_HM).unwrap();
        let v = w.eval_time(w.period() / 8.0);
        assert!((v.re - 1.0).abs() < 0.1);
        assert!(v.im.abs() < 1e-9 * w.total_power().sqrt() * 129.0);
        // Middle of the off part.
        assert!(w.eval_time(0.6 * w.period()).re.abs() < 0.1);
    }

    #[test]
    fn comb_equal_split() {
        let w = HarmonicWaveform::comb(&[-2, -1, 0, 1, 2], 1.0, CombPhases::Zero, F_HM).unwrap();
        for m in -2..=2 {
            assert!((w.coeff(m).norm_sqr() - 0.2).abs() < 1e-15);
        }
        assert!(w.real_valued());
        assert!((w.total_power() - 1.0).abs() < 1e-14);
        assert!((w.eval_time(0.0).norm() - 5.0 * 0.2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn comb_dc_only() {
        let w = HarmonicWaveform::comb(&[0], 1.0, CombPhases::Zero, F_HM).unwrap();
        assert_eq!(w.coeff(0), Complex64::new(1.0, 0.0));
        assert!((w.eval_time(1.234e-9) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn comb_empty_rejected() {
        assert!(matches!(
            HarmonicWaveform::comb(&[], 1.0, CombPhases::Zero, F_HM),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn comb_random_phases_realness() {
        let sym = HarmonicWaveform::comb(
            &[-3, -2, -1, 0, 1, 2, 3],
            1.0,
            CombPhases::ConjugateSymmetricRandom { seed: 9 },
            F_HM,
        )
        .unwrap();
        assert!(sym.real_valued());
        for k in 0..50 {
            let v = sym.eval_time(k as f64 * 3.7e-11);
            assert!(v.im.abs() < 1e-12);
        }
        let asym = HarmonicWaveform::comb(
            &[0, 1, 2],
            1.0,
            CombPhases::ConjugateSymmetricRandom { seed: 9 },
            F_HM,
        )
        .unwrap();
        assert!(!asym.real_valued());
        assert!((asym.coeff(2).norm_sqr() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn normalize_examples() {
        let sq = HarmonicWaveform::square(0.25, 1.0, 20_000, F_HM).unwrap();
        // Truncation leaves a tiny deficit, so normalize against the stored power.
        let n = sq.normalize_power(sq.total_power() * 4.0).unwrap();
        assert!((n.coeff(0).re - 0.5).abs() < 1e-15);

        let comb = HarmonicWaveform::comb(&[-1, 0, 1], 0.5, CombPhases::Zero, F_HM).unwrap();
        let same = comb.normalize_power(comb.total_power()).unwrap();
        assert_eq!(same, comb);
        let up = comb.normalize_power(2.0).unwrap();
        for m in -1..=1 {
            assert!((up.coeff(m).norm() - 2.0 * comb.coeff(m).norm()).abs() < 1e-15);
        }
        assert!(comb.normalize_power(0.0).is_err());
    }

    #[test]
    fn shifted_copy_phases() {
        let w = HarmonicWaveform::comb(&[-1, 0, 1], 1.0, CombPhases::Zero, F_HM).unwrap();
        let c0 = w.shifted_copy(0, 1e-10, 0.3);
        for (m, beta) in w.coeffs() {
            assert_eq!(c0.get(m), beta);
        }
        let quarter = w.period() / 4.0;
        let c1 = w.shifted_copy(1, quarter, 0.0);
        let rel = |m: i32| (c1.get(m) / w.coeff(m)).arg().to_degrees();
        assert!((rel(1) + 90.0).abs() < 1e-9);
        assert!((rel(-1) - 90.0).abs() < 1e-9);
        assert!(rel(0).abs() < 1e-12);
    }

    #[test]
    fn lo_phase_follows_sign_of_m() {
        let w = HarmonicWaveform::comb(&[-2, -1, 0, 1, 2], 1.0, CombPhases::Zero, F_HM).unwrap();
        let c = w.shifted_copy(2, 0.0, 0.25);
        assert!((c.get(1).arg() - 0.5).abs() < 1e-12);
        assert!((c.get(2).arg() - 0.5).abs() < 1e-12);
        assert!((c.get(-1).arg() + 0.5).abs() < 1e-12);
        assert!(c.get(0).arg().abs() < 1e-12);
    }

    #[test]
    fn json_rejects_asymmetric_real() {
        let text = r#"{"f_hm_hz": 1e9, "real_valued": true,
            "coeffs": [{"m": -1, "re": 0.5, "im": 0.1}, {"m": 0, "re": 1.0, "im": 0.0},
                       {"m": 1, "re": 0.5, "im": 0.1}]}"#;
        let err = serde_json::from_str::<HarmonicWaveform>(text).unwrap_err();
        assert!(err.to_string().contains("conjugate symmetry"));
        let ok = text.replacen("\"im\": 0.1}", "\"im\": -0.1}", 1);
        let w: HarmonicWaveform = serde_json::from_str(&ok).unwrap();
        assert!(w.real_valued());
    }

    #[test]
    fn json_layout_sorted_dense() {
        let w = HarmonicWaveform::new(
            2e9,
            [(2, Complex64::new(1.0, 0.0)), (-1, Complex64::new(0.0, 1.0))],
            false,
        )
        .unwrap();
        let v = serde_json::to_value(&w).unwrap();
        let ms: Vec<i64> = v["coeffs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["m"].as_i64().unwrap())
            .collect();
        assert_eq!(ms, vec![-2, -1, 0, 1, 2]);
        assert_eq!(v["f_hm_hz"], 2e9);
        let back: HarmonicWaveform = serde_json::from_value(v).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn duplicate_and_zero_power_rejected() {
        assert!(HarmonicWaveform::new(
            F_HM,
            [(1, Complex64::new(1.0, 0.0)), (1, Complex64::new(1.0, 0.0))],
            false
        )
        .is_err());
        assert!(HarmonicWaveform::new(F_HM, [(0, Complex64::new(0.0, 0.0))], false).is_err());
    }
}

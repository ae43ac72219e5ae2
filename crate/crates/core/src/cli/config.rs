//! Run configuration: a single JSON file whose fields can be overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::analysis::DEFAULT_GRID_STEP_DEG;
use crate::architecture::{ArchitectureConfig, ArchitectureKind, ChannelControls};
use crate::dof::SteeringProblem;
use crate::io::Provenance;
use crate::sim::{SimParams, Source};
use crate::waveform::{default_square_m_max, CombPhases, HarmonicWaveform, SquareWave};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub kind: ArchitectureKind,
    pub n_channels: usize,
    pub spacing_d: f64,
    pub f_rf_hz: f64,
    pub f_hm_hz: f64,
    pub f_bw_hz: f64,
    pub f_tr_hz: f64,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self {
            kind: ArchitectureKind::Hma,
            n_channels: 16,
            spacing_d: 0.5,
            f_rf_hz: 28e9,
            f_hm_hz: 1e9,
            f_bw_hz: 0.0,
            f_tr_hz: 0.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Waveform by kind and parameters, or by reference to a coefficient file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveformSpec {
    Square {
        /// Defaults to `1/N`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duty: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m_max: Option<u32>,
        #[serde(default)]
        bipolar: bool,
    },
    Comb {
        harmonics: Vec<i32>,
        #[serde(default = "one")]
        power: f64,
        /// Random conjugate-symmetric phases when set; zero phases otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase_seed: Option<u64>,
    },
    Random {
        m_max: u32,
        #[serde(default = "one")]
        power: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
        /// Overrides the file's `real_valued` flag.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        real: Option<bool>,
    },
}

impl WaveformSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Square { .. } => "square",
            Self::Comb { .. } => "comb",
            Self::Random { .. } => "random",
            Self::File { .. } => "file",
        }
    }

    /// Default for an architecture: TMA needs a duty-1/N square wave, the
    /// rest get a five-harmonic comb.
    pub fn default_for(kind: ArchitectureKind) -> Self {
        match kind {
            ArchitectureKind::Tma => Self::default_of("square").expect("known kind"),
            _ => Self::default_of("comb").expect("known kind"),
        }
    }

    pub fn default_of(kind: &str) -> Option<Self> {
        Some(match kind {
            "square" => Self::Square {
                duty: None,
                amplitude: 1.0,
                m_max: None,
                bipolar: false,
            },
            "comb" => Self::Comb {
                harmonics: (-2..=2).collect(),
                power: 1.0,
                phase_seed: None,
            },
            "random" => Self::Random {
                m_max: 4,
                power: 1.0,
                seed: 0,
            },
            _ => return None,
        })
    }

    pub fn build(&self, arch: &ArchitectureSpec) -> Result<HarmonicWaveform, CliError> {
        let ctx = |e: crate::Error| CliError::Config(format!("waveform: {e}"));
        match self {
            Self::Square {
                duty,
                amplitude,
                m_max,
                bipolar,
            } => {
                let duty = duty.unwrap_or(1.0 / arch.n_channels.max(1) as f64);
                if !(duty > 0.0 && duty <= 1.0) {
                    return Err(CliError::Config(format!("waveform.duty must be in (0, 1], got {duty}")));
                }
                let m_max = m_max.unwrap_or_else(|| default_square_m_max(duty));
                SquareWave::new(duty, *amplitude, m_max, arch.f_hm_hz)
                    .bipolar(*bipolar)
                    .build()
                    .map_err(ctx)
            }
            Self::Comb {
                harmonics,
                power,
                phase_seed,
            } => {
                let phases = match phase_seed {
                    Some(seed) => CombPhases::ConjugateSymmetricRandom { seed: *seed },
                    None => CombPhases::Zero,
                };
                HarmonicWaveform::comb(harmonics, *power, phases, arch.f_hm_hz).map_err(ctx)
            }
            Self::Random { m_max, power, seed } => {
                HarmonicWaveform::random_complex(*m_max, *power, *seed, arch.f_hm_hz).map_err(ctx)
            }
            Self::File { path, real } => {
                let w = load_waveform_file(path, *real)?;
                if w.f_hm() != arch.f_hm_hz {
                    return Err(CliError::Config(format!(
                        "waveform file {} has f_hm_hz = {} but architecture.f_hm_hz = {}",
                        path.display(),
                        w.f_hm(),
                        arch.f_hm_hz
                    )));
                }
                Ok(w)
            }
        }
    }
}

/// Load a waveform JSON file. A `meta` key (as written by this tool) is
/// ignored.
pub fn load_waveform_file(path: &Path, real: Option<bool>) -> Result<HarmonicWaveform, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read waveform file {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    if let Value::Object(map) = &mut v {
        map.remove("meta");
        if let Some(r) = real {
            map.insert("real_valued".to_string(), Value::Bool(r));
        }
    }
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path_str = e.path().to_string();
        CliError::Config(format!("{}: at `{path_str}`: {}", path.display(), e.inner()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Angle grid step for pattern files.
    pub step_deg: f64,
    /// Uniform combining loss applied to analytic gains.
    pub combining_loss_db: f64,
    /// Samples of one LO period written by the waveform command.
    pub time_samples: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            step_deg: DEFAULT_GRID_STEP_DEG,
            combining_loss_db: 0.0,
            time_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    /// Defaults to the smallest power of two that satisfies the sampling
    /// rule for the waveform and sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_period: Option<usize>,
    pub periods: usize,
    /// Explicit rate and duration; snapped onto a coherent grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub sources: Vec<Source>,
    pub noise_psd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_offset_hz: Option<f64>,
    pub seed: u64,
    /// Monte-Carlo noise trials for empirical gains; 0 skips them.
    pub trials: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            samples_per_period: None,
            periods: 8,
            sample_rate_hz: None,
            duration_s: None,
            sources: vec![],
            noise_psd: 0.0,
            noise_bandwidth_hz: None,
            probe_offset_hz: None,
            seed: 0,
            trials: 0,
        }
    }
}

impl SimulationSpec {
    /// Raw (possibly non-coherent) parameters for `waveform`.
    pub fn params(&self, waveform: &HarmonicWaveform) -> SimParams {
        let max_off = self
            .sources
            .iter()
            .map(|s| s.baseband_offset_hz.abs())
            .chain(self.probe_offset_hz.map(f64::abs))
            .fold(0.0, f64::max);
        let mut p = match self.samples_per_period {
            Some(spp) => SimParams::coherent(waveform.f_hm(), spp, self.periods),
            None => SimParams::for_waveform(waveform, self.periods, max_off),
        };
        if let Some(fs) = self.sample_rate_hz {
            p.sample_rate_hz = fs;
        }
        if let Some(d) = self.duration_s {
            p.duration_s = d;
        }
        p.sources = self.sources.clone();
        p.noise_psd = self.noise_psd;
        p.noise_bandwidth_hz = self.noise_bandwidth_hz;
        p.probe_offset_hz = self.probe_offset_hz;
        p.seed = self.seed;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub k_min: usize,
    pub k_max: usize,
    /// LO power shared by both waveforms.
    pub power: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 20,
            power: 1.0,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Provenance written alongside a resolved config; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
    #[serde(default)]
    pub architecture: ArchitectureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformSpec>,
    #[serde(default)]
    pub controls: ChannelControls,
    /// Harmonics analysed by pattern/beams/gains. Defaults to the comb's
    /// harmonics, or the occupied harmonics with `|m| <= N/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<Vec<i32>>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub steering: SteeringProblem,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            meta: None,
            architecture: ArchitectureSpec::default(),
            waveform: None,
            controls: ChannelControls::default(),
            harmonics: None,
            analysis: AnalysisSpec::default(),
            steering: SteeringProblem::default(),
            simulation: SimulationSpec::default(),
            compare: CompareSpec::default(),
            output_dir: default_output_dir(),
        }
    }
}

/// Parse a config document, reporting the failing field path and position.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{origin}: at `{path}`: {}", e.into_inner()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// A validated configuration with its built model objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub arch: ArchitectureConfig,
    pub provenance: Provenance,
}

impl Resolved {
    pub fn waveform(&self) -> &HarmonicWaveform {
        self.arch.waveform()
    }

    pub fn used_harmonics(&self) -> Vec<i32> {
        if let Some(h) = &self.config.harmonics {
            return h.clone();
        }
        if let Some(WaveformSpec::Comb { harmonics, .. }) = &self.config.waveform {
            let mut h = harmonics.clone();
            h.sort_unstable();
            h.dedup();
            return h;
        }
        let w = self.waveform();
        let lim = (self.arch.n_channels() / 2) as i32;
        w.harmonics()
            .filter(|m| m.abs() <= lim && w.is_occupied(*m))
            .collect()
    }
}

impl RunConfig {
    /// Fill defaults that depend on other fields, check every invariant and
    /// stamp the provenance.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        self.meta = None;
        let spec = self
            .waveform
            .get_or_insert_with(|| WaveformSpec::default_for(self.architecture.kind))
            .clone();
        let a = &self.architecture;
        if !(a.f_hm_hz > 0.0 && a.f_hm_hz.is_finite()) {
            return Err(CliError::Config(format!(
                "architecture.f_hm_hz must be positive, got {}",
                a.f_hm_hz
            )));
        }
        let waveform = spec.build(a)?;
        let arch = ArchitectureConfig::with_all(
            a.kind,
            a.n_channels,
            a.spacing_d,
            a.f_rf_hz,
            a.f_bw_hz,
            a.f_tr_hz,
            waveform,
        )
        .map_err(|e| CliError::Config(format!("architecture: {e}")))?;
        arch.effective_controls(&self.controls)
            .map_err(|e| CliError::Config(format!("controls: {e}")))?;
        if let Some(h) = &self.harmonics {
            if h.is_empty() {
                return Err(CliError::Config("harmonics: list is empty".into()));
            }
        }
        if !(self.analysis.step_deg > 0.0 && self.analysis.step_deg <= 90.0) {
            return Err(CliError::Config(format!(
                "analysis.step_deg must be in (0, 90], got {}",
                self.analysis.step_deg
            )));
        }
        if self.analysis.time_samples < 2 {
            return Err(CliError::Config("analysis.time_samples must be at least 2".into()));
        }
        if self.simulation.periods < 1 {
            return Err(CliError::Config("simulation.periods must be at least 1".into()));
        }
        if self.compare.k_min < 1 || self.compare.k_min > self.compare.k_max {
            return Err(CliError::Config(format!(
                "compare: need 1 <= k_min <= k_max, got {}..{}",
                self.compare.k_min, self.compare.k_max
            )));
        }
        let provenance = Provenance::for_config(&self.hashable())
            .map_err(|e| CliError::Config(format!("cannot encode config: {e}")))?;
        Ok(Resolved {
            config: self,
            arch,
            provenance,
        })
    }

    /// The part of the config that determines results: everything except
    /// provenance and the output location.
    fn hashable(&self) -> RunConfig {
        let mut c = self.clone();
        c.meta = None;
        c.output_dir = PathBuf::new();
        c
    }
}

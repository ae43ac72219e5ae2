//! The `sha` command-line tool.
//!
//! Every subcommand loads an optional JSON [`RunConfig`](config::RunConfig),
//! applies flag overrides, validates the result and writes its artifacts
//! into the output directory together with the resolved `run_config.json`.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 infeasible steering,
//! 4 I/O failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::architecture::ArchitectureKind;
use crate::dof::SteeringProblem;
use crate::io::write_atomic;
use crate::sim::Source;
use config::{load_config, RunConfig, WaveformSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Carries the machine-readable error document.
    #[error("{message}")]
    Infeasible { message: String, report: Value },
    #[error("I/O failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_INVALID_CONFIG,
            Self::Infeasible { .. } => EXIT_INFEASIBLE,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Infeasible {
                rank,
                targets,
                residual_rad,
            } => Self::Infeasible {
                message: e.to_string(),
                report: serde_json::json!({
                    "error": "infeasible",
                    "rank": rank,
                    "targets": targets,
                    "residual_rad": residual_rad,
                }),
            },
            other => Self::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sha", version, about = "Spatial-to-spectral harmonic-modulated array toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an HM-LO waveform; write its coefficients and one sampled period.
    Waveform(RunArgs),
    /// Array-factor cuts for each analysed harmonic.
    Pattern(RunArgs),
    /// Beam direction and gain per harmonic, plus bandwidth checks.
    Beams(RunArgs),
    /// Closed-form (and optionally Monte-Carlo) gain table.
    Gains(SimRunArgs),
    /// Solve for the controls that steer harmonic beams to target angles.
    Steer(SteerArgs),
    /// Time-domain simulation of the receive array.
    Simulate(SimRunArgs),
    /// Square versus comb LO at equal power over a range of beam counts.
    Compare(CompareArgs),
}

/// Integer list flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntList(pub Vec<i32>);

fn parse_int_list(s: &str) -> Result<IntList, String> {
    parse_harmonics(s).map(IntList)
}

/// Parse `a..b` (inclusive) or a comma-separated list of integers.
pub fn parse_harmonics(s: &str) -> Result<Vec<i32>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: i32 = a.trim().parse().map_err(|_| format!("bad range start in `{s}`"))?;
        let b: i32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad range end in `{s}`"))?;
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|_| format!("bad harmonic `{t}`")))
        .collect()
}

/// Parse `m:theta,m:theta,...`.
pub fn parse_targets(s: &str) -> Result<SteeringProblem, String> {
    let mut pairs = vec![];
    for item in s.split(',').filter(|t| !t.trim().is_empty()) {
        let (m, theta) = item
            .split_once(':')
            .ok_or_else(|| format!("target `{item}` is not of the form m:theta_deg"))?;
        let m: i32 = m.trim().parse().map_err(|_| format!("bad harmonic in `{item}`"))?;
        let theta: f64 = theta.trim().parse().map_err(|_| format!("bad angle in `{item}`"))?;
        pairs.push((m, theta));
    }
    Ok(SteeringProblem::new(pairs))
}

/// Parse `theta_deg[:offset_hz[:amplitude]]`.
pub fn parse_source(s: &str) -> Result<Source, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.is_empty() || parts.len() > 3 {
        return Err(format!("source `{s}` is not of the form theta[:offset[:amplitude]]"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}` in source `{s}`"));
    Ok(Source {
        theta_deg: num(parts[0])?,
        baseband_offset_hz: parts.get(1).map(|t| num(t)).transpose()?.unwrap_or(0.0),
        amplitude: parts.get(2).map(|t| num(t)).transpose()?.unwrap_or(1.0),
    })
}

fn parse_kind(s: &str) -> Result<ArchitectureKind, String> {
    s.parse::<ArchitectureKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct ArchArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Architecture: tma, hma, hmjpta2 or hmjpta3.
    #[arg(long, value_parser = parse_kind)]
    pub arch: Option<ArchitectureKind>,
    /// Number of channels.
    #[arg(long)]
    pub n: Option<usize>,
    /// Element spacing in carrier wavelengths.
    #[arg(long)]
    pub d: Option<f64>,
    /// Carrier frequency in Hz.
    #[arg(long = "f-rf")]
    pub f_rf: Option<f64>,
    /// HM-LO fundamental in Hz.
    #[arg(long = "f-hm")]
    pub f_hm: Option<f64>,
    /// Signal bandwidth in Hz.
    #[arg(long = "f-bw")]
    pub f_bw: Option<f64>,
    /// Filter transition band in Hz.
    #[arg(long = "f-tr")]
    pub f_tr: Option<f64>,
    /// Progressive delay in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Progressive RF phase in radians.
    #[arg(long = "phi-rf", allow_hyphen_values = true)]
    pub phi_rf: Option<f64>,
    /// Progressive LO phase in radians.
    #[arg(long = "phi-lo", allow_hyphen_values = true)]
    pub phi_lo: Option<f64>,
    /// Harmonics to analyse, `a..b` or `a,b,c`.
    #[arg(long = "used-harmonics", allow_hyphen_values = true, value_parser = parse_int_list)]
    pub used_harmonics: Option<IntList>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WaveArgs {
    /// Waveform kind: square, comb, random or file.
    #[arg(long)]
    pub kind: Option<String>,
    /// Square-wave duty cycle in (0, 1].
    #[arg(long)]
    pub duty: Option<f64>,
    /// Square-wave amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Highest harmonic kept.
    #[arg(long = "m-max")]
    pub m_max: Option<u32>,
    /// Bipolar (+A/-A) square wave.
    #[arg(long)]
    pub bipolar: bool,
    /// Comb harmonics, `a..b` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_int_list)]
    pub harmonics: Option<IntList>,
    /// Total LO power.
    #[arg(long)]
    pub power: Option<f64>,
    /// Seed for random waveforms and random comb phases.
    #[arg(long = "wave-seed")]
    pub wave_seed: Option<u64>,
    /// Waveform coefficient JSON file.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Require the waveform from `--coeffs` to be real-valued.
    #[arg(long)]
    pub real: bool,
    /// Angle grid step in degrees for pattern output.
    #[arg(long = "step-deg")]
    pub step_deg: Option<f64>,
    /// Uniform combining loss in dB for analytic gains.
    #[arg(long = "loss-db")]
    pub loss_db: Option<f64>,
    /// Time samples per period in waveform output.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub wave: WaveArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Samples per LO period.
    #[arg(long = "samples-per-period")]
    pub samples_per_period: Option<usize>,
    /// Whole LO periods simulated.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Explicit sample rate in Hz (snapped to a coherent grid).
    #[arg(long = "sample-rate")]
    pub sample_rate: Option<f64>,
    /// Explicit duration in seconds (snapped to whole LO periods).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Plane-wave source `theta_deg[:offset_hz[:amplitude]]`; repeatable.
    #[arg(long = "source", allow_hyphen_values = true, value_parser = parse_source)]
    pub sources: Vec<Source>,
    /// Per-channel noise power per sample.
    #[arg(long = "noise-psd")]
    pub noise_psd: Option<f64>,
    /// Noise bandwidth in Hz.
    #[arg(long = "noise-bw")]
    pub noise_bw: Option<f64>,
    /// Baseband offset in Hz at which bins are read.
    #[arg(long = "probe-offset", allow_hyphen_values = true)]
    pub probe_offset: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo noise trials for empirical gains.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimRunArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SteerArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Targets `m:theta_deg,...`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_targets)]
    pub targets: Option<SteeringProblem>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Beam counts `a..b`.
    #[arg(long = "k-range", allow_hyphen_values = true, value_parser = parse_int_list)]
    pub k_range: Option<IntList>,
}

impl ArchArgs {
    fn apply(&self, c: &mut RunConfig) {
        let a = &mut c.architecture;
        set(&mut a.kind, self.arch);
        set(&mut a.n_channels, self.n);
        set(&mut a.spacing_d, self.d);
        set(&mut a.f_rf_hz, self.f_rf);
        set(&mut a.f_hm_hz, self.f_hm);
        set(&mut a.f_bw_hz, self.f_bw);
        set(&mut a.f_tr_hz, self.f_tr);
        set(&mut c.controls.d_tau_s, self.tau);
        set(&mut c.controls.d_phi_rf_rad, self.phi_rf);
        set(&mut c.controls.d_phi_lo_rad, self.phi_lo);
        if let Some(h) = &self.used_harmonics {
            c.harmonics = Some(h.0.clone());
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn not_for(flag: &str, kind: &str) -> CliError {
    CliError::Config(format!("--{flag} does not apply to a {kind} waveform"))
}

impl WaveArgs {
    fn touches_waveform(&self) -> bool {
        self.kind.is_some()
            || self.duty.is_some()
            || self.amplitude.is_some()
            || self.m_max.is_some()
            || self.bipolar
            || self.harmonics.is_some()
            || self.power.is_some()
            || self.wave_seed.is_some()
            || self.coeffs.is_some()
            || self.real
    }

    fn apply(&self, c: &mut RunConfig) -> Result<(), CliError> {
        set(&mut c.analysis.step_deg, self.step_deg);
        set(&mut c.analysis.combining_loss_db, self.loss_db);
        set(&mut c.analysis.time_samples, self.samples);
        if !self.touches_waveform() {
            return Ok(());
        }
        let kind = match (&self.kind, &self.coeffs) {
            (Some(k), _) => k.to_ascii_lowercase(),
            (None, Some(_)) => "file".to_string(),
            (None, None) => c
                .waveform
                .as_ref()
                .map(|w| w.kind_name().to_string())
                .unwrap_or_else(|| WaveformSpec::default_for(c.architecture.kind).kind_name().to_string()),
        };
        let mut spec = match c.waveform.take() {
            Some(w) if w.kind_name() == kind => w,
            _ if kind == "file" => {
                let path = self
                    .coeffs
                    .clone()
                    .ok_or_else(|| CliError::Config("--kind file needs --coeffs <path>".into()))?;
                WaveformSpec::File { path, real: None }
            }
            _ => WaveformSpec::default_of(&kind)
                .ok_or_else(|| CliError::Config(format!("unknown waveform kind `{kind}`")))?,
        };
        match &mut spec {
            WaveformSpec::Square {
                duty,
                amplitude,
                m_max,
                bipolar,
            } => {
                if self.duty.is_some() {
                    *duty = self.duty;
                }
                set(amplitude, self.amplitude);
                if self.m_max.is_some() {
                    *m_max = self.m_max;
                }
                *bipolar |= self.bipolar;
                for (flag, used) in [
                    ("harmonics", self.harmonics.is_some()),
                    ("power", self.power.is_some()),
                    ("wave-seed", self.wave_seed.is_some()),
                    ("coeffs", self.coeffs.is_some()),
                    ("real", self.real),
                ] {
                    if used {
                        return Err(not_for(flag, "square"));
                    }
                }
            }
            WaveformSpec::Comb {
                harmonics,
                power,
                phase_seed,
            } => {
                if let Some(h) = &self.harmonics {
                    *harmonics = h.0.clone();
                }
                set(power, self.power);
                if self.wave_seed.is_some() {
                    *phase_seed = self.wave_seed;
                }
                for (flag, used) in [
                    ("duty", self.duty.is_some()),
                    ("amplitude", self.amplitude.is_some()),
                    ("m-max", self.m_max.is_some()),
                    ("bipolar", self.bipolar),
                    ("coeffs", self.coeffs.is_some()),
                    ("real", self.real),
                ] {
                    if used {
                        return Err(not_for(flag, "comb"));
                    }
                }
            }
            WaveformSpec::Random { m_max, power, seed } => {
                set(m_max, self.m_max);
                set(power, self.power);
                set(seed, self.wave_seed);
                for (flag, used) in [
                    ("duty", self.duty.is_some()),
                    ("amplitude", self.amplitude.is_some()),
                    ("bipolar", self.bipolar),
                    ("harmonics", self.harmonics.is_some()),
                    ("coeffs", self.coeffs.is_some()),
                    ("real", self.real),
                ] {
                    if used {
                        return Err(not_for(flag, "random"));
                    }
                }
            }
            WaveformSpec::File { path, real } => {
                if let Some(p) = &self.coeffs {
                    *path = p.clone();
                }
                if self.real {
                    *real = Some(true);
                }
                for (flag, used) in [
                    ("duty", self.duty.is_some()),
                    ("amplitude", self.amplitude.is_some()),
                    ("m-max", self.m_max.is_some()),
                    ("bipolar", self.bipolar),
                    ("harmonics", self.harmonics.is_some()),
                    ("power", self.power.is_some()),
                    ("wave-seed", self.wave_seed.is_some()),
                ] {
                    if used {
                        return Err(not_for(flag, "file"));
                    }
                }
            }
        }
        c.waveform = Some(spec);
        Ok(())
    }
}

impl SimArgs {
    fn apply(&self, c: &mut RunConfig) {
        let s = &mut c.simulation;
        if self.samples_per_period.is_some() {
            s.samples_per_period = self.samples_per_period;
        }
        set(&mut s.periods, self.periods);
        if self.sample_rate.is_some() {
            s.sample_rate_hz = self.sample_rate;
        }
        if self.duration.is_some() {
            s.duration_s = self.duration;
        }
        if !self.sources.is_empty() {
            s.sources = self.sources.clone();
        }
        set(&mut s.noise_psd, self.noise_psd);
        if self.noise_bw.is_some() {
            s.noise_bandwidth_hz = self.noise_bw;
        }
        if self.probe_offset.is_some() {
            s.probe_offset_hz = self.probe_offset;
        }
        set(&mut s.seed, self.seed);
        set(&mut s.trials, self.trials);
    }
}

impl RunArgs {
    /// Load the config file (if any) and apply flags on top.
    fn build(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.arch.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        self.arch.apply(&mut c);
        self.wave.apply(&mut c)?;
        Ok(c)
    }
}

/// Files produced by a command, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }
}

/// Resolve the config for `command` and produce its artifacts in memory.
pub fn execute(command: &Command) -> Result<(config::Resolved, Artifacts), CliError> {
    let cfg = match command {
        Command::Waveform(a) | Command::Pattern(a) | Command::Beams(a) => a.build()?,
        Command::Gains(a) | Command::Simulate(a) => {
            let mut c = a.run.build()?;
            a.sim.apply(&mut c);
            c
        }
        Command::Steer(a) => {
            let mut c = a.run.build()?;
            if let Some(t) = &a.targets {
                c.steering = t.clone();
            }
            c
        }
        Command::Compare(a) => {
            let mut c = a.run.build()?;
            if let Some(IntList(k)) = &a.k_range {
                let lo = *k.first().expect("non-empty range");
                let hi = *k.last().expect("non-empty range");
                if lo < 1 {
                    return Err(CliError::Config(format!("--k-range must start at 1 or more, got {lo}")));
                }
                c.compare.k_min = lo as usize;
                c.compare.k_max = hi as usize;
            }
            c
        }
    };
    let resolved = cfg.resolve()?;
    let artifacts = match command {
        Command::Waveform(_) => commands::waveform(&resolved)?,
        Command::Pattern(_) => commands::pattern(&resolved)?,
        Command::Beams(_) => commands::beams(&resolved)?,
        Command::Gains(_) => commands::gains(&resolved)?,
        Command::Steer(_) => commands::steer(&resolved)?,
        Command::Simulate(_) => commands::simulate(&resolved)?,
        Command::Compare(_) => commands::compare(&resolved)?,
    };
    Ok((resolved, artifacts))
}

fn write_all(dir: &std::path::Path, artifacts: &Artifacts) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in &artifacts.files {
        let path = dir.join(name);
        write_atomic(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Run the CLI and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok((resolved, artifacts)) => {
            let dir = resolved.config.output_dir.clone();
            if let Err(e) = write_all(&dir, &artifacts) {
                eprintln!("error: {e}");
                return e.exit_code();
            }
            for line in &artifacts.summary {
                println!("{line}");
            }
            for (name, _) in &artifacts.files {
                println!("wrote {}", dir.join(name).display());
            }
            EXIT_OK
        }
        Err(CliError::Infeasible { message, report }) => {
            let doc = serde_json::to_string_pretty(&report).unwrap_or_default();
            println!("{doc}");
            eprintln!("error: {message}");
            if let Some(dir) = error_output_dir(&cli.command) {
                let mut a = Artifacts::default();
                a.add("steering_error.json", format!("{doc}\n"));
                if let Err(e) = write_all(&dir, &a) {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            }
            EXIT_INFEASIBLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Output directory for the error document of a failed steering run.
fn error_output_dir(command: &Command) -> Option<PathBuf> {
    let Command::Steer(a) = command else {
        return None;
    };
    a.run.build().ok().map(|c| c.output_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_ranges() {
        assert_eq!(parse_harmonics("-2..2").unwrap(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(parse_harmonics("0,1, 2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_harmonics("1..=3").unwrap(), vec![1, 2, 3]);
        assert!(parse_harmonics("3..1").is_err());
        assert!(parse_harmonics("a").is_err());
    }

    #[test]
    fn target_and_source_syntax() {
        let p = parse_targets("0:0,1:30,2:-30").unwrap();
        assert_eq!(p.targets.len(), 3);
        assert_eq!(p.targets[2].theta_deg, -30.0);
        assert!(parse_targets("0-0").is_err());
        let s = parse_source("-10:1e8").unwrap();
        assert_eq!((s.theta_deg, s.baseband_offset_hz, s.amplitude), (-10.0, 1e8, 1.0));
        assert!(parse_source("1:2:3:4").is_err());
    }

    #[test]
    fn flags_override_waveform_by_kind() {
        let cli = Cli::try_parse_from(["sha", "waveform", "--kind", "square", "--duty", "0.25"]).unwrap();
        let Command::Waveform(a) = cli.command else { panic!() };
        let c = a.build().unwrap();
        assert_eq!(
            c.waveform,
            Some(WaveformSpec::Square {
                duty: Some(0.25),
                amplitude: 1.0,
                m_max: None,
                bipolar: false
            })
        );
        let cli = Cli::try_parse_from(["sha", "waveform", "--kind", "comb", "--duty", "0.25"]).unwrap();
        let Command::Waveform(a) = cli.command else { panic!() };
        assert!(matches!(a.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn infeasible_maps_to_exit_three() {
        let e: CliError = crate::Error::Infeasible {
            rank: 1,
            targets: 2,
            residual_rad: 0.5,
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_INFEASIBLE);
        let e: CliError = crate::Error::InvalidParameter("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_INVALID_CONFIG);
    }
}

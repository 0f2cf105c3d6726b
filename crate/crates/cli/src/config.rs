//! JSON run configurations. Every file carries a `schema` key naming the
//! command and version; physical quantities carry unit suffixes.

use std::path::{Path, PathBuf};

use gcco_core::jitter::{GridLimits, JitterSpec, DEFAULT_MAX_HALF_WIDTH_UI, DEFAULT_STEP_UI};
use gcco_core::phase_noise::OscParams;
use gcco_core::sim::{EdgeDetectorConfig, OscillatorConfig, Pattern, SamplerConfig, SimConfig};
use gcco_core::stat_ber::{log_space, CdrStatConfig, EdgeModel, NOMINAL_PHASE};
use gcco_core::tolerance::{Bracket, ToleranceMask};
use gcco_core::RunDist;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub const STAT_BER_SCHEMA: &str = "gcco/stat-ber/1";
pub const JTOL_SCHEMA: &str = "gcco/jtol/1";
pub const FTOL_SCHEMA: &str = "gcco/ftol/1";
pub const PHASE_NOISE_SCHEMA: &str = "gcco/phase-noise/1";
pub const SIM_SCHEMA: &str = "gcco/sim/1";
pub const EYE_SCHEMA: &str = "gcco/eye/1";
pub const MASK_SCHEMA: &str = "gcco/mask/1";

/// A parsed configuration together with its canonical JSON form.
pub struct Loaded<T> {
    pub value: T,
    pub canonical: String,
    pub dir: PathBuf,
}

/// Reads `path`, checks its schema key and deserializes it.
pub fn load<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Loaded<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let json: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    match json.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => {}
        Some(s) => {
            return Err(CliError::Config(format!(
                "{}: schema is {s:?}, expected {schema:?}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Config(format!(
                "{}: missing schema key",
                path.display()
            )))
        }
    }
    // serde_json maps are ordered by key, so this form is canonical.
    let canonical = serde_json::to_string(&json).expect("JSON value serializes");
    let value = serde_json::from_value(json)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded {
        value,
        canonical,
        dir,
    })
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Sweep axis: an explicit list or a generated range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Log { log: AxisRange },
    Linear { linear: AxisRange },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Axis::Values(v) => Ok(v.clone()),
            Axis::Log { log } => log_space(log.lo, log.hi, log.n).map_err(config_err),
            Axis::Linear { linear: r } => {
                if r.n < 2 || !(r.hi > r.lo) {
                    return Err(CliError::Config(format!(
                        "invalid linear axis {}..{} x {}",
                        r.lo, r.hi, r.n
                    )));
                }
                Ok((0..r.n)
                    .map(|i| r.lo + (r.hi - r.lo) * i as f64 / (r.n - 1) as f64)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunDistConfig {
    TruncatedGeometric { p_extend: f64, max_cid: u32 },
    Prbs7,
    Fixed { run_length: usize },
    Weights { weights: Vec<f64> },
}

impl Default for RunDistConfig {
    fn default() -> Self {
        RunDistConfig::TruncatedGeometric {
            p_extend: 0.5,
            max_cid: 5,
        }
    }
}

impl RunDistConfig {
    fn build(&self) -> Result<RunDist, CliError> {
        match self {
            RunDistConfig::TruncatedGeometric { p_extend, max_cid } => {
                RunDist::truncated_geometric(*p_extend, *max_cid).map_err(config_err)
            }
            RunDistConfig::Prbs7 => Ok(RunDist::prbs7()),
            RunDistConfig::Fixed { run_length } => RunDist::fixed(*run_length).map_err(config_err),
            RunDistConfig::Weights { weights } => {
                RunDist::from_weights(weights).map_err(config_err)
            }
        }
    }
}

fn nominal_phase() -> f64 {
    NOMINAL_PHASE
}

fn default_step() -> f64 {
    DEFAULT_STEP_UI
}

fn default_half_width() -> f64 {
    DEFAULT_MAX_HALF_WIDTH_UI
}

/// Statistical-model inputs shared by `stat-ber`, `jtol` and `ftol`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub jitter: JitterSpec,
    #[serde(default)]
    pub freq_offset_eps: f64,
    #[serde(default)]
    pub run_dist: RunDistConfig,
    #[serde(default = "nominal_phase")]
    pub sampling_phase_ui: f64,
    #[serde(default)]
    pub edge_model: EdgeModel,
    #[serde(default = "default_step")]
    pub grid_step_ui: f64,
    #[serde(default = "default_half_width")]
    pub max_half_width_ui: f64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<CdrStatConfig, CliError> {
        let mut cfg = CdrStatConfig::new(
            self.jitter,
            self.freq_offset_eps,
            self.run_dist.build()?,
            self.sampling_phase_ui,
        );
        cfg.edge_model = self.edge_model;
        cfg.grid_step = self.grid_step_ui;
        cfg.limits = GridLimits {
            max_half_width: self.max_half_width_ui,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatBerFile {
    #[serde(rename = "schema")]
    _schema: String,
    pub model: ModelConfig,
    pub sj_freq_norm: Axis,
    pub sj_amp_pp_ui: Axis,
}

fn default_target() -> f64 {
    1e-12
}

fn default_amp_bracket() -> [f64; 2] {
    [0.0, 100.0]
}

fn default_eps_bracket() -> [f64; 2] {
    [0.0, 0.45]
}

/// Mask given inline or as a path relative to the configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    Inline { breakpoints: Vec<(f64, f64)> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskFile {
    #[allow(dead_code)]
    schema: String,
    #[serde(default)]
    #[allow(dead_code)]
    note: String,
    breakpoints: Vec<(f64, f64)>,
}

impl MaskSource {
    /// Resolves the mask; file masks also contribute their canonical text.
    pub fn build(&self, dir: &Path) -> Result<(ToleranceMask, Option<String>), CliError> {
        match self {
            MaskSource::Inline { breakpoints } => Ok((
                ToleranceMask::new(breakpoints.clone()).map_err(config_err)?,
                None,
            )),
            MaskSource::File { path } => {
                let loaded: Loaded<MaskFile> = load(&dir.join(path), MASK_SCHEMA)?;
                let mask = ToleranceMask::new(loaded.value.breakpoints).map_err(config_err)?;
                Ok((mask, Some(loaded.canonical)))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JtolFile {
    #[serde(rename = "schema")]
    _schema: String,
    pub model: ModelConfig,
    pub freq_norm: Axis,
    #[serde(default = "default_target")]
    pub target_ber: f64,
    #[serde(default = "default_amp_bracket")]
    pub amp_bracket_ui: [f64; 2],
    #[serde(default)]
    pub mask: Option<MaskSource>,
}

impl JtolFile {
    pub fn bracket(&self) -> Result<Bracket, CliError> {
        Bracket::new(self.amp_bracket_ui[0], self.amp_bracket_ui[1]).map_err(config_err)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtolFile {
    #[serde(rename = "schema")]
    _schema: String,
    pub model: ModelConfig,
    pub sampling_phases_ui: Vec<f64>,
    pub target_bers: Vec<f64>,
    #[serde(default = "default_eps_bracket")]
    pub eps_bracket: [f64; 2],
}

impl FtolFile {
    pub fn bracket(&self) -> Result<Bracket, CliError> {
        Bracket::new(self.eps_bracket[0], self.eps_bracket[1]).map_err(config_err)
    }
}

fn default_cid() -> u32 {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseFile {
    #[serde(rename = "schema")]
    _schema: String,
    pub osc: OscParams,
    pub i_ss_a: Axis,
    pub data_rate_hz: f64,
    #[serde(default = "default_cid")]
    pub cid: u32,
    #[serde(default = "nominal_phase")]
    pub phi_ui: f64,
    #[serde(default)]
    pub target_sigma_ui: Option<f64>,
}

fn default_bin_width() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    #[serde(rename = "schema")]
    _schema: String,
    pub data_rate_hz: f64,
    pub n_bits: usize,
    pub pattern: Pattern,
    #[serde(default)]
    pub jitter: JitterSpec,
    pub oscillator: OscillatorConfig,
    /// Delay-line delay in seconds; exclusive with `tau_periods`.
    #[serde(default)]
    pub tau_s: Option<f64>,
    /// Delay-line delay in oscillator periods.
    #[serde(default)]
    pub tau_periods: Option<f64>,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bin_width")]
    pub eye_bin_width_ui: f64,
    /// Also write the transition and sampling-instant logs.
    #[serde(default)]
    pub write_traces: bool,
    #[serde(default)]
    pub max_events: Option<u64>,
}

impl SimFile {
    pub fn build(&self, seed: u64) -> Result<SimConfig, CliError> {
        let tau = match (self.tau_s, self.tau_periods) {
            (Some(t), None) => t,
            (None, Some(f)) => {
                self.oscillator.validate().map_err(config_err)?;
                f * self.oscillator.period()
            }
            _ => {
                return Err(CliError::Config(
                    "exactly one of tau_s and tau_periods is required".into(),
                ))
            }
        };
        let cfg = SimConfig {
            data_rate_hz: self.data_rate_hz,
            n_bits: self.n_bits,
            pattern: self.pattern.clone(),
            jitter: self.jitter,
            oscillator: self.oscillator,
            edge_detector: EdgeDetectorConfig { tau },
            sampler: self.sampler,
            seed,
            record_traces: true,
            max_events: self.max_events,
        };
        cfg.validate().map_err(config_err)?;
        if !(self.eye_bin_width_ui > 0.0 && self.eye_bin_width_ui <= 1.0) {
            return Err(CliError::Config(
                "eye_bin_width_ui must lie in (0, 1]".into(),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeFile {
    #[serde(rename = "schema")]
    _schema: String,
    /// Transition log written by `sim`, relative to this file.
    pub transitions_csv: PathBuf,
    /// Sampling-instant log written by `sim`, relative to this file.
    pub samples_csv: PathBuf,
    pub data_rate_hz: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width_ui: f64,
}

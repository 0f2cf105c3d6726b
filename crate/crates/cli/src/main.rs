//! `gcco`: command-line front end of the CDR workbench.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcco_core::phase_noise::{required_iss, tradeoff_curve, IssBracket};
use gcco_core::sim::{eye_capture, eye_stats, resync_check, simulate, EyeHistogram, SimResult};
use gcco_core::stat_ber::ber_surface;
use gcco_core::tolerance::{ftol_search, ftol_search_negative, jtol_curve, mask_margin};
use serde::Serialize;

use config::{load, EyeFile, FtolFile, JtolFile, PhaseNoiseFile, SimFile, StatBerFile};
use output::{flag, manifest_beside, num, seconds, Csv, Run};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn runtime(e: gcco_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(name = "gcco", version, about = "Gated-oscillator CDR workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (directory for `sim`).
    #[arg(long)]
    out: PathBuf,
    /// Random seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// BER surface over sinusoidal-jitter frequency and amplitude.
    StatBer(Common),
    /// Event-driven simulation: eye histogram, resync and BER summary.
    Sim(Common),
    /// Jitter tolerance curve and mask margins.
    Jtol(Common),
    /// Frequency tolerance per sampling phase and target BER.
    Ftol(Common),
    /// Bias-current sweep of oscillator jitter and power.
    PhaseNoise(Common),
    /// Re-bins the transition log of a previous simulation.
    Eye(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::StatBer(c) => ("stat-ber", c),
        Command::Sim(c) => ("sim", c),
        Command::Jtol(c) => ("jtol", c),
        Command::Ftol(c) => ("ftol", c),
        Command::PhaseNoise(c) => ("phase-noise", c),
        Command::Eye(c) => ("eye", c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("gcco {name}: runtime error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::StatBer(c) => cmd_stat_ber(&c),
        Command::Sim(c) => cmd_sim(&c),
        Command::Jtol(c) => cmd_jtol(&c),
        Command::Ftol(c) => cmd_ftol(&c),
        Command::PhaseNoise(c) => cmd_phase_noise(&c),
        Command::Eye(c) => cmd_eye(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gcco {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_stat_ber(c: &Common) -> Result<(), CliError> {
    let cfg = load::<StatBerFile>(&c.config, config::STAT_BER_SCHEMA)?;
    let model = cfg.value.model.build()?;
    let freqs = cfg.value.sj_freq_norm.values()?;
    let amps = cfg.value.sj_amp_pp_ui.values()?;
    let mut run = Run::new("stat-ber", &cfg.canonical, c.seed.unwrap_or(0));
    let surface = ber_surface(&model, &freqs, &amps).map_err(|e| match e {
        gcco_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
        e => runtime(e),
    })?;
    let mut csv = Csv::new(&["sj_freq_norm", "sj_amp_pp_ui", "ber"]);
    for (f, a, b) in surface.rows() {
        csv.row(&[num(f), num(a), num(b)]);
    }
    run.write(&c.out, &csv.into_bytes())?;
    run.finish(&manifest_beside(&c.out))
}

fn cmd_jtol(c: &Common) -> Result<(), CliError> {
    let cfg = load::<JtolFile>(&c.config, config::JTOL_SCHEMA)?;
    let model = cfg.value.model.build()?;
    let freqs = cfg.value.freq_norm.values()?;
    let bracket = cfg.value.bracket()?;
    let mask = cfg
        .value
        .mask
        .as_ref()
        .map(|m| m.build(&cfg.dir))
        .transpose()?;
    let mut canonical = cfg.canonical.clone();
    if let Some((_, Some(mask_text))) = &mask {
        canonical.push_str(mask_text);
    }
    let mut run = Run::new("jtol", &canonical, c.seed.unwrap_or(0));
    let curve = jtol_curve(&model, &freqs, cfg.value.target_ber, bracket).map_err(|e| match e {
        gcco_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
        e => runtime(e),
    })?;
    let mut csv = Csv::new(&[
        "freq_norm",
        "jtol_amp_ui",
        "mask_amp_ui",
        "margin_ui",
        "pass",
        "unbounded",
    ]);
    match &mask {
        Some((mask, _)) => {
            for m in mask_margin(&curve, mask).map_err(runtime)? {
                csv.row(&[
                    num(m.freq_norm),
                    num(m.jtol_amp_pp),
                    num(m.mask_amp_pp),
                    num(m.margin),
                    flag(m.pass),
                    flag(m.unbounded),
                ]);
            }
        }
        None => {
            for p in &curve.points {
                csv.row(&[
                    num(p.freq_norm),
                    num(p.amp_pp),
                    String::new(),
                    String::new(),
                    String::new(),
                    flag(p.unbounded),
                ]);
            }
        }
    }
    run.write(&c.out, &csv.into_bytes())?;
    run.finish(&manifest_beside(&c.out))
}

fn cmd_ftol(c: &Common) -> Result<(), CliError> {
    let cfg = load::<FtolFile>(&c.config, config::FTOL_SCHEMA)?;
    let model = cfg.value.model.build()?;
    let bracket = cfg.value.bracket()?;
    if cfg.value.sampling_phases_ui.is_empty() || cfg.value.target_bers.is_empty() {
        return Err(CliError::Config(
            "sampling_phases_ui and target_bers must not be empty".into(),
        ));
    }
    let mut run = Run::new("ftol", &cfg.canonical, c.seed.unwrap_or(0));
    let mut csv = Csv::new(&[
        "sampling_phase_ui",
        "target_ber",
        "ftol_pos",
        "ftol_neg",
        "pos_unbounded",
        "neg_unbounded",
    ]);
    for &phi in &cfg.value.sampling_phases_ui {
        let m = model.with_phase(phi);
        m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for &target in &cfg.value.target_bers {
            let pos = ftol_search(&m, target, bracket).map_err(runtime)?;
            let neg = ftol_search_negative(&m, target, bracket).map_err(runtime)?;
            csv.row(&[
                num(phi),
                num(target),
                num(pos.eps),
                num(neg.eps),
                flag(pos.unbounded),
                flag(neg.unbounded),
            ]);
        }
    }
    run.write(&c.out, &csv.into_bytes())?;
    run.finish(&manifest_beside(&c.out))
}

#[derive(Serialize)]
struct RequiredIss {
    target_sigma_ui: f64,
    required_i_ss_a: f64,
}

fn cmd_phase_noise(c: &Common) -> Result<(), CliError> {
    let cfg = load::<PhaseNoiseFile>(&c.config, config::PHASE_NOISE_SCHEMA)?;
    let v = &cfg.value;
    v.osc
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let currents = v.i_ss_a.values()?;
    let mut run = Run::new("phase-noise", &cfg.canonical, c.seed.unwrap_or(0));
    let points = tradeoff_curve(&v.osc, &currents, v.data_rate_hz, v.cid, v.phi_ui)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut csv = Csv::new(&["i_ss_a", "power_w", "kappa_sqrt_s", "sigma_cid5_ui"]);
    for p in &points {
        csv.row(&[
            num(p.i_ss),
            num(p.power),
            num(p.kappa),
            num(p.sigma_cid5_ui),
        ]);
    }
    run.write(&c.out, &csv.into_bytes())?;
    if let Some(target) = v.target_sigma_ui {
        let i = required_iss(
            &v.osc,
            target,
            v.data_rate_hz,
            v.cid,
            v.phi_ui,
            IssBracket::default(),
        )
        .map_err(runtime)?;
        let path = c.out.with_file_name(format!(
            "{}.required_iss.json",
            c.out.file_stem().unwrap_or_default().to_string_lossy()
        ));
        run.write_json(
            &path,
            &RequiredIss {
                target_sigma_ui: target,
                required_i_ss_a: i,
            },
        )?;
    }
    run.finish(&manifest_beside(&c.out))
}

fn eye_csv(hist: &EyeHistogram) -> Vec<u8> {
    let mut csv = Csv::new(&["rel_time_ui", "level", "count"]);
    for (t, level, count) in hist.rows() {
        csv.row(&[num(t), flag(level), count.to_string()]);
    }
    csv.into_bytes()
}

#[derive(Serialize)]
struct SimSummary {
    bits_scored: u64,
    error_count: u64,
    missing_count: u64,
    wrong_count: u64,
    ber: f64,
    sample_count: u64,
    stage_jitter_clamps: u64,
    events: u64,
    period_s: f64,
    nominal_phase: f64,
    eye: Option<gcco_core::sim::EyeStats>,
}

fn summary(r: &SimResult) -> SimSummary {
    SimSummary {
        bits_scored: r.bits_scored(),
        error_count: r.error_count,
        missing_count: r.missing_count,
        wrong_count: r.wrong_count,
        ber: r.ber(),
        sample_count: r.sample_count,
        stage_jitter_clamps: r.stage_jitter_clamps,
        events: r.events,
        period_s: r.period,
        nominal_phase: r.nominal_phase,
        eye: eye_stats(r).ok(),
    }
}

fn cmd_sim(c: &Common) -> Result<(), CliError> {
    let cfg = load::<SimFile>(&c.config, config::SIM_SCHEMA)?;
    let seed = c.seed.unwrap_or(cfg.value.seed);
    let sim_cfg = cfg.value.build(seed)?;
    let mut run = Run::new("sim", &cfg.canonical, seed);
    let result = simulate(&sim_cfg).map_err(runtime)?;
    let out = &c.out;
    let hist = eye_capture(&result, cfg.value.eye_bin_width_ui).map_err(runtime)?;
    run.write(&out.join("eye.csv"), &eye_csv(&hist))?;
    run.write_json(&out.join("resync.json"), &resync_check(&result))?;
    run.write_json(&out.join("ber.json"), &summary(&result))?;
    if cfg.value.write_traces {
        let mut tr = Csv::new(&["time_s", "level"]);
        for &(t, level) in &result.transitions {
            tr.row(&[seconds(t), flag(level)]);
        }
        run.write(&out.join("transitions.csv"), &tr.into_bytes())?;
        let mut sm = Csv::new(&["time_s", "level"]);
        for (&t, &level) in result.sampling_instants.iter().zip(&result.rx_bits) {
            sm.row(&[seconds(t), flag(level)]);
        }
        run.write(&out.join("samples.csv"), &sm.into_bytes())?;
    }
    run.finish(&out.join("manifest.json"))
}

fn read_log(path: &Path) -> Result<Vec<(f64, bool)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("time_s,level") {
        return Err(CliError::Config(format!(
            "{}: expected header time_s,level",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || CliError::Config(format!("{}:{}: malformed row", path.display(), i + 2));
            let (t, l) = line.split_once(',').ok_or_else(bad)?;
            let t: f64 = t.parse().map_err(|_| bad())?;
            let l = match l {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            Ok((t, l))
        })
        .collect()
}

fn cmd_eye(c: &Common) -> Result<(), CliError> {
    let cfg = load::<EyeFile>(&c.config, config::EYE_SCHEMA)?;
    let v = &cfg.value;
    if !(v.data_rate_hz > 0.0) || !(v.bin_width_ui > 0.0 && v.bin_width_ui <= 1.0) {
        return Err(CliError::Config(
            "data_rate_hz must be > 0 and bin_width_ui in (0, 1]".into(),
        ));
    }
    let transitions = read_log(&cfg.dir.join(&v.transitions_csv))?;
    let samples = read_log(&cfg.dir.join(&v.samples_csv))?;
    let mut canonical = cfg.canonical.clone();
    for (t, l) in transitions.iter().chain(&samples) {
        canonical.push_str(&format!("{t},{l};"));
    }
    let mut run = Run::new("eye", &canonical, c.seed.unwrap_or(0));
    let result = SimResult {
        ui: 1.0 / v.data_rate_hz,
        sampling_instants: samples.iter().map(|s| s.0).collect(),
        rx_bits: samples.iter().map(|s| s.1).collect(),
        transitions,
        ..SimResult::default()
    };
    let hist = eye_capture(&result, v.bin_width_ui).map_err(runtime)?;
    run.write(&c.out, &eye_csv(&hist))?;
    run.finish(&manifest_beside(&c.out))
}

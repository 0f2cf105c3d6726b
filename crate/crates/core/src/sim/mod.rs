//! Event-driven behavioral simulation of the CDR: data source, edge detector
//! with delay line, gated four-stage ring oscillator and sampler.
//!
//! Signals are single-ended booleans. The edge detector output is
//! `EDET = NOT(D_in XOR DD_in)` with `DD_in` the data delayed by `tau`; the
//! sampler latches `DD_in`. While `EDET` is low the first ring stage is
//! forced low, and on its rising edge the ring restarts from the settled
//! frozen state.
//!
//! Scoring: every release of the oscillator anchors the sample count to the
//! bit currently on `DD_in`; the `n`-th sample after the release is intended
//! for bit `anchor + n`. A transmitted bit is in error when it receives no
//! sample or any sample of it reads the wrong level.

mod eye;
mod ring;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, invalid, Error, Result};
use crate::jitter::{EdgeJitter, JitterSpec};
use crate::stream::{rll_stream, Prbs7, Prbs7State};

pub use eye::{eye_capture, eye_stats, resync_check, EyeHistogram, EyeStats, ResyncStats};
use ring::{Applied, Ring};

/// Minimum spacing enforced between consecutive jittered data edges, in UI.
const MIN_EDGE_SPACING_UI: f64 = 1e-3;
/// Largest stage-jitter draw used as is; larger draws are clamped.
const STAGE_JITTER_LIMIT: f64 = 1.0;
const STAGE_JITTER_CLAMP: f64 = 0.5;

/// Gated current-controlled oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    /// Free-running frequency.
    #[serde(rename = "f_c_hz")]
    pub f_c: f64,
    /// Oscillator gain.
    #[serde(rename = "k_cco_hz_per_a", default)]
    pub k_cco: f64,
    /// Control current.
    #[serde(rename = "ctrl_a", default)]
    pub ctrl: f64,
    /// Control current mid-point.
    #[serde(rename = "cc0_a", default)]
    pub cc0: f64,
    /// Relative RMS jitter of each stage delay.
    #[serde(default)]
    pub jit_sigma: f64,
}

impl OscillatorConfig {
    pub fn at_frequency(f_eff: f64) -> Self {
        OscillatorConfig {
            f_c: f_eff,
            k_cco: 0.0,
            ctrl: 0.0,
            cc0: 0.0,
            jit_sigma: 0.0,
        }
    }

    pub fn with_jitter(mut self, jit_sigma: f64) -> Self {
        self.jit_sigma = jit_sigma;
        self
    }

    /// Effective oscillation frequency.
    pub fn f_eff(&self) -> f64 {
        self.f_c + self.k_cco * (self.ctrl - self.cc0)
    }

    /// Oscillation period.
    pub fn period(&self) -> f64 {
        1.0 / self.f_eff()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_c_hz", self.f_c),
            ("k_cco_hz_per_a", self.k_cco),
            ("ctrl_a", self.ctrl),
            ("cc0_a", self.cc0),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        check_positive("f_eff", self.f_eff())?;
        check_non_negative("jit_sigma", self.jit_sigma)
    }
}

/// Draws one stage delay `(1 + g) / (8 f_eff)` with `g ~ N(0, jit_sigma)`.
/// Draws with `|g| >= 1` are replaced by `±0.5`; the flag reports it.
pub fn stage_delay<R: Rng + ?Sized>(osc: &OscillatorConfig, rng: &mut R) -> (f64, bool) {
    let nominal = 1.0 / (8.0 * osc.f_eff());
    if osc.jit_sigma == 0.0 {
        return (nominal, false);
    }
    let z: f64 = StandardNormal.sample(rng);
    let g = osc.jit_sigma * z;
    if g.abs() >= STAGE_JITTER_LIMIT {
        (nominal * (1.0 + STAGE_JITTER_CLAMP.copysign(g)), true)
    } else {
        (nominal * (1.0 + g), false)
    }
}

/// Accumulated sampling-clock jitter at the fifth bit after a release, in UI,
/// for per-stage jitter `jit_sigma`, frequency offset `eps` and sampling
/// phase `phi`.
pub fn ckj_from_stage_jitter(jit_sigma: f64, eps: f64, phi: f64) -> f64 {
    jit_sigma * (1.0 + eps) * ((4.0 + phi) / 8.0).sqrt()
}

/// Inverse of [`ckj_from_stage_jitter`].
pub fn stage_jitter_from_ckj(ckj_rms_cid5: f64, eps: f64, phi: f64) -> f64 {
    ckj_rms_cid5 / ((1.0 + eps) * ((4.0 + phi) / 8.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDetectorConfig {
    /// Delay-line delay.
    #[serde(rename = "tau_s")]
    pub tau: f64,
}

impl EdgeDetectorConfig {
    /// Delay of `fraction` oscillator periods.
    pub fn from_period_fraction(fraction: f64, osc: &OscillatorConfig) -> Self {
        EdgeDetectorConfig {
            tau: fraction * osc.period(),
        }
    }
}

/// Clock source of the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Ideal clock restarted at each release, first edge `phi` periods later.
    Phase {
        #[serde(rename = "phi_ui")]
        phi: f64,
    },
    /// Rising edges of a ring stage output. `tap_stage` counts 1..=4; the
    /// non-inverted tap of stage 4 is the plain clock output.
    Structural { tap_stage: u8, inverted: bool },
}

impl SamplerConfig {
    pub const CK_OUT: SamplerConfig = SamplerConfig::Structural {
        tap_stage: 4,
        inverted: false,
    };
    pub const STAGE3_INVERTED: SamplerConfig = SamplerConfig::Structural {
        tap_stage: 3,
        inverted: true,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplerConfig::Phase { phi } if !(phi > 0.0 && phi < 1.0) => {
                Err(invalid("phi_ui", format!("must lie in (0, 1), got {phi}")))
            }
            SamplerConfig::Structural { tap_stage, .. } if !(1..=4).contains(&tap_stage) => Err(
                invalid("tap_stage", format!("must lie in 1..=4, got {tap_stage}")),
            ),
            _ => Ok(()),
        }
    }

    /// Nominal delay of the first sampling edge after a release, in
    /// oscillator periods.
    pub fn nominal_phase(&self) -> f64 {
        match *self {
            SamplerConfig::Phase { phi } => phi,
            SamplerConfig::Structural {
                tap_stage,
                inverted,
            } => {
                // First rising edge, in eighths of a period, of the stage
                // output (inverted) and its complement (plain) after release.
                let (inv, plain) = match tap_stage {
                    1 => (1, 5),
                    2 => (6, 2),
                    3 => (3, 7),
                    _ => (8, 4),
                };
                (if inverted { inv } else { plain }) as f64 / 8.0
            }
        }
    }
}

/// Transmitted bit pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pattern {
    Prbs7 {
        #[serde(default = "default_prbs_register")]
        register: u8,
    },
    Rll {
        max_cid: u32,
        p_extend: f64,
    },
    Bits {
        bits: Vec<bool>,
    },
}

fn default_prbs_register() -> u8 {
    0x7f
}

impl Pattern {
    pub fn prbs7() -> Self {
        Pattern::Prbs7 {
            register: default_prbs_register(),
        }
    }

    pub fn generate(&self, n_bits: usize, seed: u64) -> Result<Vec<bool>> {
        match self {
            Pattern::Prbs7 { register } => Ok(Prbs7::new(Prbs7State::new(*register)?)
                .take(n_bits)
                .collect()),
            Pattern::Rll { max_cid, p_extend } => rll_stream(*max_cid, *p_extend, seed, n_bits),
            Pattern::Bits { bits } => {
                if bits.is_empty() {
                    return Err(invalid("bits", "must not be empty"));
                }
                Ok(bits.iter().copied().cycle().take(n_bits).collect())
            }
        }
    }
}

fn default_true() -> bool {
    true
}

/// Complete simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub data_rate_hz: f64,
    pub n_bits: usize,
    pub pattern: Pattern,
    /// Data edge jitter; the oscillator term is ignored here, oscillator
    /// jitter comes from `OscillatorConfig::jit_sigma`.
    #[serde(default)]
    pub jitter: JitterSpec,
    pub oscillator: OscillatorConfig,
    pub edge_detector: EdgeDetectorConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Keep sampling instants, transitions and releases in the result.
    #[serde(default = "default_true")]
    pub record_traces: bool,
    /// Event budget; defaults to a generous multiple of the bit count.
    #[serde(default)]
    pub max_events: Option<u64>,
}

impl SimConfig {
    /// Jitter-free setup: oscillator at `f_eff`, `tau` given as a fraction of
    /// the oscillator period.
    pub fn new(
        data_rate_hz: f64,
        f_eff: f64,
        tau_periods: f64,
        sampler: SamplerConfig,
        n_bits: usize,
    ) -> Self {
        let oscillator = OscillatorConfig::at_frequency(f_eff);
        SimConfig {
            data_rate_hz,
            n_bits,
            pattern: Pattern::prbs7(),
            jitter: JitterSpec::default(),
            oscillator,
            edge_detector: EdgeDetectorConfig::from_period_fraction(tau_periods, &oscillator),
            sampler,
            seed: 0,
            record_traces: true,
            max_events: None,
        }
    }

    pub fn ui(&self) -> f64 {
        1.0 / self.data_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("data_rate_hz", self.data_rate_hz)?;
        if self.n_bits < 2 {
            return Err(invalid("n_bits", "must be >= 2"));
        }
        self.jitter.validate()?;
        self.oscillator.validate()?;
        check_positive("tau_s", self.edge_detector.tau)?;
        self.sampler.validate()
    }

    fn event_budget(&self) -> u64 {
        self.max_events
            .unwrap_or(64 * self.n_bits as u64 + 1_000_000)
    }
}

/// Outcome of one simulation run. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimResult {
    pub ui: f64,
    pub period: f64,
    /// Nominal first-edge delay of the sampling clock after a release, in
    /// periods.
    pub nominal_phase: f64,
    pub tx_bits: Vec<bool>,
    /// Scored bits: `[first, end)` of `tx_bits`.
    pub scored_range: (usize, usize),
    pub error_count: u64,
    /// Scored bits that received no sample.
    pub missing_count: u64,
    /// Scored bits with at least one wrong sample.
    pub wrong_count: u64,
    pub sample_count: u64,
    pub stage_jitter_clamps: u64,
    pub events: u64,
    /// Levels latched at each sampling edge.
    pub rx_bits: Vec<bool>,
    pub sampling_instants: Vec<f64>,
    /// Transitions of the sampler input `DD_in`: `(time, new level)`.
    pub transitions: Vec<(f64, bool)>,
    /// Oscillator releases (rising edges of `EDET`).
    pub releases: Vec<f64>,
    /// Per release: whether the freeze had not yet settled through the ring
    /// (always false for the phase-mode sampler).
    pub early_releases: Vec<bool>,
}

impl SimResult {
    pub fn bits_scored(&self) -> u64 {
        (self.scored_range.1 - self.scored_range.0) as u64
    }

    pub fn ber(&self) -> f64 {
        match self.bits_scored() {
            0 => 0.0,
            n => self.error_count as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    DataEdge { bit: usize },
    DelayedEdge { bit: usize },
    Stage { stage: usize, id: u64 },
    PhaseTick { generation: u64 },
}

impl Event {
    /// Tie-break order: data, edge detector, ring stages, sampler.
    fn priority(&self) -> u8 {
        match *self {
            Event::DataEdge { .. } => 0,
            Event::DelayedEdge { .. } => 1,
            Event::Stage { stage, .. } => 2 + stage as u8,
            Event::PhaseTick { .. } => 6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    time: f64,
    priority: u8,
    seq: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed so that the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.priority.cmp(&self.priority))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Queued>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(Queued {
            time,
            priority: event.priority(),
            seq: self.seq,
            event,
        });
    }

    fn pop(&mut self) -> Option<(f64, Event)> {
        self.heap.pop().map(|q| (q.time, q.event))
    }
}

const SAMPLED: u8 = 1;
const WRONG: u8 = 2;

struct Simulator<'a> {
    cfg: &'a SimConfig,
    ui: f64,
    period: f64,
    tau: f64,
    bits: Vec<bool>,
    queue: Queue,
    edge_jitter: EdgeJitter,
    osc_rng: ChaCha8Rng,
    last_edge: f64,
    next_transition: usize,
    d_in: bool,
    d_del: bool,
    dd_bit: usize,
    edet: bool,
    ring: Ring,
    phase_generation: u64,
    anchor: Option<usize>,
    samples_since_release: usize,
    first_anchor: Option<usize>,
    status: Vec<u8>,
    result: SimResult,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pattern_seed = seeder.random::<u64>();
        let jitter_seed = seeder.random::<u64>();
        let osc_seed = seeder.random::<u64>();
        let bits = cfg.pattern.generate(cfg.n_bits, pattern_seed)?;
        let ui = cfg.ui();
        let period = cfg.oscillator.period();
        let first = bits[0];
        let result = SimResult {
            ui,
            period,
            nominal_phase: cfg.sampler.nominal_phase(),
            ..SimResult::default()
        };
        Ok(Simulator {
            cfg,
            ui,
            period,
            tau: cfg.edge_detector.tau,
            status: vec![0; bits.len()],
            bits,
            queue: Queue::default(),
            edge_jitter: EdgeJitter::new(cfg.jitter, cfg.data_rate_hz, jitter_seed)?,
            osc_rng: ChaCha8Rng::seed_from_u64(osc_seed),
            last_edge: f64::NEG_INFINITY,
            next_transition: 1,
            d_in: first,
            d_del: first,
            dd_bit: 0,
            edet: true,
            ring: Ring::frozen(),
            phase_generation: 0,
            anchor: None,
            samples_since_release: 0,
            first_anchor: None,
            result,
        })
    }

    fn schedule_next_data_edge(&mut self) {
        let bits = &self.bits;
        let mut i = self.next_transition;
        while i < bits.len() && bits[i] == bits[i - 1] {
            i += 1;
        }
        self.next_transition = i + 1;
        if i >= bits.len() {
            return;
        }
        let nominal = i as f64 * self.ui;
        let jitter_ui = self.edge_jitter.sample(nominal);
        let t = (nominal + jitter_ui * self.ui).max(self.last_edge + MIN_EDGE_SPACING_UI * self.ui);
        self.last_edge = t;
        self.queue.push(t, Event::DataEdge { bit: i });
    }

    fn stage_delay(&mut self) -> f64 {
        let (d, clamped) = stage_delay(&self.cfg.oscillator, &mut self.osc_rng);
        if clamped {
            self.result.stage_jitter_clamps += 1;
        }
        d
    }

    /// Delay of `m` stage equivalents of the ideal phase-mode clock.
    fn phase_interval(&mut self, m: f64) -> f64 {
        let nominal = m * self.period / 8.0;
        let jit = self.cfg.oscillator.jit_sigma;
        if jit == 0.0 {
            return nominal;
        }
        let z: f64 = StandardNormal.sample(&mut self.osc_rng);
        let g = jit * z / m.sqrt();
        if g.abs() >= STAGE_JITTER_LIMIT {
            self.result.stage_jitter_clamps += 1;
            nominal * (1.0 + STAGE_JITTER_CLAMP.copysign(g))
        } else {
            nominal * (1.0 + g)
        }
    }

    fn evaluate_stage(&mut self, t: f64, stage: usize) {
        let value = self.ring.evaluate(stage, self.edet);
        let delay = self.stage_delay();
        let at = t + delay;
        let id = self.ring.schedule(stage, at, value);
        self.queue.push(at, Event::Stage { stage, id });
    }

    fn set_edet(&mut self, t: f64) {
        let edet = self.d_in == self.d_del;
        if edet == self.edet {
            return;
        }
        self.edet = edet;
        if edet {
            self.release(t);
        }
        match self.cfg.sampler {
            SamplerConfig::Structural { .. } => self.evaluate_stage(t, 0),
            SamplerConfig::Phase { phi } => {
                if edet {
                    self.phase_generation += 1;
                    let dt = self.phase_interval(8.0 * phi);
                    self.queue.push(
                        t + dt,
                        Event::PhaseTick {
                            generation: self.phase_generation,
                        },
                    );
                }
            }
        }
    }

    fn release(&mut self, t: f64) {
        self.anchor = Some(self.dd_bit);
        self.first_anchor.get_or_insert(self.dd_bit);
        self.samples_since_release = 0;
        if self.cfg.record_traces {
            let early = matches!(self.cfg.sampler, SamplerConfig::Structural { .. })
                && !self.ring.is_settled_frozen();
            self.result.releases.push(t);
            self.result.early_releases.push(early);
        }
    }

    fn sample(&mut self, t: f64) {
        let level = self.d_del;
        self.result.sample_count += 1;
        if self.cfg.record_traces {
            self.result.rx_bits.push(level);
            self.result.sampling_instants.push(t);
        }
        if let Some(anchor) = self.anchor {
            let bit = anchor + self.samples_since_release;
            self.samples_since_release += 1;
            if let Some(expected) = self.bits.get(bit) {
                self.status[bit] |= SAMPLED;
                if *expected != level {
                    self.status[bit] |= WRONG;
                }
            }
        }
    }

    fn tap_rises(&self, stage: usize, value: bool) -> bool {
        match self.cfg.sampler {
            SamplerConfig::Structural {
                tap_stage,
                inverted,
            } => stage + 1 == tap_stage as usize && value == inverted,
            SamplerConfig::Phase { .. } => false,
        }
    }

    fn run(mut self) -> Result<SimResult> {
        let budget = self.cfg.event_budget();
        let t_end = (self.bits.len() as f64 + 2.0) * self.ui + self.tau + 2.0 * self.period;
        self.schedule_next_data_edge();
        match self.cfg.sampler {
            SamplerConfig::Structural { .. } => self.evaluate_stage(0.0, 0),
            SamplerConfig::Phase { phi } => {
                let dt = self.phase_interval(8.0 * phi);
                self.queue.push(dt, Event::PhaseTick { generation: 0 });
            }
        }
        while let Some((t, event)) = self.queue.pop() {
            if t > t_end {
                break;
            }
            self.result.events += 1;
            if self.result.events > budget {
                return Err(Error::SimulationOverflow(format!(
                    "more than {budget} events for {} bits",
                    self.bits.len()
                )));
            }
            match event {
                Event::DataEdge { bit } => {
                    self.d_in = self.bits[bit];
                    self.queue.push(t + self.tau, Event::DelayedEdge { bit });
                    self.schedule_next_data_edge();
                    self.set_edet(t);
                }
                Event::DelayedEdge { bit } => {
                    self.d_del = self.bits[bit];
                    self.dd_bit = bit;
                    if self.cfg.record_traces {
                        self.result.transitions.push((t, self.d_del));
                    }
                    self.set_edet(t);
                }
                Event::Stage { stage, id } => {
                    if let Applied::Changed(value) = self.ring.apply(stage, id) {
                        if self.tap_rises(stage, value) {
                            self.sample(t);
                        }
                        self.evaluate_stage(t, (stage + 1) % 4);
                    }
                }
                Event::PhaseTick { generation } => {
                    if generation == self.phase_generation {
                        self.sample(t);
                        let dt = self.phase_interval(8.0);
                        self.queue.push(t + dt, Event::PhaseTick { generation });
                    }
                }
            }
        }
        Ok(self.finish())
    }

    fn finish(mut self) -> SimResult {
        // Bits up to the last sampler-side transition have been fully
        // exposed to sampling.
        let start = self.first_anchor.unwrap_or(0);
        let end = if self.first_anchor.is_some() {
            self.dd_bit.max(start)
        } else {
            0
        };
        let mut r = self.result;
        r.scored_range = (start, end);
        for &s in &self.status[start..end] {
            if s & SAMPLED == 0 {
                r.missing_count += 1;
            }
            if s & WRONG != 0 {
                r.wrong_count += 1;
            }
            if s & SAMPLED == 0 || s & WRONG != 0 {
                r.error_count += 1;
            }
        }
        r.tx_bits = std::mem::take(&mut self.bits);
        r
    }
}

/// Runs one simulation.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    Simulator::new(cfg)?.run()
}

//! Semi-analytic bit-error-rate estimation for the gated-oscillator CDR.
//!
//! The oscillator restarts on every data edge, so each run of identical bits
//! is an independent experiment. Time is measured in UI from the edge that
//! opened the run. The `k`-th sampling instant sits at
//! `t_s(k) = (k - 1 + phi)(1 + eps)` and carries accumulated oscillator jitter
//! whose variance grows linearly with `t_s(k)`. The run ends at the closing
//! edge, nominally `L` UI later and displaced by the data jitter accumulated
//! between the opening and closing edges.
//!
//! Error mechanisms per run of length `L`:
//!
//! * **late**: sample `k <= L` falls after the closing edge and reads the next
//!   bit (or is swallowed by the resynchronization);
//! * **early**: sample `k` falls before the opening edge;
//! * **insertion**: an extra sample `k > L` still fires before the closing
//!   edge and is attributed to the first bit of the next run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, invalid, Error, Result};
use crate::jitter::{
    convolve_with_limits, dj_pdf, sj_differential_pdf, tail_prob_with_sigma, GridLimits,
    JitterSpec, Pdf, Side, DEFAULT_STEP_UI,
};
use crate::special::q_function;
use crate::stream::RunDist;

/// Sampling phase of the plain ring output: half a clock period after the
/// synchronizing edge.
pub const NOMINAL_PHASE: f64 = 0.5;
/// Sampling phase of the tap one stage delay (an eighth of the period)
/// earlier, which recentres the eye when the right edge accumulates drift.
pub const IMPROVED_PHASE: f64 = 0.375;
/// Bit position at which the oscillator jitter is specified.
pub const REFERENCE_CID: u32 = 5;
/// Extra samples past the end of a run that are checked for insertion.
const INSERTION_TERMS: u32 = 3;

/// How data jitter displaces the closing edge relative to the opening edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeModel {
    /// The opening edge is the jitter-free time origin; the closing edge
    /// carries the full per-edge DJ and RJ.
    #[default]
    ClosingEdge,
    /// Both edges jitter independently: DJ enters as the difference of two
    /// uniform draws and RJ with sqrt(2) times the per-edge sigma.
    Differential,
}

/// Inputs of the statistical model.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrStatConfig {
    pub jitter: JitterSpec,
    /// Relative oscillator period error: `T = (1 + eps) UI`.
    pub freq_offset_eps: f64,
    pub run_dist: RunDist,
    /// Sampling phase `phi` in UI after the synchronizing edge.
    pub sampling_phase: f64,
    pub target_ber: f64,
    pub edge_model: EdgeModel,
    pub grid_step: f64,
    pub limits: GridLimits,
}

impl CdrStatConfig {
    pub fn new(
        jitter: JitterSpec,
        freq_offset_eps: f64,
        run_dist: RunDist,
        sampling_phase: f64,
    ) -> Self {
        CdrStatConfig {
            jitter,
            freq_offset_eps,
            run_dist,
            sampling_phase,
            target_ber: 1e-12,
            edge_model: EdgeModel::ClosingEdge,
            grid_step: DEFAULT_STEP_UI,
            limits: GridLimits::default(),
        }
    }

    /// Reference jitter budget, default 8b/10b-like run statistics, nominal
    /// sampling phase.
    pub fn reference(freq_offset_eps: f64) -> Self {
        Self::new(
            JitterSpec::reference(),
            freq_offset_eps,
            RunDist::truncated_geometric(0.5, 5).expect("valid run distribution"),
            NOMINAL_PHASE,
        )
    }

    pub fn with_sj(&self, amp_pp: f64, freq_norm: f64) -> Self {
        let mut cfg = self.clone();
        cfg.jitter = cfg.jitter.with_sj(amp_pp, freq_norm);
        cfg
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        CdrStatConfig {
            freq_offset_eps: eps,
            ..self.clone()
        }
    }

    pub fn with_phase(&self, phi: f64) -> Self {
        CdrStatConfig {
            sampling_phase: phi,
            ..self.clone()
        }
    }

    pub fn with_edge_model(&self, edge_model: EdgeModel) -> Self {
        CdrStatConfig {
            edge_model,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.jitter.validate()?;
        let eps = self.freq_offset_eps;
        if !(eps.abs() < 0.5) {
            return Err(invalid(
                "freq_offset_eps",
                format!("|eps| must be < 0.5, got {eps}"),
            ));
        }
        let phi = self.sampling_phase;
        if !(phi > 0.0 && phi < 1.0) {
            return Err(invalid(
                "sampling_phase_ui",
                format!("must lie in (0, 1), got {phi}"),
            ));
        }
        check_positive("grid_step_ui", self.grid_step)?;
        check_non_negative("target_ber", self.target_ber)?;
        Ok(())
    }
}

/// Nominal instant of the `k`-th sample after the synchronizing edge, in UI.
pub fn sampling_time(cfg: &CdrStatConfig, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "bit index starts at 1"));
    }
    Ok(sample_instant(cfg, k))
}

fn sample_instant(cfg: &CdrStatConfig, k: u32) -> f64 {
    (k as f64 - 1.0 + cfg.sampling_phase) * (1.0 + cfg.freq_offset_eps)
}

/// RMS oscillator jitter at sample `k`: the reference value scaled by the
/// square root of elapsed time relative to sample [`REFERENCE_CID`].
pub fn oscillator_sigma(cfg: &CdrStatConfig, k: u32) -> f64 {
    let ckj = cfg.jitter.ckj_rms_cid5;
    if ckj == 0.0 {
        return 0.0;
    }
    ckj * (sample_instant(cfg, k) / sample_instant(cfg, REFERENCE_CID)).sqrt()
}

/// Timing error of sample `k` in a run of `run_len` bits, relative to its
/// nominal instant.
pub fn phase_error_pdf(cfg: &CdrStatConfig, run_len: u32, k: u32) -> Result<Pdf> {
    if k == 0 || k > run_len {
        return Err(invalid("k", format!("must lie in 1..={run_len}, got {k}")));
    }
    Pdf::gaussian(oscillator_sigma(cfg, k), cfg.grid_step)
}

/// Displacement of the closing edge of a `run_len`-bit run relative to the
/// opening edge: deterministic and random data jitter according to
/// `cfg.edge_model` plus the sinusoidal jitter accumulated across the run.
pub fn closing_edge_pdf(cfg: &CdrStatConfig, run_len: u32) -> Result<Pdf> {
    closing_edge_from(cfg, &edge_dj_pdf(cfg)?, run_len)
}

fn edge_dj_pdf(cfg: &CdrStatConfig) -> Result<Pdf> {
    let dj = dj_pdf(cfg.jitter.dj_pp, cfg.grid_step)?;
    match cfg.edge_model {
        EdgeModel::ClosingEdge => Ok(dj),
        EdgeModel::Differential => convolve_with_limits(&dj, &dj.reflect(), cfg.limits),
    }
}

fn closing_edge_from(cfg: &CdrStatConfig, dj: &Pdf, run_len: u32) -> Result<Pdf> {
    let sj = sj_differential_pdf(
        cfg.jitter.sj_amp_pp,
        cfg.jitter.sj_freq_norm,
        run_len,
        cfg.grid_step,
    )?;
    let combined = convolve_with_limits(dj, &sj, cfg.limits)?;
    let rj = match cfg.edge_model {
        EdgeModel::ClosingEdge => cfg.jitter.rj_rms,
        EdgeModel::Differential => std::f64::consts::SQRT_2 * cfg.jitter.rj_rms,
    };
    Ok(combined.with_gaussian(rj))
}

/// Error probabilities per transmitted bit, split by mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BerTerms {
    /// Last bit of a run sampled after the closing edge.
    pub late_last: f64,
    /// Earlier bits of a run sampled after the closing edge.
    pub late_interior: f64,
    /// Samples before the opening edge.
    pub early: f64,
    /// Extra samples before the closing edge.
    pub insertion: f64,
}

impl BerTerms {
    pub fn total(&self) -> f64 {
        (self.late_last + self.late_interior + self.early + self.insertion).clamp(0.0, 0.5)
    }
}

/// Per-mechanism error probabilities for `cfg`.
pub fn ber_terms(cfg: &CdrStatConfig) -> Result<BerTerms> {
    cfg.validate()?;
    let dj = edge_dj_pdf(cfg)?;

    let mut sum = BerTerms::default();
    for (run_len, p_run) in cfg.run_dist.iter() {
        let closing = closing_edge_from(cfg, &dj, run_len)?;
        let base_sigma = closing.gaussian_sigma();
        let end = run_len as f64;
        for k in 1..=run_len + INSERTION_TERMS {
            let t = sample_instant(cfg, k);
            let osc = oscillator_sigma(cfg, k);
            let sigma = base_sigma.hypot(osc);
            if k <= run_len {
                // Late: t + osc > L + dJ  <=>  dJ - osc < t - L.
                let late = tail_prob_with_sigma(&closing, t - end, Side::Below, sigma);
                if k == run_len {
                    sum.late_last += p_run * late;
                } else {
                    sum.late_interior += p_run * late;
                }
                let early = if osc > 0.0 {
                    q_function(t / osc)
                } else if t < 0.0 {
                    1.0
                } else {
                    0.0
                };
                sum.early += p_run * early;
            } else {
                // Insertion: t + osc < L + dJ  <=>  dJ - osc > t - L.
                sum.insertion +=
                    p_run * tail_prob_with_sigma(&closing, t - end, Side::Above, sigma);
            }
        }
    }
    let mean_len = cfg.run_dist.mean_len();
    Ok(BerTerms {
        late_last: sum.late_last / mean_len,
        late_interior: sum.late_interior / mean_len,
        early: sum.early / mean_len,
        insertion: sum.insertion / mean_len,
    })
}

/// Bit error ratio for `cfg`, clamped to `[0, 0.5]`.
pub fn ber_estimate(cfg: &CdrStatConfig) -> Result<f64> {
    Ok(ber_terms(cfg)?.total())
}

/// BER over a grid of sinusoidal-jitter frequencies and amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerSurface {
    pub sj_freq_norm: Vec<f64>,
    pub sj_amp_pp: Vec<f64>,
    /// `ber[i][j]` is the BER at `sj_freq_norm[i]`, `sj_amp_pp[j]`.
    pub ber: Vec<Vec<f64>>,
}

impl BerSurface {
    /// `(freq, amp, ber)` rows in frequency-major order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.sj_freq_norm
            .iter()
            .enumerate()
            .flat_map(move |(i, &f)| {
                self.sj_amp_pp
                    .iter()
                    .enumerate()
                    .map(move |(j, &a)| (f, a, self.ber[i][j]))
            })
    }
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(invalid(name, "must not be empty"));
    }
    if axis.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(name, "values must be finite and >= 0"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

/// Evaluates [`ber_estimate`] on every `(freq, amp)` pair. The sinusoidal
/// jitter in `cfg` is overridden per point.
pub fn ber_surface(cfg: &CdrStatConfig, sj_freqs: &[f64], sj_amps: &[f64]) -> Result<BerSurface> {
    check_axis("sj_freq_norm", sj_freqs)?;
    check_axis("sj_amp_pp_ui", sj_amps)?;
    let points: Vec<(f64, f64)> = sj_freqs
        .iter()
        .flat_map(|&f| sj_amps.iter().map(move |&a| (f, a)))
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(f, a)| ber_estimate(&cfg.with_sj(a, f)))
        .collect::<Result<_>>()?;
    let ber = values.chunks(sj_amps.len()).map(<[f64]>::to_vec).collect();
    Ok(BerSurface {
        sj_freq_norm: sj_freqs.to_vec(),
        sj_amp_pp: sj_amps.to_vec(),
        ber,
    })
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    check_positive("lo", lo)?;
    check_positive("hi", hi)?;
    if n < 2 || hi <= lo {
        return Err(Error::BracketInvalid { lo, hi });
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(eps: f64, phi: f64) -> CdrStatConfig {
        CdrStatConfig::new(JitterSpec::default(), eps, RunDist::fixed(5).unwrap(), phi)
    }

    #[test]
    fn sampling_time_examples() {
        assert_eq!(sampling_time(&clean(0.0, 0.5), 1).unwrap(), 0.5);
        assert!((sampling_time(&clean(0.01, 0.5), 5).unwrap() - 4.545).abs() < 1e-12);
        assert_eq!(sampling_time(&clean(0.0, 0.625), 5).unwrap(), 4.625);
        assert!(sampling_time(&clean(0.0, 0.5), 0).is_err());
    }

    #[test]
    fn phase_error_examples() {
        let zero = phase_error_pdf(&clean(0.0, 0.5), 5, 3).unwrap();
        assert_eq!(zero.variance(), 0.0);
        let mut cfg = clean(0.0, 0.5);
        cfg.jitter.ckj_rms_cid5 = 0.01;
        let at5 = phase_error_pdf(&cfg, 5, 5).unwrap();
        assert!((at5.std_dev() - 0.01).abs() < 1e-15);
        let at1 = phase_error_pdf(&cfg, 5, 1).unwrap();
        assert!((at1.std_dev() - 0.01 * (0.5f64 / 4.5).sqrt()).abs() < 1e-15);
        assert!(phase_error_pdf(&cfg, 5, 6).is_err());
        assert!(phase_error_pdf(&cfg, 5, 0).is_err());
    }

    #[test]
    fn jitter_free_margin() {
        assert_eq!(ber_estimate(&clean(0.0, 0.5)).unwrap(), 0.0);
        assert_eq!(ber_estimate(&clean(0.11, 0.5)).unwrap(), 0.0);
        assert!(ber_estimate(&clean(0.1125, 0.5)).unwrap() > 0.0);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(ber_estimate(&clean(0.5, 0.5)).is_err());
        assert!(ber_estimate(&clean(0.0, 1.0)).is_err());
        assert!(ber_estimate(&clean(0.0, 0.0)).is_err());
    }

    #[test]
    fn surface_axes_validated() {
        let cfg = clean(0.0, 0.5);
        assert!(ber_surface(&cfg, &[], &[0.1]).is_err());
        assert!(ber_surface(&cfg, &[0.2, 0.1], &[0.1]).is_err());
        assert!(ber_surface(&cfg, &[0.1], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e-4, 1.0, 5).unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[0] - 1e-4).abs() < 1e-18);
        assert_eq!(v[4], 1.0);
        assert!((v[2] - 1e-2).abs() < 1e-15);
    }
}

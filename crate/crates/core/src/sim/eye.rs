//! Clock-aligned eye capture and resynchronization diagnostics.

use serde::{Deserialize, Serialize};

use super::SimResult;
use crate::error::{check_positive, Error, Result};

/// Tolerated deviation of the first post-release clock edge, in UI.
pub const RESYNC_TOLERANCE_UI: f64 = 0.1;
/// Tail fraction defining the inner eye edges in [`EyeStats`].
pub const EYE_EDGE_QUANTILE: f64 = 1e-3;

/// Histogram of sampler-input transitions over the time since the most
/// recent sampling edge (modulo one UI) and the level after the transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeHistogram {
    pub bin_width: f64,
    /// `counts[level][bin]`, bin `i` centred on `i w` UI.
    pub counts: [Vec<u64>; 2],
    /// Transitions without a synchronized sampling edge before them.
    pub skipped: u64,
}

impl EyeHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts[0].len()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `(bin center, level, count)` rows, level-major.
    pub fn rows(&self) -> impl Iterator<Item = (f64, bool, u64)> + '_ {
        [false, true].into_iter().flat_map(move |level| {
            self.counts[level as usize]
                .iter()
                .enumerate()
                .map(move |(i, &c)| (self.bin_center(i), level, c))
        })
    }
}

fn require_samples(result: &SimResult) -> Result<()> {
    if result.sampling_instants.is_empty() {
        return Err(Error::EmptyResult("no sampling edges recorded".into()));
    }
    Ok(())
}

/// Index of the last sampling instant strictly before `t`, provided it is
/// not earlier than the first transition. Samples before that come from the
/// free-running start-up clock.
fn previous_sample(result: &SimResult, t: f64) -> Option<usize> {
    let instants = &result.sampling_instants;
    let first = result.transitions.first()?.0;
    let i = instants.partition_point(|&s| s < t).checked_sub(1)?;
    (instants[i] >= first).then_some(i)
}

pub fn eye_capture(result: &SimResult, bin_width: f64) -> Result<EyeHistogram> {
    check_positive("bin_width", bin_width)?;
    if bin_width > 1.0 {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            reason: format!("must be <= 1 UI, got {bin_width}"),
        });
    }
    require_samples(result)?;
    let n_bins = (1.0 / bin_width).round().max(1.0) as usize;
    let mut hist = EyeHistogram {
        bin_width,
        counts: [vec![0; n_bins], vec![0; n_bins]],
        skipped: 0,
    };
    let instants = &result.sampling_instants;
    for &(t, level) in &result.transitions {
        let Some(i) = previous_sample(result, t) else {
            hist.skipped += 1;
            continue;
        };
        let rel = ((t - instants[i]) / result.ui).rem_euclid(1.0);
        let bin = (rel / bin_width).round() as usize % n_bins;
        hist.counts[level as usize][bin] += 1;
    }
    Ok(hist)
}

/// Spread of the eye crossings around the sampling edges, in UI.
///
/// For every transition with a sampling edge on both sides, the right-edge
/// offset is the time since the previous sampling edge and the left-edge
/// offset the time until the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeStats {
    pub n: usize,
    pub left_mean: f64,
    pub left_std: f64,
    pub right_mean: f64,
    pub right_std: f64,
    /// Lower [`EYE_EDGE_QUANTILE`] quantile of the left offsets.
    pub left_inner: f64,
    /// Lower [`EYE_EDGE_QUANTILE`] quantile of the right offsets.
    pub right_inner: f64,
}

impl EyeStats {
    /// Opening between the inner crossings.
    pub fn opening(&self) -> f64 {
        self.left_inner + self.right_inner
    }

    /// Centre of the opening relative to the sampling edge; positive when
    /// the opening lies later than the sampling edge.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.right_inner - self.left_inner)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn lower_quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let i = ((q * v.len() as f64).floor() as usize).min(v.len() - 1);
    v[i]
}

pub fn eye_stats(result: &SimResult) -> Result<EyeStats> {
    require_samples(result)?;
    let instants = &result.sampling_instants;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &(t, _) in &result.transitions {
        let Some(i) = previous_sample(result, t) else {
            continue;
        };
        let Some(&next) = instants.get(i + 1) else {
            continue;
        };
        right.push((t - instants[i]) / result.ui);
        left.push((next - t) / result.ui);
    }
    if left.is_empty() {
        return Err(Error::EmptyResult(
            "no transition between two sampling edges".into(),
        ));
    }
    let (left_mean, left_std) = mean_std(&left);
    let (right_mean, right_std) = mean_std(&right);
    Ok(EyeStats {
        n: left.len(),
        left_mean,
        left_std,
        right_mean,
        right_std,
        left_inner: lower_quantile(&mut left, EYE_EDGE_QUANTILE),
        right_inner: lower_quantile(&mut right, EYE_EDGE_QUANTILE),
    })
}

/// Resynchronization outcome over all releases of the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResyncStats {
    pub n_edges: u64,
    pub n_missed: u64,
    pub max_consecutive_missed: u64,
    /// Releases that found the ring not yet settled in its frozen state.
    pub n_early_release: u64,
    pub max_consecutive_early_release: u64,
}

/// A release is missed when the first sampling edge after it deviates from
/// the nominal post-release phase by more than [`RESYNC_TOLERANCE_UI`], or
/// when no sampling edge occurs before the next release.
pub fn resync_check(result: &SimResult) -> ResyncStats {
    let instants = &result.sampling_instants;
    let releases = &result.releases;
    let offset = result.nominal_phase * result.period;
    let mut stats = ResyncStats::default();
    let mut run = 0;
    let mut early_run = 0;
    for (k, &r) in releases.iter().enumerate() {
        let next_release = releases.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let first = instants.partition_point(|&s| s <= r);
        let Some(&t) = instants.get(first) else {
            // Simulation ended before the clock could answer.
            break;
        };
        stats.n_edges += 1;
        if result.early_releases.get(k).copied().unwrap_or(false) {
            stats.n_early_release += 1;
            early_run += 1;
            stats.max_consecutive_early_release =
                stats.max_consecutive_early_release.max(early_run);
        } else {
            early_run = 0;
        }
        let ok = t < next_release && ((t - r - offset) / result.ui).abs() <= RESYNC_TOLERANCE_UI;
        if ok {
            run = 0;
        } else {
            stats.n_missed += 1;
            run += 1;
            stats.max_consecutive_missed = stats.max_consecutive_missed.max(run);
        }
    }
    stats
}

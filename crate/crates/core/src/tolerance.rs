//! Jitter-tolerance curves, frequency-tolerance search and comparison against
//! a tolerance mask, all driven by the statistical BER engine.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, invalid, Error, Result};
use crate::stat_ber::{ber_estimate, CdrStatConfig};

/// Relative amplitude resolution of the tolerance search.
pub const JTOL_REL_RESOLUTION: f64 = 0.01;
/// Absolute resolution of the frequency-tolerance search.
pub const FTOL_RESOLUTION: f64 = 1e-5;

/// Search range for a bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::BracketInvalid { lo, hi });
        }
        Ok(Bracket { lo, hi })
    }
}

/// Tolerated sinusoidal-jitter amplitude at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JtolPoint {
    pub freq_norm: f64,
    /// Largest amplitude meeting the target, or the bracket top if unbounded.
    pub amp_pp: f64,
    /// The target BER holds even at the top of the amplitude bracket.
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JtolCurve {
    pub target_ber: f64,
    pub points: Vec<JtolPoint>,
}

fn check_target(target_ber: f64) -> Result<()> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(invalid(
            "target_ber",
            format!("must lie in (0, 0.5), got {target_ber}"),
        ));
    }
    Ok(())
}

/// Largest `x` in `bracket` with `ber(x) <= target`, assuming `ber` is
/// non-decreasing. Returns `(x, unbounded)`.
fn bisect_max(
    bracket: Bracket,
    target: f64,
    done: impl Fn(f64, f64) -> bool,
    ber: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, bool)> {
    if ber(bracket.lo)? > target {
        return Err(Error::BracketInvalid {
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    if ber(bracket.hi)? <= target {
        return Ok((bracket.hi, true));
    }
    // Invariant: ber(lo) <= target < ber(hi).
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    while !done(lo, hi) {
        let mid = 0.5 * (lo + hi);
        if ber(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, false))
}

/// Jitter tolerance at each frequency: bisection on the sinusoidal amplitude
/// (peak-to-peak UI) for `ber_estimate = target_ber` to 1 % resolution.
pub fn jtol_curve(
    cfg: &CdrStatConfig,
    freqs: &[f64],
    target_ber: f64,
    amp_bracket: Bracket,
) -> Result<JtolCurve> {
    check_target(target_ber)?;
    check_non_negative("amp_bracket.lo", amp_bracket.lo)?;
    let amp_bracket = Bracket::new(amp_bracket.lo, amp_bracket.hi)?;
    if freqs.is_empty() {
        return Err(invalid("freqs", "must not be empty"));
    }
    if freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) || freqs.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(invalid("freqs", "must be positive and strictly increasing"));
    }
    let done = |lo: f64, hi: f64| hi - lo <= JTOL_REL_RESOLUTION * hi.max(1e-6);
    let points = freqs
        .par_iter()
        .map(|&f| {
            let (amp_pp, unbounded) = bisect_max(amp_bracket, target_ber, done, |a| {
                match ber_estimate(&cfg.with_sj(a, f)) {
                    // A swing wider than the grid closes the eye outright.
                    Err(Error::SupportExceeded { .. }) if a > amp_bracket.lo => Ok(0.5),
                    r => r,
                }
            })?;
            Ok(JtolPoint {
                freq_norm: f,
                amp_pp,
                unbounded,
            })
        })
        .collect::<Result<_>>()?;
    Ok(JtolCurve { target_ber, points })
}

/// Result of a frequency-tolerance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ftol {
    /// Largest tolerated offset magnitude, signed as searched.
    pub eps: f64,
    /// The target holds across the whole bracket.
    pub unbounded: bool,
}

/// Default magnitude range for frequency-offset searches.
pub const DEFAULT_EPS_BRACKET: Bracket = Bracket { lo: 0.0, hi: 0.45 };

fn ftol(cfg: &CdrStatConfig, target_ber: f64, eps_bracket: Bracket, sign: f64) -> Result<Ftol> {
    check_target(target_ber)?;
    check_non_negative("eps_bracket.lo", eps_bracket.lo)?;
    let eps_bracket = Bracket::new(eps_bracket.lo, eps_bracket.hi)?;
    if eps_bracket.hi >= 0.5 {
        return Err(invalid("eps_bracket.hi", "must be < 0.5"));
    }
    let done = |lo: f64, hi: f64| hi - lo <= FTOL_RESOLUTION;
    let (mag, unbounded) = bisect_max(eps_bracket, target_ber, done, |e| {
        ber_estimate(&cfg.with_eps(sign * e))
    })?;
    Ok(Ftol {
        eps: sign * mag,
        unbounded,
    })
}

/// Largest positive frequency offset (slow oscillator) with BER at or below
/// `target_ber`, to within [`FTOL_RESOLUTION`].
pub fn ftol_search(cfg: &CdrStatConfig, target_ber: f64, eps_bracket: Bracket) -> Result<Ftol> {
    ftol(cfg, target_ber, eps_bracket, 1.0)
}

/// Most negative frequency offset (fast oscillator) with BER at or below
/// `target_ber`. The bracket gives the offset magnitude.
pub fn ftol_search_negative(
    cfg: &CdrStatConfig,
    target_ber: f64,
    eps_bracket: Bracket,
) -> Result<Ftol> {
    ftol(cfg, target_ber, eps_bracket, -1.0)
}

/// Jitter-tolerance specification, interpolated piecewise-linearly in
/// log-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceMask {
    /// `(freq_norm, amp_pp_ui)` pairs.
    pub breakpoints: Vec<(f64, f64)>,
}

impl ToleranceMask {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let mask = ToleranceMask { breakpoints };
        mask.validate()?;
        Ok(mask)
    }

    /// Uses the bounded points of a tolerance curve as a mask.
    pub fn from_curve(curve: &JtolCurve) -> Result<Self> {
        Self::new(
            curve
                .points
                .iter()
                .filter(|p| !p.unbounded)
                .map(|p| (p.freq_norm, p.amp_pp))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() < 2 {
            return Err(invalid("breakpoints", "need at least 2"));
        }
        if b.iter()
            .any(|(f, a)| !(f.is_finite() && *f > 0.0 && a.is_finite() && *a > 0.0))
        {
            return Err(invalid(
                "breakpoints",
                "frequencies and amplitudes must be positive",
            ));
        }
        if b.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid(
                "breakpoints",
                "frequencies must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// Mask amplitude at `freq`, and whether it was extrapolated beyond the
    /// outermost breakpoints.
    pub fn amp_at(&self, freq: f64) -> (f64, bool) {
        let b = &self.breakpoints;
        let n = b.len();
        let extrapolated = freq < b[0].0 || freq > b[n - 1].0;
        let i = b[1..n - 1].partition_point(|p| p.0 < freq);
        let ((f0, a0), (f1, a1)) = (b[i], b[i + 1]);
        if freq == f0 {
            return (a0, extrapolated);
        }
        if freq == f1 {
            return (a1, extrapolated);
        }
        let slope = (a1 / a0).ln() / (f1 / f0).ln();
        ((a0.ln() + slope * (freq / f0).ln()).exp(), extrapolated)
    }
}

/// Comparison of one tolerance point against the mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMargin {
    pub freq_norm: f64,
    pub jtol_amp_pp: f64,
    pub mask_amp_pp: f64,
    /// Tolerance minus mask amplitude, UI peak-to-peak.
    pub margin: f64,
    pub pass: bool,
    pub unbounded: bool,
    pub extrapolated: bool,
}

/// Margin of each curve point above the mask. Unbounded points always pass.
pub fn mask_margin(curve: &JtolCurve, mask: &ToleranceMask) -> Result<Vec<MaskMargin>> {
    mask.validate()?;
    Ok(curve
        .points
        .iter()
        .map(|p| {
            let (mask_amp, extrapolated) = mask.amp_at(p.freq_norm);
            let margin = p.amp_pp - mask_amp;
            MaskMargin {
                freq_norm: p.freq_norm,
                jtol_amp_pp: p.amp_pp,
                mask_amp_pp: mask_amp,
                margin,
                pass: p.unbounded || margin >= 0.0,
                unbounded: p.unbounded,
                extrapolated,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_interpolates_log_log() {
        let m = ToleranceMask::new(vec![(1e-3, 10.0), (1e-1, 0.1)]).unwrap();
        let (a, ext) = m.amp_at(1e-2);
        assert!((a - 1.0).abs() < 1e-12);
        assert!(!ext);
        let (a, ext) = m.amp_at(1.0);
        assert!((a - 0.01).abs() < 1e-12);
        assert!(ext);
        assert_eq!(m.amp_at(1e-3).0, 10.0);
    }

    #[test]
    fn mask_rejects_bad_breakpoints() {
        assert!(ToleranceMask::new(vec![(0.1, 1.0)]).is_err());
        assert!(ToleranceMask::new(vec![(0.1, 1.0), (0.1, 0.5)]).is_err());
        assert!(ToleranceMask::new(vec![(0.1, 1.0), (0.2, 0.0)]).is_err());
    }

    #[test]
    fn brackets_validated() {
        assert!(Bracket::new(1.0, 1.0).is_err());
        assert!(Bracket::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn bisection_finds_threshold() {
        let b = Bracket::new(0.0, 1.0).unwrap();
        let (x, unb) = bisect_max(b, 0.5, |lo, hi| hi - lo < 1e-9, Ok).unwrap();
        assert!(!unb);
        assert!((x - 0.5).abs() < 1e-9);
        let (x, unb) = bisect_max(b, 2.0, |lo, hi| hi - lo < 1e-9, Ok).unwrap();
        assert!(unb);
        assert_eq!(x, 1.0);
        assert!(bisect_max(b, -1.0, |lo, hi| hi - lo < 1e-9, Ok).is_err());
    }
}

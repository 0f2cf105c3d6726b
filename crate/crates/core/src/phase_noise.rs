//! Ring-oscillator jitter budgeting: the thermal-noise jitter constant of a
//! current-mode ring stage, its accumulation over time, and the bias-current
//! versus sampling-clock-jitter trade-off.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, invalid, Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Bias and device parameters of one current-mode ring stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscParams {
    /// Stage bias current.
    #[serde(rename = "i_ss_a")]
    pub i_ss: f64,
    /// Stage load resistance.
    #[serde(rename = "r_l_ohm")]
    pub r_l: f64,
    /// Differential signal swing.
    #[serde(rename = "delta_v_v")]
    pub delta_v: f64,
    /// Device noise factor.
    pub gamma: f64,
    /// Ratio of rise time to stage delay.
    pub eta: f64,
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    #[serde(default = "default_stages")]
    pub n_stages: u32,
    #[serde(rename = "v_dd_v")]
    pub v_dd: f64,
}

fn default_stages() -> u32 {
    4
}

impl OscParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("i_ss_a", self.i_ss)?;
        check_positive("r_l_ohm", self.r_l)?;
        // An infinite swing is allowed: it removes the device-noise term.
        if !(self.delta_v > 0.0) {
            return Err(invalid("delta_v_v", "must be > 0"));
        }
        check_positive("gamma", self.gamma)?;
        check_positive("eta", self.eta)?;
        check_positive("temperature_k", self.temperature)?;
        check_positive("v_dd_v", self.v_dd)?;
        if self.n_stages == 0 {
            return Err(invalid("n_stages", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_i_ss(mut self, i_ss: f64) -> Self {
        self.i_ss = i_ss;
        self
    }
}

/// One point of the power / jitter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub i_ss: f64,
    pub power: f64,
    /// Jitter constant in sqrt(seconds).
    pub kappa: f64,
    pub sigma_cid5_ui: f64,
}

/// Minimum jitter proportionality constant of a differential ring stage:
///
/// `kappa = sqrt( 8 k T / (3 eta I_ss) * (gamma / dV + 1 / (R_L I_ss)) )`
///
/// in sqrt(s), so that the RMS jitter after `dt` seconds is `kappa sqrt(dt)`.
pub fn kappa_min(p: &OscParams) -> Result<f64> {
    p.validate()?;
    let prefactor = 8.0 * BOLTZMANN * p.temperature / (3.0 * p.eta * p.i_ss);
    let noise = p.gamma / p.delta_v + 1.0 / (p.r_l * p.i_ss);
    Ok((prefactor * noise).sqrt())
}

/// RMS timing jitter accumulated over `delta_t` seconds.
pub fn sigma_after(kappa: f64, delta_t: f64) -> Result<f64> {
    check_non_negative("kappa", kappa)?;
    check_non_negative("delta_t", delta_t)?;
    Ok(kappa * delta_t.sqrt())
}

/// Elapsed time from the synchronizing edge to the sampling instant of bit
/// `cid` at sampling phase `phi`, in UI.
fn elapsed_ui(cid: u32, phi: f64) -> f64 {
    cid as f64 - 1.0 + phi
}

fn check_sweep_args(data_rate: f64, cid: u32, phi: f64) -> Result<()> {
    check_positive("data_rate_hz", data_rate)?;
    if cid == 0 {
        return Err(invalid("cid", "must be >= 1"));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(invalid("phi", format!("must lie in (0, 1), got {phi}")));
    }
    Ok(())
}

fn sigma_ui(p: &OscParams, data_rate: f64, cid: u32, phi: f64) -> Result<(f64, f64)> {
    let ui = 1.0 / data_rate;
    let kappa = kappa_min(p)?;
    let sigma = sigma_after(kappa, elapsed_ui(cid, phi) * ui)?;
    Ok((kappa, sigma / ui))
}

/// Sweeps the stage bias current, reporting power, jitter constant and the
/// sampling-clock jitter at bit `cid`.
pub fn tradeoff_curve(
    p: &OscParams,
    i_ss_values: &[f64],
    data_rate: f64,
    cid: u32,
    phi: f64,
) -> Result<Vec<TradeoffPoint>> {
    check_sweep_args(data_rate, cid, phi)?;
    if i_ss_values.is_empty() {
        return Err(invalid("i_ss_values", "must not be empty"));
    }
    if i_ss_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("i_ss_values", "must be strictly ascending"));
    }
    i_ss_values
        .iter()
        .map(|&i_ss| {
            let q = p.with_i_ss(i_ss);
            let (kappa, sigma_cid5_ui) = sigma_ui(&q, data_rate, cid, phi)?;
            Ok(TradeoffPoint {
                i_ss,
                power: q.n_stages as f64 * i_ss * q.v_dd,
                kappa,
                sigma_cid5_ui,
            })
        })
        .collect()
}

/// Bias current search range for [`required_iss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IssBracket {
    #[serde(rename = "lo_a")]
    pub lo: f64,
    #[serde(rename = "hi_a")]
    pub hi: f64,
}

impl Default for IssBracket {
    fn default() -> Self {
        IssBracket { lo: 1e-6, hi: 1.0 }
    }
}

/// Smallest stage bias current whose sampling-clock jitter at bit `cid` does
/// not exceed `target_sigma_ui`, to 0.1 % relative.
pub fn required_iss(
    p: &OscParams,
    target_sigma_ui: f64,
    data_rate: f64,
    cid: u32,
    phi: f64,
    bracket: IssBracket,
) -> Result<f64> {
    check_sweep_args(data_rate, cid, phi)?;
    check_non_negative("target_sigma_ui", target_sigma_ui)?;
    check_positive("bracket.lo", bracket.lo)?;
    if !(bracket.hi > bracket.lo) {
        return Err(Error::BracketInvalid {
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    let sigma = |i: f64| sigma_ui(&p.with_i_ss(i), data_rate, cid, phi).map(|(_, s)| s);
    if sigma(bracket.hi)? > target_sigma_ui {
        return Err(Error::TargetUnreachable(format!(
            "sigma {target_sigma_ui} UI needs more than {} A",
            bracket.hi
        )));
    }
    if sigma(bracket.lo)? <= target_sigma_ui {
        return Ok(bracket.lo);
    }
    // Invariant: sigma(lo) > target >= sigma(hi).
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    while hi / lo > 1.0 + 1e-4 {
        let mid = (lo * hi).sqrt();
        if sigma(mid)? > target_sigma_ui {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

//! Jitter sources and the probability-density algebra used to combine them.
//!
//! A [`Pdf`] is a mass distribution over a uniform grid of timing errors in
//! unit intervals. Bin `i` is the cell `[x_i - step/2, x_i + step/2]` centred
//! on `x_i = origin + i * step`, and its mass is `density[i] * step`. A `Pdf`
//! may also carry an analytic Gaussian factor (`gaussian_sigma`): the
//! distribution it describes is then the grid convolved with `N(0, sigma^2)`.
//! Keeping that factor symbolic lets [`tail_prob`] resolve probabilities far
//! below anything a finite grid can represent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_non_negative, check_positive, invalid, Error, Result};
use crate::special::{q_function, q_integral};

/// Default PDF grid resolution.
pub const DEFAULT_STEP_UI: f64 = 1e-4;
/// Default bound on the half-width of any constructed or convolved PDF.
pub const DEFAULT_MAX_HALF_WIDTH_UI: f64 = 2.0;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Beyond this many sigmas a smeared bin is treated as fully in or out.
const GAUSSIAN_CUTOFF_SIGMAS: f64 = 20.0;

/// A time expressed in unit intervals of the nominal data rate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct UiTime(pub f64);

impl UiTime {
    pub fn to_seconds(self, data_rate_hz: f64) -> f64 {
        self.0 * (1.0 / data_rate_hz)
    }

    pub fn from_seconds(seconds: f64, data_rate_hz: f64) -> Self {
        UiTime(seconds * data_rate_hz)
    }
}

/// The four jitter sources applied to the link.
///
/// Amplitudes are in UI; `sj_freq_norm` is the sinusoidal jitter frequency
/// divided by the data rate. `ckj_rms_cid5` is the RMS jitter of the
/// recovered sampling clock at the fifth bit of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    #[serde(rename = "dj_pp_ui", default)]
    pub dj_pp: f64,
    #[serde(rename = "rj_rms_ui", default)]
    pub rj_rms: f64,
    #[serde(rename = "sj_amp_pp_ui", default)]
    pub sj_amp_pp: f64,
    #[serde(default)]
    pub sj_freq_norm: f64,
    #[serde(rename = "ckj_rms_cid5_ui", default)]
    pub ckj_rms_cid5: f64,
}

impl JitterSpec {
    /// Reference jitter budget: 0.4 UI pp deterministic, 0.021 UI RMS random,
    /// 0.01 UI RMS oscillator jitter, no sinusoidal jitter.
    pub fn reference() -> Self {
        JitterSpec {
            dj_pp: 0.4,
            rj_rms: 0.021,
            sj_amp_pp: 0.0,
            sj_freq_norm: 0.0,
            ckj_rms_cid5: 0.01,
        }
    }

    pub fn with_sj(mut self, amp_pp: f64, freq_norm: f64) -> Self {
        self.sj_amp_pp = amp_pp;
        self.sj_freq_norm = freq_norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("dj_pp_ui", self.dj_pp)?;
        check_non_negative("rj_rms_ui", self.rj_rms)?;
        check_non_negative("sj_amp_pp_ui", self.sj_amp_pp)?;
        check_non_negative("sj_freq_norm", self.sj_freq_norm)?;
        check_non_negative("ckj_rms_cid5_ui", self.ckj_rms_cid5)?;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.dj_pp == 0.0 && self.rj_rms == 0.0 && self.sj_amp_pp == 0.0 && self.ckj_rms_cid5 == 0.0
    }
}

/// Which side of a threshold [`tail_prob`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Limits applied when building or combining PDFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLimits {
    pub max_half_width: f64,
}

impl Default for GridLimits {
    fn default() -> Self {
        GridLimits {
            max_half_width: DEFAULT_MAX_HALF_WIDTH_UI,
        }
    }
}

/// Discrete probability density over a uniform grid, optionally smeared by
/// an analytic Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdf {
    origin: f64,
    step: f64,
    density: Vec<f64>,
    gaussian_sigma: f64,
}

impl Pdf {
    /// Builds a PDF from per-bin masses, renormalizing them to unit total.
    pub fn from_masses(origin: f64, step: f64, masses: Vec<f64>) -> Result<Self> {
        check_positive("step", step)?;
        if !origin.is_finite() {
            return Err(invalid("origin", "must be finite"));
        }
        if masses.is_empty() {
            return Err(invalid("masses", "must not be empty"));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(invalid("masses", "must be finite and >= 0"));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(invalid("masses", "total mass must be > 0"));
        }
        let density = masses.into_iter().map(|m| m / total / step).collect();
        Ok(Pdf {
            origin,
            step,
            density,
            gaussian_sigma: 0.0,
        })
    }

    /// Single-bin PDF at `x`.
    pub fn delta_at(x: f64, step: f64) -> Result<Self> {
        Self::from_masses(x, step, vec![1.0])
    }

    pub fn delta(step: f64) -> Result<Self> {
        Self::delta_at(0.0, step)
    }

    /// Zero-mean Gaussian kept in analytic form on a delta grid.
    pub fn gaussian(sigma: f64, step: f64) -> Result<Self> {
        check_non_negative("sigma", sigma)?;
        Ok(Self::delta(step)?.with_gaussian(sigma))
    }

    /// Convolves the distribution with an analytic `N(0, sigma^2)`.
    pub fn with_gaussian(mut self, sigma: f64) -> Self {
        self.gaussian_sigma = self.gaussian_sigma.hypot(sigma);
        self
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn gaussian_sigma(&self) -> f64 {
        self.gaussian_sigma
    }

    pub fn is_gaussian_tailed(&self) -> bool {
        self.gaussian_sigma > 0.0
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.density.iter().map(move |d| d * self.step)
    }

    /// Outer edges of the grid part, in UI.
    pub fn support(&self) -> (f64, f64) {
        let half = 0.5 * self.step;
        (self.origin - half, self.center(self.len() - 1) + half)
    }

    /// Rectangle-rule integral of the grid density.
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step
    }

    pub fn mean(&self) -> f64 {
        self.masses()
            .enumerate()
            .map(|(i, m)| m * self.center(i))
            .sum()
    }

    /// Variance of the described distribution, including the Gaussian factor.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let grid: f64 = self
            .masses()
            .enumerate()
            .map(|(i, m)| {
                let d = self.center(i) - mean;
                m * d * d
            })
            .sum();
        grid + self.gaussian_sigma * self.gaussian_sigma
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Distribution of `-X`.
    pub fn reflect(&self) -> Pdf {
        let n = self.len();
        let mut density = self.density.clone();
        density.reverse();
        Pdf {
            origin: -self.center(n - 1),
            step: self.step,
            density,
            gaussian_sigma: self.gaussian_sigma,
        }
    }

    /// Checks the normalization and sign invariants.
    pub fn validate(&self) -> Result<()> {
        if self.density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidState(
                "density must be finite and >= 0".into(),
            ));
        }
        let integral = self.integral();
        if (integral - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "density integrates to {integral}, expected 1"
            )));
        }
        Ok(())
    }

    /// Grid CDF at `x`, treating each bin as uniform over its cell. Ignores
    /// the Gaussian factor.
    fn grid_cdf(&self, x: f64) -> f64 {
        let (lo, _) = self.support();
        if x <= lo {
            return 0.0;
        }
        let pos = (x - lo) / self.step;
        let full = pos.floor() as usize;
        if full >= self.len() {
            return 1.0;
        }
        let below: f64 = self.density[..full].iter().sum::<f64>() * self.step;
        let partial = self.density[full] * self.step * (pos - full as f64);
        (below + partial).min(1.0)
    }

    /// Re-grids onto a finer `step`, conserving mass bin by bin.
    pub fn resample(&self, step: f64) -> Result<Pdf> {
        check_positive("step", step)?;
        if step > self.step {
            return Err(invalid("step", "resampling only refines the grid"));
        }
        if step == self.step {
            return Ok(self.clone());
        }
        let (lo, hi) = self.support();
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let masses: Vec<f64> = (0..n)
            .map(|i| {
                let a = lo + i as f64 * step;
                (self.grid_cdf(a + step) - self.grid_cdf(a)).max(0.0)
            })
            .collect();
        let mut out = Pdf::from_masses(lo + 0.5 * step, step, masses)?;
        out.gaussian_sigma = self.gaussian_sigma;
        Ok(out)
    }

    /// Materializes the Gaussian factor onto the grid, truncating it at
    /// `support_sigmas` standard deviations.
    pub fn materialize(&self, support_sigmas: f64, limits: GridLimits) -> Result<Pdf> {
        if self.gaussian_sigma == 0.0 {
            return Ok(self.clone());
        }
        let mut grid = self.clone();
        grid.gaussian_sigma = 0.0;
        let gauss = rj_pdf(self.gaussian_sigma, self.step, support_sigmas)?;
        convolve_with_limits(&grid, &gauss, limits)
    }
}

/// Per-bin masses for a symmetric distribution with CDF differences given by
/// `mass(lo, hi)` over the support `[-half, half]`.
fn symmetric_bins(half: f64, step: f64, mass: impl Fn(f64, f64) -> f64) -> Result<Pdf> {
    let n = ((half / step + 0.5).ceil() as i64 - 1).max(0);
    let masses: Vec<f64> = (-n..=n)
        .map(|i| {
            let c = i as f64 * step;
            let lo = (c - 0.5 * step).max(-half);
            let hi = (c + 0.5 * step).min(half);
            if hi > lo {
                mass(lo, hi).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Pdf::from_masses(-(n as f64) * step, step, masses)
}

fn check_half_width(half: f64, limits: GridLimits) -> Result<()> {
    if half > limits.max_half_width {
        return Err(Error::SupportExceeded {
            required: half,
            limit: limits.max_half_width,
        });
    }
    Ok(())
}

/// Uniform density over `[-dj_pp/2, +dj_pp/2]`; a delta when `dj_pp == 0`.
pub fn dj_pdf(dj_pp: f64, step: f64) -> Result<Pdf> {
    check_non_negative("dj_pp", dj_pp)?;
    check_positive("step", step)?;
    if dj_pp == 0.0 {
        return Pdf::delta(step);
    }
    let half = 0.5 * dj_pp;
    check_half_width(half, GridLimits::default())?;
    symmetric_bins(half, step, |lo, hi| (hi - lo) / dj_pp)
}

/// Probability that a standard normal falls in `[lo, hi]`, evaluated on the
/// tail closest to the interval so small masses keep their precision.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        q_function(lo) - q_function(hi)
    } else if hi <= 0.0 {
        q_function(-hi) - q_function(-lo)
    } else {
        1.0 - q_function(hi) - q_function(-lo)
    }
}

/// Gaussian density truncated at `±support_sigmas * sigma` and renormalized;
/// a delta when `sigma == 0`.
pub fn rj_pdf(sigma: f64, step: f64, support_sigmas: f64) -> Result<Pdf> {
    check_non_negative("sigma", sigma)?;
    check_positive("step", step)?;
    if !(support_sigmas >= 8.0) || !support_sigmas.is_finite() {
        return Err(invalid(
            "support_sigmas",
            format!("must be >= 8, got {support_sigmas}"),
        ));
    }
    if sigma == 0.0 {
        return Pdf::delta(step);
    }
    let half = support_sigmas * sigma;
    check_half_width(half, GridLimits::default())?;
    symmetric_bins(half, step, |lo, hi| normal_interval(lo / sigma, hi / sigma))
}

/// Peak amplitude of `SJ(t + n UI) - SJ(t)` for a sinusoid of the given
/// peak-peak amplitude and normalized frequency.
///
/// The product `freq_norm * n_bits` is reduced to its fractional part before
/// the sine is evaluated, so integer products give exactly zero.
pub fn sj_differential_amplitude(sj_amp_pp: f64, sj_freq_norm: f64, n_bits: u32) -> f64 {
    let x = sj_freq_norm * n_bits as f64;
    let frac = x - x.floor();
    if frac == 0.0 || sj_amp_pp == 0.0 {
        return 0.0;
    }
    sj_amp_pp * (PI * frac).sin().abs()
}

/// Distribution of the sinusoidal-jitter difference across `n_bits` at a
/// uniformly random phase: an arcsine law on `[-a, a]`.
pub fn sj_differential_pdf(
    sj_amp_pp: f64,
    sj_freq_norm: f64,
    n_bits: u32,
    step: f64,
) -> Result<Pdf> {
    check_non_negative("sj_amp_pp", sj_amp_pp)?;
    check_non_negative("sj_freq_norm", sj_freq_norm)?;
    check_positive("step", step)?;
    if n_bits == 0 {
        return Err(invalid("n_bits", "must be >= 1"));
    }
    let a = sj_differential_amplitude(sj_amp_pp, sj_freq_norm, n_bits);
    if a == 0.0 {
        return Pdf::delta(step);
    }
    check_half_width(a, GridLimits::default())?;
    let cdf = |x: f64| 0.5 + (x / a).clamp(-1.0, 1.0).asin() / PI;
    symmetric_bins(a, step, |lo, hi| cdf(hi) - cdf(lo))
}

/// Convolution under the default grid limits.
pub fn convolve(a: &Pdf, b: &Pdf) -> Result<Pdf> {
    convolve_with_limits(a, b, GridLimits::default())
}

/// Distribution of `X + Y` for independent `X ~ a`, `Y ~ b`.
///
/// Grids with different steps are brought to the finer step first. Gaussian
/// factors add in quadrature.
pub fn convolve_with_limits(a: &Pdf, b: &Pdf, limits: GridLimits) -> Result<Pdf> {
    let (a, b) = if a.step < b.step {
        (a.clone(), b.resample(a.step)?)
    } else if b.step < a.step {
        (a.resample(b.step)?, b.clone())
    } else {
        (a.clone(), b.clone())
    };
    let step = a.step;
    let origin = a.origin + b.origin;
    let n = a.len() + b.len() - 1;
    let lo = origin - 0.5 * step;
    let hi = origin + (n - 1) as f64 * step + 0.5 * step;
    check_half_width(lo.abs().max(hi.abs()), limits)?;

    let am: Vec<f64> = a.masses().collect();
    let bm: Vec<f64> = b.masses().collect();
    let masses = if a.len().min(b.len()) <= 64 || a.len() * b.len() <= 1 << 20 {
        direct_convolution(&am, &bm)
    } else {
        fft_convolution(&am, &bm)
    };
    let mut out = Pdf::from_masses(origin, step, masses)?;
    out.gaussian_sigma = a.gaussian_sigma.hypot(b.gaussian_sigma);
    Ok(out)
}

fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn fft_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    // Round-off leaves tiny negative values where the true mass is zero.
    fa[..n].iter().map(|c| (c.re * scale).max(0.0)).collect()
}

/// Probability mass of `p` on the requested side of `threshold`.
///
/// Grid bins are treated as uniform over their cells. When the PDF carries a
/// Gaussian factor, each bin is smeared analytically, which keeps tails
/// accurate to well below 1e-12.
pub fn tail_prob(p: &Pdf, threshold: f64, side: Side) -> f64 {
    tail_prob_with_sigma(p, threshold, side, p.gaussian_sigma)
}

/// [`tail_prob`] with the Gaussian factor replaced by `sigma`.
pub(crate) fn tail_prob_with_sigma(p: &Pdf, threshold: f64, side: Side, sigma: f64) -> f64 {
    if threshold.is_nan() {
        return f64::NAN;
    }
    // P(X < t) = P(-X > -t); the grid is walked with mirrored coordinates.
    let (t, sign) = match side {
        Side::Above => (threshold, 1.0),
        Side::Below => (-threshold, -1.0),
    };
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    let step = p.step;
    // Edge j is the lower edge of bin j in the unmirrored grid.
    let edge = |j: usize| sign * (p.origin + (j as f64 - 0.5) * step);
    let h_at = |j: usize| q_integral((t - edge(j)) / sigma);
    let cutoff = GAUSSIAN_CUTOFF_SIGMAS * sigma;
    let mut total = 0.0;
    // Adjacent bins share an edge; keep the last antiderivative evaluated.
    let mut cached: Option<(usize, f64)> = None;
    let mut h_edge = |j: usize| match cached {
        Some((k, h)) if k == j => h,
        _ => {
            let h = h_at(j);
            cached = Some((j, h));
            h
        }
    };
    for (i, &d) in p.density.iter().enumerate() {
        let m = d * step;
        if m == 0.0 {
            continue;
        }
        let (lo, hi) = if sign > 0.0 {
            (edge(i), edge(i + 1))
        } else {
            (edge(i + 1), edge(i))
        };
        let frac = if sigma == 0.0 {
            ((hi - t) / step).clamp(0.0, 1.0)
        } else if lo - t > cutoff {
            1.0
        } else if t - hi > cutoff {
            0.0
        } else {
            let (a, b) = (h_edge(i), h_edge(i + 1));
            let diff = if sign > 0.0 { a - b } else { b - a };
            (sigma / step * diff).clamp(0.0, 1.0)
        };
        total += m * frac;
    }
    total.clamp(0.0, 1.0)
}

/// Per-edge jitter generator for the event simulator.
///
/// Each call returns `U(±dj/2) + N(0, rj) + (sj/2) sin(2π f_sj t + θ0)` in UI.
/// `θ0` is drawn once from the seed unless set explicitly.
#[derive(Debug, Clone)]
pub struct EdgeJitter {
    spec: JitterSpec,
    data_rate_hz: f64,
    sj_phase: f64,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl EdgeJitter {
    pub fn new(spec: JitterSpec, data_rate_hz: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        check_positive("data_rate_hz", data_rate_hz)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sj_phase = rng.random::<f64>() * 2.0 * PI;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(EdgeJitter {
            spec,
            data_rate_hz,
            sj_phase,
            rng,
            normal,
        })
    }

    pub fn with_sj_phase(mut self, theta0: f64) -> Self {
        self.sj_phase = theta0;
        self
    }

    pub fn sj_phase(&self) -> f64 {
        self.sj_phase
    }

    /// Displacement in UI of the edge nominally at `t_abs` seconds.
    pub fn sample(&mut self, t_abs: f64) -> f64 {
        let mut jitter = 0.0;
        if self.spec.dj_pp > 0.0 {
            jitter += (self.rng.random::<f64>() - 0.5) * self.spec.dj_pp;
        }
        if self.spec.rj_rms > 0.0 {
            jitter += self.spec.rj_rms * self.normal.sample(&mut self.rng);
        }
        if self.spec.sj_amp_pp > 0.0 {
            let cycles = self.spec.sj_freq_norm * self.data_rate_hz * t_abs;
            let frac = cycles - cycles.floor();
            jitter += 0.5 * self.spec.sj_amp_pp * (2.0 * PI * frac + self.sj_phase).sin();
        }
        jitter
    }
}

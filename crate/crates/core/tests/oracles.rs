//! Library results checked against independent reference computations.

use gcco_core::jitter::{convolve, dj_pdf, sj_differential_amplitude, tail_prob};
use gcco_core::phase_noise::{kappa_min, OscParams};
use gcco_core::special::q_function;
use gcco_core::stat_ber::{ber_estimate, ber_surface, CdrStatConfig};
use gcco_core::stream::{Prbs7, Prbs7State, PRBS7_PERIOD};
use gcco_core::tolerance::{ftol_search, jtol_curve, Bracket, DEFAULT_EPS_BRACKET};
use gcco_core::{JitterSpec, Pdf, RunDist, Side};

/// Composite Simpson rule over `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper normal tail by quadrature of the density.
fn q_quadrature(z: f64) -> f64 {
    simpson(gauss, z, z + 40.0, 40_000)
}

#[test]
fn q_function_matches_quadrature() {
    for z in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 9.0] {
        let (got, want) = (q_function(z), q_quadrature(z));
        assert!(
            ((got - want) / want).abs() < 1e-9,
            "z={z}: {got:e} vs {want:e}"
        );
        assert!((q_function(-z) - (1.0 - want)).abs() < 1e-12);
    }
}

#[test]
fn gaussian_smeared_tail_matches_double_integral() {
    let (step, sigma) = (0.01, 0.02);
    let p = Pdf::delta_at(0.3, step).unwrap().with_gaussian(sigma);
    for t in [0.3, 0.35, 0.4, 0.45] {
        // Uniform cell of width `step` around 0.3, smeared by N(0, sigma^2).
        let want = simpson(
            |x| q_quadrature((t - x) / sigma),
            0.3 - step / 2.0,
            0.3 + step / 2.0,
            200,
        ) / step;
        let got = tail_prob(&p, t, Side::Above);
        assert!(
            ((got - want) / want).abs() < 1e-7,
            "t={t}: {got:e} vs {want:e}"
        );
    }
}

#[test]
fn convolution_matches_brute_force() {
    let step = 0.01;
    let a = Pdf::from_masses(-0.03, step, vec![0.1, 0.4, 0.2, 0.0, 0.3]).unwrap();
    let b = Pdf::from_masses(0.05, step, vec![0.25, 0.5, 0.25]).unwrap();
    let c = convolve(&a, &b).unwrap();
    let ma: Vec<f64> = a.masses().collect();
    let mb: Vec<f64> = b.masses().collect();
    let mut brute = vec![0.0; ma.len() + mb.len() - 1];
    for (i, x) in ma.iter().enumerate() {
        for (j, y) in mb.iter().enumerate() {
            brute[i + j] += x * y;
        }
    }
    let mc: Vec<f64> = c.masses().collect();
    assert!((c.center(0) - (-0.03 + 0.05)).abs() < 1e-12);
    for (k, want) in brute.iter().enumerate() {
        assert!(
            (mc.get(k).copied().unwrap_or(0.0) - want).abs() < 1e-12,
            "bin {k}"
        );
    }
    // Tail of the sum against direct enumeration of bin pairs.
    let threshold = 0.045;
    let mut want = 0.0;
    for (i, x) in ma.iter().enumerate() {
        for (j, y) in mb.iter().enumerate() {
            let hi = a.center(i) + b.center(j) + step / 2.0;
            let frac = ((hi - threshold) / step).clamp(0.0, 1.0);
            want += x * y * frac;
        }
    }
    assert!((tail_prob(&c, threshold, Side::Above) - want).abs() < 1e-12);
}

#[test]
fn uniform_dj_tail_is_linear() {
    let p = dj_pdf(0.4, 1e-3).unwrap();
    for t in [-0.15, 0.0, 0.1, 0.19] {
        let want = (0.2 - t) / 0.4;
        assert!((tail_prob(&p, t, Side::Above) - want).abs() < 1e-9, "t={t}");
    }
}

/// Fibonacci LFSR for x^7 + x^6 + 1, written independently of the library.
fn reference_prbs7(mut reg: u8, n: usize) -> Vec<bool> {
    (0..n)
        .map(|_| {
            let bit = ((reg >> 6) ^ (reg >> 5)) & 1;
            reg = ((reg << 1) | bit) & 0x7f;
            bit == 1
        })
        .collect()
}

fn runs(bits: &[bool]) -> Vec<(bool, usize)> {
    // Cyclic runs: rotate so the sequence starts on a run boundary.
    let n = bits.len();
    let start = (0..n).find(|&i| bits[i] != bits[(i + n - 1) % n]).unwrap();
    let mut out: Vec<(bool, usize)> = Vec::new();
    for i in 0..n {
        let b = bits[(start + i) % n];
        match out.last_mut() {
            Some((level, len)) if *level == b => *len += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

#[test]
fn prbs7_exhaustive_properties() {
    let seq: Vec<bool> = Prbs7::new(Prbs7State::new(0x7f).unwrap())
        .take(4 * PRBS7_PERIOD)
        .collect();
    let period = (1..=PRBS7_PERIOD)
        .find(|&p| (0..seq.len() - p).all(|i| seq[i] == seq[i + p]))
        .unwrap();
    assert_eq!(period, 127);
    let one = &seq[..127];
    assert_eq!(one.iter().filter(|&&b| b).count(), 64);
    assert_eq!(one.iter().filter(|&&b| !b).count(), 63);
    let r = runs(one);
    assert_eq!(r.iter().filter(|x| x.0).map(|x| x.1).max(), Some(7));
    assert_eq!(r.iter().filter(|x| !x.0).map(|x| x.1).max(), Some(6));

    // Same m-sequence as the reference register, up to a cyclic shift.
    let reference = reference_prbs7(0x7f, 127);
    assert!((0..127).any(|s| (0..127).all(|i| reference[(i + s) % 127] == one[i])));

    // Every nonzero seed yields a shift of the same sequence.
    for seed in 1..=0x7fu8 {
        let s: Vec<bool> = Prbs7::new(Prbs7State::new(seed).unwrap())
            .take(127)
            .collect();
        assert!(
            (0..127).any(|k| (0..127).all(|i| s[i] == one[(i + k) % 127])),
            "seed {seed}"
        );
    }
}

#[test]
fn kappa_matches_hand_evaluation() {
    let p = OscParams {
        i_ss: 400e-6,
        r_l: 1e3,
        delta_v: 0.4,
        gamma: 1.0,
        eta: 1.0,
        temperature: 300.0,
        n_stages: 4,
        v_dd: 1.8,
    };
    // 8 k T / (3 I) = 2.761298e-17 and (1/0.4 + 1/0.4) = 5, so kappa^2 = 1.380649e-16.
    let want = 1.380649e-16f64.sqrt();
    let got = kappa_min(&p).unwrap();
    assert!(((got - want) / want).abs() < 1e-12, "{got:e} vs {want:e}");
    assert!((got - 1.175e-8).abs() < 1e-11);
}

fn no_jitter(run: RunDist, phi: f64) -> CdrStatConfig {
    CdrStatConfig::new(JitterSpec::default(), 0.0, run, phi)
}

#[test]
fn ftol_closed_form_without_jitter() {
    let cfg = no_jitter(RunDist::fixed(5).unwrap(), 0.5);
    let f = ftol_search(&cfg, 1e-12, DEFAULT_EPS_BRACKET).unwrap();
    assert!(!f.unbounded);
    assert!((f.eps - 0.5 / 4.5).abs() < 0.002, "{}", f.eps);

    // Later phase: the late margin 5 - 4.625 (1 + eps) closes first.
    let cfg = no_jitter(RunDist::fixed(5).unwrap(), 0.625);
    let f = ftol_search(&cfg, 1e-12, DEFAULT_EPS_BRACKET).unwrap();
    assert!((f.eps - (5.0 / 4.625 - 1.0)).abs() < 0.002, "{}", f.eps);
}

#[test]
fn jtol_zero_jitter_threshold() {
    let cfg = no_jitter(RunDist::fixed(5).unwrap(), 0.5);
    let curve = jtol_curve(&cfg, &[0.1], 1e-12, Bracket::new(0.0, 10.0).unwrap()).unwrap();
    let p = curve.points[0];
    // The arcsine support reaches the 0.5 UI margin when amp sin(0.5 pi) = 0.5.
    let want = 0.5 / (std::f64::consts::PI * 0.1 * 5.0).sin();
    assert!(!p.unbounded);
    assert!(((p.amp_pp - want) / want).abs() < 0.02, "{}", p.amp_pp);
}

#[test]
fn sj_null_at_unit_frequency() {
    for n in 1..=20 {
        assert_eq!(sj_differential_amplitude(0.7, 1.0, n), 0.0);
    }
    let cfg = CdrStatConfig::reference(0.01);
    let base = ber_estimate(&cfg).unwrap();
    let amps: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
    let surface = ber_surface(&cfg, &[1.0], &amps).unwrap();
    for b in &surface.ber[0] {
        assert!(((b - base) / base).abs() <= 1e-15, "{b:e} vs {base:e}");
    }
    let curve = jtol_curve(&cfg, &[0.1, 1.0], 1e-12, Bracket::new(0.0, 10.0).unwrap()).unwrap();
    assert!(!curve.points[0].unbounded);
    assert!(curve.points[1].unbounded);
}

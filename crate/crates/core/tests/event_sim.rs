//! End-to-end behavior of the event-driven receiver model.

use gcco_core::sim::{eye_capture, eye_stats, resync_check, Pattern, SamplerConfig};
use gcco_core::{simulate, JitterSpec, SimConfig, SimResult};

const RATE: f64 = 2.5e9;

/// Sampling-instant offsets from the preceding sampler-input edge, in UI,
/// reduced modulo one UI.
fn phases(r: &SimResult) -> Vec<f64> {
    let edges: Vec<f64> = r.transitions.iter().map(|t| t.0).collect();
    r.sampling_instants
        .iter()
        .filter_map(|&s| {
            let i = edges.partition_point(|&e| e < s).checked_sub(1)?;
            Some(((s - edges[i]) / r.ui).rem_euclid(1.0))
        })
        .collect()
}

#[test]
fn clean_channel_samples_mid_bit() {
    let cfg = SimConfig::new(RATE, RATE, 0.75, SamplerConfig::CK_OUT, 127 * 100);
    let r = simulate(&cfg).unwrap();
    assert_eq!(r.error_count, 0);
    assert!(r.bits_scored() >= 12_600);
    let p = phases(&r);
    assert!(p.len() >= 12_600);
    for x in p {
        assert!((x - 0.5).abs() < 1e-9, "{x}");
    }
}

#[test]
fn phase_mode_eye_is_a_single_line() {
    let cfg = SimConfig::new(RATE, RATE, 0.75, SamplerConfig::Phase { phi: 0.5 }, 5000);
    let r = simulate(&cfg).unwrap();
    let h = eye_capture(&r, 0.01).unwrap();
    let occupied: Vec<usize> = (0..h.n_bins())
        .filter(|&i| h.counts[0][i] + h.counts[1][i] > 0)
        .collect();
    assert_eq!(occupied.len(), 1);
    assert!((h.bin_center(occupied[0]) - 0.5).abs() <= 0.01);
}

#[test]
fn stage3_inverted_tap_samples_earlier() {
    let cfg = SimConfig::new(RATE, RATE, 0.75, SamplerConfig::STAGE3_INVERTED, 2000);
    let r = simulate(&cfg).unwrap();
    assert_eq!(r.error_count, 0);
    for x in phases(&r) {
        assert!((x - 0.375).abs() < 1e-9, "{x}");
    }
}

#[test]
fn safe_delay_window_resynchronizes() {
    for tau in [0.55, 0.65, 0.75, 0.85, 0.95] {
        for eps in [0.0, 0.01, -0.01] {
            let mut cfg =
                SimConfig::new(RATE, RATE / (1.0 + eps), tau, SamplerConfig::CK_OUT, 20_000);
            cfg.pattern = Pattern::prbs7();
            let r = simulate(&cfg).unwrap();
            let s = resync_check(&r);
            assert!(s.n_edges > 5000);
            assert_eq!(s.n_missed, 0, "tau {tau} eps {eps}");
            assert_eq!(s.n_early_release, 0, "tau {tau} eps {eps}");
            if eps == 0.0 {
                assert_eq!(r.error_count, 0, "tau {tau}");
            }
        }
    }
}

#[test]
fn late_freeze_cuts_longest_runs() {
    // With a slow clock and a long delay line, the freeze at the next data
    // edge lands before the last sample of a seven-bit run.
    let cfg = SimConfig::new(RATE, RATE / 1.01, 0.95, SamplerConfig::CK_OUT, 20_000);
    let r = simulate(&cfg).unwrap();
    assert!(r.missing_count > 0);
    assert_eq!(r.wrong_count, 0);
}

#[test]
fn short_delay_releases_before_freeze_settles() {
    let cfg = SimConfig::new(RATE, RATE / 1.01, 0.45, SamplerConfig::CK_OUT, 20_000);
    let r = simulate(&cfg).unwrap();
    let s = resync_check(&r);
    assert!(s.n_early_release as f64 > 0.99 * s.n_edges as f64, "{s:?}");
    assert!(s.max_consecutive_early_release >= 10);

    // Shorter still, the clock phase after release drifts past tolerance.
    let mut cfg = SimConfig::new(RATE, RATE / 1.01, 0.4, SamplerConfig::CK_OUT, 20_000);
    cfg.oscillator.jit_sigma = 0.01;
    let s = resync_check(&simulate(&cfg).unwrap());
    assert!(s.n_missed > 0, "{s:?}");
}

fn sj_scenario(sampler: SamplerConfig) -> SimConfig {
    let mut cfg = SimConfig::new(RATE, 2.375e9, 0.75, sampler, 25_000);
    cfg.jitter = JitterSpec::default().with_sj(0.1, 0.1);
    cfg
}

/// Reference DJ/RJ on top of the sinusoid, oscillator one percent slow.
fn jittered_scenario(sampler: SamplerConfig) -> SimConfig {
    let mut cfg = SimConfig::new(RATE, RATE / 1.01, 0.75, sampler, 25_000);
    cfg.jitter = JitterSpec {
        dj_pp: 0.4,
        rj_rms: 0.021,
        ..JitterSpec::default()
    }
    .with_sj(0.1, 0.1);
    cfg
}

#[test]
fn left_eye_edge_narrower_than_right() {
    let r = simulate(&sj_scenario(SamplerConfig::CK_OUT)).unwrap();
    let e = eye_stats(&r).unwrap();
    assert!(e.left_std < e.right_std, "{e:?}");
    assert!(e.left_std < 0.05, "{e:?}");
}

#[test]
fn stage3_inverted_tap_widens_right_opening() {
    let plain = eye_stats(&simulate(&jittered_scenario(SamplerConfig::CK_OUT)).unwrap()).unwrap();
    let inv = eye_stats(&simulate(&jittered_scenario(SamplerConfig::STAGE3_INVERTED)).unwrap()).unwrap();
    assert!(inv.right_inner > plain.right_inner, "{inv:?} {plain:?}");
    assert!(inv.midpoint().abs() < 0.1, "{inv:?}");
}

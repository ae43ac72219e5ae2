use std::f64::consts::TAU;

use proptest::prelude::*;
use sha_core::analysis::gain_report;
use sha_core::architecture::{
    channel_weights, phase_profile, ArchitectureConfig, ArchitectureKind, ChannelControls,
};
use sha_core::dof::{build_dof_matrix, dof_rank, elementary_transform, matrix_rank, DEFAULT_RANK_TOL};
use sha_core::sim::{measure_gains, SimParams};
use sha_core::waveform::{CombPhases, HarmonicWaveform, SquareWave};
use sha_core::wrap_phase;

const F_HM: f64 = 1e9;
const F_RF: f64 = 28e9;

fn kind_strategy() -> impl Strategy<Value = ArchitectureKind> {
    prop_oneof![
        Just(ArchitectureKind::Hma),
        Just(ArchitectureKind::HmJpta2),
        Just(ArchitectureKind::HmJpta3),
    ]
}

fn controls_for(kind: ArchitectureKind, tau: f64, rf: f64, lo: f64) -> ChannelControls {
    match kind {
        ArchitectureKind::Hma => ChannelControls::delay(tau),
        ArchitectureKind::HmJpta2 => ChannelControls::new(tau, rf, 0.0),
        _ => ChannelControls::new(tau, rf, lo),
    }
}

fn mean_power(w: &HarmonicWaveform) -> f64 {
    let samples = 4 * (w.m_max() as usize + 1);
    w.sample_period(samples).iter().map(|(_, v)| v.norm_sqr()).sum::<f64>() / samples as f64
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn parseval_random(m_max in 0u32..12, power in 0.01f64..10.0, seed in any::<u64>()) {
        let w = HarmonicWaveform::random_complex(m_max, power, seed, F_HM).unwrap();
        prop_assert!((w.total_power() - power).abs() < 1e-12 * power);
        prop_assert!((mean_power(&w) - power).abs() < 1e-9 * power);
    }

    #[test]
    fn parseval_square(duty in 0.02f64..1.0, amp in 0.1f64..3.0, m_max in 1u32..40, bipolar in any::<bool>()) {
        let w = SquareWave::new(duty, amp, m_max, F_HM).bipolar(bipolar).build().unwrap();
        let p = w.total_power();
        prop_assert!((mean_power(&w) - p).abs() < 1e-9 * p.max(1e-12));
        // Truncation can only drop power.
        prop_assert!(p <= SquareWave::new(duty, amp, m_max, F_HM).bipolar(bipolar).full_power() * (1.0 + 1e-12));
    }

    #[test]
    fn weights_preserve_magnitude(
        kind in kind_strategy(),
        n in 2usize..12,
        tau in -1e-9f64..1e-9,
        rf in -10.0f64..10.0,
        lo in -10.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let w = HarmonicWaveform::random_complex(4, 1.0, seed, F_HM).unwrap();
        let cfg = ArchitectureConfig::new(kind, n, 0.5, F_RF, w.clone()).unwrap();
        let ctl = controls_for(kind, tau, rf, lo);
        for ch in 0..n {
            let cw = channel_weights(&cfg, &ctl, ch).unwrap();
            for (m, c) in cw.iter() {
                prop_assert!((c.norm() - w.coeff(m).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delay_line_advances_the_lo(n in 2usize..10, tau in -2e-9f64..2e-9, t in 0.0f64..1e-9, seed in any::<u64>()) {
        // With only a delay, channel n sees the LO advanced by n*d_tau.
        let w = HarmonicWaveform::random_complex(3, 1.0, seed, F_HM).unwrap();
        let cfg = ArchitectureConfig::new(ArchitectureKind::Hma, n, 0.5, F_RF, w.clone()).unwrap();
        let ctl = ChannelControls::delay(tau);
        for ch in 0..n {
            let cw = channel_weights(&cfg, &ctl, ch).unwrap();
            let got = cw.eval_time(t);
            let want = w.eval_time(t + ch as f64 * tau);
            prop_assert!((got - want).norm() < 1e-9, "ch {ch}: {got} vs {want}");
        }
    }

    #[test]
    fn hma_profile_is_linear_in_m(tau in -1e-9f64..1e-9, m in -6i32..=6) {
        let w = HarmonicWaveform::comb(&(-6..=6).collect::<Vec<_>>(), 1.0, CombPhases::Zero, F_HM).unwrap();
        let cfg = ArchitectureConfig::new(ArchitectureKind::Hma, 4, 0.5, F_RF, w).unwrap();
        let p = phase_profile(&cfg, &ChannelControls::delay(tau), &[m]).unwrap();
        let want = wrap_phase(TAU * m as f64 * F_HM * tau);
        prop_assert!(wrap_phase(p.entries[0].d_phi_wrapped_rad - want).abs() < 1e-9);
    }

    #[test]
    fn array_gain_is_n_for_any_waveform(kind in kind_strategy(), n in 2usize..64, m_max in 0u32..8, seed in any::<u64>()) {
        let w = HarmonicWaveform::random_complex(m_max, 1.0, seed, F_HM).unwrap();
        let cfg = ArchitectureConfig::new(kind, n, 0.5, F_RF, w.clone()).unwrap();
        let ms: Vec<i32> = w.harmonics().filter(|&m| w.is_occupied(m)).collect();
        let r = gain_report(&cfg, &ChannelControls::default(), &ms).unwrap();
        for e in &r.entries {
            prop_assert!((e.ag.unwrap() - n as f64).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn waveform_json_round_trip(m_max in 0u32..10, seed in any::<u64>(), real in any::<bool>()) {
        let w = if real {
            HarmonicWaveform::comb(&(-(m_max as i32)..=m_max as i32).collect::<Vec<_>>(), 1.0,
                CombPhases::ConjugateSymmetricRandom { seed }, F_HM).unwrap()
        } else {
            HarmonicWaveform::random_complex(m_max, 1.0, seed, F_HM).unwrap()
        };
        let text = serde_json::to_string(&w).unwrap();
        let back: HarmonicWaveform = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn architecture_json_round_trip(kind in kind_strategy(), n in 2usize..32, d in 0.1f64..2.0, seed in any::<u64>()) {
        let w = HarmonicWaveform::random_complex(3, 1.0, seed, F_HM).unwrap();
        let cfg = ArchitectureConfig::new(kind, n, d, F_RF, w).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ArchitectureConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn elementary_transform_keeps_rank(
        f_rf in 1e8f64..5e11,
        f_hm in 1e5f64..2e10,
        set in proptest::collection::btree_set(-6i32..=6, 1..7),
    ) {
        let set: Vec<i32> = set.into_iter().collect();
        let a = build_dof_matrix(ArchitectureKind::HmJpta3, &set).unwrap();
        let b = elementary_transform(f_rf, f_hm).unwrap().hardware_basis(&a).unwrap();
        prop_assert_eq!(dof_rank(&a, DEFAULT_RANK_TOL), matrix_rank(&b, DEFAULT_RANK_TOL));
    }
}

#[test]
fn doubling_channels_halves_normalized_noise() {
    // Output noise relative to signal gain goes as 1/N.
    let w = HarmonicWaveform::comb(&[-1, 0, 1], 1.0, CombPhases::Zero, F_HM).unwrap();
    let ratio = |n: usize| {
        let cfg = ArchitectureConfig::new(ArchitectureKind::Hma, n, 0.5, F_RF, w.clone()).unwrap();
        let p = SimParams::for_waveform(&w, 8, 0.0).with_noise(1.0, 77);
        let g = measure_gains(&cfg, &ChannelControls::delay(0.1e-9), &p, 3000).unwrap();
        g.entries.iter().map(|e| e.g_noise / e.g_sig).collect::<Vec<_>>()
    };
    let (r4, r8) = (ratio(4), ratio(8));
    for (a, b) in r4.iter().zip(&r8) {
        let db = 10.0 * (a / b / 2.0).log10();
        assert!(db.abs() < 0.3, "ratio off by {db} dB");
    }
}

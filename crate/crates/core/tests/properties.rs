use diffchan_core::channels::{pack_complex, sspa_gain, unpack_complex};
use diffchan_core::diffusion::{NoiseSchedule, ScheduleKind, Trajectory};
use diffchan_core::e2e::argmax_rows;
use diffchan_core::metrics::wasserstein1_1d;
use diffchan_core::nn::Tensor;
use num_complex::Complex;
use proptest::prelude::*;

fn schedule_kind() -> impl Strategy<Value = ScheduleKind> {
    prop_oneof![
        (1e-4..0.5f64).prop_map(|beta| ScheduleKind::Constant { beta }),
        (1e-4..0.01f64, 1e-3..0.2f64).prop_map(|(start, scale)| ScheduleKind::Sigmoid { start, scale }),
        Just(ScheduleKind::Cosine),
    ]
}

proptest! {
    #[test]
    fn schedule_invariants(kind in schedule_kind(), steps in 1usize..400, beta_variance: bool) {
        let s = NoiseSchedule::with_variance(kind, steps, beta_variance).unwrap();
        prop_assert_eq!(s.alpha_bar(0), 1.0);
        for t in 1..=steps {
            prop_assert!(s.beta(t) > 0.0 && s.beta(t) <= 1.0);
            prop_assert!((s.alpha(t) - (1.0 - s.beta(t))).abs() < 1e-15);
            prop_assert!(s.alpha_bar(t) <= s.alpha_bar(t - 1));
            prop_assert!((s.alpha_bar(t) - s.alpha_bar(t - 1) * s.alpha(t)).abs() < 1e-15);
            prop_assert!(s.sigma(t) >= 0.0);
            prop_assert!(s.sigma(t) <= s.beta(t).sqrt() + 1e-12);
            if beta_variance {
                prop_assert!((s.sigma(t) - s.beta(t).sqrt()).abs() < 1e-15);
            }
        }
        let rebuilt = NoiseSchedule::from_betas(s.kind().clone(), s.betas(), beta_variance).unwrap();
        prop_assert_eq!(rebuilt, s);
    }

    #[test]
    fn cosine_schedule_reaches_zero_snr(steps in 1usize..2000) {
        let s = NoiseSchedule::new(ScheduleKind::Cosine, steps).unwrap();
        prop_assert_eq!(s.alpha_bar(steps), 0.0);
        prop_assert!(s.is_zero_snr());
    }

    #[test]
    fn uniform_trajectory_is_valid(total in 1usize..1000, frac in 0.0..1.0f64) {
        let len = 1 + ((total - 1) as f64 * frac) as usize;
        let tr = Trajectory::uniform(total, len).unwrap();
        let steps = tr.steps();
        prop_assert!(steps[0] >= 1);
        prop_assert_eq!(*steps.last().unwrap(), total);
        prop_assert!(steps.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(steps.len() <= len);
        let pairs: Vec<_> = tr.transitions().collect();
        prop_assert_eq!(pairs.len(), steps.len());
        prop_assert_eq!(pairs.last().unwrap().1, 0);
        prop_assert!(pairs.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn pack_unpack_round_trip(parts in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 0..40)) {
        let z: Vec<Complex<f64>> = parts.iter().map(|&(re, im)| Complex::new(re, im)).collect();
        let packed = pack_complex(&z);
        prop_assert_eq!(packed.len(), 2 * z.len());
        prop_assert_eq!(unpack_complex(&packed).unwrap(), z);
    }

    #[test]
    fn unpack_rejects_odd_lengths(len in 0usize..20) {
        let x = vec![0.0f64; 2 * len + 1];
        prop_assert!(unpack_complex(&x).is_err());
    }

    #[test]
    fn w1_symmetry_and_shift(
        x in prop::collection::vec(-100.0..100.0f64, 1..60),
        seed in any::<u64>(),
        shift in -10.0..10.0f64,
    ) {
        let mut y = x.clone();
        let mut state = seed;
        for v in &mut y {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v += ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 4.0;
        }
        let d = wasserstein1_1d(&x, &y).unwrap();
        prop_assert!((d - wasserstein1_1d(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(d >= 0.0);
        // translating one side by a constant moves W1 by at most |shift|
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let ds = wasserstein1_1d(&x, &ys).unwrap();
        prop_assert!((ds - d).abs() <= shift.abs() + 1e-9);
        let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
        prop_assert!((wasserstein1_1d(&x, &xs).unwrap() - shift.abs()).abs() < 1e-9);
        prop_assert!((wasserstein1_1d(&xs, &ys).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn argmax_ignores_row_shifts(
        rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 5), 1..20),
        shift in -50.0..50.0f64,
    ) {
        let t = Tensor::from_rows(&rows).unwrap();
        let shifted = t.map(|v| v + shift);
        prop_assert_eq!(argmax_rows(&t), argmax_rows(&shifted));
        let scaled = t.map(|v| 3.0 * v);
        prop_assert_eq!(argmax_rows(&t), argmax_rows(&scaled));
    }

    #[test]
    fn sspa_output_is_monotone_and_bounded(
        p in 0.5..10.0f64,
        a0 in 0.1..5.0f64,
        v0 in 0.5..20.0f64,
        a in 0.0..50.0f64,
        da in 0.0..5.0f64,
    ) {
        let out = |a: f64| sspa_gain(a, p, a0, v0) * a;
        prop_assert!(out(a) <= a0 * (1.0 + 1e-12));
        prop_assert!(out(a) <= v0 * a + 1e-12);
        prop_assert!(out(a + da) >= out(a) - 1e-12);
    }
}

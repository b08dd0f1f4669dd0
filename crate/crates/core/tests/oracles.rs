mod common;

use freqscope_core::classify::{KnnModel, Ranker};
use freqscope_core::defend::{apply_defense, evaluate_defense, Defense};
use freqscope_core::experiment::ClassifierParams;
use freqscope_core::governor::{simulate, Governor, SimConfig};
use freqscope_core::profile::ryzen5;
use proptest::prelude::*;

#[test]
fn governor_invariants_hold() {
    common::governor_invariants(200).unwrap();
}

#[test]
fn knn_matches_brute_force() {
    common::knn_oracle(200).unwrap();
}

#[test]
fn noise_injection_degrades_fingerprinting() {
    let ds = common::website_dataset(ryzen5(), Governor::Ondemand).unwrap();
    let d = Defense::NoiseInject { burst_rate_hz: 20.0, burst_height: 1.0, seed: 5 };
    let (clean, noisy) = evaluate_defense(&d, &ds, &ClassifierParams::knn(1)).unwrap();
    assert!(clean.top1_accuracy - noisy.top1_accuracy >= 0.2, "{} -> {}", clean.top1_accuracy, noisy.top1_accuracy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_governor_is_bounded_and_deterministic(seed in any::<u64>(), g in 0usize..7) {
        let g = Governor::ALL[g];
        let w = common::random_workload(seed);
        let p = ryzen5();
        let mut cfg = SimConfig::new(p.clone(), g).with_set_speed(p.pstates[(seed % 28) as usize]);
        cfg.allow_any_governor = true;
        let a = simulate(&w, &cfg).unwrap();
        prop_assert_eq!(&a, &simulate(&w, &cfg).unwrap());
        prop_assert_eq!(a.len(), w.len());
        prop_assert!(a.samples.iter().all(|&s| p.pstate_index(s).is_some() && s <= cfg.top_khz()));
    }

    #[test]
    fn knn_oracle_on_random_points(
        pts in prop::collection::vec((prop::collection::vec(0u8..5, 3), 0u8..4), 4..40),
        q in prop::collection::vec(0u8..5, 3),
        k in 1usize..4,
    ) {
        let train: Vec<(Vec<f64>, String)> =
            pts.iter().map(|(x, c)| (x.iter().map(|&v| v as f64).collect(), format!("c{c}"))).collect();
        let x: Vec<f64> = q.iter().map(|&v| v as f64).collect();
        let m = KnnModel::fit(k, &train).unwrap();
        prop_assert_eq!(m.rank(&x).unwrap(), common::brute_force_rank(&train, k, &x));
    }

    #[test]
    fn defenses_preserve_shape(seed in any::<u64>(), factor in 2u32..60, rate in 0.0f64..50.0, height in 0.0f64..=1.0) {
        let w = common::random_workload(seed);
        let t = simulate(&w, &SimConfig::new(ryzen5(), Governor::Ondemand)).unwrap();
        let p = ryzen5();
        for d in [
            Defense::ResolutionReduce { factor },
            Defense::NoiseInject { burst_rate_hz: rate, burst_height: height, seed },
            Defense::ConstantMask { freq_khz: p.pstates[(seed % 28) as usize] },
        ] {
            let out = apply_defense(&d, &t, &p).unwrap();
            prop_assert_eq!(out.len(), t.len());
            prop_assert_eq!(out.interval_ms, t.interval_ms);
            prop_assert!(out.samples.iter().all(|&s| s >= p.min_freq_khz && s <= p.effective_max_khz()));
        }
    }
}

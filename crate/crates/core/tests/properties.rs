//! Randomized invariants over channels, points and configurations.

mod common;

use common::*;
use irs_multicast::alg2::{mm_map_e, mm_map_f};
use irs_multicast::baselines::quantize_phases;
use irs_multicast::harness::{emit_csv, read_results_csv, ExperimentResults, ResultRow};
use irs_multicast::model::{rate_k, sum_rate, Precoder, ReflectVector};
use irs_multicast::numerics::{logsumexp_stable, softmin_weights};
use irs_multicast::surrogate::{lemma1_coeffs, surrogate_rate, Form};
use irs_multicast::{CVec, Cplx};
use proptest::prelude::*;

fn phases(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantization_is_idempotent_and_keeps_the_reference(p in phases(12), bits in 1u32..5) {
        let e = ReflectVector::from_phases(&p);
        let q = quantize_phases(&e, bits).unwrap();
        prop_assert_eq!(q.as_vec()[12], Cplx::new(1.0, 0.0));
        prop_assert!(q.as_vec().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        prop_assert_eq!(quantize_phases(&q, bits).unwrap(), q.clone());
        // Every snapped phase is at most half a level away in angle.
        let half = std::f64::consts::PI / (1u32 << bits) as f64;
        for (a, b) in e.as_vec().iter().zip(q.as_vec().iter()) {
            prop_assert!((a * b.conj()).arg().abs() <= half + 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent(re in prop::collection::vec(-3.0f64..3.0, 9), im in prop::collection::vec(-3.0f64..3.0, 9)) {
        let x = CVec::from_fn(9, |i| Cplx::new(re[i], im[i]));
        prop_assume!(x[8].norm() > 1e-6);
        let p = ReflectVector::project(&x).unwrap();
        let pp = ReflectVector::project(p.as_vec()).unwrap();
        prop_assert!(p.as_vec().iter().zip(pp.as_vec().iter()).all(|(a, b)| (a - b).norm() < 1e-14));
        prop_assert!(ReflectVector::new(p.into_vec()).is_ok());
    }

    #[test]
    fn smoothing_sandwich(v in prop::collection::vec(-5.0f64..5.0, 1..6), mu in 1.0f64..1000.0) {
        let f = logsumexp_stable(&v, mu).unwrap();
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(f <= m + 1e-12);
        prop_assert!(m <= f + (v.len() as f64).ln() / mu + 1e-12);
        let w = softmin_weights(&v, mu).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surrogate_never_exceeds_the_rate(seed in 0u64..1000, pts in 0u64..1000) {
        let (sc, ch) = desk_instance(seed);
        let mut r = rng(pts);
        let (f, e) = random_point(&sc, &mut r);
        let coeffs = lemma1_coeffs(&sc, &ch, &f, &e);
        for _ in 0..20 {
            let (g, t) = random_point(&sc, &mut r);
            for k in 0..sc.n_users() {
                let bound = surrogate_rate(&coeffs, &g, &t, k, Form::Joint).unwrap();
                let rate = rate_k(&sc, &ch, &g, &t, k);
                prop_assert!(bound <= rate + 1e-9 * rate.max(1.0), "user {}: {} > {}", k, bound, rate);
            }
        }
    }

    #[test]
    fn maps_stay_feasible(seed in 0u64..1000, pts in 0u64..1000) {
        let (sc, ch) = desk_instance(seed);
        let ch = ch.whitened();
        let mut r = rng(pts);
        let (f, e) = random_point(&sc, &mut r);
        let coeffs = lemma1_coeffs(&sc, &ch, &f, &e);
        let (fx, _) = mm_map_f(&sc, &coeffs, 100.0);
        prop_assert!(Precoder(fx).is_feasible(sc.p_t * (1.0 + 1e-12)));
        let ex = mm_map_e(&sc, &coeffs, 100.0, 1e-10);
        prop_assert!(ReflectVector::new(ex).is_ok());
    }

    #[test]
    fn whitening_preserves_the_objective(seed in 0u64..1000, pts in 0u64..1000) {
        let (sc, ch) = desk_instance(seed);
        let mut r = rng(pts);
        let (f, e) = random_point(&sc, &mut r);
        let a = sum_rate(&sc, &ch, &f, &e);
        let b = sum_rate(&sc, &ch.whitened(), &f, &e);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

fn row() -> impl Strategy<Value = ResultRow> {
    (
        -50.0f64..50.0,
        0usize..1000,
        any::<u64>(),
        0.0f64..100.0,
        0.0f64..1e3,
        0usize..5000,
        0.0f64..1e5,
    )
        .prop_map(|(v, trial, seed, rate, ee, iters, ms)| ResultRow {
            sweep_param: "pt_dbm".into(),
            sweep_value: v,
            trial,
            seed,
            algorithm: "irs_alg2".into(),
            sum_rate_bpshz: rate,
            ee_bit_hz_j: ee,
            iters,
            wall_ms: ms,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn results_csv_round_trips(rows in prop::collection::vec(row(), 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let res = ExperimentResults { rows: rows.clone(), n_sweep_points: 1, ..Default::default() };
        emit_csv(&res, &path).unwrap();
        let back = read_results_csv(&path).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!((a.trial, a.seed, a.iters), (b.trial, b.seed, b.iters));
            prop_assert_eq!(&a.algorithm, &b.algorithm);
            for (x, y) in [
                (a.sweep_value, b.sweep_value),
                (a.sum_rate_bpshz, b.sum_rate_bpshz),
                (a.ee_bit_hz_j, b.ee_bit_hz_j),
                (a.wall_ms, b.wall_ms),
            ] {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}

mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gmmpp::analysis::{ess, measure_of_fit};
use gmmpp::ctmc::{matrix_exponential, omega_from, simulate_augmented, CtmcPath, Jump, PathSkeleton};
use gmmpp::epidemic::EpidemicParams;
use gmmpp::intensity::{form_integral, Intensity};
use gmmpp::model::{
    build_state_map, expand_q_matrix, FormKind, FunctionalForm, ModelSpec, PriorSpec, PsiPrior, QParams,
    RatePrior, TransPrior,
};
use gmmpp::special::{norm_cdf, norm_quantile};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn q_params() -> impl Strategy<Value = (Vec<bool>, QParams)> {
    (2usize..5)
        .prop_flat_map(|k| prop::collection::vec(any::<bool>(), k))
        .prop_flat_map(|flags| {
            let k = flags.len();
            let rates = prop::collection::vec(0.01f64..5.0, k);
            let trans: Vec<_> = flags
                .iter()
                .map(|&f| simplex(k - 1 + usize::from(f)))
                .collect();
            (Just(flags), rates, trans)
        })
        .prop_map(|(flags, theta_rates, theta_trans)| {
            (flags, QParams { theta_rates, theta_trans })
        })
}

fn intensity<'a>(spec: &'a ModelSpec, params: &'a [Vec<f64>], skel: &'a PathSkeleton) -> Intensity<'a> {
    Intensity {
        forms: &spec.forms,
        params,
        h: &spec.state_map.h,
        skel,
        horizon: spec.horizon,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn q_rows_sum_to_zero((flags, theta) in q_params()) {
        let m = build_state_map(flags.len(), &flags);
        let q = expand_q_matrix(&theta, &m).unwrap();
        for i in 0..m.e {
            let row: f64 = (0..m.e).map(|j| q[(i, j)]).sum();
            prop_assert!(row.abs() < 1e-12);
            prop_assert!((q[(i, i)] + theta.holding_rate(m.h[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn state_map_is_surjective(flags in prop::collection::vec(any::<bool>(), 1..6)) {
        let m = build_state_map(flags.len(), &flags);
        for k in 0..flags.len() {
            prop_assert!(m.h.contains(&k));
        }
        prop_assert!(m.e == flags.len() || m.e == 2 * flags.len());
    }

    #[test]
    fn transition_matrix_is_stochastic((flags, theta) in q_params(), t in 0.01f64..5.0) {
        let m = build_state_map(flags.len(), &flags);
        let q = expand_q_matrix(&theta, &m).unwrap();
        let p = matrix_exponential(&q, t);
        let dense: Vec<Vec<f64>> = (0..m.e).map(|i| (0..m.e).map(|j| q[(i, j)]).collect()).collect();
        let oracle = support::expm(&dense, t);
        for i in 0..m.e {
            let row: f64 = (0..m.e).map(|j| p[(i, j)]).sum();
            prop_assert!((row - 1.0).abs() < 1e-10);
            for j in 0..m.e {
                prop_assert!(p[(i, j)] >= -1e-12);
                prop_assert!((p[(i, j)] - oracle[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn augmented_paths_collapse_to_valid_paths((flags, theta) in q_params(), seed in any::<u64>()) {
        let m = build_state_map(flags.len(), &flags);
        let q = expand_q_matrix(&theta, &m).unwrap();
        let omega = omega_from(&theta, 2.0);
        let mut pi0 = vec![0.0; m.e];
        pi0[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aug = simulate_augmented(&q, &m, &omega, &pi0, 10.0, &mut rng).unwrap();
        let path = aug.collapse();
        prop_assert!(path.is_valid(10.0));
        prop_assert!(path.jumps.windows(2).all(|w| w[0].time < w[1].time));
        prop_assert!(path.jumps.iter().all(|j| m.h.get(j.state).is_some()));
        prop_assert_eq!(aug.events.len(), aug.n_virtual() + path.jumps.len());
    }

    #[test]
    fn integrals_are_additive(
        kind in prop::sample::select(vec![FormKind::Constant, FormKind::Linear, FormKind::Exponential]),
        r in 0.1f64..20.0,
        slope in -0.3f64..0.3,
        a in 0.0f64..10.0,
        l1 in 0.01f64..10.0,
        l2 in 0.01f64..10.0,
    ) {
        let shape = [slope];
        let whole = form_integral(kind, &shape, r, a, a, a + l1 + l2);
        let parts = form_integral(kind, &shape, r, a, a, a + l1) + form_integral(kind, &shape, r, a, a + l1, a + l1 + l2);
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn epidemic_integral_is_additive_and_continuous(
        a in 100.0f64..400.0,
        b1 in 0.0f64..20.0,
        d1 in -4.0f64..1.0,
        c1 in 0.5f64..5.0,
        b2 in 0.0f64..20.0,
        d2 in -1.0f64..2.5,
        c2 in 0.2f64..3.0,
        t1 in 50.0f64..250.0,
        cut in 0.0f64..371.0,
    ) {
        let p = EpidemicParams { a, b1, d1, c1_dot: c1, b2, d2, c2_dot: c2 };
        prop_assume!(p.is_admissible() && p.gamma(t1) > 0.0);
        let whole = p.integral(t1, 0.0, 371.0);
        let parts = p.integral(t1, 0.0, cut) + p.integral(t1, cut, 371.0);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
        prop_assert!((p.value(t1, t1) - p.growth(t1)).abs() <= 1e-9 * p.growth(t1).max(1.0));
    }

    #[test]
    fn normal_quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        prop_assert!((norm_cdf(norm_quantile(p)) - p).abs() <= 1e-12);
    }

    #[test]
    fn ess_is_bounded_and_affine_invariant(
        x in prop::collection::vec(-10.0f64..10.0, 20..200),
        scale in 0.1f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        prop_assume!(x.iter().any(|&v| v != x[0]));
        let e = ess(&x).unwrap();
        prop_assert!(e > 0.0 && e <= x.len() as f64);
        let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let e2 = ess(&y).unwrap();
        prop_assert!((e - e2).abs() <= 1e-6 * e);
    }

    #[test]
    fn measure_of_fit_is_a_metric(
        t1 in 0.5f64..19.5,
        t2 in 0.5f64..19.5,
        t3 in 0.5f64..19.5,
        l0 in 0.1f64..5.0,
        l1 in 0.1f64..5.0,
    ) {
        let spec = ModelSpec::new(
            vec![FunctionalForm::constant(l0), FunctionalForm::constant(l1)],
            QParams { theta_rates: vec![0.1, 0.1], theta_trans: vec![vec![1.0], vec![1.0]] },
            PriorSpec {
                theta_rates: vec![RatePrior::Fixed; 2],
                theta_trans: vec![TransPrior::Fixed; 2],
                psi: vec![vec![PsiPrior::flat()], vec![PsiPrior::flat()]],
            },
            None,
            20.0,
        );
        let params = spec.initial_params();
        let sk = |t: f64| PathSkeleton::new(
            CtmcPath { v0: 0, jumps: vec![Jump { time: t, state: 1 }] },
            vec![0.0, 0.0],
        ).unwrap();
        let (a, b, c) = (sk(t1), sk(t2), sk(t3));
        let (fa, fb, fc) = (intensity(&spec, &params, &a), intensity(&spec, &params, &b), intensity(&spec, &params, &c));
        let ab = measure_of_fit(&fa, &fb);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - measure_of_fit(&fb, &fa)).abs() < 1e-12);
        prop_assert!((ab - (l0 - l1).abs() * (t1 - t2).abs() / 20.0).abs() < 1e-10);
        prop_assert!(ab <= measure_of_fit(&fa, &fc) + measure_of_fit(&fc, &fb) + 1e-12);
    }
}

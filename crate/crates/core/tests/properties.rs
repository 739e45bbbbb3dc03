use macrobell::bell::{marginal_plus, BellSettings, FockBell, Tolerances};
use macrobell::fockspace::{pair_coherent, sign_povm, MeasurementConfig, DEFAULT_TAIL_TOL};
use macrobell::lhv::{self, KernelKey, LhvModel, NonlocalKernel, Side};
use macrobell::specfun::GaussianNoise;
use proptest::prelude::*;
use std::f64::consts::PI;

fn settings() -> impl Strategy<Value = BellSettings> {
    (-PI..PI, -PI..PI, -PI..PI, -PI..PI).prop_filter_map("distinct angles", |(t, t2, p, p2)| {
        ((t - t2).abs() > 1e-3 && (p - p2).abs() > 1e-3)
            .then_some(BellSettings { theta: t, theta_prime: t2, phi: p, phi_prime: p2 })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn povm_is_an_effect(alpha in 0.0..6.0f64, sigma in 0.0..5.0f64, theta in -PI..PI) {
        let cfg = MeasurementConfig::new(theta, alpha, GaussianNoise::new(sigma).unwrap()).unwrap();
        let e = sign_povm(&cfg, 10).unwrap();
        prop_assert!(e.hermiticity_error() < 1e-12);
        for ev in e.eigenvalues() {
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&ev), "eigenvalue {ev}");
        }
    }

    #[test]
    fn marginal_ignores_analyzer_angle(alpha in 0.0..6.0f64, sigma in 0.0..3.0f64, t1 in -PI..PI, t2 in -PI..PI) {
        let state = pair_coherent(1.1, DEFAULT_TAIL_TOL).unwrap();
        let noise = GaussianNoise::new(sigma).unwrap();
        let m = |t| marginal_plus(&state, &sign_povm(&MeasurementConfig::new(t, alpha, noise).unwrap(), state.cutoff()).unwrap()).unwrap();
        prop_assert!((m(t1) - m(t2)).abs() < 1e-12);
    }

    #[test]
    fn quantum_probabilities_are_probabilities(alpha in 0.0..6.0f64, sigma in 0.0..3.0f64, s in settings()) {
        let r = FockBell::new(1.1, alpha, &Tolerances::default()).unwrap().evaluate(GaussianNoise::new(sigma).unwrap(), &s).unwrap();
        for p in r.p_pp.iter().chain([&r.p_a, &r.p_b]) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(p));
        }
        prop_assert!(r.p_pp[2] <= r.p_a + 1e-12 && r.p_pp[2] <= r.p_b + 1e-12);
    }

    #[test]
    fn local_models_never_violate(seed in any::<u64>(), n in 1usize..8, w in 1i64..50, sigma in 0.0..20.0f64, s in settings()) {
        let model = lhv::random_lhv(seed, n, (-w, w), LhvModel::settings_angles(&s)).unwrap();
        let r = lhv::lhv_bell(&model, &s, GaussianNoise::new(sigma).unwrap()).unwrap();
        prop_assert!(r.s <= 1.0 + 1e-12, "s = {}", r.s);
    }

    #[test]
    fn table_round_trip(seed in any::<u64>(), n in 1usize..6, w in 0i64..30) {
        let model = lhv::random_lhv(seed, n, (-w, w), LhvModel::settings_angles(&BellSettings::STANDARD)).unwrap();
        prop_assert_eq!(LhvModel::from_table(&model.to_table()).unwrap(), model);
    }

    /// Random (not adversarial) kernels respect the slack bound at any noise.
    #[test]
    fn random_kernels_respect_slack(seed in any::<u64>(), m_max in 1u32..6, sigma in 0.5..50.0f64, shifts in prop::collection::vec(-5i64..=5, 64)) {
        let s = BellSettings::STANDARD;
        let model = lhv::random_lhv(seed, 3, (-8, 8), LhvModel::settings_angles(&s)).unwrap();
        let mut kernel = NonlocalKernel::identity(m_max);
        let mut it = shifts.iter().cycle();
        for l in 0..3 {
            for side in [Side::A, Side::B] {
                for local in 0..2 {
                    for remote in 0..2 {
                        for &(outcome, _) in &model.response(side, l, local).outcomes {
                            let m = (*it.next().unwrap()).clamp(-(m_max as i64), m_max as i64);
                            kernel.set_shift(KernelKey { side, lambda: l, local_angle: local, remote_angle: remote, outcome }, m).unwrap();
                        }
                    }
                }
            }
        }
        // macroscopic_bell asserts the bound internally
        let (r, slack) = lhv::macroscopic_bell(&model, &kernel, &s, GaussianNoise::new(sigma).unwrap()).unwrap();
        prop_assert!(slack >= 0.0 && r.s.is_finite());
    }
}

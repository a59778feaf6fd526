use emphatic::analytics::{
    emphasis_weights, key_system, lambda_operators, stability_report, value_function, PD_TOLERANCE,
};
use emphatic::environments::{random_task, RandomTaskLimits};
use emphatic::learners::{etd_step, interest_td0_step, ClipRule, LearnerState, TransitionView};
use emphatic::mdp::{importance_ratio, stationary_distribution, transition_matrix, PredictionTask};
use emphatic::rng::stream;
use proptest::prelude::*;

fn task(seed: u64) -> PredictionTask<f64> {
    random_task(&mut stream(seed), &RandomTaskLimits::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transition_rows_are_stochastic(seed in any::<u64>()) {
        let t = task(seed);
        for p in [transition_matrix(&t.model, &t.target), transition_matrix(&t.model, &t.behavior)] {
            for s in 0..p.rows() {
                let total: f64 = p.row(s).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stationary_distribution_is_invariant(seed in any::<u64>()) {
        let t = task(seed);
        let p = transition_matrix(&t.model, &t.behavior);
        let d = stationary_distribution(&p).unwrap();
        let moved = p.vecmat(&d);
        let gap = moved.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-9);
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_policies_give_unit_ratios(seed in any::<u64>()) {
        let t = task(seed);
        for s in 0..t.num_states() {
            for a in 0..t.model.num_actions() {
                prop_assert_eq!(importance_ratio(&t.behavior, &t.behavior, s, a).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn value_solves_lambda_bellman_equation(seed in any::<u64>()) {
        let t = task(seed);
        let v = value_function(&t).unwrap();
        let ops = lambda_operators(&t).unwrap();
        let gap = ops.apply(&v).iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-9, "gap {}", gap);
    }

    #[test]
    fn emphasis_at_least_interest_weighting(seed in any::<u64>()) {
        let t = task(seed);
        let m = emphasis_weights(&t).unwrap();
        let d = stationary_distribution(&transition_matrix(&t.model, &t.behavior)).unwrap();
        for s in 0..t.num_states() {
            prop_assert!(m[s] >= d[s] * t.interest[s] - 1e-12);
        }
    }

    #[test]
    fn key_matrix_positive_definite(seed in any::<u64>()) {
        let t = task(seed);
        let report = stability_report(&key_system(&t).unwrap().a_matrix);
        prop_assert!(report.min_sym_eigenvalue > PD_TOLERANCE);
    }

    #[test]
    fn follow_on_and_emphasis_nonnegative(
        steps in prop::collection::vec(
            (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=3.0, 0.0f64..=5.0, -2.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0),
            1..200,
        )
    ) {
        let mut st = LearnerState::with_theta(vec![0.3]);
        for (gamma, lam, interest, rho, reward, a, b) in steps {
            let (phi_s, phi_next) = ([a], [b]);
            let view = TransitionView {
                phi_s: &phi_s,
                phi_next: &phi_next,
                reward,
                rho,
                gamma_s: gamma,
                gamma_next: gamma,
                lam_s: lam,
                interest_s: interest,
            };
            etd_step(&mut st, &view, 0.01, &ClipRule::bounded(1.0));
            prop_assert!(st.follow_on >= 0.0);
            prop_assert!(st.emphasis_last >= 0.0);
        }
    }

    #[test]
    fn clipped_increments_within_bound(
        bound in 1e-3f64..1.0,
        steps in prop::collection::vec((0.0f64..=1.0, 0.0f64..=4.0, -5.0f64..5.0, -3.0f64..3.0), 1..100),
    ) {
        let mut st = LearnerState::with_theta(vec![0.0, 0.0]);
        for (gamma, rho, reward, x) in steps {
            let (phi_s, phi_next) = ([x, 1.0], [1.0, -x]);
            let view = TransitionView {
                phi_s: &phi_s,
                phi_next: &phi_next,
                reward,
                rho,
                gamma_s: gamma,
                gamma_next: gamma,
                lam_s: 0.5,
                interest_s: 1.0,
            };
            let before = st.theta.clone();
            etd_step(&mut st, &view, 0.5, &ClipRule::bounded(bound));
            for (new, old) in st.theta.iter().zip(&before) {
                prop_assert!((new - old).abs() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn infinite_bound_matches_unclipped(seed in any::<u64>()) {
        let t = task(seed);
        let sig = t.signals();
        let mut rng = stream(seed ^ 1);
        let (mut a, mut b) = (LearnerState::new(t.num_features()), LearnerState::new(t.num_features()));
        let mut s = 0;
        for _ in 0..200 {
            let (act, next, r) = emphatic::mdp::sample_step(&t.model, &t.behavior, s, &mut rng);
            let view = sig.view(s, next, r, t.importance_ratio(s, act).unwrap());
            etd_step(&mut a, &view, 0.1, &ClipRule::none());
            etd_step(&mut b, &view, 0.1, &ClipRule::bounded(f64::INFINITY));
            s = next;
        }
        prop_assert_eq!(a.theta, b.theta);
    }
}

#[test]
fn interest_td0_diverges_geometrically_on_the_two_state_chain() {
    let task = emphatic::environments::build_two_state::<f64>();
    let sig = task.signals();
    let mut st = LearnerState::with_theta(vec![10.0]);
    let mut s = 0;
    let mut visits = Vec::new();
    for _ in 0..60 {
        if s == 0 {
            visits.push(st.theta[0]);
        }
        let next = (s + 1) % 3;
        interest_td0_step(&mut st, &sig.view(s, next, 0.0, 1.0), 0.1);
        s = next;
    }
    let mut expected = 10.0f64;
    for (k, v) in visits.iter().enumerate() {
        assert!((v - expected).abs() <= 1e-12 * expected, "visit {k}: {v} vs {expected}");
        expected *= 1.1;
    }
    assert_eq!(visits.len(), 20);
}

use emphatic::analytics::{deterministic_recursion, key_system, stability_report, KeySystem};
use emphatic::environments::{random_task, RandomTaskLimits};
use emphatic::learners::{etd_step, ClipRule, LearnerState};
use emphatic::linalg::Matrix;
use emphatic::mdp::{sample_step, PredictionTask};
use emphatic::rng::{stream, uniform01};
use proptest::prelude::*;

fn small_task() -> PredictionTask<f64> {
    let limits = RandomTaskLimits {
        states: (4, 4),
        actions: (2, 2),
        features: (2, 2),
        gamma: (0.0, 0.8),
        ..Default::default()
    };
    random_task(&mut stream(6), &limits).unwrap()
}

/// Averages `e_t(φ_t − γ_{t+1}φ_{t+1})ᵀ` and `e_t R_{t+1}` along a behavior
/// trajectory; their expectations are `A` and `b`.
#[test]
fn trace_outer_products_average_to_key_system() {
    let task = small_task();
    let key = key_system(&task).unwrap();
    let k = task.num_features();
    let sig = task.signals();
    let mut st = LearnerState::<f64>::new(k);
    let mut a_sum = vec![0.0; k * k];
    let mut b_sum = vec![0.0; k];
    let mut rng = stream(2);
    let mut s = 0;
    let steps = 1_000_000;
    for _ in 0..steps {
        let (act, next, r) = sample_step(&task.model, &task.behavior, s, &mut rng);
        let view = sig.view(s, next, r, task.importance_ratio(s, act).unwrap());
        etd_step(&mut st, &view, 0.0, &ClipRule::none());
        let g = task.gamma[next];
        for i in 0..k {
            for j in 0..k {
                a_sum[i * k + j] += st.trace[i] * (view.phi_s[j] - g * view.phi_next[j]);
            }
            b_sum[i] += st.trace[i] * r;
        }
        s = next;
    }
    let a_hat = Matrix::from_vec(k, k, a_sum).scale(1.0 / steps as f64);
    let b_hat: Vec<f64> = b_sum.iter().map(|x| x / steps as f64).collect();
    let a_err = a_hat.sub(&key.a_matrix).frobenius() / key.a_matrix.frobenius();
    let b_diff: Vec<f64> = b_hat.iter().zip(&key.b_vector).map(|(x, y)| x - y).collect();
    let b_err = emphatic::scalar::norm2(&b_diff) / emphatic::scalar::norm2(&key.b_vector);
    assert!(a_err < 0.05, "A relative error {a_err}");
    assert!(b_err < 0.05, "b relative error {b_err}");
}

fn spd_system(entries: &[f64], n: usize, shift: f64, b: Vec<f64>) -> KeySystem<f64> {
    let m = Matrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let a = m.matmul(&m.transpose()).add(&Matrix::identity(n).scale(shift));
    let theta_star = a.solve(&b).ok();
    KeySystem { a_matrix: a, b_vector: b, emphasis: vec![], stationary: vec![], theta_star }
}

proptest! {
    #[test]
    fn recursion_contracts_monotonically(
        n in 1usize..4,
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        b in prop::collection::vec(-2.0f64..2.0, 4),
        shift in 0.05f64..1.0,
        frac in 0.05f64..0.95,
        theta0 in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let key = spd_system(&entries[..n * n], n, shift, b[..n].to_vec());
        let lo = stability_report(&key.a_matrix).min_sym_eigenvalue;
        let norm = key.a_matrix.spectral_norm();
        let alpha = frac * 2.0 * lo / (norm * norm);
        let star = key.theta_star.clone().unwrap();
        let path = deterministic_recursion(&key, &theta0[..n], alpha, 200);
        let dist = |t: &[f64]| t.iter().zip(&star).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for w in path.windows(2) {
            prop_assert!(dist(&w[1]) <= dist(&w[0]) * (1.0 + 1e-12) + 1e-15);
        }
    }
}

#[test]
fn recursion_reaches_fixed_point() {
    let mut rng = stream(12);
    let entries: Vec<f64> = (0..9).map(|_| 2.0 * uniform01(&mut rng) - 1.0).collect();
    let key = spd_system(&entries, 3, 0.5, vec![1.0, -1.0, 0.5]);
    let norm = key.a_matrix.spectral_norm();
    let alpha = stability_report(&key.a_matrix).min_sym_eigenvalue / (norm * norm);
    let path = deterministic_recursion(&key, &[0.0; 3], alpha, 20_000);
    let last = path.last().unwrap();
    for (x, y) in last.iter().zip(key.theta_star.as_ref().unwrap()) {
        assert!((x - y).abs() < 1e-8, "{last:?}");
    }
}

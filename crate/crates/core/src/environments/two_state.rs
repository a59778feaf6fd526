//! The two-state counterexample for interest-weighted TD(0).
//!
//! States `0` and `1` have features `1` and `2`; state `2` is the reset
//! state with feature `0` and `γ = 0`, so the chain `0 → 1 → 2 → 0` runs
//! forever while every pass through state `2` ends an episode.

use crate::linalg::Matrix;
use crate::mdp::{MdpModel, Policy, PredictionTask};
use crate::scalar::Scalar;

pub const STATE_ONE: usize = 0;
pub const STATE_TWO: usize = 1;
pub const RESET: usize = 2;

pub fn build_two_state<T: Scalar>() -> PredictionTask<T> {
    let model = MdpModel::from_fn(3, 1, |s, _, next| {
        let p = if next == (s + 1) % 3 { T::one() } else { T::zero() };
        (p, T::zero())
    })
    .expect("valid cycle");
    let policy = Policy::uniform(3, 1);
    let (o, z) = (T::one(), T::zero());
    PredictionTask::new(
        model,
        policy.clone(),
        policy,
        vec![o, o, z],
        vec![z; 3],
        vec![o, z, z],
        Matrix::from_rows(&[vec![o], vec![T::lit(2.0)], vec![z]]),
    )
    .expect("valid two-state task")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{stationary_distribution, transition_matrix};

    #[test]
    fn chain_structure() {
        let task = build_two_state::<f64>();
        let p = transition_matrix(&task.model, &task.target);
        assert_eq!(p.row(STATE_ONE), &[0.0, 1.0, 0.0]);
        assert_eq!(p.row(STATE_TWO), &[0.0, 0.0, 1.0]);
        assert_eq!(p.row(RESET), &[1.0, 0.0, 0.0]);
        assert_eq!(task.features.column(0), vec![1.0, 2.0, 0.0]);
        assert_eq!(task.interest, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_stationary_distribution() {
        let task = build_two_state::<f64>();
        let d = stationary_distribution(&transition_matrix(&task.model, &task.behavior)).unwrap();
        for x in d {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}

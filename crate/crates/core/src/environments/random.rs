//! Random prediction tasks that satisfy the policy and feature conditions by
//! construction: every transition probability is positive, the behavior
//! policy is mixed with the uniform policy, and features are redrawn until
//! they have full column rank over the states with positive interest.

use rand_core::RngCore;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::mdp::{MdpModel, Policy, PredictionTask};
use crate::rng::uniform01;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomTaskError {
    #[error("no full-rank feature matrix found after {0} draws")]
    RankUnreachable(usize),
    #[error("invalid limits: {0}")]
    Limits(&'static str),
}

/// Ranges the generator draws from. Sizes are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTaskLimits {
    pub states: (usize, usize),
    pub actions: (usize, usize),
    pub features: (usize, usize),
    pub gamma: (f64, f64),
    pub lambda: (f64, f64),
    pub interest: (f64, f64),
    /// Weight of the uniform policy in the behavior mixture.
    pub behavior_mix: f64,
    /// Probability that a target-policy entry is zeroed.
    pub target_sparsity: f64,
    pub max_feature_draws: usize,
}

impl Default for RandomTaskLimits {
    fn default() -> Self {
        RandomTaskLimits {
            states: (2, 6),
            actions: (1, 3),
            features: (1, 3),
            gamma: (0.0, 0.95),
            lambda: (0.0, 1.0),
            interest: (0.1, 2.0),
            behavior_mix: 0.5,
            target_sparsity: 0.2,
            max_feature_draws: 100,
        }
    }
}

fn between<R: RngCore + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

fn count<R: RngCore + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    lo + ((hi - lo + 1) as f64 * uniform01(rng)) as usize
}

fn simplex<R: RngCore + ?Sized>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| floor + uniform01(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Normalises in `T` so rows sum to one at the target precision.
fn to_row<T: Scalar>(p: &[f64]) -> Vec<T> {
    let row: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
    let total: T = row.iter().copied().sum();
    row.into_iter().map(|x| x / total).collect()
}

pub fn random_task<T: Scalar, R: RngCore + ?Sized>(
    rng: &mut R,
    limits: &RandomTaskLimits,
) -> Result<PredictionTask<T>, RandomTaskError> {
    let l = limits;
    if l.states.0 < 1 || l.states.0 > l.states.1 {
        return Err(RandomTaskError::Limits("state range"));
    }
    if l.actions.0 < 1 || l.actions.0 > l.actions.1 {
        return Err(RandomTaskError::Limits("action range"));
    }
    if l.features.0 < 1 || l.features.0 > l.features.1 {
        return Err(RandomTaskError::Limits("feature range"));
    }
    if l.gamma.0 < 0.0 || l.gamma.1 >= 1.0 || l.interest.0 <= 0.0 || l.lambda.0 < 0.0 || l.lambda.1 > 1.0 {
        return Err(RandomTaskError::Limits("parameter ranges"));
    }
    if !(l.behavior_mix > 0.0 && l.behavior_mix <= 1.0) {
        return Err(RandomTaskError::Limits("behavior mix must lie in (0, 1]"));
    }

    let num_states = count(rng, l.states);
    let num_actions = count(rng, l.actions);
    let num_features = count(rng, l.features).min(num_states);

    let mut trans = Vec::with_capacity(num_states * num_actions * num_states);
    let mut reward = Vec::with_capacity(trans.capacity());
    for _ in 0..num_states * num_actions {
        trans.extend(to_row::<T>(&simplex(rng, num_states, 0.05)));
        reward.extend((0..num_states).map(|_| T::lit(between(rng, (-1.0, 1.0)))));
    }
    let model = MdpModel::new(num_states, num_actions, trans, reward).expect("generated model is valid");

    let mut target_rows = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut w: Vec<f64> = (0..num_actions).map(|_| 0.05 + uniform01(rng)).collect();
        for x in w.iter_mut() {
            if uniform01(rng) < l.target_sparsity {
                *x = 0.0;
            }
        }
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let total: f64 = w.iter().sum();
        target_rows.push(to_row::<T>(&w.iter().map(|x| x / total).collect::<Vec<_>>()));
    }
    let target = Policy::from_rows(&target_rows).expect("generated target is valid");

    let uniform = 1.0 / num_actions as f64;
    let behavior_rows: Vec<Vec<T>> = (0..num_states)
        .map(|_| {
            let p = simplex(rng, num_actions, 0.0);
            to_row(&p.iter().map(|x| (1.0 - l.behavior_mix) * x + l.behavior_mix * uniform).collect::<Vec<_>>())
        })
        .collect();
    let behavior = Policy::from_rows(&behavior_rows).expect("generated behavior is valid");

    let gamma = (0..num_states).map(|_| T::lit(between(rng, l.gamma))).collect();
    let lam = (0..num_states).map(|_| T::lit(between(rng, l.lambda))).collect();
    let interest: Vec<T> = (0..num_states).map(|_| T::lit(between(rng, l.interest))).collect();

    let interested: Vec<usize> = (0..num_states).filter(|&s| interest[s] > T::zero()).collect();
    let mut features = None;
    for _ in 0..l.max_feature_draws {
        let phi = Matrix::from_fn(num_states, num_features, |_, _| T::lit(between(rng, (-1.0, 1.0))));
        let sub = Matrix::from_fn(interested.len(), num_features, |i, j| phi[(interested[i], j)]);
        if sub.rank() == num_features {
            features = Some(phi);
            break;
        }
    }
    let features = features.ok_or(RandomTaskError::RankUnreachable(l.max_feature_draws))?;

    Ok(PredictionTask::new(model, target, behavior, gamma, lam, interest, features).expect("generated task is valid"))
}

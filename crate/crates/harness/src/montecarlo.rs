//! Monte-Carlo ground truth: discounted returns of target-policy rollouts.
//!
//! A return is `R_1 + γ(S_1)R_2 + γ(S_1)γ(S_2)R_3 + …`, discounting with the
//! γ of the state arrived in, and the episode ends at the first arrival in
//! a `γ = 0` state, or once the running discount drops below
//! [`DISCOUNT_FLOOR`] so continuing tasks can be estimated too. Episodes
//! are simulated in fixed chunks, each with its own seed, so the estimate
//! does not depend on the thread count.

use emphatic::environments::miner::{step_with_policy, MinerGridworld, MinerLayout, MinerTask};
use emphatic::mdp::{sample_step, Policy, PredictionTask};
use emphatic::rng::{run_seed, stream, Stream};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::Environment;

pub const EPISODE_CAP: u64 = 1_000_000;
pub const DISCOUNT_FLOOR: f64 = 1e-15;
const CHUNK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("episode {episode} ran {cap} steps without terminating")]
    EpisodeCap { episode: usize, cap: u64 },
    #[error("at least one episode is required")]
    NoEpisodes,
    #[error("state {0} is not a valid start state")]
    Start(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub episodes: usize,
}

/// An environment that can roll out a policy from a start state.
pub trait Rollout: Sync {
    fn check_start(&self, start: usize) -> bool;

    /// Returns of `count` episodes simulated from `seed`; `None` marks an
    /// episode that hit the step cap.
    fn chunk_returns(&self, policy: &Policy<f64>, start: usize, seed: u64, count: usize, cap: u64) -> Vec<Option<f64>>;
}

impl Rollout for PredictionTask<f64> {
    fn check_start(&self, start: usize) -> bool {
        start < self.num_states()
    }

    fn chunk_returns(&self, policy: &Policy<f64>, start: usize, seed: u64, count: usize, cap: u64) -> Vec<Option<f64>> {
        let mut rng = stream(seed);
        (0..count)
            .map(|_| {
                let (mut s, mut g, mut discount) = (start, 0.0, 1.0);
                for _ in 0..cap {
                    let (_, next, r) = sample_step(&self.model, policy, s, &mut rng);
                    g += discount * r;
                    discount *= self.gamma[next];
                    if discount < DISCOUNT_FLOOR {
                        return Some(g);
                    }
                    s = next;
                }
                None
            })
            .collect()
    }
}

/// The Miner simulator itself, started at S with no active trap.
#[derive(Debug, Clone)]
pub struct MinerRollout {
    pub layout: MinerLayout,
    pub activation: f64,
    pub task: MinerTask<f64>,
}

impl Rollout for MinerRollout {
    fn check_start(&self, start: usize) -> bool {
        start == self.layout.observation(self.layout.start(), false)
    }

    fn chunk_returns(&self, policy: &Policy<f64>, _start: usize, seed: u64, count: usize, cap: u64) -> Vec<Option<f64>> {
        let mut env = MinerGridworld::with_activation(self.layout.clone(), self.activation, run_seed(seed, 0));
        let mut rng: Stream = stream(run_seed(seed, 1));
        (0..count)
            .map(|_| {
                env.reset();
                let (mut g, mut discount) = (0.0, 1.0);
                for _ in 0..cap {
                    let (_, step) = step_with_policy(&mut env, policy, &mut rng);
                    g += discount * step.reward::<f64>();
                    discount *= self.task.gamma[step.observation];
                    if discount < DISCOUNT_FLOOR {
                        return Some(g);
                    }
                }
                None
            })
            .collect()
    }
}

/// Average discounted return of `episodes` rollouts of `target` from
/// `start`, with its standard error.
pub fn monte_carlo_value<E: Rollout>(
    env: &E,
    target: &Policy<f64>,
    start: usize,
    episodes: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    monte_carlo_value_capped(env, target, start, episodes, seed, EPISODE_CAP)
}

pub fn monte_carlo_value_capped<E: Rollout>(
    env: &E,
    target: &Policy<f64>,
    start: usize,
    episodes: usize,
    seed: u64,
    cap: u64,
) -> Result<McEstimate, McError> {
    if episodes == 0 {
        return Err(McError::NoEpisodes);
    }
    if !env.check_start(start) {
        return Err(McError::Start(start));
    }
    let chunks = episodes.div_ceil(CHUNK);
    let returns: Vec<Vec<Option<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(episodes - c * CHUNK);
            env.chunk_returns(target, start, run_seed(seed, c as u64), count, cap)
        })
        .collect();
    let mut values = Vec::with_capacity(episodes);
    for (episode, r) in returns.into_iter().flatten().enumerate() {
        values.push(r.ok_or(McError::EpisodeCap { episode, cap })?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { estimate: mean, stderr, episodes })
}

/// Monte-Carlo estimate for a named policy of a prepared environment.
pub fn monte_carlo_for(
    env: &Environment,
    policy: &Policy<f64>,
    start: usize,
    episodes: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    match env {
        Environment::Mdp(task) => monte_carlo_value(task, policy, start, episodes, seed),
        Environment::Miner { layout, activation, task, .. } => {
            let rollout = MinerRollout { layout: layout.clone(), activation: *activation, task: task.clone() };
            monte_carlo_value(&rollout, policy, start, episodes, seed)
        }
    }
}

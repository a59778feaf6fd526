//! Seeded multi-run execution and aggregation.

use emphatic::environments::miner::{step_with_policy, MinerGridworld};
use emphatic::learners::LearnerState;
use emphatic::mdp::{importance_ratio, sample_step, StateSignals};
use emphatic::rng::{run_seed, stream, Stream};
use emphatic::scalar::max_abs;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Environment, EventSpec, Experiment, StopSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("run {run} reached {steps} steps before its stop condition")]
    StepCap { run: usize, steps: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordPoint {
    /// Ordinal of the recorded event, counted from one.
    pub event_index: u64,
    pub value: f64,
    /// Full `θ` when the config asks for it.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub steps: u64,
    /// Largest `|e_j|` of the final trace.
    pub max_abs_trace: f64,
    /// Largest follow-on trace seen during the run.
    pub max_follow_on: f64,
    /// Largest `|θ_j|` seen during the run.
    pub max_abs_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub target: String,
    pub points: Vec<RecordPoint>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub event_index: u64,
    pub mean: f64,
    pub stderr: f64,
    pub lo_band: f64,
    pub hi_band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub target: String,
    pub points: Vec<AggregatePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub id: String,
    /// Ordered by run, then by target in config order.
    pub runs: Vec<RunResult>,
    /// One per target, in config order.
    pub curves: Vec<AggregateCurve>,
}

impl ExperimentOutput {
    pub fn runs_for<'a>(&'a self, target: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.target == target)
    }
}

/// Runs every seeded run (in parallel), then aggregates per target. Run
/// `k` draws all of its randomness from `run_seed(seed, k)`.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentOutput, RunError> {
    let per_run: Vec<Vec<RunResult>> =
        (0..exp.num_runs).into_par_iter().map(|k| run_single(exp, k)).collect::<Result<_, _>>()?;
    let runs: Vec<RunResult> = per_run.into_iter().flatten().collect();
    let curves = exp
        .targets
        .iter()
        .map(|t| {
            let of_target: Vec<&RunResult> = runs.iter().filter(|r| r.target == t.name).collect();
            aggregate(&t.name, &of_target)
        })
        .collect();
    Ok(ExperimentOutput { id: exp.id.clone(), runs, curves })
}

/// Mean and standard error per record point, over the common prefix of the
/// runs. The mean is accumulated relative to the first run so constant
/// runs aggregate to exactly that constant with zero spread.
pub fn aggregate(target: &str, runs: &[&RunResult]) -> AggregateCurve {
    let len = runs.iter().map(|r| r.points.len()).min().unwrap_or(0);
    let n = runs.len() as f64;
    let points = (0..len)
        .map(|i| {
            let base = runs[0].points[i].value;
            let shift: f64 = runs.iter().map(|r| r.points[i].value - base).sum::<f64>() / n;
            let mean = base + shift;
            let stderr = if runs.len() > 1 {
                let ss: f64 = runs.iter().map(|r| (r.points[i].value - base - shift).powi(2)).sum();
                (ss / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            AggregatePoint {
                event_index: runs[0].points[i].event_index,
                mean,
                stderr,
                lo_band: mean - 2.0 * stderr,
                hi_band: mean + 2.0 * stderr,
            }
        })
        .collect();
    AggregateCurve { target: target.to_string(), points }
}

/// What the learner observes after a transition.
#[derive(Debug, Clone, Copy)]
struct Arrival {
    state: usize,
    entrapped: bool,
    gold: bool,
}

enum Simulator<'a> {
    Mdp { task: &'a emphatic::mdp::PredictionTask<f64>, state: usize, rng: Stream },
    Miner { env: MinerGridworld, behavior: &'a emphatic::mdp::Policy<f64>, rng: Stream },
}

impl Simulator<'_> {
    fn current(&self) -> usize {
        match self {
            Simulator::Mdp { state, .. } => *state,
            Simulator::Miner { env, .. } => env.observation(),
        }
    }

    /// Takes one behavior step: `(action, reward, arrival)`.
    fn step(&mut self) -> (usize, f64, Arrival) {
        match self {
            Simulator::Mdp { task, state, rng } => {
                let (a, next, r) = sample_step(&task.model, &task.behavior, *state, rng);
                *state = next;
                (a, r, Arrival { state: next, entrapped: false, gold: false })
            }
            Simulator::Miner { env, behavior, rng } => {
                let (a, step) = step_with_policy(env, *behavior, rng);
                (a, step.reward(), Arrival { state: step.observation, entrapped: step.entrapped, gold: step.gold })
            }
        }
    }
}

fn fires(event: EventSpec, arrival: &Arrival, initial: bool, gamma: &[f64]) -> bool {
    match event {
        EventSpec::Step => !initial,
        EventSpec::Entrapment => arrival.entrapped,
        EventSpec::Gold => arrival.gold,
        EventSpec::Termination => !initial && gamma[arrival.state] == 0.0,
        EventSpec::Visit(s) => arrival.state == s,
    }
}

/// One run: a single behavior trajectory shared by one learner per target.
/// Events are checked each time a state is observed, before the update
/// that leaves it, so a record captures `θ` as it stands on arrival.
pub fn run_single(exp: &Experiment, k: usize) -> Result<Vec<RunResult>, RunError> {
    let seed = run_seed(exp.seed, k as u64);
    let (mut sim, signals): (Simulator<'_>, StateSignals<'_, f64>) = match &exp.environment {
        Environment::Mdp(task) => {
            (Simulator::Mdp { task, state: exp.start_state, rng: stream(run_seed(seed, 1)) }, task.signals())
        }
        Environment::Miner { layout, activation, policies, task } => (
            Simulator::Miner {
                env: MinerGridworld::with_activation(layout.clone(), *activation, run_seed(seed, 0)),
                behavior: &policies.behavior,
                rng: stream(run_seed(seed, 1)),
            },
            task.signals(),
        ),
    };
    let behavior = exp.environment.behavior();

    let mut learners: Vec<LearnerState<f64>> =
        exp.targets.iter().map(|_| LearnerState::with_theta(exp.theta0.clone())).collect();
    let mut results: Vec<RunResult> = exp
        .targets
        .iter()
        .map(|t| RunResult { run: k, target: t.name.clone(), points: Vec::new(), diagnostics: Diagnostics::default() })
        .collect();
    for (res, l) in results.iter_mut().zip(&learners) {
        res.diagnostics.max_abs_theta = max_abs(&l.theta);
    }

    let (stop_event, stop_count, max_steps) = match exp.stop {
        StopSpec::Steps { count } => (EventSpec::Step, count, u64::MAX),
        StopSpec::Events { event, count, max_steps } => (event, count, max_steps),
    };
    let (mut recorded, mut stopped) = (0u64, 0u64);
    let mut observe = |arrival: &Arrival, initial: bool, learners: &[LearnerState<f64>], results: &mut [RunResult]| {
        if fires(exp.record.on, arrival, initial, signals.gamma) {
            recorded += 1;
            if recorded % exp.record.every == 0 {
                for (res, l) in results.iter_mut().zip(learners) {
                    res.points.push(RecordPoint {
                        event_index: recorded,
                        value: l.theta[exp.record.component],
                        theta: exp.record.full_theta.then(|| l.theta.clone()),
                    });
                }
            }
        }
        if fires(stop_event, arrival, initial, signals.gamma) {
            stopped += 1;
        }
        stopped >= stop_count
    };

    let first = Arrival { state: sim.current(), entrapped: false, gold: false };
    let mut done = observe(&first, true, &learners, &mut results);
    let mut t = 0u64;
    while !done {
        if t >= max_steps {
            return Err(RunError::StepCap { run: k, steps: t });
        }
        let s = sim.current();
        let (a, reward, arrival) = sim.step();
        let alpha = exp.schedule.next_alpha(t);
        for ((target, l), res) in exp.targets.iter().zip(learners.iter_mut()).zip(results.iter_mut()) {
            let rho = importance_ratio(&target.policy, behavior, s, a).expect("coverage checked at validation");
            let view = signals.view(s, arrival.state, reward, rho);
            exp.algorithm.step(l, &view, alpha, &exp.clip);
            let d = &mut res.diagnostics;
            d.max_follow_on = d.max_follow_on.max(l.follow_on);
            d.max_abs_theta = d.max_abs_theta.max(max_abs(&l.theta));
        }
        t += 1;
        done = observe(&arrival, false, &learners, &mut results);
    }
    for (res, l) in results.iter_mut().zip(&learners) {
        res.diagnostics.steps = t;
        res.diagnostics.max_abs_trace = max_abs(&l.trace);
    }
    Ok(results)
}

//! JSON experiment configuration and its validation into a runnable
//! [`Experiment`].

use std::fmt;
use std::path::Path;

use emphatic::environments::{
    build_two_state, random_task, MinerLayout, MinerPolicies, MinerTask, RandomTaskLimits,
};
use emphatic::environments::miner::TRAP_ACTIVATION;
use emphatic::learners::{Algorithm, ClipRule, StepSizeSchedule};
use emphatic::linalg::Matrix;
use emphatic::mdp::{coverage_check, MdpModel, Policy, PredictionTask};
use emphatic::rng::stream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Issue>),
}

/// One validation failure, located by a JSON path such as
/// `environment.task.transitions[2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub environment: EnvironmentSpec,
    pub algorithm: String,
    pub schedule: ScheduleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<ThetaInit>,
    #[serde(default = "default_runs")]
    pub num_runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub stop: StopSpec,
    #[serde(default)]
    pub record: RecordSpec,
    /// Target policy names. Empty means every target the environment offers.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_state: Option<usize>,
    /// Monte-Carlo reference values drawn on the SVG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSpec>,
}

fn default_id() -> String {
    "experiment".to_string()
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    TwoState,
    Miner {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<LayoutSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        activation: Option<f64>,
    },
    Random {
        seed: u64,
        #[serde(default)]
        limits: LimitsSpec,
    },
    Inline {
        task: TaskSpec,
    },
}

/// Miner grid: block letters top row first, coordinates `[col, row]` with
/// row 0 at the bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub rows: Vec<String>,
    pub start: [usize; 2],
    pub gold: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traps: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSpec {
    pub states: [usize; 2],
    pub actions: [usize; 2],
    pub features: [usize; 2],
    pub gamma: [f64; 2],
    pub lambda: [f64; 2],
    pub interest: [f64; 2],
    pub behavior_mix: f64,
    pub target_sparsity: f64,
    pub max_feature_draws: usize,
}

impl Default for LimitsSpec {
    fn default() -> Self {
        let d = RandomTaskLimits::default();
        LimitsSpec {
            states: [d.states.0, d.states.1],
            actions: [d.actions.0, d.actions.1],
            features: [d.features.0, d.features.1],
            gamma: [d.gamma.0, d.gamma.1],
            lambda: [d.lambda.0, d.lambda.1],
            interest: [d.interest.0, d.interest.1],
            behavior_mix: d.behavior_mix,
            target_sparsity: d.target_sparsity,
            max_feature_draws: d.max_feature_draws,
        }
    }
}

impl LimitsSpec {
    pub fn to_limits(&self) -> RandomTaskLimits {
        RandomTaskLimits {
            states: (self.states[0], self.states[1]),
            actions: (self.actions[0], self.actions[1]),
            features: (self.features[0], self.features[1]),
            gamma: (self.gamma[0], self.gamma[1]),
            lambda: (self.lambda[0], self.lambda[1]),
            interest: (self.interest[0], self.interest[1]),
            behavior_mix: self.behavior_mix,
            target_sparsity: self.target_sparsity,
            max_feature_draws: self.max_feature_draws,
        }
    }
}

/// A fully specified task. `transitions[s][a][s']`, `rewards` of the same
/// shape (zero when omitted), policies `[s][a]`, features `[s][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub transitions: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<Vec<Vec<f64>>>>,
    pub target: Vec<Vec<f64>>,
    pub behavior: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub interest: Vec<f64>,
    pub features: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { alpha: f64 },
    /// `α_t = c1 / (c2 + t)`.
    Hyperbolic { c1: f64, c2: f64 },
}

impl ScheduleSpec {
    pub fn schedule(self) -> StepSizeSchedule<f64> {
        match self {
            ScheduleSpec::Constant { alpha } => StepSizeSchedule::Constant { alpha },
            ScheduleSpec::Hyperbolic { c1, c2 } => StepSizeSchedule::Hyperbolic { c1, c2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaInit {
    Fill(f64),
    Values(Vec<f64>),
}

/// Something that can happen when a state is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventSpec {
    /// Every transition.
    #[default]
    Step,
    /// The miner lands in an active trap.
    Entrapment,
    /// The miner reaches the Gold cell.
    Gold,
    /// Arrival in a state with `γ = 0`.
    Termination,
    /// The given state is observed, including the initial one.
    Visit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StopSpec {
    Steps {
        count: u64,
    },
    Events {
        event: EventSpec,
        count: u64,
        #[serde(default = "default_max_steps")]
        max_steps: u64,
    },
}

fn default_max_steps() -> u64 {
    100_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordSpec {
    pub every: u64,
    pub on: EventSpec,
    /// Component of `θ` reported in the `value` column.
    pub component: usize,
    /// Also write every component of `θ`.
    pub full_theta: bool,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec { every: 1, on: EventSpec::Step, component: 0, full_theta: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub episodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// The simulated world after validation.
#[derive(Debug, Clone)]
pub enum Environment {
    /// A finite task simulated from its model: two-state, random or inline.
    Mdp(PredictionTask<f64>),
    Miner {
        layout: MinerLayout,
        activation: f64,
        policies: MinerPolicies<f64>,
        task: MinerTask<f64>,
    },
}

impl Environment {
    pub fn is_miner(&self) -> bool {
        matches!(self, Environment::Miner { .. })
    }

    /// States the learner can observe.
    pub fn num_states(&self) -> usize {
        match self {
            Environment::Mdp(task) => task.num_states(),
            Environment::Miner { layout, .. } => layout.num_observations(),
        }
    }

    pub fn num_features(&self) -> usize {
        match self {
            Environment::Mdp(task) => task.num_features(),
            Environment::Miner { task, .. } => task.features.cols(),
        }
    }

    pub fn behavior(&self) -> &Policy<f64> {
        match self {
            Environment::Mdp(task) => &task.behavior,
            Environment::Miner { policies, .. } => &policies.behavior,
        }
    }

    pub fn target_names(&self) -> Vec<String> {
        match self {
            Environment::Mdp(_) => vec!["target".to_string(), "behavior".to_string()],
            Environment::Miner { .. } => {
                let mut names: Vec<String> = MinerPolicies::<f64>::TARGETS.iter().map(|s| s.to_string()).collect();
                names.push("behavior".to_string());
                names
            }
        }
    }

    fn default_targets(&self) -> Vec<String> {
        match self {
            Environment::Mdp(_) => vec!["target".to_string()],
            Environment::Miner { .. } => MinerPolicies::<f64>::TARGETS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn policy(&self, name: &str) -> Option<&Policy<f64>> {
        match (self, name) {
            (Environment::Mdp(task), "target") => Some(&task.target),
            (Environment::Mdp(task), "behavior") => Some(&task.behavior),
            (Environment::Mdp(_), _) => None,
            (Environment::Miner { policies, .. }, n) => policies.target(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub policy: Policy<f64>,
}

/// A validated configuration, ready for [`crate::run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub id: String,
    pub environment: Environment,
    pub algorithm: Algorithm,
    pub schedule: StepSizeSchedule<f64>,
    pub clip: ClipRule<f64>,
    pub theta0: Vec<f64>,
    pub num_runs: usize,
    pub seed: u64,
    pub stop: StopSpec,
    pub record: RecordSpec,
    pub targets: Vec<Target>,
    pub start_state: usize,
    pub monte_carlo: Option<MonteCarloSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Checks every field and builds the environment. All problems are
    /// reported together.
    pub fn prepare(&self) -> Result<Experiment, ConfigError> {
        let mut issues = Vec::new();
        let mut issue = |path: &str, message: String| issues.push(Issue { path: path.to_string(), message });

        let algorithm = Algorithm::from_name(&self.algorithm);
        if algorithm.is_none() {
            let known: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            issue("algorithm", format!("unknown algorithm {:?}; expected one of {}", self.algorithm, known.join(", ")));
        }
        match self.schedule {
            ScheduleSpec::Constant { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                issue("schedule.alpha", format!("must be positive, got {alpha}"))
            }
            ScheduleSpec::Hyperbolic { c1, c2 } => {
                if !(c1 > 0.0 && c1.is_finite()) {
                    issue("schedule.c1", format!("must be positive, got {c1}"));
                }
                if !(c2 > 0.0 && c2.is_finite()) {
                    issue("schedule.c2", format!("must be positive, got {c2}"));
                }
            }
            _ => {}
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                issue("clip", format!("must be positive, got {c}"));
            }
        }
        if self.num_runs == 0 {
            issue("num_runs", "must be at least 1".to_string());
        }
        match self.stop {
            StopSpec::Steps { count: 0 } => issue("stop.count", "must be positive".to_string()),
            StopSpec::Events { count, max_steps, .. } => {
                if count == 0 {
                    issue("stop.count", "must be positive".to_string());
                }
                if max_steps == 0 {
                    issue("stop.max_steps", "must be positive".to_string());
                }
            }
            _ => {}
        }
        if self.record.every == 0 {
            issue("record.every", "must be positive".to_string());
        }
        if let Some(mc) = self.monte_carlo {
            if mc.episodes == 0 {
                issue("monte_carlo.episodes", "must be positive".to_string());
            }
        }

        let environment = match build_environment(&self.environment) {
            Ok(env) => Some(env),
            Err(mut env_issues) => {
                issues.append(&mut env_issues);
                None
            }
        };
        let Some(environment) = environment else {
            return Err(ConfigError::Invalid(issues));
        };
        let mut issue = |path: &str, message: String| issues.push(Issue { path: path.to_string(), message });

        let n = environment.num_states();
        let k = environment.num_features();
        let theta0 = match &self.theta0 {
            None => vec![0.0; k],
            Some(ThetaInit::Fill(x)) => vec![*x; k],
            Some(ThetaInit::Values(v)) => {
                if v.len() != k {
                    issue("theta0", format!("has {} entries, the task has {k} features", v.len()));
                }
                v.clone()
            }
        };
        if self.record.component >= k {
            issue("record.component", format!("{} is out of range for {k} features", self.record.component));
        }
        let mut check_event = |path: &str, event: EventSpec| match event {
            EventSpec::Entrapment | EventSpec::Gold if !environment.is_miner() => {
                issue(path, "only the miner environment has entrapment and gold events".to_string())
            }
            EventSpec::Visit(s) if s >= n => issue(path, format!("state {s} is out of range for {n} states")),
            _ => {}
        };
        check_event("record.on", self.record.on);
        if let StopSpec::Events { event, .. } = self.stop {
            check_event("stop.event", event);
        }

        let start_state = match (&environment, self.start_state) {
            (Environment::Miner { layout, .. }, None) => layout.observation(layout.start(), false),
            (Environment::Miner { layout, .. }, Some(_)) => {
                issue("start_state", "the miner always starts at S".to_string());
                layout.observation(layout.start(), false)
            }
            (Environment::Mdp(_), Some(s)) if s >= n => {
                issue("start_state", format!("state {s} is out of range for {n} states"));
                0
            }
            (Environment::Mdp(_), s) => s.unwrap_or(0),
        };

        let names = if self.targets.is_empty() { environment.default_targets() } else { self.targets.clone() };
        let mut targets = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let path = format!("targets[{i}]");
            if names[..i].contains(name) {
                issue(&path, format!("duplicate target {name:?}"));
                continue;
            }
            match environment.policy(name) {
                None => issue(
                    &path,
                    format!("unknown policy {name:?}; expected one of {}", environment.target_names().join(", ")),
                ),
                Some(policy) => {
                    let uncovered = coverage_check(policy, environment.behavior());
                    if let Some(&(s, a)) = uncovered.first() {
                        issue(
                            &path,
                            format!("behavior never takes action {a} in state {s} where {name:?} does ({} pairs uncovered)", uncovered.len()),
                        );
                    }
                    targets.push(Target { name: name.clone(), policy: policy.clone() });
                }
            }
        }

        if !issues.is_empty() {
            return Err(ConfigError::Invalid(issues));
        }
        Ok(Experiment {
            id: self.id.clone(),
            environment,
            algorithm: algorithm.expect("checked"),
            schedule: self.schedule.schedule(),
            clip: self.clip.map_or_else(ClipRule::none, ClipRule::bounded),
            theta0,
            num_runs: self.num_runs,
            seed: self.seed,
            stop: self.stop,
            record: self.record,
            targets,
            start_state,
            monte_carlo: self.monte_carlo,
        })
    }
}

fn build_environment(spec: &EnvironmentSpec) -> Result<Environment, Vec<Issue>> {
    let fail = |path: &str, message: String| vec![Issue { path: path.to_string(), message }];
    match spec {
        EnvironmentSpec::TwoState => Ok(Environment::Mdp(build_two_state())),
        EnvironmentSpec::Miner { layout, activation } => {
            let activation = activation.unwrap_or(TRAP_ACTIVATION);
            if !(0.0..=1.0).contains(&activation) {
                return Err(fail("environment.activation", format!("must lie in [0, 1], got {activation}")));
            }
            let layout = match layout {
                None => MinerLayout::canonical(),
                Some(l) => {
                    let traps: Option<Vec<(usize, usize)>> =
                        l.traps.as_ref().map(|t| t.iter().map(|&[c, r]| (c, r)).collect());
                    MinerLayout::from_rows(
                        &l.rows,
                        (l.start[0], l.start[1]),
                        (l.gold[0], l.gold[1]),
                        traps.as_deref(),
                    )
                    .map_err(|e| fail("environment.layout", e.to_string()))?
                }
            };
            Ok(Environment::Miner {
                policies: MinerPolicies::new(&layout),
                task: MinerTask::new(&layout),
                layout,
                activation,
            })
        }
        EnvironmentSpec::Random { seed, limits } => random_task(&mut stream(*seed), &limits.to_limits())
            .map(Environment::Mdp)
            .map_err(|e| fail("environment.limits", e.to_string())),
        EnvironmentSpec::Inline { task } => inline_task(task).map(Environment::Mdp),
    }
}

fn inline_task(spec: &TaskSpec) -> Result<PredictionTask<f64>, Vec<Issue>> {
    let mut issues = Vec::new();
    let mut issue = |path: String, message: String| issues.push(Issue { path, message });
    let n = spec.transitions.len();
    if n == 0 {
        issue("environment.task.transitions".into(), "needs at least one state".into());
        return Err(issues);
    }
    let m = spec.transitions[0].len();
    let mut trans = Vec::with_capacity(n * m * n);
    for (s, row) in spec.transitions.iter().enumerate() {
        if row.len() != m {
            issue(format!("environment.task.transitions[{s}]"), format!("has {} actions, expected {m}", row.len()));
        }
        for (a, dist) in row.iter().enumerate() {
            if dist.len() != n {
                issue(format!("environment.task.transitions[{s}][{a}]"), format!("has {} entries, expected {n}", dist.len()));
            }
            trans.extend_from_slice(dist);
        }
    }
    let reward = match &spec.rewards {
        None => vec![0.0; trans.len()],
        Some(r) => {
            let flat: Vec<f64> = r.iter().flatten().flatten().copied().collect();
            if r.len() != n || flat.len() != trans.len() {
                issue("environment.task.rewards".into(), "must have the same shape as transitions".into());
            }
            flat
        }
    };
    for (name, v) in [("gamma", &spec.gamma), ("lambda", &spec.lambda), ("interest", &spec.interest)] {
        if v.len() != n {
            issue(format!("environment.task.{name}"), format!("has {} entries, expected {n}", v.len()));
        }
    }
    for (name, rows) in [("target", &spec.target), ("behavior", &spec.behavior)] {
        if rows.len() != n || rows.iter().any(|r| r.len() != m) {
            issue(format!("environment.task.{name}"), format!("must be {n} rows of {m} probabilities"));
        }
    }
    let k = spec.features.first().map_or(0, Vec::len);
    if spec.features.len() != n || k == 0 || spec.features.iter().any(|r| r.len() != k) {
        issue("environment.task.features".into(), format!("must be {n} rows of equal, nonzero length"));
    }
    if !issues.is_empty() {
        return Err(issues);
    }

    let at = |path: &str| {
        let path = if path.is_empty() { "environment.task".to_string() } else { format!("environment.task.{path}") };
        move |e: emphatic::mdp::ModelError| vec![Issue { path: path.clone(), message: e.to_string() }]
    };
    let model = MdpModel::new(n, m, trans, reward).map_err(at("transitions"))?;
    let target = Policy::from_rows(&spec.target).map_err(at("target"))?;
    let behavior = Policy::from_rows(&spec.behavior).map_err(at("behavior"))?;
    PredictionTask::new(
        model,
        target,
        behavior,
        spec.gamma.clone(),
        spec.lambda.clone(),
        spec.interest.clone(),
        Matrix::from_rows(&spec.features),
    )
    .map_err(at(""))
}

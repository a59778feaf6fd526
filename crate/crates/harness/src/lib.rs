//! Config-driven experiments for the `emphatic` learners: seeded parallel
//! runs, aggregation with standard-error bands, Monte-Carlo ground truth,
//! assumption checks and CSV/SVG output.

pub mod config;
pub mod experiment;
pub mod montecarlo;
pub mod output;
pub mod validate;

pub use config::{ConfigError, Environment, Experiment, ExperimentConfig, Issue};
pub use experiment::{
    aggregate, run_experiment, run_single, AggregateCurve, AggregatePoint, Diagnostics, ExperimentOutput,
    RecordPoint, RunError, RunResult,
};
pub use montecarlo::{monte_carlo_for, monte_carlo_value, McError, McEstimate, MinerRollout, Rollout};
pub use output::{emit_aggregate_csv, emit_csv, emit_svg, render_svg, OutputError, Reference};
pub use validate::{validate_assumptions, AssumptionReport, Check, Status};

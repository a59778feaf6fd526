use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emphatic::analytics::{key_system, stability_report, PD_TOLERANCE};
use emphatic::environments::MinerModel;
use emphatic::mdp::PredictionTask;
use emphatic_harness::{
    emit_aggregate_csv, emit_csv, emit_svg, monte_carlo_for, run_experiment, validate_assumptions, ConfigError,
    Environment, Experiment, ExperimentConfig, Reference,
};

#[derive(Parser)]
#[command(name = "etd", version, about = "Emphatic TD experiments: run, analyze, Monte-Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write CSV (and optionally SVG) output.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Also write an SVG plot of the aggregate curves.
        #[arg(long)]
        svg: bool,
    },
    /// Print assumption checks, the key system and its stability.
    Analyze { config: PathBuf },
    /// Monte-Carlo value of a policy from the configured start state.
    Mc {
        config: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, runs, svg } => run(&config, &out, seed, runs, svg),
        Command::Analyze { config } => analyze(&config),
        Command::Mc { config, policy, episodes, seed } => mc(&config, &policy, episodes, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path, seed: Option<u64>, runs: Option<usize>) -> Result<Experiment, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = runs {
        cfg.num_runs = r;
    }
    Ok(cfg.prepare()?)
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn run(config: &Path, out: &Path, seed: Option<u64>, runs: Option<usize>, svg: bool) -> Result<(), Failure> {
    let exp = load(config, seed, runs)?;
    let output = run_experiment(&exp).map_err(runtime)?;
    std::fs::create_dir_all(out).map_err(runtime)?;
    let stem = file_stem(&exp.id);

    let runs_path = out.join(format!("{stem}_runs.csv"));
    emit_csv(&output, &runs_path).map_err(runtime)?;
    println!("wrote {}", runs_path.display());
    for curve in &output.curves {
        let path = out.join(format!("{stem}_{}_aggregate.csv", file_stem(&curve.target)));
        emit_aggregate_csv(curve, &path).map_err(runtime)?;
        println!("wrote {}", path.display());
    }

    let mut references = Vec::new();
    if let Some(mc) = exp.monte_carlo {
        for t in &exp.targets {
            let est = monte_carlo_for(&exp.environment, &t.policy, exp.start_state, mc.episodes, mc.seed.unwrap_or(exp.seed))
                .map_err(runtime)?;
            println!("monte-carlo {}: {:.6} +- {:.6} ({} episodes)", t.name, est.estimate, est.stderr, est.episodes);
            references.push(Reference { target: t.name.clone(), value: est.estimate });
        }
    }
    if svg {
        let path = out.join(format!("{stem}.svg"));
        emit_svg(&output.curves, &references, &path).map_err(runtime)?;
        println!("wrote {}", path.display());
    }

    for curve in &output.curves {
        let diag = output.runs_for(&curve.target).fold((0.0f64, 0.0f64, 0.0f64), |acc, r| {
            let d = r.diagnostics;
            (acc.0.max(d.max_abs_theta), acc.1.max(d.max_follow_on), acc.2.max(d.max_abs_trace))
        });
        match curve.points.last() {
            Some(p) => println!(
                "{}: final mean {:.6} +- {:.6} at event {} (max |theta| {:.4}, max F {:.4}, max final |e| {:.4})",
                curve.target, p.mean, 2.0 * p.stderr, p.event_index, diag.0, diag.1, diag.2
            ),
            None => println!("{}: no record points", curve.target),
        }
    }
    Ok(())
}

/// The tasks whose closed-form analysis is meaningful: the task itself, or
/// for the Miner the exact model over (cell, trap status), one per target.
fn analytic_tasks(exp: &Experiment) -> Vec<(String, PredictionTask<f64>)> {
    match &exp.environment {
        Environment::Mdp(task) => exp
            .targets
            .iter()
            .map(|t| {
                let mut task = task.clone();
                task.target = t.policy.clone();
                (t.name.clone(), task)
            })
            .collect(),
        Environment::Miner { layout, activation, policies, task } => {
            let model = MinerModel::<f64>::new(layout.clone(), *activation);
            exp.targets
                .iter()
                .map(|t| (t.name.clone(), model.prediction_task(&t.policy, &policies.behavior, task)))
                .collect()
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn analyze(config: &Path) -> Result<(), Failure> {
    let exp = load(config, None, None)?;
    for (name, task) in analytic_tasks(&exp) {
        println!("== {name} ({} states, {} features)", task.num_states(), task.num_features());
        print!("{}", validate_assumptions(&task, Some(&exp.schedule)));
        match key_system(&task) {
            Err(e) => println!("key system: {e}"),
            Ok(key) => {
                println!("A =");
                for i in 0..key.a_matrix.rows() {
                    println!("  {}", fmt_vec(key.a_matrix.row(i)));
                }
                println!("b = {}", fmt_vec(&key.b_vector));
                match &key.theta_star {
                    Some(t) => println!("theta* = {}", fmt_vec(t)),
                    None => println!("theta* = none (A is singular)"),
                }
                let report = stability_report(&key.a_matrix);
                println!(
                    "min eigenvalue of (A + A^T)/2 = {:.6e}: {}",
                    report.min_sym_eigenvalue,
                    if report.is_positive_definite { "positive definite" } else { "not positive definite" }
                );
                println!("(threshold {PD_TOLERANCE:e})");
            }
        }
    }
    Ok(())
}

fn mc(config: &Path, policy: &str, episodes: usize, seed: Option<u64>) -> Result<(), Failure> {
    let exp = load(config, None, None)?;
    let Some(p) = exp.environment.policy(policy) else {
        return Err(Failure::Validation(format!(
            "unknown policy {policy:?}; expected one of {}",
            exp.environment.target_names().join(", ")
        )));
    };
    let est = monte_carlo_for(&exp.environment, p, exp.start_state, episodes, seed.unwrap_or(exp.seed))
        .map_err(runtime)?;
    println!("{policy}: {:.6} +- {:.6} (stderr, {} episodes from state {})", est.estimate, est.stderr, est.episodes, exp.start_state);
    Ok(())
}

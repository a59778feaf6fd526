//! Checks of the conditions under which ETD(λ) is known to converge.

use std::fmt;

use emphatic::analytics::emphasis_weights;
use emphatic::learners::StepSizeSchedule;
use emphatic::linalg::Matrix;
use emphatic::mdp::{coverage_check, irreducibility_witness, transition_matrix, PredictionTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<Check>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

pub const TERMINATION: &str = "target termination";
pub const BEHAVIOR_IRREDUCIBLE: &str = "behavior irreducible";
pub const COVERAGE: &str = "coverage";
pub const FEATURE_RANK: &str = "feature rank";
pub const STEP_SIZES: &str = "step sizes";

/// Runs every check; never fails itself.
pub fn validate_assumptions(task: &PredictionTask<f64>, schedule: Option<&StepSizeSchedule<f64>>) -> AssumptionReport {
    let mut checks = Vec::new();
    let n = task.num_states();

    let p_gamma = transition_matrix(&task.model, &task.target).scale_columns(&task.gamma);
    let discounted = Matrix::identity(n).sub(&p_gamma);
    checks.push(match discounted.lu() {
        Ok(_) => Check { name: TERMINATION, status: Status::Pass, detail: "I - P_pi Gamma is invertible".into() },
        Err(_) => Check {
            name: TERMINATION,
            status: Status::Fail,
            detail: "I - P_pi Gamma is singular: target episodes need not terminate".into(),
        },
    });

    let p_mu = transition_matrix(&task.model, &task.behavior);
    checks.push(match irreducibility_witness(&p_mu) {
        None => Check { name: BEHAVIOR_IRREDUCIBLE, status: Status::Pass, detail: format!("all {n} states communicate") },
        Some(s) => Check {
            name: BEHAVIOR_IRREDUCIBLE,
            status: Status::Fail,
            detail: format!("state {s} does not communicate with state 0"),
        },
    });

    let uncovered = coverage_check(&task.target, &task.behavior);
    checks.push(if uncovered.is_empty() {
        Check { name: COVERAGE, status: Status::Pass, detail: "mu(a|s) > 0 wherever pi(a|s) > 0".into() }
    } else {
        Check {
            name: COVERAGE,
            status: Status::Fail,
            detail: format!("{} uncovered (state, action) pairs, first {:?}", uncovered.len(), uncovered[0]),
        }
    });

    checks.push(match emphasis_weights(task) {
        Err(e) => Check { name: FEATURE_RANK, status: Status::Skipped, detail: format!("no emphasis weights: {e}") },
        Ok(m) => {
            let top = m.iter().copied().fold(0.0, f64::max);
            let emphasized: Vec<usize> = (0..n).filter(|&s| m[s] > 1e-12 * top.max(f64::MIN_POSITIVE)).collect();
            let k = task.num_features();
            let sub = Matrix::from_fn(emphasized.len(), k, |i, j| task.features[(emphasized[i], j)]);
            let rank = if emphasized.is_empty() { 0 } else { sub.rank() };
            Check {
                name: FEATURE_RANK,
                status: if rank == k { Status::Pass } else { Status::Fail },
                detail: format!("rank {rank} of {k} features on {} emphasized states", emphasized.len()),
            }
        }
    });

    checks.push(match schedule {
        None => Check { name: STEP_SIZES, status: Status::Skipped, detail: "no schedule given".into() },
        Some(s) if s.is_diminishing() => {
            Check { name: STEP_SIZES, status: Status::Pass, detail: "c1/(c2 + t): sum diverges, squares converge".into() }
        }
        Some(_) => Check {
            name: STEP_SIZES,
            status: Status::Fail,
            detail: "constant step size; convergence needs a diminishing schedule".into(),
        },
    });

    AssumptionReport { checks }
}

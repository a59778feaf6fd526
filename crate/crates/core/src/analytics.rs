//! Closed-form quantities of a prediction task: the value function, the
//! λ-generalised Bellman operator, emphasis weights, the key matrix `A` and
//! vector `b` whose solution ETD(λ) tracks, and stability diagnostics.
//!
//! Everything is a dense direct computation; tasks are expected to have at
//! most a few hundred states.

use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, LinalgError, Matrix};
use crate::mdp::{expected_reward_vector, stationary_distribution, transition_matrix, PredictionTask, StationaryError};
use crate::scalar::{max_abs, Scalar};

/// Threshold above which the smallest symmetric eigenvalue counts as
/// positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("I - P_pi Gamma is singular: the target policy never terminates")]
    NonTerminating,
    #[error("I - P_pi Gamma Lambda is singular")]
    SingularLambda,
    #[error("I - P_pi^lambda is singular")]
    SingularEmphasis,
    #[error("behavior chain has no unique stationary distribution: {0}")]
    Stationary(#[from] StationaryError),
    #[error("feature matrix is rank deficient on emphasized states (Phi^T M Phi singular)")]
    FeatureRank,
    #[error("weight vector has length {got}, expected {expected}")]
    Shape { expected: usize, got: usize },
}

/// The λ-generalised Bellman operator `v ↦ r_λ + P_λ v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaOperators<T> {
    /// `P_π^λ = I − (I − P_πΓΛ)⁻¹(I − P_πΓ)`, substochastic.
    pub p_lambda: Matrix<T>,
    /// `r_π^λ = (I − P_πΓΛ)⁻¹ r_π`.
    pub r_lambda: Vec<T>,
}

impl<T: Scalar> LambdaOperators<T> {
    /// `r_λ + P_λ v`.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        self.p_lambda.matvec(v).into_iter().zip(&self.r_lambda).map(|(pv, &r)| pv + r).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeySystem<T> {
    /// `A = ΦᵀM(I − P_λ)Φ`.
    pub a_matrix: Matrix<T>,
    /// `b = ΦᵀM r_λ`.
    pub b_vector: Vec<T>,
    /// Expected emphasis `m(s)`.
    pub emphasis: Vec<T>,
    /// Behavior stationary distribution used to build `emphasis`.
    pub stationary: Vec<T>,
    /// `A⁻¹b`, or `None` when `A` is singular.
    pub theta_star: Option<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T> {
    /// Smallest eigenvalue of `(A + Aᵀ)/2`.
    pub min_sym_eigenvalue: T,
    pub is_positive_definite: bool,
}

fn singular_as(err: AnalyticsError) -> impl FnOnce(LinalgError) -> AnalyticsError {
    move |_| err
}

/// `(P_πΓ, P_πΓΛ, r_π)` with the diagonal factors folded into columns.
fn target_operators<T: Scalar>(task: &PredictionTask<T>) -> (Matrix<T>, Matrix<T>, Vec<T>) {
    let p = transition_matrix(&task.model, &task.target);
    let p_gamma = p.scale_columns(&task.gamma);
    let gl: Vec<T> = task.gamma.iter().zip(&task.lam).map(|(&g, &l)| g * l).collect();
    let p_gamma_lambda = p.scale_columns(&gl);
    (p_gamma, p_gamma_lambda, expected_reward_vector(&task.model, &task.target))
}

/// `v_π = (I − P_πΓ)⁻¹ r_π`.
pub fn value_function<T: Scalar>(task: &PredictionTask<T>) -> Result<Vec<T>, AnalyticsError> {
    let (p_gamma, _, r) = target_operators(task);
    let n = task.num_states();
    Matrix::identity(n)
        .sub(&p_gamma)
        .solve(&r)
        .map_err(singular_as(AnalyticsError::NonTerminating))
}

pub fn lambda_operators<T: Scalar>(task: &PredictionTask<T>) -> Result<LambdaOperators<T>, AnalyticsError> {
    let (p_gamma, p_gamma_lambda, r) = target_operators(task);
    let n = task.num_states();
    let eye = Matrix::identity(n);
    let lu = eye.sub(&p_gamma_lambda).lu().map_err(singular_as(AnalyticsError::SingularLambda))?;
    let rhs = eye.sub(&p_gamma);
    // Solve column by column for (I − PΓΛ)⁻¹(I − PΓ).
    let mut p_lambda = Matrix::identity(n);
    for j in 0..n {
        let col = lu.solve(&rhs.column(j)).map_err(singular_as(AnalyticsError::SingularLambda))?;
        for i in 0..n {
            p_lambda[(i, j)] -= col[i];
        }
    }
    let r_lambda = lu.solve(&r).map_err(singular_as(AnalyticsError::SingularLambda))?;
    Ok(LambdaOperators { p_lambda, r_lambda })
}

/// `mᵀ = d_{μ,i}ᵀ (I − P_λ)⁻¹` given the λ-operator and `d_μ`.
fn emphasis_from<T: Scalar>(
    task: &PredictionTask<T>,
    ops: &LambdaOperators<T>,
    d_mu: &[T],
) -> Result<Vec<T>, AnalyticsError> {
    let n = task.num_states();
    let d_i: Vec<T> = d_mu.iter().zip(&task.interest).map(|(&d, &i)| d * i).collect();
    Matrix::identity(n)
        .sub(&ops.p_lambda)
        .transpose()
        .solve(&d_i)
        .map_err(singular_as(AnalyticsError::SingularEmphasis))
}

fn behavior_stationary<T: Scalar>(task: &PredictionTask<T>) -> Result<Vec<T>, AnalyticsError> {
    Ok(stationary_distribution(&transition_matrix(&task.model, &task.behavior))?)
}

pub fn emphasis_weights<T: Scalar>(task: &PredictionTask<T>) -> Result<Vec<T>, AnalyticsError> {
    let ops = lambda_operators(task)?;
    let d = behavior_stationary(task)?;
    emphasis_from(task, &ops, &d)
}

/// `ΦᵀD(I − P_λ)Φ` for an arbitrary diagonal weighting `D = diag(weights)`.
pub fn weighted_key_matrix<T: Scalar>(task: &PredictionTask<T>, weights: &[T]) -> Result<Matrix<T>, AnalyticsError> {
    let ops = lambda_operators(task)?;
    weighted_key_matrix_with(task, &ops, weights)
}

fn weighted_key_matrix_with<T: Scalar>(
    task: &PredictionTask<T>,
    ops: &LambdaOperators<T>,
    weights: &[T],
) -> Result<Matrix<T>, AnalyticsError> {
    let n = task.num_states();
    if weights.len() != n {
        return Err(AnalyticsError::Shape { expected: n, got: weights.len() });
    }
    let phi = &task.features;
    let residual = Matrix::identity(n).sub(&ops.p_lambda).matmul(phi);
    Ok(phi.transpose().matmul(&residual.scale_rows(weights)))
}

pub fn key_system<T: Scalar>(task: &PredictionTask<T>) -> Result<KeySystem<T>, AnalyticsError> {
    let ops = lambda_operators(task)?;
    let stationary = behavior_stationary(task)?;
    let emphasis = emphasis_from(task, &ops, &stationary)?;
    let a_matrix = weighted_key_matrix_with(task, &ops, &emphasis)?;
    let weighted_r: Vec<T> = emphasis.iter().zip(&ops.r_lambda).map(|(&m, &r)| m * r).collect();
    let b_vector = task.features.vecmat(&weighted_r);
    let theta_star = a_matrix.solve(&b_vector).ok();
    Ok(KeySystem { a_matrix, b_vector, emphasis, stationary, theta_star })
}

/// Positive-definiteness of `A` through the spectrum of its symmetric part.
pub fn stability_report<T: Scalar>(a_matrix: &Matrix<T>) -> StabilityReport<T> {
    let eig = symmetric_eigenvalues(a_matrix);
    let min_sym_eigenvalue = eig.first().copied().unwrap_or_else(T::zero);
    StabilityReport { min_sym_eigenvalue, is_positive_definite: min_sym_eigenvalue > T::lit(PD_TOLERANCE) }
}

/// Iterates `θ ← θ − α(Aθ − b)` and returns `steps + 1` iterates, starting
/// with `theta0`.
pub fn deterministic_recursion<T: Scalar>(key: &KeySystem<T>, theta0: &[T], alpha: T, steps: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut theta = theta0.to_vec();
    out.push(theta.clone());
    for _ in 0..steps {
        let a_theta = key.a_matrix.matvec(&theta);
        for ((t, at), &b) in theta.iter_mut().zip(a_theta).zip(&key.b_vector) {
            *t -= alpha * (at - b);
        }
        out.push(theta.clone());
    }
    out
}

/// Max-norm residual of the projected Bellman equation at `θ*`:
/// `‖Φθ* − Π(r_λ + P_λΦθ*)‖_∞` with `Π = Φ(ΦᵀMΦ)⁻¹ΦᵀM`.
///
/// Returns `Ok(None)` when the key system has no `θ*`.
pub fn projection_check<T: Scalar>(task: &PredictionTask<T>, key: &KeySystem<T>) -> Result<Option<T>, AnalyticsError> {
    let phi = &task.features;
    let phi_t_m = phi.transpose().scale_columns(&key.emphasis);
    let gram = phi_t_m.matmul(phi);
    let gram_lu = gram.lu().map_err(singular_as(AnalyticsError::FeatureRank))?;
    let Some(theta) = key.theta_star.as_ref() else {
        return Ok(None);
    };
    let ops = lambda_operators(task)?;
    let v = phi.matvec(theta);
    let backed_up = ops.apply(&v);
    let coeffs = gram_lu.solve(&phi_t_m.matvec(&backed_up)).map_err(singular_as(AnalyticsError::FeatureRank))?;
    let projected = phi.matvec(&coeffs);
    let diff: Vec<T> = v.iter().zip(&projected).map(|(&a, &b)| a - b).collect();
    Ok(Some(max_abs(&diff)))
}

/// `‖v‖_m = sqrt(Σ m(s) v(s)²)`.
pub fn weighted_seminorm<T: Scalar>(m: &[T], v: &[T]) -> T {
    m.iter().zip(v).fold(T::zero(), |acc, (&w, &x)| acc + w * x * x).sqrt()
}

/// The emphasis-weighted seminorm of `v` for `task`.
pub fn m_seminorm<T: Scalar>(task: &PredictionTask<T>, v: &[T]) -> Result<T, AnalyticsError> {
    Ok(weighted_seminorm(&emphasis_weights(task)?, v))
}

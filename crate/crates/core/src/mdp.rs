//! Finite MDPs, stochastic policies, prediction tasks, and the stationary
//! analysis of the chains they induce.

use rand_core::RngCore;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::rng::categorical;
use crate::scalar::Scalar;

/// Tolerance on probability rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("MDP must have at least one state and one action")]
    Empty,
    #[error("transition row (state {state}, action {action}) sums to {sum}")]
    TransitionRow { state: usize, action: usize, sum: f64 },
    #[error("negative or non-finite probability at (state {state}, action {action}, next {next})")]
    BadProbability { state: usize, action: usize, next: usize },
    #[error("non-finite reward at (state {state}, action {action}, next {next})")]
    BadReward { state: usize, action: usize, next: usize },
    #[error("policy row {state} sums to {sum}")]
    PolicyRow { state: usize, sum: f64 },
    #[error("negative or non-finite policy entry at (state {state}, action {action})")]
    PolicyEntry { state: usize, action: usize },
    #[error("{what} has length {got}, expected {expected}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("{what}({state}) = {value} is out of range")]
    Range { what: &'static str, state: usize, value: f64 },
    #[error("behavior policy does not cover the target policy at {0:?}")]
    Coverage(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("chain is reducible: state {unreachable} is not reachable from state 0 or cannot return")]
    Reducible { unreachable: usize },
    #[error("power iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("transition matrix is not square")]
    NotSquare,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatioError {
    #[error("behavior never takes action {action} in state {state} but the target does")]
    Uncovered { state: usize, action: usize },
}

/// Row-sum tolerance, widened to a few ulps for single precision.
fn row_tol<T: Scalar>() -> T {
    T::lit(ROW_SUM_TOL).max(T::epsilon() * T::lit(16.0))
}

/// Finite MDP with deterministic rewards `r(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel<T> {
    num_states: usize,
    num_actions: usize,
    trans: Vec<T>,
    reward: Vec<T>,
}

impl<T: Scalar> MdpModel<T> {
    /// `trans` and `reward` are indexed `[(s * num_actions + a) * num_states + s']`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        trans: Vec<T>,
        reward: Vec<T>,
    ) -> Result<Self, ModelError> {
        if num_states == 0 || num_actions == 0 {
            return Err(ModelError::Empty);
        }
        let len = num_states * num_actions * num_states;
        if trans.len() != len {
            return Err(ModelError::Shape { what: "transition table", expected: len, got: trans.len() });
        }
        if reward.len() != len {
            return Err(ModelError::Shape { what: "reward table", expected: len, got: reward.len() });
        }
        let model = MdpModel { num_states, num_actions, trans, reward };
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = model.next_distribution(s, a);
                for (next, &p) in row.iter().enumerate() {
                    if !(p >= T::zero()) || !p.is_finite() {
                        return Err(ModelError::BadProbability { state: s, action: a, next });
                    }
                    if !model.reward(s, a, next).is_finite() {
                        return Err(ModelError::BadReward { state: s, action: a, next });
                    }
                }
                let sum: T = row.iter().copied().sum();
                if (sum - T::one()).abs() > row_tol::<T>() {
                    return Err(ModelError::TransitionRow { state: s, action: a, sum: sum.as_f64() });
                }
            }
        }
        Ok(model)
    }

    /// Builds a model from a closure returning `(probability, reward)`.
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> (T, T),
    ) -> Result<Self, ModelError> {
        let len = num_states * num_actions * num_states;
        let mut trans = Vec::with_capacity(len);
        let mut reward = Vec::with_capacity(len);
        for s in 0..num_states {
            for a in 0..num_actions {
                for n in 0..num_states {
                    let (p, r) = f(s, a, n);
                    trans.push(p);
                    reward.push(r);
                }
            }
        }
        Self::new(num_states, num_actions, trans, reward)
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.num_actions + a) * self.num_states
    }

    /// `P(· | s, a)`.
    #[inline]
    pub fn next_distribution(&self, s: usize, a: usize) -> &[T] {
        let o = self.offset(s, a);
        &self.trans[o..o + self.num_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> T {
        self.trans[self.offset(s, a) + next]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, next: usize) -> T {
        self.reward[self.offset(s, a) + next]
    }
}

/// Row-stochastic action-probability table `π(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<T>) -> Result<Self, ModelError> {
        if num_states == 0 || num_actions == 0 {
            return Err(ModelError::Empty);
        }
        if probs.len() != num_states * num_actions {
            return Err(ModelError::Shape {
                what: "policy table",
                expected: num_states * num_actions,
                got: probs.len(),
            });
        }
        let policy = Policy { num_actions, probs };
        for s in 0..num_states {
            let row = policy.row(s);
            if let Some(a) = row.iter().position(|&p| !(p >= T::zero()) || !p.is_finite()) {
                return Err(ModelError::PolicyEntry { state: s, action: a });
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > row_tol::<T>() {
                return Err(ModelError::PolicyRow { state: s, sum: sum.as_f64() });
            }
        }
        Ok(policy)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, ModelError> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != num_actions) {
            return Err(ModelError::Shape { what: "policy row", expected: num_actions, got: r.len() });
        }
        Self::new(rows.len(), num_actions, rows.concat())
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = T::one() / T::from_count(num_actions);
        Policy { num_actions, probs: vec![p; num_states * num_actions] }
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[s * self.num_actions + a]
    }

    pub fn sample<R: RngCore + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        categorical(self.row(s), rng)
    }
}

/// One off-policy evaluation problem: dynamics, target and behavior
/// policies, per-state discount, bootstrapping and interest, and features.
///
/// `gamma[s]` and `lam[s]` apply on arrival in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTask<T> {
    pub model: MdpModel<T>,
    pub target: Policy<T>,
    pub behavior: Policy<T>,
    pub gamma: Vec<T>,
    pub lam: Vec<T>,
    pub interest: Vec<T>,
    /// `N × n`, row `s` is `φ(s)ᵀ`.
    pub features: Matrix<T>,
}

impl<T: Scalar> PredictionTask<T> {
    /// Checks shapes, parameter ranges and the coverage condition.
    pub fn new(
        model: MdpModel<T>,
        target: Policy<T>,
        behavior: Policy<T>,
        gamma: Vec<T>,
        lam: Vec<T>,
        interest: Vec<T>,
        features: Matrix<T>,
    ) -> Result<Self, ModelError> {
        let n = model.num_states();
        let na = model.num_actions();
        for (what, p) in [("target policy", &target), ("behavior policy", &behavior)] {
            if p.num_states() != n || p.num_actions() != na {
                return Err(ModelError::Shape { what, expected: n * na, got: p.num_states() * p.num_actions() });
            }
        }
        for (what, v) in [("gamma", &gamma), ("lambda", &lam), ("interest", &interest)] {
            if v.len() != n {
                return Err(ModelError::Shape { what, expected: n, got: v.len() });
            }
        }
        if features.rows() != n {
            return Err(ModelError::Shape { what: "feature rows", expected: n, got: features.rows() });
        }
        let unit = |x: T| x >= T::zero() && x <= T::one();
        for s in 0..n {
            if !unit(gamma[s]) {
                return Err(ModelError::Range { what: "gamma", state: s, value: gamma[s].as_f64() });
            }
            if !unit(lam[s]) {
                return Err(ModelError::Range { what: "lambda", state: s, value: lam[s].as_f64() });
            }
            if !(interest[s] >= T::zero()) || !interest[s].is_finite() {
                return Err(ModelError::Range { what: "interest", state: s, value: interest[s].as_f64() });
            }
        }
        let violations = coverage_check(&target, &behavior);
        if !violations.is_empty() {
            return Err(ModelError::Coverage(violations));
        }
        Ok(PredictionTask { model, target, behavior, gamma, lam, interest, features })
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }

    #[inline]
    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn phi(&self, s: usize) -> &[T] {
        self.features.row(s)
    }

    pub fn signals(&self) -> StateSignals<'_, T> {
        StateSignals { features: &self.features, gamma: &self.gamma, lam: &self.lam, interest: &self.interest }
    }

    pub fn importance_ratio(&self, s: usize, a: usize) -> Result<T, RatioError> {
        importance_ratio(&self.target, &self.behavior, s, a)
    }
}

/// Borrowed per-state quantities a learner reads on each transition.
#[derive(Debug, Clone, Copy)]
pub struct StateSignals<'a, T> {
    pub features: &'a Matrix<T>,
    pub gamma: &'a [T],
    pub lam: &'a [T],
    pub interest: &'a [T],
}

impl<'a, T: Scalar> StateSignals<'a, T> {
    #[inline]
    pub fn phi(&self, s: usize) -> &'a [T] {
        self.features.row(s)
    }

    pub fn num_states(&self) -> usize {
        self.gamma.len()
    }

    /// The learner's view of the transition `s → next`.
    #[inline]
    pub fn view(&self, s: usize, next: usize, reward: T, rho: T) -> crate::learners::TransitionView<'a, T> {
        crate::learners::TransitionView {
            phi_s: self.features.row(s),
            phi_next: self.features.row(next),
            reward,
            rho,
            gamma_s: self.gamma[s],
            gamma_next: self.gamma[next],
            lam_s: self.lam[s],
            interest_s: self.interest[s],
        }
    }
}

/// `P_π(s, s') = Σ_a π(a|s) P(s'|s,a)`.
pub fn transition_matrix<T: Scalar>(model: &MdpModel<T>, policy: &Policy<T>) -> Matrix<T> {
    let n = model.num_states();
    let mut p = Matrix::zeros(n, n);
    for s in 0..n {
        for a in 0..model.num_actions() {
            let w = policy.prob(s, a);
            if w == T::zero() {
                continue;
            }
            for (o, &q) in p.row_mut(s).iter_mut().zip(model.next_distribution(s, a)) {
                *o += w * q;
            }
        }
    }
    p
}

/// `r_π(s) = Σ_a Σ_s' π(a|s) P(s'|s,a) r(s,a,s')`.
pub fn expected_reward_vector<T: Scalar>(model: &MdpModel<T>, policy: &Policy<T>) -> Vec<T> {
    (0..model.num_states())
        .map(|s| {
            (0..model.num_actions())
                .map(|a| {
                    let w = policy.prob(s, a);
                    if w == T::zero() {
                        return T::zero();
                    }
                    let inner: T = (0..model.num_states())
                        .map(|n| model.prob(s, a, n) * model.reward(s, a, n))
                        .sum();
                    w * inner
                })
                .sum()
        })
        .collect()
}

/// All `(s, a)` with `π(a|s) > 0` but `μ(a|s) = 0`.
pub fn coverage_check<T: Scalar>(target: &Policy<T>, behavior: &Policy<T>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in 0..target.num_states() {
        for a in 0..target.num_actions() {
            if target.prob(s, a) > T::zero() && behavior.prob(s, a) <= T::zero() {
                out.push((s, a));
            }
        }
    }
    out
}

/// `π(a|s) / μ(a|s)`, with `0/0 = 0`.
pub fn importance_ratio<T: Scalar>(
    target: &Policy<T>,
    behavior: &Policy<T>,
    s: usize,
    a: usize,
) -> Result<T, RatioError> {
    let pi = target.prob(s, a);
    let mu = behavior.prob(s, a);
    if mu > T::zero() {
        Ok(pi / mu)
    } else if pi > T::zero() {
        Err(RatioError::Uncovered { state: s, action: a })
    } else {
        Ok(T::zero())
    }
}

/// One simulated transition `(a, s', r)`: the action first, then the
/// successor, both drawn from `rng`.
pub fn sample_step<T: Scalar, R: RngCore + ?Sized>(
    model: &MdpModel<T>,
    policy: &Policy<T>,
    s: usize,
    rng: &mut R,
) -> (usize, usize, T) {
    let a = policy.sample(s, rng);
    let next = categorical(model.next_distribution(s, a), rng);
    (a, next, model.reward(s, a, next))
}

/// Iteration controls for [`stationary_distribution_with`].
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration { tol: 1e-12, max_iter: 1_000_000 }
    }
}

/// Whether every state reaches every other along positive entries.
pub fn irreducibility_witness<T: Scalar>(p: &Matrix<T>) -> Option<usize> {
    let n = p.rows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { p[(i, j)] } else { p[(j, i)] };
                if w > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    (0..n).find(|&s| !fwd[s] || !bwd[s])
}

/// Plain power iteration `dᵀ ← dᵀP` from the uniform vector.
pub fn power_iteration<T: Scalar>(p: &Matrix<T>, opts: PowerIteration) -> Result<Vec<T>, StationaryError> {
    if !p.is_square() {
        return Err(StationaryError::NotSquare);
    }
    let n = p.rows();
    let mut d = vec![T::one() / T::from_count(n); n];
    let tol = T::lit(opts.tol).max(T::epsilon() * T::lit(8.0));
    for _ in 0..opts.max_iter {
        let mut next = p.vecmat(&d);
        let total: T = next.iter().copied().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let diff = d.iter().zip(&next).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        d = next;
        if diff < tol {
            return Ok(d);
        }
    }
    Err(StationaryError::NotConverged { iterations: opts.max_iter })
}

/// Stationary distribution of an irreducible row-stochastic matrix.
///
/// Reducible chains are rejected up front. If plain power iteration fails to
/// settle (a periodic chain), the averaged iteration `dᵀ ← dᵀ(I + P)/2` is
/// run instead; it has the same fixed point and no periodicity.
pub fn stationary_distribution<T: Scalar>(p: &Matrix<T>) -> Result<Vec<T>, StationaryError> {
    stationary_distribution_with(p, PowerIteration::default())
}

pub fn stationary_distribution_with<T: Scalar>(
    p: &Matrix<T>,
    opts: PowerIteration,
) -> Result<Vec<T>, StationaryError> {
    if !p.is_square() {
        return Err(StationaryError::NotSquare);
    }
    if let Some(s) = irreducibility_witness(p) {
        return Err(StationaryError::Reducible { unreachable: s });
    }
    match power_iteration(p, opts) {
        Ok(d) => Ok(d),
        Err(StationaryError::NotConverged { .. }) => {
            let lazy = p.add(&Matrix::identity(p.rows())).scale(T::lit(0.5));
            power_iteration(&lazy, opts)
        }
        Err(e) => Err(e),
    }
}

//! Forward (λ-return) view of off-policy TD(λ) and ETD(λ) with `θ` held
//! fixed over an episode. Summed over a terminated episode its increments
//! equal those of the backward-view learners, which makes it the reference
//! for testing the trace recursions.

use thiserror::Error;

use super::{etd_step, offpolicy_tdlambda_step, ClipRule, LearnerState};
use crate::mdp::StateSignals;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForwardError {
    #[error("trajectory needs at least one transition")]
    Empty,
    #[error("trajectory has {states} states but {rhos} ratios and {rewards} rewards")]
    Ragged { states: usize, rhos: usize, rewards: usize },
    #[error("final state {state} has gamma {gamma}; the episode is not terminated")]
    NotTerminated { state: usize, gamma: f64 },
}

/// `S_0, …, S_T` with `ρ_0, …, ρ_{T-1}` and `R_1, …, R_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<usize>,
    pub rhos: Vec<T>,
    pub rewards: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    fn check(&self, signals: &StateSignals<'_, T>) -> Result<(), ForwardError> {
        if self.rhos.is_empty() {
            return Err(ForwardError::Empty);
        }
        if self.states.len() != self.rhos.len() + 1 || self.rewards.len() != self.rhos.len() {
            return Err(ForwardError::Ragged {
                states: self.states.len(),
                rhos: self.rhos.len(),
                rewards: self.rewards.len(),
            });
        }
        let last = *self.states.last().expect("nonempty");
        let g = signals.gamma[last];
        if g != T::zero() {
            return Err(ForwardError::NotTerminated { state: last, gamma: g.as_f64() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardIncrements<T> {
    /// `α(G_t^{λρ} − ρ_tφ_tᵀθ)φ_t` per step.
    pub conventional: Vec<Vec<T>>,
    /// `α(G_t^{λρ} − ρ_tφ_tᵀθ)M_tφ_t` per step.
    pub emphatic: Vec<Vec<T>>,
    /// `G_t^{λρ}` per step.
    pub returns: Vec<T>,
    /// `M_t` per step.
    pub emphasis: Vec<T>,
}

impl<T: Scalar> ForwardIncrements<T> {
    pub fn conventional_sum(&self) -> Vec<T> {
        sum_rows(&self.conventional)
    }

    pub fn emphatic_sum(&self) -> Vec<T> {
        sum_rows(&self.emphatic)
    }
}

fn sum_rows<T: Scalar>(rows: &[Vec<T>]) -> Vec<T> {
    let n = rows.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); n];
    for r in rows {
        for (o, &x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    out
}

/// Per-step forward-view increments of a terminated episode.
///
/// The importance-sampled λ-return is built backwards from the end:
/// `G_t = ρ_t (R_{t+1} + γ_{t+1}((1 − λ_{t+1}ρ_{t+1})θᵀφ_{t+1} + λ_{t+1}G_{t+1}))`,
/// where the last return reduces to `ρ_{T-1}R_T` because `γ(S_T) = 0`.
/// Emphasis follows the same follow-on recursion as [`etd_step`], started
/// from `F_{-1} = 0`.
pub fn forward_view_increments<T: Scalar>(
    traj: &Trajectory<T>,
    theta: &[T],
    signals: &StateSignals<'_, T>,
    alpha: T,
) -> Result<ForwardIncrements<T>, ForwardError> {
    traj.check(signals)?;
    let horizon = traj.len();

    let mut returns = vec![T::zero(); horizon];
    let mut later = T::zero();
    for t in (0..horizon).rev() {
        let next = traj.states[t + 1];
        let (g, l) = (signals.gamma[next], signals.lam[next]);
        let rho_next = if t + 1 < horizon { traj.rhos[t + 1] } else { T::zero() };
        let bootstrap = if g == T::zero() {
            T::zero()
        } else {
            g * ((T::one() - l * rho_next) * dot(theta, signals.phi(next)) + l * later)
        };
        returns[t] = traj.rhos[t] * (traj.rewards[t] + bootstrap);
        later = returns[t];
    }

    let mut emphasis = Vec::with_capacity(horizon);
    let mut follow_on = T::zero();
    let mut prev_rho = T::one();
    for t in 0..horizon {
        let s = traj.states[t];
        let i = signals.interest[s];
        follow_on = i + signals.gamma[s] * prev_rho * follow_on;
        emphasis.push(signals.lam[s] * i + (T::one() - signals.lam[s]) * follow_on);
        prev_rho = traj.rhos[t];
    }

    let mut conventional = Vec::with_capacity(horizon);
    let mut emphatic = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let phi = signals.phi(traj.states[t]);
        let err = alpha * (returns[t] - traj.rhos[t] * dot(phi, theta));
        conventional.push(phi.iter().map(|&p| err * p).collect());
        emphatic.push(phi.iter().map(|&p| err * emphasis[t] * p).collect());
    }
    Ok(ForwardIncrements { conventional, emphatic, returns, emphasis })
}

/// Summed backward-view increments of off-policy TD(λ) and ETD(λ) over the
/// episode, with `θ` reset to `theta` after every step.
pub fn backward_view_sums<T: Scalar>(
    traj: &Trajectory<T>,
    theta: &[T],
    signals: &StateSignals<'_, T>,
    alpha: T,
) -> Result<(Vec<T>, Vec<T>), ForwardError> {
    traj.check(signals)?;
    let n = theta.len();
    let mut conv = LearnerState::with_theta(theta.to_vec());
    let mut emph = LearnerState::with_theta(theta.to_vec());
    let (mut conv_sum, mut emph_sum) = (vec![T::zero(); n], vec![T::zero(); n]);
    for t in 0..traj.len() {
        let view = signals.view(traj.states[t], traj.states[t + 1], traj.rewards[t], traj.rhos[t]);
        offpolicy_tdlambda_step(&mut conv, &view, alpha);
        etd_step(&mut emph, &view, alpha, &ClipRule::none());
        for j in 0..n {
            conv_sum[j] += conv.theta[j] - theta[j];
            emph_sum[j] += emph.theta[j] - theta[j];
        }
        conv.theta.copy_from_slice(theta);
        emph.theta.copy_from_slice(theta);
    }
    Ok((conv_sum, emph_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::td0_step;
    use crate::linalg::Matrix;
    use approx::assert_relative_eq;

    struct Owned {
        features: Matrix<f64>,
        gamma: Vec<f64>,
        lam: Vec<f64>,
        interest: Vec<f64>,
    }

    impl Owned {
        fn signals(&self) -> StateSignals<'_, f64> {
            StateSignals { features: &self.features, gamma: &self.gamma, lam: &self.lam, interest: &self.interest }
        }
    }

    fn chain() -> Owned {
        Owned {
            features: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.3, 2.0], vec![0.0, 0.0]]),
            gamma: vec![0.9, 0.8, 0.0],
            lam: vec![0.5, 0.7, 0.2],
            interest: vec![1.0, 0.5, 0.0],
        }
    }

    #[test]
    fn one_step_episode_matches_td0() {
        let mut sig = chain();
        sig.lam = vec![0.0; 3];
        let traj = Trajectory { states: vec![0, 2], rhos: vec![1.0], rewards: vec![1.5] };
        let theta = [0.7, -0.2];
        let fwd = forward_view_increments(&traj, &theta, &sig.signals(), 0.1).unwrap();
        let mut st = LearnerState::with_theta(theta.to_vec());
        td0_step(&mut st, &sig.signals().view(0, 2, 1.5, 1.0), 0.1);
        for j in 0..2 {
            assert_relative_eq!(fwd.conventional[0][j], st.theta[j] - theta[j], epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_ratio_zeroes_return_and_increment() {
        let sig = chain();
        let traj = Trajectory { states: vec![0, 1, 0, 2], rhos: vec![1.3, 0.0, 0.8], rewards: vec![1.0, 2.0, -1.0] };
        let fwd = forward_view_increments(&traj, &[0.4, 0.9], &sig.signals(), 0.5).unwrap();
        assert_eq!(fwd.returns[1], 0.0);
        assert_eq!(fwd.emphatic[1], vec![0.0, 0.0]);
        assert_eq!(fwd.conventional[1], vec![0.0, 0.0]);
    }

    #[test]
    fn hand_checked_equivalence() {
        let sig = chain();
        let traj = Trajectory { states: vec![0, 1, 1, 0, 2], rhos: vec![1.2, 0.4, 2.0, 0.9], rewards: vec![0.5, -1.0, 0.0, 3.0] };
        let theta = [0.3, -0.6];
        let fwd = forward_view_increments(&traj, &theta, &sig.signals(), 0.05).unwrap();
        let (conv, emph) = backward_view_sums(&traj, &theta, &sig.signals(), 0.05).unwrap();
        for (a, b) in fwd.conventional_sum().iter().zip(&conv) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        for (a, b) in fwd.emphatic_sum().iter().zip(&emph) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn unterminated_rejected() {
        let sig = chain();
        let traj = Trajectory { states: vec![0, 1], rhos: vec![1.0], rewards: vec![0.0] };
        assert!(matches!(
            forward_view_increments(&traj, &[0.0, 0.0], &sig.signals(), 0.1),
            Err(ForwardError::NotTerminated { state: 1, .. })
        ));
        let ragged = Trajectory { states: vec![0, 2], rhos: vec![1.0, 1.0], rewards: vec![0.0] };
        assert!(matches!(
            forward_view_increments(&ragged, &[0.0, 0.0], &sig.signals(), 0.1),
            Err(ForwardError::Ragged { .. })
        ));
        let empty = Trajectory::<f64> { states: vec![2], rhos: vec![], rewards: vec![] };
        assert_eq!(backward_view_sums(&empty, &[0.0, 0.0], &sig.signals(), 0.1), Err(ForwardError::Empty));
    }
}

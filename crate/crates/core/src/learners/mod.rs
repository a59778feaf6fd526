//! Online linear TD learners, one transition at a time.
//!
//! All five learners share [`LearnerState`] and read a [`TransitionView`].
//! Discount and bootstrapping parameters are those of the state being
//! arrived in: the follow-on trace at time `t` uses `γ(S_t)` and `ρ_{t-1}`,
//! the TD error uses `γ(S_{t+1})`.
//!
//! The arithmetic in each step is ordered so that the exact reductions
//! between the algorithms (e.g. ETD(λ) with `ρ ≡ 1`, `λ ≡ 0` and emphatic
//! TD(0)) hold bit for bit, not just up to rounding.

mod forward;

pub use forward::{backward_view_sums, forward_view_increments, ForwardError, ForwardIncrements, Trajectory};

use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState<T> {
    pub theta: Vec<T>,
    /// Eligibility trace `e_t`.
    pub trace: Vec<T>,
    /// Follow-on trace `F_t`.
    pub follow_on: T,
    /// `ρ_{t-1}`; starts at one.
    pub prev_rho: T,
    /// Emphasis `M_t` of the latest update.
    pub emphasis_last: T,
    pub step: u64,
}

impl<T: Scalar> LearnerState<T> {
    pub fn new(num_features: usize) -> Self {
        Self::with_theta(vec![T::zero(); num_features])
    }

    pub fn with_theta(theta: Vec<T>) -> Self {
        let n = theta.len();
        LearnerState {
            theta,
            trace: vec![T::zero(); n],
            follow_on: T::zero(),
            prev_rho: T::one(),
            emphasis_last: T::zero(),
            step: 0,
        }
    }

    /// Linear value estimate `θᵀφ`.
    pub fn value(&self, phi: &[T]) -> T {
        dot(&self.theta, phi)
    }
}

/// Everything one update needs to know about the transition `S_t → S_{t+1}`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionView<'a, T> {
    pub phi_s: &'a [T],
    pub phi_next: &'a [T],
    pub reward: T,
    pub rho: T,
    /// `γ(S_t)`.
    pub gamma_s: T,
    /// `γ(S_{t+1})`.
    pub gamma_next: T,
    /// `λ(S_t)`.
    pub lam_s: T,
    pub interest_s: T,
}

impl<T: Scalar> TransitionView<'_, T> {
    /// `R + γ_{t+1}θᵀφ_{t+1} − θᵀφ_t`.
    #[inline]
    pub fn td_error(&self, theta: &[T]) -> T {
        self.reward + self.gamma_next * dot(theta, self.phi_next) - dot(theta, self.phi_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizeSchedule<T> {
    Constant { alpha: T },
    /// `α_t = c1 / (c2 + t)`.
    Hyperbolic { c1: T, c2: T },
}

impl<T: Scalar> StepSizeSchedule<T> {
    pub fn next_alpha(&self, t: u64) -> T {
        next_alpha(self, t)
    }

    /// Whether the schedule diminishes as `O(1/t)`.
    pub fn is_diminishing(&self) -> bool {
        matches!(self, StepSizeSchedule::Hyperbolic { .. })
    }
}

pub fn next_alpha<T: Scalar>(schedule: &StepSizeSchedule<T>, t: u64) -> T {
    match *schedule {
        StepSizeSchedule::Constant { alpha } => alpha,
        StepSizeSchedule::Hyperbolic { c1, c2 } => c1 / (c2 + T::lit(t as f64)),
    }
}

/// Componentwise bound on the increment applied to `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClipRule<T> {
    pub bound: Option<T>,
}

impl<T: Scalar> ClipRule<T> {
    pub fn none() -> Self {
        ClipRule { bound: None }
    }

    pub fn bounded(bound: T) -> Self {
        ClipRule { bound: Some(bound) }
    }

    #[inline]
    fn apply(&self, x: T) -> T {
        match self.bound {
            Some(b) => x.max(-b).min(b),
            None => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Td0,
    InterestTd0,
    EmphaticTd0,
    OffPolicyTdLambda,
    EtdLambda,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Td0,
        Algorithm::InterestTd0,
        Algorithm::EmphaticTd0,
        Algorithm::OffPolicyTdLambda,
        Algorithm::EtdLambda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td0 => "td0",
            Algorithm::InterestTd0 => "interest-td0",
            Algorithm::EmphaticTd0 => "emphatic-td0",
            Algorithm::OffPolicyTdLambda => "offpolicy-td-lambda",
            Algorithm::EtdLambda => "etd-lambda",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Applies one update. The clip rule only affects ETD(λ).
    pub fn step<T: Scalar>(self, state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T, clip: &ClipRule<T>) {
        match self {
            Algorithm::Td0 => td0_step(state, view, alpha),
            Algorithm::InterestTd0 => interest_td0_step(state, view, alpha),
            Algorithm::EmphaticTd0 => emphatic_td0_step(state, view, alpha),
            Algorithm::OffPolicyTdLambda => offpolicy_tdlambda_step(state, view, alpha),
            Algorithm::EtdLambda => etd_step(state, view, alpha, clip),
        }
    }
}

/// `θ_j += clip((αδ) · dir_j)`.
#[inline]
fn add_scaled<T: Scalar>(theta: &mut [T], scale: T, dir: impl Iterator<Item = T>, clip: &ClipRule<T>) {
    for (t, d) in theta.iter_mut().zip(dir) {
        *t += clip.apply(scale * d);
    }
}

#[inline]
fn finish<T: Scalar>(state: &mut LearnerState<T>, rho: T) {
    state.prev_rho = rho;
    state.step += 1;
}

/// Linear TD(0).
pub fn td0_step<T: Scalar>(state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T) {
    let scale = alpha * view.td_error(&state.theta);
    add_scaled(&mut state.theta, scale, view.phi_s.iter().copied(), &ClipRule::none());
    finish(state, view.rho);
}

/// TD(0) with each update scaled by the interest of the departing state.
pub fn interest_td0_step<T: Scalar>(state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T) {
    let scale = alpha * view.td_error(&state.theta);
    let i = view.interest_s;
    add_scaled(&mut state.theta, scale, view.phi_s.iter().map(|&p| i * p), &ClipRule::none());
    state.emphasis_last = i;
    finish(state, view.rho);
}

/// On-policy emphatic TD(0): `F ← i + γ_t F`, update weighted by `F`.
pub fn emphatic_td0_step<T: Scalar>(state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T) {
    let f = view.interest_s + view.gamma_s * state.follow_on;
    state.follow_on = f;
    state.emphasis_last = f;
    let scale = alpha * view.td_error(&state.theta);
    add_scaled(&mut state.theta, scale, view.phi_s.iter().map(|&p| f * p), &ClipRule::none());
    finish(state, view.rho);
}

/// Conventional off-policy TD(λ): `e ← ρ(γλe + φ)`, `θ += αδe`.
pub fn offpolicy_tdlambda_step<T: Scalar>(state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T) {
    let decay = view.gamma_s * view.lam_s;
    for (e, &p) in state.trace.iter_mut().zip(view.phi_s) {
        *e = view.rho * (decay * *e + p);
    }
    let scale = alpha * view.td_error(&state.theta);
    add_scaled(&mut state.theta, scale, state.trace.iter().copied(), &ClipRule::none());
    finish(state, view.rho);
}

/// ETD(λ).
///
/// ```text
/// F ← i + γ_t ρ_{t-1} F
/// M ← λ_t i + (1 − λ_t) F
/// e ← ρ_t (γ_t λ_t e + M φ_t)
/// θ ← θ + clip(α δ e)
/// ```
pub fn etd_step<T: Scalar>(state: &mut LearnerState<T>, view: &TransitionView<'_, T>, alpha: T, clip: &ClipRule<T>) {
    let i = view.interest_s;
    let f = i + view.gamma_s * state.prev_rho * state.follow_on;
    // Same value as λi + (1 − λ)F, written so that M is exactly F at λ = 0
    // and exactly i when F = i.
    let m = f - view.lam_s * (f - i);
    let decay = view.gamma_s * view.lam_s;
    for (e, &p) in state.trace.iter_mut().zip(view.phi_s) {
        *e = view.rho * (decay * *e + m * p);
    }
    let scale = alpha * view.td_error(&state.theta);
    add_scaled(&mut state.theta, scale, state.trace.iter().copied(), clip);
    state.follow_on = f;
    state.emphasis_last = m;
    finish(state, view.rho);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn view<'a>(phi_s: &'a [f64], phi_next: &'a [f64]) -> TransitionView<'a, f64> {
        TransitionView {
            phi_s,
            phi_next,
            reward: 0.0,
            rho: 1.0,
            gamma_s: 1.0,
            gamma_next: 1.0,
            lam_s: 0.0,
            interest_s: 1.0,
        }
    }

    #[test]
    fn initial_state() {
        let s = LearnerState::<f64>::new(3);
        assert_eq!(s.trace, vec![0.0; 3]);
        assert_eq!((s.follow_on, s.prev_rho, s.step), (0.0, 1.0, 0));
    }

    #[test]
    fn td0_divergent_transition() {
        let mut s = LearnerState::with_theta(vec![10.0]);
        td0_step(&mut s, &view(&[1.0], &[2.0]), 0.1);
        assert_relative_eq!(s.theta[0], 11.0, epsilon = 1e-12);
    }

    #[test]
    fn td0_zero_stays_zero() {
        let mut s = LearnerState::new(1);
        td0_step(&mut s, &view(&[1.0], &[2.0]), 0.1);
        assert_eq!(s.theta, vec![0.0]);
    }

    #[test]
    fn td0_single_step_arithmetic() {
        let mut s = LearnerState::with_theta(vec![1.0]);
        let mut v = view(&[1.0], &[0.0]);
        v.reward = 2.0;
        v.gamma_next = 0.9;
        td0_step(&mut s, &v, 0.5);
        assert_relative_eq!(s.theta[0], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_interest_freezes_theta() {
        let mut s = LearnerState::with_theta(vec![10.0]);
        let mut v = view(&[1.0], &[2.0]);
        v.interest_s = 0.0;
        interest_td0_step(&mut s, &v, 0.1);
        assert_eq!(s.theta, vec![10.0]);
    }

    #[test]
    fn interest_td0_repeated_transition_grows_by_ten_percent() {
        let mut s = LearnerState::with_theta(vec![10.0]);
        let mut expected = 10.0;
        for _ in 0..20 {
            interest_td0_step(&mut s, &view(&[1.0], &[2.0]), 0.1);
            expected *= 1.1;
            assert_relative_eq!(s.theta[0], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn follow_on_and_emphasis_arithmetic() {
        let mut s = LearnerState::with_theta(vec![0.0]);
        s.follow_on = 3.0;
        s.prev_rho = 2.0;
        let mut v = view(&[1.0], &[0.0]);
        v.gamma_s = 0.5;
        v.lam_s = 0.4;
        etd_step(&mut s, &v, 0.1, &ClipRule::none());
        assert_relative_eq!(s.follow_on, 4.0, epsilon = 1e-15);
        assert_relative_eq!(s.emphasis_last, 2.8, epsilon = 1e-15);
    }

    #[test]
    fn rho_zero_kills_trace() {
        let mut s = LearnerState::with_theta(vec![1.0, -2.0]);
        s.trace = vec![3.0, 4.0];
        let mut v = view(&[1.0, 1.0], &[0.5, 0.0]);
        v.rho = 0.0;
        v.lam_s = 0.8;
        offpolicy_tdlambda_step(&mut s, &v, 0.3);
        assert_eq!(s.trace, vec![0.0, 0.0]);
        assert_eq!(s.theta, vec![1.0, -2.0]);
    }

    #[test]
    fn clipping_bounds_every_component() {
        let mut s = LearnerState::with_theta(vec![0.0, 0.0]);
        let mut v = view(&[1.0, -1.0], &[0.0, 0.0]);
        v.reward = 100.0;
        etd_step(&mut s, &v, 1.0, &ClipRule::bounded(0.5));
        assert_eq!(s.theta, vec![0.5, -0.5]);

        let mut a = LearnerState::with_theta(vec![0.3, 0.1]);
        let mut b = a.clone();
        for k in 0..50 {
            v.reward = k as f64 - 20.0;
            etd_step(&mut a, &v, 0.2, &ClipRule::bounded(f64::INFINITY));
            etd_step(&mut b, &v, 0.2, &ClipRule::none());
        }
        assert_eq!(a, b);
    }

    #[test]
    fn schedules() {
        let c = StepSizeSchedule::Constant { alpha: 0.001 };
        assert_eq!((c.next_alpha(0), c.next_alpha(12345)), (0.001, 0.001));
        let h = StepSizeSchedule::Hyperbolic { c1: 1.0, c2: 10.0 };
        assert_relative_eq!(h.next_alpha(0), 0.1);
        for t in [0u64, 5, 100, 10_000] {
            let (a0, a1) = (h.next_alpha(t), h.next_alpha(t + 1));
            assert_relative_eq!((a0 - a1) / a0, 1.0 / (10.0 + t as f64 + 1.0), max_relative = 1e-12);
        }
        assert!(h.is_diminishing() && !c.is_diminishing());
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::from_name(a.name()), Some(a));
        }
        assert_eq!(Algorithm::from_name("gtd2"), None);
    }

    #[test]
    fn single_precision_learner() {
        let mut s = LearnerState::<f32>::with_theta(vec![10.0]);
        let v = TransitionView {
            phi_s: &[1.0f32][..],
            phi_next: &[2.0f32][..],
            reward: 0.0,
            rho: 1.0,
            gamma_s: 1.0,
            gamma_next: 1.0,
            lam_s: 0.0,
            interest_s: 1.0,
        };
        etd_step(&mut s, &v, 0.1, &ClipRule::none());
        assert!((s.theta[0] - 11.0).abs() < 1e-5);
    }
}

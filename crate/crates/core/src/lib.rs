//! Emphatic temporal-difference learning for off-policy prediction with
//! linear function approximation.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: finite MDPs, policies, prediction tasks, stationary analysis;
//! - [`analytics`]: value functions, emphasis weights, the key matrix `A`
//!   and vector `b`, and positive-definiteness checks;
//! - [`learners`]: TD(0), interest-weighted TD(0), emphatic TD(0),
//!   off-policy TD(λ) and ETD(λ), plus the forward-view reference;
//! - [`environments`]: the two-state counterexample, the Miner gridworld and
//!   a random task generator.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, or `f32` for the `*32` variants.

pub mod analytics;
pub mod environments;
pub mod learners;
pub mod linalg;
pub mod mdp;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type MdpModel = mdp::MdpModel<f64>;
pub type Policy = mdp::Policy<f64>;
pub type PredictionTask = mdp::PredictionTask<f64>;
pub type KeySystem = analytics::KeySystem<f64>;
pub type LambdaOperators = analytics::LambdaOperators<f64>;
pub type StabilityReport = analytics::StabilityReport<f64>;
pub type LearnerState = learners::LearnerState<f64>;
pub type StepSizeSchedule = learners::StepSizeSchedule<f64>;
pub type ClipRule = learners::ClipRule<f64>;
pub type Trajectory = learners::Trajectory<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type MdpModel32 = mdp::MdpModel<f32>;
pub type Policy32 = mdp::Policy<f32>;
pub type PredictionTask32 = mdp::PredictionTask<f32>;
pub type KeySystem32 = analytics::KeySystem<f32>;
pub type LearnerState32 = learners::LearnerState<f32>;

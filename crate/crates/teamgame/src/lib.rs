//! Solver for two-team linear-quadratic stochastic dynamic games with
//! decentralized information structures.
//!
//! The plant is a linear system driven by Gaussian noise,
//! `x(t+1) = A x(t) + B1 u(t) + B2 v(t) + w(t)`, where team one picks `u` and
//! team two picks `v`, each minimizing its own finite-horizon quadratic cost.
//! Who may look at which state coordinate at which time is captured by boolean
//! information patterns, one per team.
//!
//! The pipeline stacks the whole horizon into one block system ([`lifting`]),
//! checks that the pair of patterns is mutually quadratically invariant
//! ([`structure`]), solves the structured Nash stationarity system in
//! disturbance-feedforward coordinates ([`static_game`]), and converts the
//! result to state-feedback gains through the feedforward/feedback bijection
//! ([`strategy_maps`]). [`equilibrium`] orchestrates the full solve, computes
//! structured best responses, and verifies Nash optimality in either strategy
//! space; [`simulate`] validates everything against seeded Monte Carlo rollouts
//! and an independent covariance recursion.
//!
//! All numeric code is generic over the scalar type (any
//! [`nalgebra::RealField`] + [`num_traits::FromPrimitive`] type works, in
//! practice `f64` or `f32`); the aliases at the crate root fix `f64`.

pub mod equilibrium;
pub mod error;
pub mod lifting;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod static_game;
pub mod strategy_maps;
pub mod structure;

pub use equilibrium::{
    best_response_fb, check_lemma1, solve_game, verify_nash, EquilibriumResult,
    FeedbackResponse, Lemma1Report, NashVerification, StrategySpace,
};
pub use error::{Error, Result};
pub use lifting::{assumption1_static, assumption1_zerosum, hessians, lift, LiftedGame};
pub use model::{
    parse_instance, serialize_instance, validate, ProblemInstance, StageCosts, StructureSpec, Team,
};
pub use scalar::Real;
pub use simulate::{covariance_propagate, rollout_cost, CostBreakdown, SimulationReport};
pub use static_game::{
    best_response_ff, cost_ff, solve_nash_ff, stationarity_residual, NashSolution,
};
pub use strategy_maps::{cost_fb, to_feedback, to_feedback_structured, to_feedforward};
pub use structure::{structural_plant, MqiReport, Pattern};

/// Problem data with `f64` scalars, the default precision.
pub type Instance = model::ProblemInstance<f64>;
/// Lifted block-matrix form of an [`Instance`].
pub type Lifted = lifting::LiftedGame<f64>;
/// Equilibrium output for an [`Instance`].
pub type Equilibrium = equilibrium::EquilibriumResult<f64>;

/// Problem data with `f32` scalars, for callers that trade precision for size.
pub type Instance32 = model::ProblemInstance<f32>;
/// Lifted block-matrix form of an [`Instance32`].
pub type Lifted32 = lifting::LiftedGame<f32>;

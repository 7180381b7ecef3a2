//! Behavior-guided risky lane-change scenario generation.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`traj`] — trajectory data model, CSV ingestion, filtering,
//!   normalization, quantization, and a synthetic emergency-lane-change
//!   corpus generator.
//! * [`nn`] — minimal differentiable building blocks (GRU, LSTM, additive
//!   attention, linear/embedding layers) with hand-written backpropagation,
//!   finite-difference verification, and Adam/SGD optimizers.
//! * [`gan`] — the behavior learning module: a sequence GAN with
//!   Monte-Carlo rollout rewards, configurable GRU/conv discriminator and
//!   attention, plus the frozen-oracle NLL evaluation protocol.
//! * [`env`] — deterministic fixed-step 2D highway simulator with kinematic
//!   bicycle vehicles, TTC computation, collision detection, and episode
//!   management.
//! * [`policy`] — the recurrent PPO attack policy with behavioral-guidance
//!   rewards and waypoint emission for the tracking controller.
//! * [`mpc`] — receding-horizon tracking controller: linearization, QP
//!   assembly, a dense constrained QP solver, and the apply-first-input loop.
//! * [`eval`] — metrics, baseline strategies, exact Shapley attribution,
//!   distribution comparison, and report/figure writers.

pub mod env;
pub mod error;
pub mod eval;
pub mod gan;
pub mod mpc;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod traj;

pub use error::{Error, Result};

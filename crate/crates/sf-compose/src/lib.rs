//! Multi-task reinforcement learning via successor-feature composition.
//!
//! A set of *primitives* (squashed-Gaussian policies paired with
//! successor-feature critics) is trained once on elementary sub-tasks and then
//! composed online — without any further training — to act on arbitrary tasks
//! whose reward is linear in a shared feature vector, `r_w = φᵀw`.
//!
//! Four composition rules are provided:
//!
//! - **SF-GPI**: sample one action per primitive, keep the one with the
//!   highest generalized-policy-evaluation score `ψᵀw`.
//! - **MSF**: multiplicative composition of the primitive Gaussians with one
//!   exponent per primitive, `g = w/‖w‖₁`.
//! - **DAC**: multiplicative composition with one exponent per primitive *per
//!   action dimension*, gated by the impact matrix (the absolute Jacobian of
//!   the SFs with respect to the action).
//! - **DAC-GPI**: per action dimension, copy the component from the primitive
//!   with the largest gate.
//!
//! The crate is organised as:
//!
//! - [`nnet`] — self-contained MLP function approximators with an explicit
//!   gradient contract (manual backprop, Adam, Polyak averaging, checkpoints).
//! - [`envs`] — batch-vectorized Pointmass and planar Pointer benchmarks with
//!   linear-in-feature rewards and the navigation/hover mixture task.
//! - [`sflearn`] — successor-feature critics and the soft-policy-iteration
//!   losses that train the primitives.
//! - [`compose`] — the MCP/MCA distribution algebra, impact matrix, κ gating
//!   and the four acting rules.
//! - [`agent`] — replay buffer, the interleaved acting/learning loop, the
//!   evaluation protocol and a single-task SAC baseline.
//! - [`oracle`] — an exact tabular MDP testbed that brute-forces soft policy
//!   iteration and verifies the value-composition ordering and the GPI
//!   guarantee.
//! - [`cli`] — the `sfc` executable: `train | eval | oracle | plot`.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod agent;
pub mod cli;
pub mod compose;
pub mod config;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod nnet;
pub mod oracle;
pub mod plot;
pub mod sflearn;

pub use error::{Error, Result};

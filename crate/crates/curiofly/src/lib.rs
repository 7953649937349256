//! Curiosity-driven reinforcement learning for low-level quadrotor flight
//! control, self-contained: a rigid-body simulator, a task environment with
//! obstacles and shaped rewards, a small neural-network core with analytic
//! gradients, PPO with dual value heads, and two curiosity modules (per-step
//! ICM and the segment-based HCM ensemble) feeding an intrinsic reward.

pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod harness;
pub mod hcm;
pub mod icm;
pub mod nn;
pub mod ppo;
pub mod selftest;

pub use error::{Error, Result};

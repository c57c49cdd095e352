//! Adaptive allocation of a human-labeling budget across survey questions.
//!
//! A fixed budget of human labels is split across questions so that the
//! rectified (LLM-assisted) mean estimates minimize total weighted MSE.
//! The crate provides the estimators, the optimistic allocation policies and
//! their baselines, synthetic and replay environments, and an experiment
//! harness with a command-line front end.

pub mod confidence;
pub mod env;
pub mod estimators;
pub mod harness;
pub mod mnl;
pub mod policies;
pub mod tracker;
pub mod rng;
pub mod stats;

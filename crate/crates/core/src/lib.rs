//! Rejection-sampling reinforce fine-tuning for app-control agents.
//!
//! The crate bundles a seeded phone simulator, a rollout broker with a
//! sequential policy server, a trainable tabular policy, the trajectory data
//! pipeline, the end-to-end training loop and its evaluation harness.

pub mod action;
pub mod broker;
pub mod datapipe;
pub mod env;
pub mod evalkit;
pub mod goal;
pub mod pipeline;
pub mod policy;
pub mod seed;
pub mod ui;

pub use action::{parse_action, serialize_action, Action, ActionError, GroundedAction, HistoryEntry};
pub use env::{EnvSpec, Session, StepRecord, TaskInstance, Trajectory};
pub use ui::{UiElement, UiScreen};

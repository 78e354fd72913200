//! The decision contract and its implementations.

mod abstraction;
mod oracle;
mod tabular;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::action::{Action, HistoryEntry, ScrollDirection};
use crate::seed;
use crate::ui::UiScreen;

pub use abstraction::{is_dynamic_kind, screen_class, AbstractAction, ContextKey, Descriptor, Direction, TextRef};
pub use oracle::OraclePolicy;
pub use tabular::{TabularModel, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("training weight must be positive, got {0}")]
    NonpositiveWeight(f64),
    #[error("epochs and batch size must be positive, got {0} and {1}")]
    BadTrainConfig(usize, usize),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// Maps an observation to the next action. Implementations are read-only
/// during `decide`; all randomness comes from `rng`.
pub trait Policy: Send + Sync {
    fn decide(
        &self,
        goal: &str,
        screen: &UiScreen,
        history: &[HistoryEntry],
        temperature: f64,
        rng: &mut ChaCha8Rng,
    ) -> Action;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(&self, goal: &str, screen: &UiScreen, history: &[HistoryEntry], t: f64, rng: &mut ChaCha8Rng) -> Action {
        (**self).decide(goal, screen, history, t, rng)
    }
}

impl<P: Policy + ?Sized> Policy for std::sync::Arc<P> {
    fn decide(&self, goal: &str, screen: &UiScreen, history: &[HistoryEntry], t: f64, rng: &mut ChaCha8Rng) -> Action {
        (**self).decide(goal, screen, history, t, rng)
    }
}

/// Random stream for the `index`-th decision of an episode. Keying by episode
/// rather than arrival order keeps parallel collection reproducible.
pub fn request_rng(policy_seed: u64, episode_id: &str, index: u64) -> ChaCha8Rng {
    seed::rng(policy_seed, episode_id, index)
}

/// One supervised datapoint: context, target action and its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub goal: String,
    pub screen: UiScreen,
    pub history: Vec<HistoryEntry>,
    pub action: Action,
    pub weight: f64,
}

/// The exploration set used when nothing better is known: a click on every
/// clickable element, scroll-down and navigate-back.
pub fn fallback_actions(screen: &UiScreen) -> Vec<Action> {
    let mut out: Vec<Action> = (0..screen.clickable_count()).map(|target| Action::Click { target }).collect();
    out.push(Action::Scroll(ScrollDirection::Down));
    out.push(Action::NavigateBack);
    out
}

pub fn fallback_action(screen: &UiScreen, rng: &mut ChaCha8Rng) -> Action {
    let mut options = fallback_actions(screen);
    let i = rng.gen_range(0..options.len());
    options.swap_remove(i)
}

/// Uniform over [`fallback_actions`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn decide(&self, _: &str, screen: &UiScreen, _: &[HistoryEntry], _: f64, rng: &mut ChaCha8Rng) -> Action {
        fallback_action(screen, rng)
    }
}

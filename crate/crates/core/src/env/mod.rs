//! Seeded simulator of parameterised app-control tasks.
//!
//! An [`EnvSpec`] holds the template registry. Instantiating a template with a
//! seed fixes its parameters; [`EnvSpec::reset`] builds the hidden device
//! state and opens a [`Session`], which is then driven one [`Action`] at a
//! time until the success predicate holds or the horizon runs out.

mod device;
mod templates;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ground_action, to_history_entry_lossy, Action, ActionError, HistoryEntry};
use crate::goal::goal_signature;
use crate::seed;
use crate::ui::{build_prompt, observation_fingerprint, recent_history, UiScreen};

pub use device::{
    Contact, Device, Expense, APPS, CONTACT_LABELS, EXPENSE_CATEGORIES, SCREEN_HEIGHT, SCREEN_WIDTH,
};
pub use templates::{
    standard_templates, Difficulty, GenKind, OfflineRole, ParamRange, ParamSpec, Params,
    TaskTemplate, FILE_COUNT, RECIPE_COUNT,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown task template `{0}`")]
    UnknownTemplate(String),
    #[error("session already finished")]
    SessionClosed,
    #[error(transparent)]
    Action(#[from] ActionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskInstance {
    #[serde(rename = "template-id")]
    pub template_id: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub goal: String,
    #[serde(rename = "max-steps")]
    pub max_steps: usize,
}

/// Discount and horizon of an episode. The discount is always 1: only the
/// terminal success counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    gamma: f64,
    pub horizon: usize,
}

impl EpisodeConfig {
    pub fn new(horizon: usize) -> Self {
        EpisodeConfig { gamma: 1.0, horizon }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(rename = "screen-before")]
    pub screen_before: UiScreen,
    /// Fingerprint of `screen_before`.
    pub fingerprint: u64,
    pub prompt: String,
    pub action: Action,
    pub reward: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instance: TaskInstance,
    pub steps: Vec<StepRecord>,
    #[serde(rename = "return")]
    pub ret: u8,
    #[serde(rename = "step-count")]
    pub step_count: usize,
}

impl Trajectory {
    pub fn succeeded(&self) -> bool {
        self.ret == 1
    }

    /// History entries preceding each step, rebuilt from the steps themselves.
    pub fn histories(&self) -> Vec<Vec<HistoryEntry>> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut history: Vec<HistoryEntry> = Vec::new();
        for step in &self.steps {
            out.push(recent_history(&history).to_vec());
            history.push(to_history_entry_lossy(&step.action, &step.screen_before));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub screen: UiScreen,
    pub reward: u8,
    pub done: bool,
    /// The action named a click target that did not exist.
    pub invalid_target: bool,
}

/// One live episode. Owns its device; never shared between workers.
#[derive(Debug, Clone)]
pub struct Session {
    template: TaskTemplate,
    instance: TaskInstance,
    device: Device,
    config: EpisodeConfig,
    steps: usize,
    done: bool,
    solved: bool,
}

impl Session {
    pub fn instance(&self) -> &TaskInstance {
        &self.instance
    }

    pub fn config(&self) -> EpisodeConfig {
        self.config
    }

    pub fn screen(&self) -> UiScreen {
        self.device.screen()
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn solved(&self) -> bool {
        self.solved
    }

    /// Applies `action`. A click on a missing element is an error and does not
    /// consume a step.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::SessionClosed);
        }
        let grounded = ground_action(action, &self.device.screen())?;
        self.device.apply(&grounded);
        Ok(self.advance(false))
    }

    /// Like [`Session::step`], but a click on a missing element is recorded as
    /// an ineffective step.
    pub fn step_or_noop(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::SessionClosed);
        }
        let invalid = match ground_action(action, &self.device.screen()) {
            Ok(grounded) => {
                self.device.apply(&grounded);
                false
            }
            Err(_) => true,
        };
        Ok(self.advance(invalid))
    }

    fn advance(&mut self, invalid_target: bool) -> StepOutcome {
        self.steps += 1;
        self.solved = self.template.is_solved(&self.device, &self.instance.params);
        self.done = self.solved || self.steps >= self.config.horizon;
        StepOutcome {
            screen: self.device.screen(),
            reward: u8::from(self.solved),
            done: self.done,
            invalid_target,
        }
    }
}

/// Runs one episode to completion. `decide` sees the goal, the current screen
/// and the capped history and returns the next action.
pub fn run_episode<E>(
    mut session: Session,
    mut decide: impl FnMut(&str, &UiScreen, &[HistoryEntry]) -> Result<Action, E>,
) -> Result<Trajectory, E> {
    let goal = session.instance.goal.clone();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut steps = Vec::new();
    let mut screen = session.screen();
    while !session.is_done() {
        let recent = recent_history(&history);
        let action = decide(&goal, &screen, recent)?;
        let prompt = build_prompt(&goal, recent, &screen);
        let outcome = session.step_or_noop(&action).expect("session is open");
        history.push(to_history_entry_lossy(&action, &screen));
        steps.push(StepRecord {
            fingerprint: observation_fingerprint(&screen),
            screen_before: std::mem::replace(&mut screen, outcome.screen),
            prompt,
            action,
            reward: outcome.reward,
        });
    }
    Ok(Trajectory {
        ret: u8::from(session.solved()),
        step_count: steps.len(),
        steps,
        instance: session.instance,
    })
}

/// The task registry.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    templates: Vec<TaskTemplate>,
}

impl EnvSpec {
    pub fn standard() -> Self {
        EnvSpec { templates: standard_templates() }
    }

    /// A registry restricted to (or consisting of) the given templates.
    pub fn with_templates(mut templates: Vec<TaskTemplate>) -> Self {
        templates.sort_by_key(|t| t.id);
        EnvSpec { templates }
    }

    pub fn templates(&self) -> &[TaskTemplate] {
        &self.templates
    }

    pub fn template(&self, id: &str) -> Result<&TaskTemplate, EnvError> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| EnvError::UnknownTemplate(id.to_string()))
    }

    pub fn instantiate(&self, template_id: &str, seed: u64) -> Result<TaskInstance, EnvError> {
        self.instantiate_in(template_id, seed, ParamRange::Full)
    }

    pub fn instantiate_in(
        &self,
        template_id: &str,
        seed: u64,
        range: ParamRange,
    ) -> Result<TaskInstance, EnvError> {
        let template = self.template(template_id)?;
        let mut rng = seed::rng(seed, &format!("params/{template_id}"), 0);
        let params = template.sample_params(&mut rng, range);
        Ok(TaskInstance {
            template_id: template_id.to_string(),
            goal: template.fill_goal(&params),
            params,
            seed,
            max_steps: template.default_max_steps(),
        })
    }

    /// Builds the hidden state for `instance` and opens a session on the home
    /// screen.
    pub fn reset(&self, instance: &TaskInstance) -> Result<Session, EnvError> {
        let template = self.template(&instance.template_id)?;
        let mut device = Device::default();
        let mut rng = seed::rng(instance.seed, &format!("setup/{}", instance.template_id), 0);
        template.setup(&mut device, &instance.params, &mut rng);
        Ok(Session {
            template: template.clone(),
            instance: instance.clone(),
            device,
            config: EpisodeConfig::new(instance.max_steps),
            steps: 0,
            done: false,
            solved: false,
        })
    }

    /// `(template-id, difficulty)` for every template, sorted by id.
    pub fn registry_manifest(&self) -> Vec<(String, Difficulty)> {
        let mut out: Vec<_> = self.templates.iter().map(|t| (t.id.to_string(), t.difficulty)).collect();
        out.sort();
        out
    }

    /// The template whose goal pattern produced `goal`, if any.
    pub fn match_goal(&self, goal: &str) -> Option<&TaskTemplate> {
        let signature = goal_signature(goal);
        self.templates.iter().find(|t| goal_signature(t.goal_pattern) == signature)
    }
}

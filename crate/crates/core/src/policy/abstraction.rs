//! Instance-independent views of contexts and actions.
//!
//! A concrete action such as `click(3)` only makes sense on one screen of one
//! task instance. The tabular policy stores actions by element descriptor and
//! goal-parameter slot instead, and screens by a class that abstracts away
//! parameter values and free-form content.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::{Action, HistoryEntry, ScrollDirection};
use crate::goal::{slot_of, split_goal};
use crate::ui::{UiElement, UiScreen};

/// Element kinds whose text is user or instance data rather than chrome.
pub fn is_dynamic_kind(kind: &str) -> bool {
    kind.ends_with("-field") || kind == "list-item" || kind == "content"
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextKey {
    pub goal: String,
    pub screen: String,
    pub previous: String,
}

impl ContextKey {
    pub fn new(goal: &str, screen: &UiScreen, history: &[HistoryEntry]) -> Self {
        let (signature, slots) = split_goal(goal);
        ContextKey {
            goal: signature,
            screen: screen_class(screen, &slots),
            previous: history.last().map_or_else(|| "none".to_string(), |h| h.action_type.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextRef {
    /// The text of goal parameter `k`.
    Param(usize),
    Literal(String),
    /// Any text (instance data that is not a goal parameter).
    Other,
}

impl TextRef {
    fn of(text: &str, kind: Option<&str>, slots: &[String]) -> TextRef {
        if let Some(k) = slot_of(slots, text) {
            TextRef::Param(k)
        } else if kind.is_some_and(is_dynamic_kind) {
            TextRef::Other
        } else {
            TextRef::Literal(text.to_string())
        }
    }

    fn matches(&self, text: &str, slots: &[String]) -> bool {
        match self {
            TextRef::Param(k) => slots.get(*k).is_some_and(|s| s == text),
            TextRef::Literal(s) => s == text,
            TextRef::Other => true,
        }
    }
}

impl fmt::Display for TextRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextRef::Param(k) => write!(f, "${k}"),
            TextRef::Literal(s) => write!(f, "'{s}'"),
            TextRef::Other => f.write_str("~"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: String,
    pub text: TextRef,
}

impl Descriptor {
    fn of(e: &UiElement, slots: &[String]) -> Self {
        Descriptor { kind: e.kind.clone(), text: TextRef::of(&e.text, Some(&e.kind), slots) }
    }

    fn matches(&self, e: &UiElement, slots: &[String]) -> bool {
        self.kind == e.kind && self.text.matches(&e.text, slots)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum AbstractAction {
    OpenApp { app: String },
    Click { target: Descriptor },
    LongPress { target: Descriptor },
    InputText { text: TextRef },
    Scroll { direction: Direction },
    NavigateHome,
    NavigateBack,
    Wait,
}

/// Serializable mirror of [`ScrollDirection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl From<ScrollDirection> for Direction {
    fn from(d: ScrollDirection) -> Self {
        match d {
            ScrollDirection::Up => Direction::Up,
            ScrollDirection::Down => Direction::Down,
            ScrollDirection::Left => Direction::Left,
            ScrollDirection::Right => Direction::Right,
        }
    }
}

impl From<Direction> for ScrollDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Up => ScrollDirection::Up,
            Direction::Down => ScrollDirection::Down,
            Direction::Left => ScrollDirection::Left,
            Direction::Right => ScrollDirection::Right,
        }
    }
}

impl AbstractAction {
    /// Abstracts `action` as taken on `screen` under `goal`. `None` when the
    /// action names a click target that does not exist.
    pub fn abstract_of(action: &Action, goal: &str, screen: &UiScreen) -> Option<Self> {
        let (_, slots) = split_goal(goal);
        Some(match action {
            Action::OpenApp { app_name } => AbstractAction::OpenApp { app: app_name.clone() },
            Action::Click { target } => {
                AbstractAction::Click { target: Descriptor::of(screen.clickable(*target)?, &slots) }
            }
            Action::LongPress { target } => {
                AbstractAction::LongPress { target: Descriptor::of(screen.clickable(*target)?, &slots) }
            }
            Action::InputText { text } => AbstractAction::InputText { text: TextRef::of(text, None, &slots) },
            Action::Scroll(d) => AbstractAction::Scroll { direction: (*d).into() },
            Action::NavigateHome => AbstractAction::NavigateHome,
            Action::NavigateBack => AbstractAction::NavigateBack,
            Action::Wait => AbstractAction::Wait,
        })
    }

    /// The concrete action on `screen`, if the descriptor or slot resolves.
    /// Descriptors resolve to the first matching clickable element.
    pub fn resolve(&self, goal: &str, screen: &UiScreen) -> Option<Action> {
        let (_, slots) = split_goal(goal);
        let find = |d: &Descriptor| screen.clickables().position(|e| d.matches(e, &slots));
        Some(match self {
            AbstractAction::OpenApp { app } => Action::OpenApp { app_name: app.clone() },
            AbstractAction::Click { target } => Action::Click { target: find(target)? },
            AbstractAction::LongPress { target } => Action::LongPress { target: find(target)? },
            AbstractAction::InputText { text } => Action::InputText {
                text: match text {
                    TextRef::Param(k) => slots.get(*k)?.clone(),
                    TextRef::Literal(s) => s.clone(),
                    TextRef::Other => return None,
                },
            },
            AbstractAction::Scroll { direction } => Action::Scroll((*direction).into()),
            AbstractAction::NavigateHome => Action::NavigateHome,
            AbstractAction::NavigateBack => Action::NavigateBack,
            AbstractAction::Wait => Action::Wait,
        })
    }
}

fn element_token(e: &UiElement, slots: &[String]) -> String {
    let text = match slot_of(slots, &e.text) {
        Some(k) => format!("${k}"),
        None if is_dynamic_kind(&e.kind) => if e.text.is_empty() { "" } else { "~" }.to_string(),
        None => e.text.clone(),
    };
    let mut token = format!("{}:{}", e.kind, text);
    if e.clickable {
        token.push('*');
    }
    if e.focused {
        token.push('!');
    }
    token
}

/// `screen-id#hash` where the hash covers the sorted multiset of abstracted
/// element tokens.
pub fn screen_class(screen: &UiScreen, slots: &[String]) -> String {
    let mut tokens: Vec<String> = screen.elements.iter().map(|e| element_token(e, slots)).collect();
    tokens.sort();
    let mut h = Sha256::new();
    for t in &tokens {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("{}#{hex}", screen.screen_id)
}

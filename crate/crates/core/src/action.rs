//! The fixed app-control action vocabulary.
//!
//! Actions travel as single-line JSON objects whose field order is fixed:
//! `action-type` first, then the payload field (`app-name`,
//! `target-element` or `text`). [`serialize_action`] always emits this
//! canonical form, so byte equality is a valid comparison between actions.

use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::ui::{BBox, UiScreen};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("malformed action: {0}")]
    Malformed(String),
    #[error("unknown action type `{0}`")]
    UnknownActionType(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("target element {index} out of range ({len} clickable elements)")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScrollDirection {
    pub const ALL: [ScrollDirection; 4] = [
        ScrollDirection::Up,
        ScrollDirection::Down,
        ScrollDirection::Left,
        ScrollDirection::Right,
    ];

    pub fn action_type(self) -> &'static str {
        match self {
            ScrollDirection::Up => "scroll-up",
            ScrollDirection::Down => "scroll-down",
            ScrollDirection::Left => "scroll-left",
            ScrollDirection::Right => "scroll-right",
        }
    }
}

/// One agent action. Click targets are indices into the current screen's
/// clickable-element list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    OpenApp { app_name: String },
    Click { target: usize },
    LongPress { target: usize },
    InputText { text: String },
    Scroll(ScrollDirection),
    NavigateHome,
    NavigateBack,
    Wait,
}

impl Action {
    pub fn action_type(&self) -> &'static str {
        match self {
            Action::OpenApp { .. } => "open-app",
            Action::Click { .. } => "click",
            Action::LongPress { .. } => "long-press",
            Action::InputText { .. } => "input-text",
            Action::Scroll(dir) => dir.action_type(),
            Action::NavigateHome => "navigate-home",
            Action::NavigateBack => "navigate-back",
            Action::Wait => "wait",
        }
    }

    pub fn target(&self) -> Option<usize> {
        match self {
            Action::Click { target } | Action::LongPress { target } => Some(*target),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_action(self))
    }
}

impl std::str::FromStr for Action {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl serde::Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&serialize_action(self))
    }
}

impl<'de> serde::Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_action(&text).map_err(serde::de::Error::custom)
    }
}

fn json_str(s: &str) -> String {
    // serde_json string encoding never fails for &str
    serde_json::to_string(s).expect("string encoding")
}

/// Canonical single-line text for `a`.
pub fn serialize_action(a: &Action) -> String {
    let head = format!("{{\"action-type\":\"{}\"", a.action_type());
    match a {
        Action::OpenApp { app_name } => format!("{head},\"app-name\":{}}}", json_str(app_name)),
        Action::Click { target } | Action::LongPress { target } => {
            format!("{head},\"target-element\":{target}}}")
        }
        Action::InputText { text } => format!("{head},\"text\":{}}}", json_str(text)),
        _ => format!("{head}}}"),
    }
}

pub fn parse_action(s: &str) -> Result<Action, ActionError> {
    if s.contains('\n') {
        return Err(ActionError::Malformed("action text spans several lines".into()));
    }
    let value: Value =
        serde_json::from_str(s).map_err(|e| ActionError::Malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(ActionError::Malformed("expected a JSON object".into()));
    };
    action_from_object(&obj)
}

fn action_from_object(obj: &Map<String, Value>) -> Result<Action, ActionError> {
    let kind = match obj.get("action-type") {
        Some(Value::String(k)) => k.as_str(),
        Some(_) => return Err(ActionError::Malformed("`action-type` must be a string".into())),
        None => return Err(ActionError::Malformed("no `action-type` field".into())),
    };
    let (action, payload_field) = match kind {
        "open-app" => (
            Action::OpenApp { app_name: string_field(obj, "app-name")? },
            Some("app-name"),
        ),
        "click" => (Action::Click { target: index_field(obj)? }, Some("target-element")),
        "long-press" => (
            Action::LongPress { target: index_field(obj)? },
            Some("target-element"),
        ),
        "input-text" => (Action::InputText { text: string_field(obj, "text")? }, Some("text")),
        "scroll-up" => (Action::Scroll(ScrollDirection::Up), None),
        "scroll-down" => (Action::Scroll(ScrollDirection::Down), None),
        "scroll-left" => (Action::Scroll(ScrollDirection::Left), None),
        "scroll-right" => (Action::Scroll(ScrollDirection::Right), None),
        "navigate-home" => (Action::NavigateHome, None),
        "navigate-back" => (Action::NavigateBack, None),
        "wait" => (Action::Wait, None),
        other => return Err(ActionError::UnknownActionType(other.to_string())),
    };
    if let Some(extra) = obj
        .keys()
        .find(|k| k.as_str() != "action-type" && Some(k.as_str()) != payload_field)
    {
        return Err(ActionError::Malformed(format!("unexpected field `{extra}` for {kind}")));
    }
    Ok(action)
}

fn string_field(obj: &Map<String, Value>, name: &'static str) -> Result<String, ActionError> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(ActionError::Malformed(format!("`{name}` must be a string"))),
        None => Err(ActionError::MissingField(name)),
    }
}

fn index_field(obj: &Map<String, Value>) -> Result<usize, ActionError> {
    match obj.get("target-element") {
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| {
                ActionError::Malformed("`target-element` must be a non-negative integer".into())
            }),
        Some(_) => Err(ActionError::Malformed("`target-element` must be an integer".into())),
        None => Err(ActionError::MissingField("target-element")),
    }
}

/// An executable action: element indices replaced by pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundedAction {
    OpenApp { app_name: String },
    Click { x: u32, y: u32 },
    LongPress { x: u32, y: u32 },
    InputText { text: String },
    Scroll(ScrollDirection),
    NavigateHome,
    NavigateBack,
    Wait,
}

fn target_bbox(screen: &UiScreen, index: usize) -> Result<BBox, ActionError> {
    screen
        .clickable(index)
        .map(|e| e.bbox)
        .ok_or(ActionError::IndexOutOfRange { index, len: screen.clickable_count() })
}

/// Translates a click target into the centre of its bounding box.
pub fn ground_action(a: &Action, screen: &UiScreen) -> Result<GroundedAction, ActionError> {
    Ok(match a {
        Action::Click { target } => {
            let (x, y) = target_bbox(screen, *target)?.center();
            GroundedAction::Click { x, y }
        }
        Action::LongPress { target } => {
            let (x, y) = target_bbox(screen, *target)?.center();
            GroundedAction::LongPress { x, y }
        }
        Action::OpenApp { app_name } => GroundedAction::OpenApp { app_name: app_name.clone() },
        Action::InputText { text } => GroundedAction::InputText { text: text.clone() },
        Action::Scroll(dir) => GroundedAction::Scroll(*dir),
        Action::NavigateHome => GroundedAction::NavigateHome,
        Action::NavigateBack => GroundedAction::NavigateBack,
        Action::Wait => GroundedAction::Wait,
    })
}

/// Condensed history record. Element indices are dropped: they mean nothing
/// once the screen they referred to is gone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct HistoryEntry {
    #[serde(rename = "action-type")]
    pub action_type: String,
    #[serde(rename = "target", default, skip_serializing_if = "Option::is_none")]
    pub target_descriptor: Option<String>,
    #[serde(rename = "text", default, skip_serializing_if = "Option::is_none")]
    pub text_payload: Option<String>,
}

impl fmt::Display for HistoryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.action_type)?;
        if let Some(t) = &self.target_descriptor {
            write!(f, " {t}")?;
        }
        if let Some(t) = &self.text_payload {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

pub fn to_history_entry(a: &Action, screen: &UiScreen) -> Result<HistoryEntry, ActionError> {
    let target_descriptor = match a.target() {
        Some(index) => {
            let element = screen
                .clickable(index)
                .ok_or(ActionError::IndexOutOfRange { index, len: screen.clickable_count() })?;
            Some(element.descriptor())
        }
        None => None,
    };
    let text_payload = match a {
        Action::InputText { text } => Some(text.clone()),
        Action::OpenApp { app_name } => Some(app_name.clone()),
        _ => None,
    };
    Ok(HistoryEntry { action_type: a.action_type().to_string(), target_descriptor, text_payload })
}

/// Descriptor recorded for click targets that did not exist on the screen.
pub const INVALID_TARGET: &str = "invalid-target ''";

/// Like [`to_history_entry`], but records an out-of-range target as
/// [`INVALID_TARGET`] instead of failing. Used when replaying ineffective steps.
pub fn to_history_entry_lossy(a: &Action, screen: &UiScreen) -> HistoryEntry {
    to_history_entry(a, screen).unwrap_or_else(|_| HistoryEntry {
        action_type: a.action_type().to_string(),
        target_descriptor: Some(INVALID_TARGET.to_string()),
        text_payload: None,
    })
}

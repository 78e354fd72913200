//! Scripted expert for every shipped template.
//!
//! The oracle identifies the template from the goal signature, reads the
//! parameters back out of the quoted spans and reacts to the current screen.
//! From the home screen it solves every instance in the template's optimal
//! number of steps.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::Policy;
use crate::action::{Action, HistoryEntry, ScrollDirection};
use crate::env::EnvSpec;
use crate::goal::{goal_signature, split_goal};
use crate::ui::UiScreen;

#[derive(Debug, Clone)]
struct Script {
    id: &'static str,
    app: &'static str,
    names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OraclePolicy {
    scripts: BTreeMap<String, Script>,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        Self::new(&EnvSpec::standard())
    }
}

fn slot_names(pattern: &str) -> Vec<String> {
    split_goal(pattern)
        .1
        .into_iter()
        .map(|s| s.trim_start_matches('{').trim_end_matches('}').to_string())
        .collect()
}

struct View<'a> {
    screen: &'a UiScreen,
}

impl View<'_> {
    fn find(&self, kind: &str, text: &str) -> Option<usize> {
        self.screen.clickables().position(|e| e.kind == kind && e.text == text)
    }

    fn click(&self, kind: &str, text: &str) -> Option<Action> {
        self.find(kind, text).map(|target| Action::Click { target })
    }

    fn field(&self, kind: &str) -> Option<(usize, &str, bool)> {
        self.screen
            .clickables()
            .enumerate()
            .find(|(_, e)| e.kind == kind)
            .map(|(i, e)| (i, e.text.as_str(), e.focused))
    }

    /// Fills `kind` with `value`: focus it, then type.
    fn fill(&self, kind: &str, value: &str) -> Option<Action> {
        let (i, text, focused) = self.field(kind)?;
        if text == value {
            None
        } else if !focused {
            Some(Action::Click { target: i })
        } else {
            Some(Action::InputText { text: value.to_string() })
        }
    }

    fn content(&self) -> Option<&str> {
        self.screen.elements.iter().find(|e| e.kind == "content").map(|e| e.text.as_str())
    }

    fn dropdown(&self) -> Option<&str> {
        self.field("dropdown").map(|(_, t, _)| t)
    }
}

impl OraclePolicy {
    pub fn new(env: &EnvSpec) -> Self {
        let scripts = env
            .templates()
            .iter()
            .map(|t| {
                (goal_signature(t.goal_pattern), Script { id: t.id, app: t.app, names: slot_names(t.goal_pattern) })
            })
            .collect();
        OraclePolicy { scripts }
    }

    /// The scripted next action, or `None` for goals outside the registry.
    pub fn expert_action(&self, goal: &str, screen: &UiScreen) -> Option<Action> {
        let (signature, slots) = split_goal(goal);
        let script = self.scripts.get(&signature)?;
        let params: BTreeMap<&str, &str> =
            script.names.iter().map(String::as_str).zip(slots.iter().map(String::as_str)).collect();
        let p = |name: &str| params.get(name).copied().unwrap_or("");
        let v = View { screen };
        let open = Action::OpenApp { app_name: script.app.to_string() };
        let id = screen.screen_id.as_str();

        let scripted = match (script.id, id) {
            ("settings-wifi", "settings") => v.click("menu-item", "Network & internet"),
            ("settings-wifi", "settings-network") => v.click("switch", "Wi-Fi"),
            ("settings-bluetooth", "settings") => v.click("menu-item", "Connected devices"),
            ("settings-bluetooth", "settings-connected") => v.click("switch", "Bluetooth"),

            ("clock-timer-set", "clock-timer") => {
                v.fill("minutes-field", p("minutes")).or_else(|| v.click("button", "Start"))
            }
            ("clock-timer-set", s) if s.starts_with("clock-") => v.click("tab", "Timer"),
            ("clock-alarm-add", "clock-alarm") => v.click("button", "Add alarm"),
            ("clock-alarm-add", "clock-alarm-new") => {
                v.fill("time-field", p("time")).or_else(|| v.click("button", "OK"))
            }
            ("clock-alarm-add", s) if s.starts_with("clock-") => v.click("tab", "Alarm"),

            ("files-delete", "files") => v.click("list-item", p("file")),
            ("files-delete", "files-detail") if v.content() == Some(p("file")) => v.click("button", "Delete"),
            ("files-delete", "files-delete") if v.content() == Some(p("file")) => v.click("button", "OK"),
            ("files-delete", "files-detail" | "files-delete" | "files-selected") => Some(Action::NavigateBack),

            ("files-rename", "files") => v.find("list-item", p("file")).map(|target| Action::LongPress { target }),
            ("files-rename", "files-selected") => v.click("button", "Rename"),
            ("files-rename", "files-rename") => {
                v.fill("filename-field", p("new_name")).or_else(|| v.click("button", "OK"))
            }
            ("files-rename", "files-detail" | "files-delete") => Some(Action::NavigateBack),

            ("recorder-record" | "recorder-save-named", "recorder") => v.click("button", "Record"),
            ("recorder-record" | "recorder-save-named", "recorder-recording") => v.click("button", "Stop"),
            ("recorder-record", "recorder-save") => v.click("button", "Save"),
            ("recorder-save-named", "recorder-save") => {
                let name = p("name");
                let (i, text, _) = v.field("filename-field")?;
                if text == name {
                    v.click("button", "Save")
                } else if let Some(a) = v.click("menu-item", "Delete") {
                    Some(a)
                } else if let Some(a) = v.click("menu-item", "Select all") {
                    Some(a)
                } else if text.is_empty() {
                    Some(Action::InputText { text: name.to_string() })
                } else {
                    Some(Action::LongPress { target: i })
                }
            }

            ("contacts-add", "contacts") => v.click("button", "Create contact"),
            ("contacts-add", "contacts-new") => v
                .fill("name-field", p("name"))
                .or_else(|| v.fill("phone-field", p("phone")))
                .or_else(|| {
                    if v.dropdown() == Some(p("label")) {
                        v.click("button", "Save")
                    } else {
                        v.click("dropdown", v.dropdown()?)
                    }
                }),
            ("contacts-add", "contacts-label") => v.click("menu-item", p("label")),

            ("sms-send", "messages") => v.click("button", "Start chat"),
            ("sms-send", "messages-new") => v
                .fill("to-field", p("phone"))
                .or_else(|| v.fill("message-field", p("message")))
                .or_else(|| v.click("button", "Send")),

            ("expense-add", "expenses") => v.click("button", "Add expense"),
            ("expense-add", "expenses-new") => v
                .fill("name-field", p("name"))
                .or_else(|| v.fill("amount-field", p("amount")))
                .or_else(|| {
                    if v.dropdown() == Some(p("category")) {
                        v.click("button", "Save")
                    } else {
                        v.click("dropdown", v.dropdown()?)
                    }
                }),
            ("expense-add", "expenses-category") => v.click("menu-item", p("category")),

            ("recipe-delete", "recipes") => v
                .click("list-item", p("first"))
                .or_else(|| v.click("list-item", p("second")))
                .or(Some(Action::Scroll(ScrollDirection::Down))),
            ("recipe-delete", "recipes-detail") => match v.content() {
                Some(c) if c == p("first") || c == p("second") => v.click("button", "Delete"),
                _ => Some(Action::NavigateBack),
            },
            ("recipe-delete", "recipes-delete") => match v.content() {
                Some(c) if c == p("first") || c == p("second") => v.click("button", "OK"),
                _ => v.click("button", "Cancel"),
            },
            _ => None,
        };
        Some(scripted.unwrap_or(open))
    }
}

impl Policy for OraclePolicy {
    fn decide(&self, goal: &str, screen: &UiScreen, _: &[HistoryEntry], _: f64, _: &mut ChaCha8Rng) -> Action {
        self.expert_action(goal, screen).unwrap_or(Action::Wait)
    }
}

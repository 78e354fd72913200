//! Structured screens: UI elements, clickable-element labels, the textual
//! model input and the observation fingerprint.

mod render;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::HistoryEntry;

pub use render::{render_ppm, MAX_RENDER_DIM};

/// Number of past actions kept in the model input.
pub const HISTORY_CAP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UiError {
    #[error("screen {width}x{height} exceeds the {max}px render limit")]
    ScreenTooLarge { width: u32, height: u32, max: u32 },
    #[error("element {index} has a degenerate or out-of-screen bounding box")]
    BadBounds { index: usize },
    #[error("{count} elements are focused; at most one allowed")]
    MultipleFocus { count: usize },
}

/// Pixel rectangle, half-open: `left <= x < right`, `top <= y < bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl From<[u32; 4]> for BBox {
    fn from([left, top, right, bottom]: [u32; 4]) -> Self {
        BBox { left, top, right, bottom }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

impl BBox {
    pub const fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        BBox { left, top, right, bottom }
    }

    pub fn is_valid(&self) -> bool {
        self.left < self.right && self.top < self.bottom
    }

    /// Integer centre, flooring odd extents.
    pub fn center(&self) -> (u32, u32) {
        (
            self.left + (self.right - self.left) / 2,
            self.top + (self.bottom - self.top) / 2,
        )
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.left <= x && x < self.right && self.top <= y && y < self.bottom
    }

    pub fn width(&self) -> u32 {
        self.right - self.left
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UiElement {
    #[serde(rename = "element-type")]
    pub kind: String,
    pub text: String,
    pub bbox: BBox,
    pub clickable: bool,
    #[serde(default)]
    pub focused: bool,
}

impl UiElement {
    pub fn new(kind: impl Into<String>, text: impl Into<String>, bbox: BBox, clickable: bool) -> Self {
        UiElement { kind: kind.into(), text: text.into(), bbox, clickable, focused: false }
    }

    pub fn with_focus(mut self, focused: bool) -> Self {
        self.focused = focused;
        self
    }

    /// Condensed `element-type 'text'` form used in history and prompts.
    pub fn descriptor(&self) -> String {
        format!("{} '{}'", self.kind, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UiScreen {
    #[serde(rename = "screen-id")]
    pub screen_id: String,
    pub width: u32,
    pub height: u32,
    pub elements: Vec<UiElement>,
}

impl UiScreen {
    pub fn new(screen_id: impl Into<String>, width: u32, height: u32, elements: Vec<UiElement>) -> Self {
        UiScreen { screen_id: screen_id.into(), width, height, elements }
    }

    pub fn clickables(&self) -> impl Iterator<Item = &UiElement> + '_ {
        self.elements.iter().filter(|e| e.clickable)
    }

    pub fn clickable(&self, index: usize) -> Option<&UiElement> {
        self.clickables().nth(index)
    }

    pub fn clickable_count(&self) -> usize {
        self.clickables().count()
    }

    pub fn focused(&self) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.focused)
    }

    pub fn validate(&self) -> Result<(), UiError> {
        for (index, e) in self.elements.iter().enumerate() {
            if !e.bbox.is_valid() || e.bbox.right > self.width || e.bbox.bottom > self.height {
                return Err(UiError::BadBounds { index });
            }
        }
        let count = self.elements.iter().filter(|e| e.focused).count();
        if count > 1 {
            return Err(UiError::MultipleFocus { count });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub index: usize,
    pub bbox: BBox,
}

/// Numbered overlay labels, one per clickable element, in element order.
pub fn annotate(screen: &UiScreen) -> Vec<Label> {
    screen
        .clickables()
        .enumerate()
        .map(|(index, e)| Label { index, bbox: e.bbox })
        .collect()
}

/// Full model input: the screen, its labels, the goal and the capped history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedObservation {
    pub screen: UiScreen,
    pub labels: Vec<Label>,
    pub goal: String,
    pub history: Vec<HistoryEntry>,
}

impl AnnotatedObservation {
    pub fn new(goal: &str, history: &[HistoryEntry], screen: UiScreen) -> Self {
        AnnotatedObservation {
            labels: annotate(&screen),
            screen,
            goal: goal.to_string(),
            history: recent_history(history).to_vec(),
        }
    }

    pub fn prompt(&self) -> String {
        build_prompt(&self.goal, &self.history, &self.screen)
    }
}

/// The last [`HISTORY_CAP`] entries, oldest first.
pub fn recent_history(history: &[HistoryEntry]) -> &[HistoryEntry] {
    &history[history.len().saturating_sub(HISTORY_CAP)..]
}

/// Goal, previous actions and the clickable-element list, in that order.
/// Histories longer than [`HISTORY_CAP`] lose their oldest entries.
pub fn build_prompt(goal: &str, history: &[HistoryEntry], screen: &UiScreen) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Goal: {goal}");
    let history = recent_history(history);
    if history.is_empty() {
        out.push_str("Previous actions: none\n");
    } else {
        out.push_str("Previous actions:\n");
        for (i, entry) in history.iter().enumerate() {
            let _ = writeln!(out, "Step {}: {entry}", i + 1);
        }
    }
    if screen.clickable_count() == 0 {
        out.push_str("Screen: none\n");
    } else {
        out.push_str("Screen:\n");
        for (i, e) in screen.clickables().enumerate() {
            let _ = writeln!(out, "{i}. {}", e.descriptor());
        }
    }
    out
}

fn hash_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

/// Stable 64-bit identity of a screen's content. Labels are derived data and
/// do not participate.
pub fn observation_fingerprint(screen: &UiScreen) -> u64 {
    let mut h = Sha256::new();
    hash_str(&mut h, &screen.screen_id);
    h.update((screen.elements.len() as u64).to_le_bytes());
    for e in &screen.elements {
        hash_str(&mut h, &e.kind);
        hash_str(&mut h, &e.text);
        for v in <[u32; 4]>::from(e.bbox) {
            h.update(v.to_le_bytes());
        }
        h.update([e.clickable as u8, e.focused as u8]);
    }
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> UiScreen {
        UiScreen::new(
            "contacts-new",
            1080,
            2400,
            vec![
                UiElement::new("text", "Create contact", BBox::new(40, 80, 1040, 180), false),
                UiElement::new("name-field", "", BBox::new(40, 220, 1040, 360), true).with_focus(true),
                UiElement::new("text", "hint", BBox::new(40, 380, 1040, 400), false),
                UiElement::new("phone-field", "", BBox::new(40, 420, 1040, 560), true),
                UiElement::new("button", "Save", BBox::new(40, 2200, 1040, 2340), true),
            ],
        )
    }

    #[test]
    fn annotate_numbers_clickables_only() {
        let labels = annotate(&sample());
        assert_eq!(labels.len(), 3);
        assert_eq!(labels.iter().map(|l| l.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(labels[2].bbox, BBox::new(40, 2200, 1040, 2340));
        let empty = UiScreen::new("x", 10, 10, vec![]);
        assert!(annotate(&empty).is_empty());
    }

    #[test]
    fn prompt_layout() {
        let history = vec![HistoryEntry {
            action_type: "open-app".into(),
            target_descriptor: None,
            text_payload: Some("Contacts".into()),
        }];
        let p = build_prompt("Create a new contact for \"Sofija Alves\"", &history, &sample());
        assert_eq!(
            p,
            "Goal: Create a new contact for \"Sofija Alves\"\n\
             Previous actions:\n\
             Step 1: open-app Contacts\n\
             Screen:\n\
             0. name-field ''\n\
             1. phone-field ''\n\
             2. button 'Save'\n"
        );
        let p2 = build_prompt("Create a new contact for \"Sofija Alves\"", &history, &sample());
        assert_eq!(p, p2);
        let none = build_prompt("g", &[], &UiScreen::new("x", 10, 10, vec![]));
        assert_eq!(none, "Goal: g\nPrevious actions: none\nScreen: none\n");
    }

    #[test]
    fn prompt_truncates_history() {
        let history: Vec<_> = (0..8)
            .map(|i| HistoryEntry {
                action_type: "input-text".into(),
                target_descriptor: None,
                text_payload: Some(format!("t{i}")),
            })
            .collect();
        let p = build_prompt("g", &history, &sample());
        assert!(p.contains("Step 1: input-text t3\n"));
        assert!(p.contains("Step 5: input-text t7\n"));
        assert!(!p.contains("Step 6"));
        let obs = AnnotatedObservation::new("g", &history, sample());
        assert_eq!(obs.history.len(), HISTORY_CAP);
        assert_eq!(obs.prompt(), p);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = sample();
        assert_eq!(observation_fingerprint(&a), observation_fingerprint(&a.clone()));
        let mut b = a.clone();
        b.elements[1].text = "S".into();
        assert_ne!(observation_fingerprint(&a), observation_fingerprint(&b));
        let mut c = a.clone();
        c.elements[1].focused = false;
        assert_ne!(observation_fingerprint(&a), observation_fingerprint(&c));
        let mut d = a.clone();
        d.screen_id = "other".into();
        assert_ne!(observation_fingerprint(&a), observation_fingerprint(&d));
    }

    #[test]
    fn validation() {
        assert!(sample().validate().is_ok());
        let mut s = sample();
        s.elements[3].focused = true;
        assert_eq!(s.validate(), Err(UiError::MultipleFocus { count: 2 }));
        let mut s = sample();
        s.elements[0].bbox = BBox::new(10, 10, 10, 20);
        assert_eq!(s.validate(), Err(UiError::BadBounds { index: 0 }));
    }

    #[test]
    fn wire_field_names() {
        let json = serde_json::to_string(&sample().elements[1]).unwrap();
        assert_eq!(
            json,
            r#"{"element-type":"name-field","text":"","bbox":[40,220,1040,360],"clickable":true,"focused":true}"#
        );
    }
}
